#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "dsvdae/tensor.hpp"

namespace dsvdae {

/// One trainable tensor with its gradient buffer and Adam moments.
struct Parameter {
  std::string name;
  Tensor2 value;
  Tensor2 grad;
  Tensor2 first_moment;
  Tensor2 second_moment;
  // Inactive parameters belong to a branch removed by an ablation variant:
  // their gradient stays zero and the optimizer never touches them.
  bool active = true;
};

/// Ordered collection of named parameters plus the optimizer step counter.
class ParameterStore {
 public:
  Parameter& add(std::string name, Tensor2 value, bool active = true) {
    for (const auto& p : params_) require(p.name != name, "ParameterStore: duplicate parameter '" + name + "'");
    Parameter p;
    p.name = std::move(name);
    p.grad = Tensor2::Zero(value.rows(), value.cols());
    p.first_moment = Tensor2::Zero(value.rows(), value.cols());
    p.second_moment = Tensor2::Zero(value.rows(), value.cols());
    p.value = std::move(value);
    p.active = active;
    params_.push_back(std::move(p));
    return params_.back();
  }

  const Parameter* find(const std::string& name) const {
    for (const auto& p : params_) {
      if (p.name == name) return &p;
    }
    return nullptr;
  }
  Parameter* find(const std::string& name) {
    for (auto& p : params_) {
      if (p.name == name) return &p;
    }
    return nullptr;
  }
  const Parameter& at(const std::string& name) const {
    const Parameter* p = find(name);
    if (p == nullptr) throw InvalidArgument("ParameterStore: no parameter '" + name + "'");
    return *p;
  }
  Parameter& at(const std::string& name) {
    Parameter* p = find(name);
    if (p == nullptr) throw InvalidArgument("ParameterStore: no parameter '" + name + "'");
    return *p;
  }

  std::size_t size() const { return params_.size(); }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void zero_grad() {
    for (auto& p : params_) p.grad.setZero();
  }

  std::uint64_t step() const { return step_; }
  void set_step(std::uint64_t s) { step_ = s; }

 private:
  std::vector<Parameter> params_;
  std::uint64_t step_ = 0;
};

struct AdamConfig {
  double learning_rate = 0.002;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// One Adam update with bias correction over every active parameter.
inline void adam_step(ParameterStore& params, const AdamConfig& cfg) {
  require(cfg.learning_rate > 0.0, "adam_step: learning rate must be positive");
  require(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0 && cfg.beta2 >= 0.0 && cfg.beta2 < 1.0,
          "adam_step: betas must lie in [0,1)");
  require(cfg.epsilon > 0.0, "adam_step: epsilon must be positive");
  params.set_step(params.step() + 1);
  const double t = static_cast<double>(params.step());
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (auto& p : params) {
    if (!p.active) continue;
    const Eigen::Index n = p.value.size();
    double* w = p.value.data();
    const double* g = p.grad.data();
    double* m = p.first_moment.data();
    double* v = p.second_moment.data();
    for (Eigen::Index i = 0; i < n; ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      w[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
  }
}

/// Uniform Glorot range sqrt(6 / (fan_in + fan_out)).
inline Tensor2 glorot_uniform(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Tensor2 w(static_cast<Eigen::Index>(fan_in), static_cast<Eigen::Index>(fan_out));
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
  return w;
}

}  // namespace dsvdae
