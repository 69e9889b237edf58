#pragma once

#include <cmath>
#include <string>
#include <string_view>

#include "dsvdae/tensor.hpp"

namespace dsvdae {

enum class Activation { ReLU, Tanh, Sigmoid, Identity };

inline std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::ReLU: return "relu";
    case Activation::Tanh: return "tanh";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Identity: return "identity";
  }
  return "?";
}

inline Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::ReLU;
  if (name == "tanh") return Activation::Tanh;
  if (name == "sigmoid") return Activation::Sigmoid;
  if (name == "identity") return Activation::Identity;
  throw InvalidArgument("unknown activation '" + std::string(name) + "'");
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double activate(Activation a, double x) {
  switch (a) {
    case Activation::ReLU: return x > 0.0 ? x : 0.0;
    case Activation::Tanh: return std::tanh(x);
    case Activation::Sigmoid: return sigmoid(x);
    case Activation::Identity: return x;
  }
  return x;
}

/// f'(x) expressed through the pre-activation x and output y = f(x).
/// ReLU uses 0 as its subgradient at 0.
inline double activation_derivative(Activation a, double x, double y) {
  switch (a) {
    case Activation::ReLU: return x > 0.0 ? 1.0 : 0.0;
    case Activation::Tanh: return 1.0 - y * y;
    case Activation::Sigmoid: return y * (1.0 - y);
    case Activation::Identity: return 1.0;
  }
  return 1.0;
}

inline Tensor2 activate(Activation a, const Tensor2& pre) {
  if (a == Activation::Identity) return pre;
  return pre.unaryExpr([a](double x) { return activate(a, x); });
}

/// Upstream gradient w.r.t. the output mapped to the gradient w.r.t. the pre-activation.
inline Tensor2 activation_backward(Activation a, const Tensor2& pre, const Tensor2& out, const Tensor2& grad_out) {
  if (a == Activation::Identity) return grad_out;
  Tensor2 g(grad_out.rows(), grad_out.cols());
  const Eigen::Index n = g.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    g.data()[i] = grad_out.data()[i] * activation_derivative(a, pre.data()[i], out.data()[i]);
  }
  return g;
}

/// act(x W + b); pass an empty `b` to skip the bias.
inline Tensor2 dense_affine(const Tensor2& x, const Tensor2& w, const RowVector& b, Activation act,
                            Tensor2* pre_out = nullptr) {
  require(x.cols() == w.rows(), "dense_affine: x is " + shape_string(x) + " but w is " + shape_string(w));
  require(b.size() == 0 || b.size() == w.cols(), "dense_affine: bias length " + std::to_string(b.size()) +
                                                     " != output width " + std::to_string(w.cols()));
  Tensor2 pre = x * w;
  if (b.size() > 0) pre.rowwise() += b;
  Tensor2 out = activate(act, pre);
  if (pre_out != nullptr) *pre_out = std::move(pre);
  return out;
}

}  // namespace dsvdae
