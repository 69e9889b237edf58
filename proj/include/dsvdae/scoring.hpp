#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "dsvdae/hypersphere.hpp"
#include "dsvdae/tensor.hpp"

namespace dsvdae {

/// PaperLiteral puts beta on the attribute term of the score; LossConsistent
/// puts it on the structure term, mirroring the training loss.
enum class Weighting { PaperLiteral, LossConsistent };

inline std::string_view to_string(Weighting w) {
  return w == Weighting::PaperLiteral ? "paper-literal" : "loss-consistent";
}
inline Weighting parse_weighting(std::string_view s) {
  if (s == "paper-literal") return Weighting::PaperLiteral;
  if (s == "loss-consistent") return Weighting::LossConsistent;
  throw InvalidArgument("unknown weighting '" + std::string(s) + "' (expected paper-literal or loss-consistent)");
}

struct ScoringConfig {
  double beta = 0.2;
  double lambda = 0.0;
  Weighting weighting = Weighting::PaperLiteral;

  void validate() const {
    require(beta >= 0.0 && beta <= 1.0, "ScoringConfig: beta must lie in [0,1], got " + std::to_string(beta));
  }
};

struct EvalResult {
  double auc = 0.0;
  double ap = 0.0;
  std::vector<double> scores;
  std::vector<int> predicted;
};

/// Weights (attribute, structure) for a two-term score; a missing term drops
/// out and the remaining one gets weight 1.
inline std::pair<double, double> score_weights(const ScoringConfig& cfg, bool has_attribute, bool has_structure) {
  cfg.validate();
  require(has_attribute || has_structure, "anomaly_score: no embedding branch available");
  if (!has_structure) return {1.0, 0.0};
  if (!has_attribute) return {0.0, 1.0};
  const double attr = cfg.weighting == Weighting::PaperLiteral ? cfg.beta : 1.0 - cfg.beta;
  return {attr, 1.0 - attr};
}

/// s_i = w_a (|Z^a_i - c_a|^2 - r_a^2) + w_s (|Z^s_i - c_s|^2 - r_s^2).
/// Pass nullptr for the embedding of a branch the model does not have.
inline std::vector<double> anomaly_score(const Tensor2* zs, const Tensor2* za, const Hypersphere& structure,
                                         const Hypersphere& attribute, const ScoringConfig& cfg) {
  const auto [wa, ws] = score_weights(cfg, za != nullptr, zs != nullptr);
  const Eigen::Index n = zs != nullptr ? zs->rows() : za->rows();
  if (zs != nullptr && za != nullptr) require(zs->rows() == za->rows(), "anomaly_score: row count mismatch");
  std::vector<double> s(static_cast<std::size_t>(n), 0.0);
  if (za != nullptr) {
    const Vector d2 = squared_distances(*za, attribute.center);
    const double r2 = attribute.radius * attribute.radius;
    for (Eigen::Index i = 0; i < n; ++i) s[static_cast<std::size_t>(i)] += wa * (d2(i) - r2);
  }
  if (zs != nullptr) {
    const Vector d2 = squared_distances(*zs, structure.center);
    const double r2 = structure.radius * structure.radius;
    for (Eigen::Index i = 0; i < n; ++i) s[static_cast<std::size_t>(i)] += ws * (d2(i) - r2);
  }
  return s;
}

/// y_i = 1 iff s_i >= lambda.
inline std::vector<int> classify(const std::vector<double>& scores, double lambda) {
  std::vector<int> y(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) y[i] = scores[i] >= lambda ? 1 : 0;
  return y;
}

namespace detail {

inline void check_binary_truth(const std::vector<double>& scores, const std::vector<int>& truth, const char* what) {
  require(scores.size() == truth.size(), std::string(what) + ": score/label count mismatch");
  for (int t : truth) require(t == 0 || t == 1, std::string(what) + ": labels must be 0 or 1");
}

}  // namespace detail

/// Probability that a random positive outscores a random negative, ties
/// counted one half. The numerator is accumulated in half-units, so the value
/// equals exhaustive pair counting bit for bit.
inline double auc(const std::vector<double>& scores, const std::vector<int>& truth) {
  detail::check_binary_truth(scores, truth, "auc");
  std::size_t pos = 0;
  for (int t : truth) pos += static_cast<std::size_t>(t);
  const std::size_t neg = truth.size() - pos;
  require(pos > 0 && neg > 0, "auc: needs at least one positive and one negative label");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double twice_wins = 0.0;  // 2 * (wins + ties/2)
  std::size_t neg_below = 0;
  for (std::size_t start = 0; start < order.size();) {
    std::size_t end = start;
    std::size_t group_pos = 0;
    std::size_t group_neg = 0;
    while (end < order.size() && scores[order[end]] == scores[order[start]]) {
      if (truth[order[end]] == 1) {
        ++group_pos;
      } else {
        ++group_neg;
      }
      ++end;
    }
    twice_wins += 2.0 * static_cast<double>(group_pos) * static_cast<double>(neg_below) +
                  static_cast<double>(group_pos) * static_cast<double>(group_neg);
    neg_below += group_neg;
    start = end;
  }
  return (twice_wins / 2.0) / (static_cast<double>(pos) * static_cast<double>(neg));
}

/// Average precision over the ranking by descending score; equal scores keep
/// their input order. AP = (1/P) sum over positive ranks k of (hits up to k) / k.
inline double average_precision(const std::vector<double>& scores, const std::vector<int>& truth) {
  detail::check_binary_truth(scores, truth, "average_precision");
  std::size_t pos = 0;
  for (int t : truth) pos += static_cast<std::size_t>(t);
  require(pos > 0, "average_precision: needs at least one positive label");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (truth[order[k]] == 1) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(k + 1);
    }
  }
  return sum / static_cast<double>(pos);
}

inline EvalResult evaluate_scores(std::vector<double> scores, const std::vector<int>& truth, double lambda) {
  EvalResult r;
  r.auc = auc(scores, truth);
  r.ap = average_precision(scores, truth);
  r.predicted = classify(scores, lambda);
  r.scores = std::move(scores);
  return r;
}

}  // namespace dsvdae
