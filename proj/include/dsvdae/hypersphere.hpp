#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "dsvdae/tensor.hpp"

namespace dsvdae {

/// Decision boundary in one embedding space. The center is fixed after
/// initialization; the radius is reset from a distance quantile every epoch.
struct Hypersphere {
  RowVector center;
  double radius = 0.0;
  double mu = 0.1;  // fraction of training points allowed outside
};

/// How the per-epoch radius is read off the training distances.

inline constexpr double kCenterSnap = 0.01;

/// Column mean of the embeddings; components closer to zero than 0.01 are
/// pushed to +/-0.01 (zero goes to +0.01).
inline RowVector init_center(const Tensor2& embeddings) {
  require(embeddings.rows() > 0, "init_center: empty embedding set");
  RowVector c = embeddings.colwise().mean();
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    if (std::abs(c(i)) < kCenterSnap) c(i) = c(i) < 0.0 ? -kCenterSnap : kCenterSnap;
  }
  return c;
}

inline Vector squared_distances(const Tensor2& embeddings, const RowVector& center) {
  require(embeddings.cols() == center.size(), "distances: embedding width " + std::to_string(embeddings.cols()) +
                                                  " != center length " + std::to_string(center.size()));
  return (embeddings.rowwise() - center).rowwise().squaredNorm();
}

/// Euclidean (not squared) distance of each row to the center.
inline Vector distances(const Tensor2& embeddings, const RowVector& center) {
  return squared_distances(embeddings, center).cwiseSqrt();
}

inline void check_mu(double mu) {
  require(mu > 0.0 && mu <= 1.0, "hypersphere: mu must lie in (0, 1], got " + std::to_string(mu));
}

/// r^2 + 1/(mu N) * sum_i max(0, |z_i - c|^2 - r^2)
inline double sphere_loss(const Tensor2& embeddings, const Hypersphere& s) {
  check_mu(s.mu);
  require(embeddings.rows() > 0, "sphere_loss: empty embedding set");
  const Vector d2 = squared_distances(embeddings, s.center);
  const double r2 = s.radius * s.radius;
  double hinge = 0.0;
  for (Eigen::Index i = 0; i < d2.size(); ++i) hinge += std::max(0.0, d2(i) - r2);
  return r2 + hinge / (s.mu * static_cast<double>(embeddings.rows()));
}

/// d sphere_loss / d embeddings: 2 (z_i - c) / (mu N) for rows strictly outside, else 0.
inline Tensor2 sphere_loss_gradient(const Tensor2& embeddings, const Hypersphere& s) {
  check_mu(s.mu);
  const Vector d2 = squared_distances(embeddings, s.center);
  const double r2 = s.radius * s.radius;
  const double scale = 2.0 / (s.mu * static_cast<double>(embeddings.rows()));
  Tensor2 g = Tensor2::Zero(embeddings.rows(), embeddings.cols());
  for (Eigen::Index i = 0; i < d2.size(); ++i) {
    if (d2(i) > r2) g.row(i) = scale * (embeddings.row(i) - s.center);
  }
  return g;
}

/// Nearest-rank (1 - mu) quantile: sort ascending and take element
/// ceil((1 - mu) N) - 1, clamped to a valid index.
inline double update_radius(const Vector& dists, double mu) {
  require(dists.size() > 0, "update_radius: empty distance vector");
  check_mu(mu);
  std::vector<double> sorted(dists.data(), dists.data() + dists.size());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  // the small slack keeps (1 - mu) N from rounding above an exact integer
  const double rank = std::ceil((1.0 - mu) * n - 1e-9);
  const auto idx = static_cast<std::ptrdiff_t>(rank) - 1;
  const auto clamped = std::clamp<std::ptrdiff_t>(idx, 0, static_cast<std::ptrdiff_t>(sorted.size()) - 1);
  return sorted[static_cast<std::size_t>(clamped)];
}

/// Radius at the (1 - mu) quantile of the Euclidean distances to the center.
inline double quantile_radius(const Tensor2& embeddings, const Hypersphere& s) {
  return update_radius(distances(embeddings, s.center), s.mu);
}

}  // namespace dsvdae
