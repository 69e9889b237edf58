#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace dsvdae {

/// Row-major 64-bit dense matrix used for every activation, weight and gradient.
using Tensor2 = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::RowVectorXd;
using Vector = Eigen::VectorXd;

/// Raised when inputs violate an operation's shape or value preconditions.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a computation produces NaN/Inf or otherwise fails at run time.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string shape_string(const Tensor2& t) {
  return std::to_string(t.rows()) + "x" + std::to_string(t.cols());
}

inline void require(bool ok, const std::string& message) {
  if (!ok) throw InvalidArgument(message);
}

inline bool all_finite(const Tensor2& t) { return t.allFinite(); }

#ifndef NDEBUG
inline void debug_check_finite(const Tensor2& t, const char* what) {
  if (!t.allFinite()) throw NumericalError(std::string("non-finite values in ") + what);
}
#else
inline void debug_check_finite(const Tensor2&, const char*) {}
#endif

/// Copies the listed rows of `src` into a new matrix, preserving order.
inline Tensor2 gather_rows(const Tensor2& src, const std::vector<std::size_t>& rows) {
  Tensor2 out(static_cast<Eigen::Index>(rows.size()), src.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    require(rows[i] < static_cast<std::size_t>(src.rows()), "gather_rows: row index out of range");
    out.row(static_cast<Eigen::Index>(i)) = src.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

/// dst.row(rows[i]) += src.row(i)
inline void scatter_add_rows(Tensor2& dst, const Tensor2& src, const std::vector<std::size_t>& rows) {
  require(static_cast<std::size_t>(src.rows()) == rows.size() && src.cols() == dst.cols(),
          "scatter_add_rows: shape mismatch");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    dst.row(static_cast<Eigen::Index>(rows[i])) += src.row(static_cast<Eigen::Index>(i));
  }
}

}  // namespace dsvdae
