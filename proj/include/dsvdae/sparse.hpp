#pragma once

#include <cstddef>
#include <vector>

#include "dsvdae/tensor.hpp"

namespace dsvdae {

/// Compressed sparse row matrix. Column indices are strictly increasing per row.
struct SparseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::size_t> row_offsets{0};
  std::vector<std::size_t> col_indices;
  std::vector<double> values;

  std::size_t nnz() const { return values.size(); }

  /// Throws InvalidArgument if the CSR invariants do not hold.
  void validate() const {
    require(row_offsets.size() == rows + 1, "SparseMatrix: row_offsets must have rows+1 entries");
    require(row_offsets.front() == 0, "SparseMatrix: first offset must be 0");
    require(row_offsets.back() == values.size(), "SparseMatrix: last offset must equal value count");
    require(col_indices.size() == values.size(), "SparseMatrix: index/value count mismatch");
    for (std::size_t r = 0; r < rows; ++r) {
      require(row_offsets[r] <= row_offsets[r + 1], "SparseMatrix: offsets must be non-decreasing");
      for (std::size_t k = row_offsets[r]; k < row_offsets[r + 1]; ++k) {
        require(col_indices[k] < cols, "SparseMatrix: column index out of range");
        if (k > row_offsets[r]) {
          require(col_indices[k - 1] < col_indices[k], "SparseMatrix: column indices must be strictly increasing");
        }
      }
    }
  }

  double at(std::size_t r, std::size_t c) const {
    for (std::size_t k = row_offsets[r]; k < row_offsets[r + 1]; ++k) {
      if (col_indices[k] == c) return values[k];
      if (col_indices[k] > c) break;
    }
    return 0.0;
  }

  Tensor2 to_dense() const {
    Tensor2 out = Tensor2::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t k = row_offsets[r]; k < row_offsets[r + 1]; ++k) {
        out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(col_indices[k])) = values[k];
      }
    }
    return out;
  }

  static SparseMatrix from_dense(const Tensor2& d) {
    SparseMatrix s;
    s.rows = static_cast<std::size_t>(d.rows());
    s.cols = static_cast<std::size_t>(d.cols());
    s.row_offsets.assign(1, 0);
    for (Eigen::Index r = 0; r < d.rows(); ++r) {
      for (Eigen::Index c = 0; c < d.cols(); ++c) {
        if (d(r, c) != 0.0) {
          s.col_indices.push_back(static_cast<std::size_t>(c));
          s.values.push_back(d(r, c));
        }
      }
      s.row_offsets.push_back(s.values.size());
    }
    return s;
  }

  static SparseMatrix identity(std::size_t n) {
    SparseMatrix s;
    s.rows = s.cols = n;
    s.row_offsets.resize(n + 1);
    s.col_indices.resize(n);
    s.values.assign(n, 1.0);
    for (std::size_t i = 0; i <= n; ++i) s.row_offsets[i] = i;
    for (std::size_t i = 0; i < n; ++i) s.col_indices[i] = i;
    return s;
  }
};

/// Sparse-dense product s * d. Each output row accumulates in ascending column order.
inline Tensor2 spmm(const SparseMatrix& s, const Tensor2& d) {
  require(s.cols == static_cast<std::size_t>(d.rows()),
          "spmm: shape mismatch (" + std::to_string(s.rows) + "x" + std::to_string(s.cols) + " * " +
              shape_string(d) + ")");
  Tensor2 out = Tensor2::Zero(static_cast<Eigen::Index>(s.rows), d.cols());
  const Eigen::Index width = d.cols();
  for (std::size_t r = 0; r < s.rows; ++r) {
    double* dst = out.data() + static_cast<Eigen::Index>(r) * width;
    for (std::size_t k = s.row_offsets[r]; k < s.row_offsets[r + 1]; ++k) {
      const double v = s.values[k];
      const double* src = d.data() + static_cast<Eigen::Index>(s.col_indices[k]) * width;
      for (Eigen::Index c = 0; c < width; ++c) dst[c] += v * src[c];
    }
  }
  return out;
}

/// s^T * d without forming the transpose. Row r of s scatters into the output
/// rows named by its column indices, rows visited in ascending order.
inline Tensor2 spmm_transposed(const SparseMatrix& s, const Tensor2& d) {
  require(s.rows == static_cast<std::size_t>(d.rows()),
          "spmm_transposed: shape mismatch (" + std::to_string(s.rows) + "x" + std::to_string(s.cols) + ")^T * " +
              shape_string(d));
  Tensor2 out = Tensor2::Zero(static_cast<Eigen::Index>(s.cols), d.cols());
  const Eigen::Index width = d.cols();
  for (std::size_t r = 0; r < s.rows; ++r) {
    const double* src = d.data() + static_cast<Eigen::Index>(r) * width;
    for (std::size_t k = s.row_offsets[r]; k < s.row_offsets[r + 1]; ++k) {
      const double v = s.values[k];
      double* dst = out.data() + static_cast<Eigen::Index>(s.col_indices[k]) * width;
      for (Eigen::Index c = 0; c < width; ++c) dst[c] += v * src[c];
    }
  }
  return out;
}

/// Fraction of nonzero entries.
inline double density(const Tensor2& x) {
  if (x.size() == 0) return 0.0;
  return static_cast<double>((x.array() != 0.0).count()) / static_cast<double>(x.size());
}

}  // namespace dsvdae
