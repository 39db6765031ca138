#pragma once

// Sparse and dense kernels used by the Stokes multigrid: CSR storage,
// matrix-vector products, dense block extraction and a partially pivoted
// dense LU with forward and transposed solves.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "vanka/error.hpp"

namespace vanka {

using Index = std::int32_t;
using Vector = std::vector<double>;

/// Row-major dense matrix.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(Index rows, Index cols, double value = 0.0)
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, value) {}

  static DenseMatrix identity(Index n) {
    DenseMatrix m(n, n);
    for (Index i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }

  double& operator()(Index i, Index j) { return data_[static_cast<std::size_t>(i) * cols_ + j]; }
  double operator()(Index i, Index j) const {
    return data_[static_cast<std::size_t>(i) * cols_ + j];
  }

  std::span<double> row(Index i) { return {data_.data() + static_cast<std::size_t>(i) * cols_, static_cast<std::size_t>(cols_)}; }
  std::span<const double> row(Index i) const {
    return {data_.data() + static_cast<std::size_t>(i) * cols_, static_cast<std::size_t>(cols_)};
  }

  const std::vector<double>& data() const { return data_; }

  Vector multiply(std::span<const double> x) const {
    if (static_cast<Index>(x.size()) != cols_) throw DimensionError("dense multiply: size mismatch");
    Vector y(rows_, 0.0);
    for (Index i = 0; i < rows_; ++i) {
      double s = 0.0;
      for (Index j = 0; j < cols_; ++j) s += (*this)(i, j) * x[j];
      y[i] = s;
    }
    return y;
  }

  DenseMatrix multiply(const DenseMatrix& other) const {
    if (cols_ != other.rows_) throw DimensionError("dense product: size mismatch");
    DenseMatrix out(rows_, other.cols_);
    for (Index i = 0; i < rows_; ++i)
      for (Index k = 0; k < cols_; ++k) {
        const double a = (*this)(i, k);
        if (a == 0.0) continue;
        for (Index j = 0; j < other.cols_; ++j) out(i, j) += a * other(k, j);
      }
    return out;
  }

  DenseMatrix transposed() const {
    DenseMatrix t(cols_, rows_);
    for (Index i = 0; i < rows_; ++i)
      for (Index j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
  }

 private:
  Index rows_ = 0;
  Index cols_ = 0;
  std::vector<double> data_;
};

/// Compressed sparse row matrix. Column indices are sorted and unique per row;
/// stored entries may hold an explicit zero (structural nonzero).
class SparseMatrix {
 public:
  struct Triplet {
    Index row;
    Index col;
    double value;
  };

  SparseMatrix() : row_offsets_(1, 0) {}

  /// Builds from unordered triplets. Duplicates are summed in their input order
  /// (stable sort), so the result does not depend on anything but that order.
  static SparseMatrix from_triplets(Index rows, Index cols, std::vector<Triplet> triplets) {
    std::stable_sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
      return std::tie(a.row, a.col) < std::tie(b.row, b.col);
    });
    SparseMatrix m;
    m.rows_ = rows;
    m.cols_ = cols;
    m.row_offsets_.assign(static_cast<std::size_t>(rows) + 1, 0);
    for (std::size_t k = 0; k < triplets.size();) {
      const auto& t = triplets[k];
      if (t.row < 0 || t.row >= rows || t.col < 0 || t.col >= cols)
        throw DimensionError("triplet index out of range");
      double sum = 0.0;
      std::size_t e = k;
      while (e < triplets.size() && triplets[e].row == t.row && triplets[e].col == t.col) {
        sum += triplets[e].value;
        ++e;
      }
      m.cols_idx_.push_back(t.col);
      m.values_.push_back(sum);
      ++m.row_offsets_[t.row + 1];
      k = e;
    }
    for (Index i = 0; i < rows; ++i) m.row_offsets_[i + 1] += m.row_offsets_[i];
    return m;
  }

  static SparseMatrix identity(Index n) {
    std::vector<Triplet> t;
    for (Index i = 0; i < n; ++i) t.push_back({i, i, 1.0});
    return from_triplets(n, n, std::move(t));
  }

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  std::size_t nonzeros() const { return values_.size(); }

  std::span<const Index> row_cols(Index i) const {
    return {cols_idx_.data() + row_offsets_[i], static_cast<std::size_t>(row_offsets_[i + 1] - row_offsets_[i])};
  }
  std::span<const double> row_values(Index i) const {
    return {values_.data() + row_offsets_[i], static_cast<std::size_t>(row_offsets_[i + 1] - row_offsets_[i])};
  }

  const std::vector<Index>& row_offsets() const { return row_offsets_; }
  const std::vector<Index>& col_indices() const { return cols_idx_; }
  const std::vector<double>& values() const { return values_; }

  /// Stored value at (i, j), zero when the entry is not in the pattern.
  double coeff(Index i, Index j) const {
    const auto cols = row_cols(i);
    const auto it = std::lower_bound(cols.begin(), cols.end(), j);
    if (it == cols.end() || *it != j) return 0.0;
    return values_[row_offsets_[i] + (it - cols.begin())];
  }

  bool has_entry(Index i, Index j) const {
    const auto cols = row_cols(i);
    return std::binary_search(cols.begin(), cols.end(), j);
  }

  /// Row i of M times x.
  double row_dot(Index i, std::span<const double> x) const {
    double s = 0.0;
    for (Index k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k) s += values_[k] * x[cols_idx_[k]];
    return s;
  }

  SparseMatrix transposed() const {
    SparseMatrix t;
    t.rows_ = cols_;
    t.cols_ = rows_;
    t.row_offsets_.assign(static_cast<std::size_t>(cols_) + 1, 0);
    for (Index c : cols_idx_) ++t.row_offsets_[c + 1];
    for (Index i = 0; i < cols_; ++i) t.row_offsets_[i + 1] += t.row_offsets_[i];
    t.cols_idx_.resize(cols_idx_.size());
    t.values_.resize(values_.size());
    std::vector<Index> fill(t.row_offsets_.begin(), t.row_offsets_.end() - 1);
    for (Index i = 0; i < rows_; ++i)
      for (Index k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k) {
        const Index dst = fill[cols_idx_[k]]++;
        t.cols_idx_[dst] = i;
        t.values_[dst] = values_[k];
      }
    return t;
  }

  DenseMatrix to_dense() const {
    DenseMatrix d(rows_, cols_);
    for (Index i = 0; i < rows_; ++i)
      for (Index k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k) d(i, cols_idx_[k]) = values_[k];
    return d;
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
  }

 private:
  Index rows_ = 0;
  Index cols_ = 0;
  std::vector<Index> row_offsets_;
  std::vector<Index> cols_idx_;
  std::vector<double> values_;
};

/// y = M x
inline Vector spmv(const SparseMatrix& m, std::span<const double> x) {
  if (static_cast<Index>(x.size()) != m.cols()) throw DimensionError("spmv: size mismatch");
  Vector y(m.rows());
  for (Index i = 0; i < m.rows(); ++i) y[i] = m.row_dot(i, x);
  return y;
}

/// r = b - M x
inline Vector residual(const SparseMatrix& m, std::span<const double> x, std::span<const double> b) {
  if (static_cast<Index>(x.size()) != m.cols() || static_cast<Index>(b.size()) != m.rows())
    throw DimensionError("residual: size mismatch");
  Vector r(m.rows());
  for (Index i = 0; i < m.rows(); ++i) r[i] = b[i] - m.row_dot(i, x);
  return r;
}

inline double norm2(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

inline double norm_inf(std::span<const double> x) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  return m;
}

/// Dense block M(rows, cols) in the order of the given index sets.
inline DenseMatrix extract_submatrix(const SparseMatrix& m, std::span<const Index> rows,
                                     std::span<const Index> cols) {
  for (Index r : rows)
    if (r < 0 || r >= m.rows()) throw DimensionError("extract_submatrix: row index out of range");
  for (Index c : cols)
    if (c < 0 || c >= m.cols()) throw DimensionError("extract_submatrix: column index out of range");
  DenseMatrix out(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
  // Column lookup by merging against the sorted row pattern.
  std::vector<std::pair<Index, Index>> sorted_cols;
  sorted_cols.reserve(cols.size());
  for (std::size_t j = 0; j < cols.size(); ++j) sorted_cols.emplace_back(cols[j], static_cast<Index>(j));
  std::sort(sorted_cols.begin(), sorted_cols.end());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto rc = m.row_cols(rows[i]);
    const auto rv = m.row_values(rows[i]);
    std::size_t a = 0, b = 0;
    while (a < rc.size() && b < sorted_cols.size()) {
      if (rc[a] < sorted_cols[b].first) {
        ++a;
      } else if (rc[a] > sorted_cols[b].first) {
        ++b;
      } else {
        out(static_cast<Index>(i), sorted_cols[b].second) = rv[a];
        ++b;
      }
    }
  }
  return out;
}

/// Packed LU factors of P*M = L*U with unit lower triangle.
class DenseLU {
 public:
  Index size() const { return n_; }
  const DenseMatrix& packed() const { return lu_; }
  const std::vector<Index>& permutation() const { return perm_; }

  friend DenseLU lu_factor(DenseMatrix m, Index id);

 private:
  DenseMatrix lu_;
  std::vector<Index> perm_;  // row i of P*M is row perm_[i] of M
  Index n_ = 0;
};

/// Factorizes with partial pivoting. A pivot below 1e-14 times the infinity
/// norm of its original row is treated as singular; `id` tags the error.
inline DenseLU lu_factor(DenseMatrix m, Index id = -1) {
  if (m.rows() != m.cols()) throw DimensionError("lu_factor: matrix is not square");
  const Index n = m.rows();
  std::vector<double> row_norm(n, 0.0);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) row_norm[i] = std::max(row_norm[i], std::abs(m(i, j)));

  DenseLU f;
  f.n_ = n;
  f.perm_.resize(n);
  for (Index i = 0; i < n; ++i) f.perm_[i] = i;

  for (Index k = 0; k < n; ++k) {
    Index p = k;
    double best = std::abs(m(k, k));
    for (Index i = k + 1; i < n; ++i)
      if (std::abs(m(i, k)) > best) {
        best = std::abs(m(i, k));
        p = i;
      }
    if (best <= 1e-14 * row_norm[f.perm_[p]] || best == 0.0) throw SingularLocalSystem(id, k);
    if (p != k) {
      std::swap_ranges(m.row(k).begin(), m.row(k).end(), m.row(p).begin());
      std::swap(f.perm_[k], f.perm_[p]);
    }
    const double inv = 1.0 / m(k, k);
    auto pivot_row = m.row(k);
    for (Index i = k + 1; i < n; ++i) {
      auto r = m.row(i);
      const double l = r[k] * inv;
      r[k] = l;
      if (l == 0.0) continue;
      for (Index j = k + 1; j < n; ++j) r[j] -= l * pivot_row[j];
    }
  }
  f.lu_ = std::move(m);
  return f;
}

/// Solves M x = rhs.
inline Vector lu_solve(const DenseLU& f, std::span<const double> rhs) {
  const Index n = f.size();
  if (static_cast<Index>(rhs.size()) != n) throw DimensionError("lu_solve: size mismatch");
  const auto& lu = f.packed();
  Vector x(n);
  for (Index i = 0; i < n; ++i) {
    double s = rhs[f.permutation()[i]];
    const auto r = lu.row(i);
    for (Index j = 0; j < i; ++j) s -= r[j] * x[j];
    x[i] = s;
  }
  for (Index i = n - 1; i >= 0; --i) {
    double s = x[i];
    const auto r = lu.row(i);
    for (Index j = i + 1; j < n; ++j) s -= r[j] * x[j];
    x[i] = s / r[i];
  }
  return x;
}

/// Solves M^T x = rhs. With rhs = e_j the result is row j of M^{-1}.
inline Vector lu_solve_transposed(const DenseLU& f, std::span<const double> rhs) {
  const Index n = f.size();
  if (static_cast<Index>(rhs.size()) != n) throw DimensionError("lu_solve_transposed: size mismatch");
  const auto& lu = f.packed();
  // M^T = U^T L^T P: solve U^T z = rhs, then L^T w = z, then x = P^T w.
  Vector w(rhs.begin(), rhs.end());
  for (Index i = 0; i < n; ++i) {
    double s = w[i];
    for (Index j = 0; j < i; ++j) s -= lu(j, i) * w[j];
    w[i] = s / lu(i, i);
  }
  for (Index i = n - 1; i >= 0; --i) {
    double s = w[i];
    for (Index j = i + 1; j < n; ++j) s -= lu(j, i) * w[j];
    w[i] = s;
  }
  Vector x(n);
  for (Index i = 0; i < n; ++i) x[f.permutation()[i]] = w[i];
  return x;
}

}  // namespace vanka
