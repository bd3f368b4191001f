#pragma once

// Row-compressed sparse matrices: a binary pattern type for adjacency algebra
// and a real-valued type for the normalized GCN propagation operator.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iterator>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sgpt/dense.hpp"
#include "sgpt/error.hpp"

namespace sgpt {

using Index = std::uint32_t;

class SparseBinaryMatrix {
 public:
  SparseBinaryMatrix() : row_ptr_(1, 0) {}
  SparseBinaryMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), row_ptr_(rows + 1, 0) {}

  // Builds from arbitrary (row, col) positions; sorts and removes duplicates.
  static SparseBinaryMatrix from_positions(std::size_t rows, std::size_t cols,
                                           std::vector<std::pair<Index, Index>> pos) {
    for (const auto& [r, c] : pos)
      if (r >= rows || c >= cols)
        throw ShapeError("sparse: position (" + std::to_string(r) + "," + std::to_string(c) +
                         ") out of bounds");
    std::sort(pos.begin(), pos.end());
    pos.erase(std::unique(pos.begin(), pos.end()), pos.end());
    SparseBinaryMatrix m(rows, cols);
    m.col_idx_.reserve(pos.size());
    for (const auto& [r, c] : pos) {
      ++m.row_ptr_[r + 1];
      m.col_idx_.push_back(c);
    }
    for (std::size_t i = 0; i < rows; ++i) m.row_ptr_[i + 1] += m.row_ptr_[i];
    return m;
  }

  // Takes ownership of already-valid CSR arrays.
  static SparseBinaryMatrix from_csr(std::size_t rows, std::size_t cols,
                                     std::vector<std::size_t> row_ptr, std::vector<Index> col_idx) {
    SparseBinaryMatrix m;
    m.rows_ = rows;
    m.cols_ = cols;
    m.row_ptr_ = std::move(row_ptr);
    m.col_idx_ = std::move(col_idx);
    return m;
  }

  static SparseBinaryMatrix identity(std::size_t n) {
    std::vector<std::pair<Index, Index>> pos;
    for (std::size_t i = 0; i < n; ++i) pos.emplace_back(Index(i), Index(i));
    return from_positions(n, n, std::move(pos));
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t nnz() const noexcept { return col_idx_.size(); }
  bool square() const noexcept { return rows_ == cols_; }

  std::span<const Index> row(std::size_t i) const noexcept {
    return {col_idx_.data() + row_ptr_[i], row_ptr_[i + 1] - row_ptr_[i]};
  }
  const std::vector<std::size_t>& row_ptr() const noexcept { return row_ptr_; }
  const std::vector<Index>& col_idx() const noexcept { return col_idx_; }

  bool contains(std::size_t i, std::size_t j) const {
    const auto r = row(i);
    return std::binary_search(r.begin(), r.end(), Index(j));
  }

  std::vector<std::pair<Index, Index>> positions() const {
    std::vector<std::pair<Index, Index>> out;
    out.reserve(nnz());
    for (std::size_t i = 0; i < rows_; ++i)
      for (Index c : row(i)) out.emplace_back(Index(i), c);
    return out;
  }

  bool is_symmetric() const {
    if (!square()) return false;
    for (std::size_t i = 0; i < rows_; ++i)
      for (Index c : row(i))
        if (!contains(c, i)) return false;
    return true;
  }

  friend bool operator==(const SparseBinaryMatrix& a, const SparseBinaryMatrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.row_ptr_ == b.row_ptr_ &&
           a.col_idx_ == b.col_idx_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_ptr_;
  std::vector<Index> col_idx_;
};

class SparseRealMatrix {
 public:
  SparseRealMatrix() : row_ptr_(1, 0) {}

  static SparseRealMatrix from_csr(std::size_t rows, std::size_t cols,
                                   std::vector<std::size_t> row_ptr, std::vector<Index> col_idx,
                                   std::vector<double> values) {
    if (row_ptr.size() != rows + 1 || col_idx.size() != values.size() ||
        row_ptr.back() != col_idx.size())
      throw ShapeError("SparseRealMatrix: inconsistent CSR arrays");
    for (double v : values)
      if (!std::isfinite(v)) throw PreconditionError("SparseRealMatrix: non-finite value");
    SparseRealMatrix m;
    m.rows_ = rows;
    m.cols_ = cols;
    m.row_ptr_ = std::move(row_ptr);
    m.col_idx_ = std::move(col_idx);
    m.values_ = std::move(values);
    return m;
  }

  static SparseRealMatrix from_dense(const Matrix& d) {
    std::vector<std::size_t> rp(d.rows() + 1, 0);
    std::vector<Index> ci;
    std::vector<double> vals;
    for (std::size_t i = 0; i < d.rows(); ++i) {
      for (std::size_t j = 0; j < d.cols(); ++j)
        if (d(i, j) != 0.0) {
          ci.push_back(Index(j));
          vals.push_back(d(i, j));
        }
      rp[i + 1] = ci.size();
    }
    return from_csr(d.rows(), d.cols(), std::move(rp), std::move(ci), std::move(vals));
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t nnz() const noexcept { return col_idx_.size(); }
  const std::vector<std::size_t>& row_ptr() const noexcept { return row_ptr_; }
  const std::vector<Index>& col_idx() const noexcept { return col_idx_; }
  const std::vector<double>& values() const noexcept { return values_; }

  Matrix to_dense() const {
    Matrix d(rows_, cols_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) d(i, col_idx_[p]) = values_[p];
    return d;
  }

  SparseRealMatrix transpose() const {
    std::vector<std::size_t> rp(cols_ + 1, 0);
    for (Index c : col_idx_) ++rp[c + 1];
    for (std::size_t j = 0; j < cols_; ++j) rp[j + 1] += rp[j];
    std::vector<Index> ci(nnz());
    std::vector<double> vals(nnz());
    std::vector<std::size_t> next(rp.begin(), rp.end() - 1);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) {
        const std::size_t q = next[col_idx_[p]]++;
        ci[q] = Index(i);
        vals[q] = values_[p];
      }
    return from_csr(cols_, rows_, std::move(rp), std::move(ci), std::move(vals));
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_ptr_;
  std::vector<Index> col_idx_;
  std::vector<double> values_;
};

// Boolean product: (i,j) present iff some t has a(i,t) and b(t,j).
inline SparseBinaryMatrix bool_matmul(const SparseBinaryMatrix& a, const SparseBinaryMatrix& b) {
  if (a.cols() != b.rows())
    throw ShapeError("bool_matmul: inner dims " + std::to_string(a.cols()) + " vs " +
                     std::to_string(b.rows()));
  std::vector<std::size_t> rp(a.rows() + 1, 0);
  std::vector<Index> ci;
  std::vector<std::uint32_t> mark(b.cols(), 0);
  std::vector<Index> row_buf;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto stamp = static_cast<std::uint32_t>(i + 1);
    row_buf.clear();
    for (Index t : a.row(i))
      for (Index j : b.row(t))
        if (mark[j] != stamp) {
          mark[j] = stamp;
          row_buf.push_back(j);
        }
    std::sort(row_buf.begin(), row_buf.end());
    ci.insert(ci.end(), row_buf.begin(), row_buf.end());
    rp[i + 1] = ci.size();
  }
  return SparseBinaryMatrix::from_csr(a.rows(), b.cols(), std::move(rp), std::move(ci));
}

// Entrywise OR.
inline SparseBinaryMatrix bool_add(const SparseBinaryMatrix& a, const SparseBinaryMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError("bool_add: dimension mismatch");
  std::vector<std::size_t> rp(a.rows() + 1, 0);
  std::vector<Index> ci;
  ci.reserve(a.nnz() + b.nnz());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto ra = a.row(i), rb = b.row(i);
    std::set_union(ra.begin(), ra.end(), rb.begin(), rb.end(), std::back_inserter(ci));
    rp[i + 1] = ci.size();
  }
  return SparseBinaryMatrix::from_csr(a.rows(), a.cols(), std::move(rp), std::move(ci));
}

inline SparseBinaryMatrix zero_diagonal(const SparseBinaryMatrix& a) {
  if (!a.square()) throw ShapeError("zero_diagonal: matrix is not square");
  std::vector<std::size_t> rp(a.rows() + 1, 0);
  std::vector<Index> ci;
  ci.reserve(a.nnz());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (Index c : a.row(i))
      if (c != i) ci.push_back(c);
    rp[i + 1] = ci.size();
  }
  return SparseBinaryMatrix::from_csr(a.rows(), a.cols(), std::move(rp), std::move(ci));
}

// D^{-1/2} (A + I) D^{-1/2} with D the degree of A + I. Existing diagonal
// entries of A are absorbed into the single self-loop.
inline SparseRealMatrix gcn_normalize(const SparseBinaryMatrix& a) {
  if (!a.square()) throw ShapeError("gcn_normalize: matrix is not square");
  const std::size_t n = a.rows();
  std::vector<double> inv_sqrt_deg(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t deg = 1;
    for (Index c : a.row(i))
      if (c != i) ++deg;
    inv_sqrt_deg[i] = 1.0 / std::sqrt(static_cast<double>(deg));
  }
  std::vector<std::size_t> rp(n + 1, 0);
  std::vector<Index> ci;
  std::vector<double> vals;
  ci.reserve(a.nnz() + n);
  vals.reserve(a.nnz() + n);
  for (std::size_t i = 0; i < n; ++i) {
    bool self_done = false;
    auto emit_self = [&] {
      ci.push_back(Index(i));
      vals.push_back(inv_sqrt_deg[i] * inv_sqrt_deg[i]);
      self_done = true;
    };
    for (Index c : a.row(i)) {
      if (c == i) continue;
      if (!self_done && c > i) emit_self();
      ci.push_back(c);
      vals.push_back(inv_sqrt_deg[i] * inv_sqrt_deg[c]);
    }
    if (!self_done) emit_self();
    rp[i + 1] = ci.size();
  }
  return SparseRealMatrix::from_csr(n, n, std::move(rp), std::move(ci), std::move(vals));
}

// out += a * x
inline void spmm_acc(const SparseRealMatrix& a, const Matrix& x, Matrix& out) {
  const std::size_t d = x.cols();
  const auto& rp = a.row_ptr();
  const auto& ci = a.col_idx();
  const auto& vals = a.values();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* oi = out.data() + i * d;
    for (std::size_t p = rp[i]; p < rp[i + 1]; ++p) {
      const double v = vals[p];
      const double* xr = x.data() + static_cast<std::size_t>(ci[p]) * d;
      for (std::size_t j = 0; j < d; ++j) oi[j] += v * xr[j];
    }
  }
}

inline Matrix spmm(const SparseRealMatrix& a, const Matrix& x) {
  if (a.cols() != x.rows())
    throw ShapeError("spmm: inner dims " + std::to_string(a.cols()) + " vs " +
                     std::to_string(x.rows()));
  Matrix out(a.rows(), x.cols());
  spmm_acc(a, x, out);
  return out;
}

// Triplet dump, one `i j` (binary) or `i j v` (real) line per entry, row-major.
inline void write_triplets(std::ostream& os, const SparseBinaryMatrix& a) {
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (Index c : a.row(i)) os << i << ' ' << c << '\n';
}

inline void write_triplets(std::ostream& os, const SparseRealMatrix& a) {
  const auto old_prec = os.precision(17);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t p = a.row_ptr()[i]; p < a.row_ptr()[i + 1]; ++p)
      os << i << ' ' << a.col_idx()[p] << ' ' << a.values()[p] << '\n';
  os.precision(old_prec);
}

}  // namespace sgpt
