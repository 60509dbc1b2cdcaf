#pragma once

#include <algorithm>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <string>
#include <tuple>
#include <vector>

#include "eign/matrix.hpp"

namespace eign {

using Complex = std::complex<double>;

/// Entries with magnitude below this are not stored.
inline constexpr double kSparseZero = 1e-15;

/// Dense row-major complex matrix. Used for oracles and small complex workloads.
class ComplexMatrix {
 public:
  ComplexMatrix() = default;
  ComplexMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  Complex& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const Complex& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  std::vector<Complex>& data() { return data_; }
  const std::vector<Complex>& data() const { return data_; }

  static ComplexMatrix from_real(const Matrix& m) {
    ComplexMatrix out(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.size(); ++i) out.data_[i] = m.data()[i];
    return out;
  }

  /// Real part followed by imaginary part along columns.
  Matrix flatten() const {
    Matrix out(rows_, 2 * cols_);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < cols_; ++c) {
        out(r, c) = (*this)(r, c).real();
        out(r, cols_ + c) = (*this)(r, c).imag();
      }
    return out;
  }

  ComplexMatrix adjoint() const {
    ComplexMatrix out(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < cols_; ++c) out(c, r) = std::conj((*this)(r, c));
    return out;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Complex> data_;
};

inline ComplexMatrix matmul(const ComplexMatrix& a, const ComplexMatrix& b) {
  if (a.cols() != b.rows()) throw DimensionError("complex matmul: inner dimension mismatch");
  ComplexMatrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t p = 0; p < a.cols(); ++p) {
      const Complex av = a(i, p);
      if (av == Complex{}) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += av * b(p, j);
    }
  return out;
}

inline double max_abs_diff(const ComplexMatrix& a, const ComplexMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionError("max_abs_diff: complex shape mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) d = std::max(d, std::abs(a.data()[i] - b.data()[i]));
  return d;
}

struct Triplet {
  std::size_t row;
  std::size_t col;
  Complex value;
};

/// Compressed sparse row matrix over complex values.
///
/// Invariants: column indices are sorted and unique within a row, and no entry
/// with magnitude below `kSparseZero` is stored.
class SparseComplexMatrix {
 public:
  SparseComplexMatrix() : row_ptr_(1, 0) {}
  SparseComplexMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), row_ptr_(rows + 1, 0) {}

  /// Duplicate coordinates are summed before the zero threshold is applied.
  static SparseComplexMatrix from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> trips) {
    for (const auto& t : trips)
      if (t.row >= rows || t.col >= cols) throw DimensionError("triplet out of range");
    std::sort(trips.begin(), trips.end(), [](const Triplet& a, const Triplet& b) {
      return std::tie(a.row, a.col) < std::tie(b.row, b.col);
    });
    SparseComplexMatrix m(rows, cols);
    std::size_t i = 0;
    while (i < trips.size()) {
      std::size_t j = i;
      Complex sum{};
      while (j < trips.size() && trips[j].row == trips[i].row && trips[j].col == trips[i].col) sum += trips[j++].value;
      if (std::abs(sum) >= kSparseZero) {
        m.col_idx_.push_back(trips[i].col);
        m.values_.push_back(sum);
        ++m.row_ptr_[trips[i].row + 1];
      }
      i = j;
    }
    std::partial_sum(m.row_ptr_.begin(), m.row_ptr_.end(), m.row_ptr_.begin());
    return m;
  }

  static SparseComplexMatrix from_dense(const ComplexMatrix& d) {
    std::vector<Triplet> trips;
    for (std::size_t r = 0; r < d.rows(); ++r)
      for (std::size_t c = 0; c < d.cols(); ++c)
        if (d(r, c) != Complex{}) trips.push_back({r, c, d(r, c)});
    return from_triplets(d.rows(), d.cols(), std::move(trips));
  }

  static SparseComplexMatrix identity(std::size_t n) {
    std::vector<Triplet> trips;
    for (std::size_t i = 0; i < n; ++i) trips.push_back({i, i, 1.0});
    return from_triplets(n, n, std::move(trips));
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t nnz() const { return values_.size(); }

  const std::vector<std::size_t>& row_ptr() const { return row_ptr_; }
  const std::vector<std::size_t>& col_idx() const { return col_idx_; }
  const std::vector<Complex>& values() const { return values_; }

  Complex at(std::size_t r, std::size_t c) const {
    auto b = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[r]);
    auto e = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[r + 1]);
    auto it = std::lower_bound(b, e, c);
    if (it == e || *it != c) return {};
    return values_[static_cast<std::size_t>(it - col_idx_.begin())];
  }

  std::vector<Triplet> triplets() const {
    std::vector<Triplet> out;
    out.reserve(nnz());
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) out.push_back({r, col_idx_[k], values_[k]});
    return out;
  }

  SparseComplexMatrix adjoint() const {
    std::vector<Triplet> trips;
    trips.reserve(nnz());
    for (const auto& t : triplets()) trips.push_back({t.col, t.row, std::conj(t.value)});
    return from_triplets(cols_, rows_, std::move(trips));
  }

  ComplexMatrix to_dense() const {
    ComplexMatrix d(rows_, cols_);
    for (const auto& t : triplets()) d(t.row, t.col) = t.value;
    return d;
  }

  bool is_real() const {
    return std::all_of(values_.begin(), values_.end(), [](const Complex& v) { return v.imag() == 0.0; });
  }

  /// Scales column c by s[c].
  SparseComplexMatrix scale_columns(const std::vector<double>& s) const {
    if (s.size() != cols_) throw DimensionError("scale_columns: size mismatch");
    std::vector<Triplet> trips = triplets();
    for (auto& t : trips) t.value *= s[t.col];
    return from_triplets(rows_, cols_, std::move(trips));
  }

  ComplexMatrix multiply(const ComplexMatrix& x) const {
    if (x.rows() != cols_) throw DimensionError("sparse multiply: dimension mismatch");
    ComplexMatrix y(rows_, x.cols());
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
        const Complex a = values_[k];
        const std::size_t c = col_idx_[k];
        for (std::size_t j = 0; j < x.cols(); ++j) y(r, j) += a * x(c, j);
      }
    return y;
  }

  /// y = A x for x given in flattened form (re block | im block), width 2k.
  /// With `real_input`, x has width k and zero imaginary part.
  Matrix multiply_flat(const Matrix& x, bool real_input) const {
    if (x.rows() != cols_) throw DimensionError("sparse multiply_flat: dimension mismatch");
    const std::size_t k = real_input ? x.cols() : x.cols() / 2;
    Matrix y(rows_, 2 * k);
    for (std::size_t r = 0; r < rows_; ++r) {
      double* yr = y.row(r).data();
      for (std::size_t p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p) {
        const double ar = values_[p].real(), ai = values_[p].imag();
        const double* xr = x.row(col_idx_[p]).data();
        if (real_input) {
          for (std::size_t j = 0; j < k; ++j) {
            yr[j] += ar * xr[j];
            yr[k + j] += ai * xr[j];
          }
        } else {
          for (std::size_t j = 0; j < k; ++j) {
            const double re = xr[j], im = xr[k + j];
            yr[j] += ar * re - ai * im;
            yr[k + j] += ar * im + ai * re;
          }
        }
      }
    }
    return y;
  }

  /// y = Re(A) x for real x. Imaginary parts are ignored.
  Matrix multiply_real(const Matrix& x) const {
    if (x.rows() != cols_) throw DimensionError("sparse multiply_real: dimension mismatch");
    Matrix y(rows_, x.cols());
    for (std::size_t r = 0; r < rows_; ++r) {
      double* yr = y.row(r).data();
      for (std::size_t p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p) {
        const double a = values_[p].real();
        const double* xr = x.row(col_idx_[p]).data();
        for (std::size_t j = 0; j < x.cols(); ++j) yr[j] += a * xr[j];
      }
    }
    return y;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_ptr_;
  std::vector<std::size_t> col_idx_;
  std::vector<Complex> values_;
};

/// C = A * B for sparse operands (row-wise accumulation with a dense scratch row).
inline SparseComplexMatrix sparse_product(const SparseComplexMatrix& a, const SparseComplexMatrix& b) {
  if (a.cols() != b.rows()) throw DimensionError("sparse_product: inner dimension mismatch");
  std::vector<Triplet> trips;
  std::vector<Complex> acc(b.cols());
  std::vector<std::uint8_t> used(b.cols(), 0);
  std::vector<std::size_t> touched;
  for (std::size_t r = 0; r < a.rows(); ++r) {
    touched.clear();
    for (std::size_t p = a.row_ptr()[r]; p < a.row_ptr()[r + 1]; ++p) {
      const std::size_t k = a.col_idx()[p];
      for (std::size_t q = b.row_ptr()[k]; q < b.row_ptr()[k + 1]; ++q) {
        const std::size_t c = b.col_idx()[q];
        if (!used[c]) {
          used[c] = 1;
          touched.push_back(c);
        }
        acc[c] += a.values()[p] * b.values()[q];
      }
    }
    for (std::size_t c : touched) {
      trips.push_back({r, c, acc[c]});
      acc[c] = {};
      used[c] = 0;
    }
  }
  return SparseComplexMatrix::from_triplets(a.rows(), b.cols(), std::move(trips));
}

/// alpha * A + beta * B
inline SparseComplexMatrix sparse_axpby(Complex alpha, const SparseComplexMatrix& a, Complex beta,
                                        const SparseComplexMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionError("sparse_axpby: shape mismatch");
  std::vector<Triplet> trips;
  for (auto t : a.triplets()) trips.push_back({t.row, t.col, alpha * t.value});
  for (auto t : b.triplets()) trips.push_back({t.row, t.col, beta * t.value});
  return SparseComplexMatrix::from_triplets(a.rows(), a.cols(), std::move(trips));
}

}  // namespace eign
