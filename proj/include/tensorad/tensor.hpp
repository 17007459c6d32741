#pragma once

// Dense third-order tensors and the matrix primitives the PARAFAC code is
// built from: unfoldings, Khatri-Rao products, pseudo-inverses and row-wise
// least squares.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tensorad/error.hpp"

namespace tensorad {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

/// Tensor extents (I, J, K).
struct Dims {
  std::size_t I = 1;
  std::size_t J = 1;
  std::size_t K = 1;

  std::size_t size() const { return I * J * K; }
  std::size_t operator[](int mode) const {
    switch (mode) {
      case 1: return I;
      case 2: return J;
      case 3: return K;
      default: throw std::invalid_argument("mode must be 1, 2 or 3");
    }
  }
  friend bool operator==(const Dims&, const Dims&) = default;
};

inline std::string to_string(const Dims& d) {
  return std::to_string(d.I) + "x" + std::to_string(d.J) + "x" + std::to_string(d.K);
}

/// Dense I x J x K tensor with an optional observation mask.
///
/// Values are stored in Fortran order: entry (i, j, k) lives at
/// i + I * (j + J * k). With this layout the mode-1 unfolding is the
/// column-major I x JK view of the buffer and the transposed mode-3
/// unfolding is the IJ x K view, so both are zero-copy.
///
/// Unobserved entries hold 0.0 and are never read by the fitting code; any
/// routine that cares consults `observed()`.
class Tensor3 {
 public:
  Tensor3() : Tensor3(Dims{1, 1, 1}) {}

  explicit Tensor3(Dims dims) : dims_(dims), values_(checked_size(dims), 0.0) {}

  Tensor3(Dims dims, std::vector<double> values, std::vector<std::uint8_t> mask = {})
      : dims_(dims), values_(std::move(values)), mask_(std::move(mask)) {
    const std::size_t n = checked_size(dims_);
    detail::require(values_.size() == n, "tensor value count " + std::to_string(values_.size()) +
                                             " does not match dims " + to_string(dims_));
    detail::require(mask_.empty() || mask_.size() == n, "tensor mask length does not match dims");
    for (std::size_t p = 0; p < n; ++p) {
      if (!mask_.empty() && !mask_[p]) {
        values_[p] = 0.0;
      } else if (!std::isfinite(values_[p])) {
        throw DataError("non-finite value at an observed tensor position");
      }
    }
  }

  const Dims& dims() const { return dims_; }
  std::size_t size() const { return values_.size(); }
  bool has_mask() const { return !mask_.empty(); }

  std::size_t index(std::size_t i, std::size_t j, std::size_t k) const {
    if (i >= dims_.I || j >= dims_.J || k >= dims_.K) {
      throw std::out_of_range("tensor index (" + std::to_string(i) + "," + std::to_string(j) +
                              "," + std::to_string(k) + ") outside " + to_string(dims_));
    }
    return i + dims_.I * (j + dims_.J * k);
  }

  double at(std::size_t i, std::size_t j, std::size_t k) const { return values_[index(i, j, k)]; }

  bool observed(std::size_t i, std::size_t j, std::size_t k) const {
    return mask_.empty() || mask_[index(i, j, k)] != 0;
  }
  bool observed(std::size_t flat) const { return mask_.empty() || mask_[flat] != 0; }

  /// Writes an observed value. Non-finite values are rejected.
  void set(std::size_t i, std::size_t j, std::size_t k, double v) {
    if (!std::isfinite(v)) throw DataError("non-finite tensor value");
    const std::size_t p = index(i, j, k);
    values_[p] = v;
    if (!mask_.empty()) mask_[p] = 1;
  }

  /// Marks an entry unobserved, creating the mask on first use.
  void set_missing(std::size_t i, std::size_t j, std::size_t k) {
    const std::size_t p = index(i, j, k);
    if (mask_.empty()) mask_.assign(values_.size(), 1);
    mask_[p] = 0;
    values_[p] = 0.0;
  }

  std::span<const double> values() const { return values_; }
  std::span<const std::uint8_t> mask() const { return mask_; }

  std::size_t observed_count() const {
    if (mask_.empty()) return values_.size();
    return static_cast<std::size_t>(std::count(mask_.begin(), mask_.end(), std::uint8_t{1}));
  }

  /// Frobenius norm over observed entries.
  double norm() const {
    double s = 0.0;
    for (double v : values_) s += v * v;  // unobserved entries are zero
    return std::sqrt(s);
  }

  /// Mode-1 slice i as a new 1 x J x K tensor (mask carried over).
  Tensor3 horizontal_slice(std::size_t i) const {
    detail::require(i < dims_.I, "horizontal slice index out of range");
    Dims d{1, dims_.J, dims_.K};
    std::vector<double> v(d.size());
    std::vector<std::uint8_t> m(mask_.empty() ? 0 : d.size());
    for (std::size_t k = 0; k < dims_.K; ++k) {
      for (std::size_t j = 0; j < dims_.J; ++j) {
        const std::size_t src = index(i, j, k);
        v[j + dims_.J * k] = values_[src];
        if (!m.empty()) m[j + dims_.J * k] = mask_[src];
      }
    }
    return Tensor3(d, std::move(v), std::move(m));
  }

  /// Column-major I x JK view; equals the mode-1 unfolding.
  Eigen::Map<const Matrix> mode1_view() const {
    return {values_.data(), static_cast<Eigen::Index>(dims_.I),
            static_cast<Eigen::Index>(dims_.J * dims_.K)};
  }

  /// Column-major IJ x K view; equals the transposed mode-3 unfolding.
  Eigen::Map<const Matrix> mode3t_view() const {
    return {values_.data(), static_cast<Eigen::Index>(dims_.I * dims_.J),
            static_cast<Eigen::Index>(dims_.K)};
  }

  /// Frontal slice k as an I x J matrix view.
  Eigen::Map<const Matrix> frontal_view(std::size_t k) const {
    detail::require(k < dims_.K, "frontal slice index out of range");
    return {values_.data() + dims_.I * dims_.J * k, static_cast<Eigen::Index>(dims_.I),
            static_cast<Eigen::Index>(dims_.J)};
  }

  friend bool operator==(const Tensor3&, const Tensor3&) = default;

 private:
  static std::size_t checked_size(const Dims& d) {
    if (d.I == 0 || d.J == 0 || d.K == 0) throw DataError("tensor dims must be positive");
    return d.size();
  }

  Dims dims_;
  std::vector<double> values_;
  std::vector<std::uint8_t> mask_;
};

/// Mode-n unfolding (Kolda/Bader column order): mode 1 is I x JK with column
/// j + J*k, mode 2 is J x IK with column i + I*k, mode 3 is K x IJ with
/// column i + I*j. Unobserved entries appear as 0.
inline Matrix unfold(const Tensor3& t, int mode) {
  const auto [I, J, K] = t.dims();
  switch (mode) {
    case 1: return t.mode1_view();
    case 2: {
      Matrix m(J, I * K);
      for (std::size_t k = 0; k < K; ++k) {
        m.middleCols(static_cast<Eigen::Index>(I * k), static_cast<Eigen::Index>(I)) =
            t.frontal_view(k).transpose();
      }
      return m;
    }
    case 3: return t.mode3t_view().transpose();
    default: throw std::invalid_argument("unfold: mode must be 1, 2 or 3");
  }
}

/// Inverse of `unfold`.
inline Tensor3 fold(const Matrix& m, int mode, Dims dims) {
  if (mode < 1 || mode > 3) throw std::invalid_argument("fold: mode must be 1, 2 or 3");
  const auto [I, J, K] = dims;
  const auto rows = static_cast<std::size_t>(m.rows());
  const auto cols = static_cast<std::size_t>(m.cols());
  const std::size_t want_rows = dims[mode];
  if (rows != want_rows || rows * cols != dims.size()) {
    throw DataError("fold: matrix " + std::to_string(rows) + "x" + std::to_string(cols) +
                    " does not match mode-" + std::to_string(mode) + " unfolding of " +
                    to_string(dims));
  }
  std::vector<double> v(dims.size());
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t j = 0; j < J; ++j) {
      for (std::size_t i = 0; i < I; ++i) {
        double x = 0.0;
        switch (mode) {
          case 1: x = m(i, j + J * k); break;
          case 2: x = m(j, i + I * k); break;
          default: x = m(k, i + I * j); break;
        }
        v[i + I * (j + J * k)] = x;
      }
    }
  }
  return Tensor3(dims, std::move(v));
}

/// Column-wise Kronecker product: row m*N + n of column r is p(m,r)*q(n,r).
inline Matrix khatri_rao(const Matrix& p, const Matrix& q) {
  if (p.cols() != q.cols()) {
    throw DataError("khatri_rao: column counts differ (" + std::to_string(p.cols()) + " vs " +
                    std::to_string(q.cols()) + ")");
  }
  const Eigen::Index M = p.rows(), N = q.rows();
  Matrix out(M * N, p.cols());
  for (Eigen::Index r = 0; r < p.cols(); ++r) {
    for (Eigen::Index a = 0; a < M; ++a) {
      out.col(r).segment(a * N, N) = p(a, r) * q.col(r);
    }
  }
  return out;
}

/// Moore-Penrose pseudo-inverse via SVD. Singular values below
/// 1e-12 * max(rows, cols) * sigma_max are treated as zero.
inline Matrix pinv(const Matrix& m) {
  if (!m.allFinite()) throw DataError("pinv: non-finite input");
  if (m.size() == 0) return Matrix::Zero(m.cols(), m.rows());
  Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const double rtol = 1e-12 * static_cast<double>(std::max(m.rows(), m.cols()));
  const double cutoff = rtol * (s.size() > 0 ? s(0) : 0.0);
  Vector inv(s.size());
  for (Eigen::Index r = 0; r < s.size(); ++r) inv(r) = s(r) > cutoff ? 1.0 / s(r) : 0.0;
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

/// Solves X * design ~= targets in the least-squares sense for every row of
/// `targets` (P x D) with `design` (R x D); returns targets * pinv(design).
inline Matrix lsq_rows(const Matrix& targets, const Matrix& design) {
  if (targets.cols() != design.cols()) {
    throw DataError("lsq_rows: targets have " + std::to_string(targets.cols()) +
                    " columns, design has " + std::to_string(design.cols()));
  }
  return targets * pinv(design);
}

/// Least squares for a single row restricted to observed columns.
/// `observed[c] != 0` marks column c as usable.
inline RowVector lsq_row_masked(const RowVector& target, std::span<const std::uint8_t> observed,
                                const Matrix& design) {
  if (target.size() != design.cols() ||
      static_cast<std::size_t>(target.size()) != observed.size()) {
    throw DataError("lsq_row_masked: dimension mismatch");
  }
  std::vector<Eigen::Index> keep;
  keep.reserve(observed.size());
  for (std::size_t c = 0; c < observed.size(); ++c) {
    if (observed[c]) keep.push_back(static_cast<Eigen::Index>(c));
  }
  if (keep.empty()) throw DataError("lsq_row_masked: no observed entries");
  if (keep.size() == observed.size()) return lsq_rows(target, design);
  Matrix sub_design = design(Eigen::all, keep);
  RowVector sub_target = target(keep);
  return lsq_rows(sub_target, sub_design);
}

}  // namespace tensorad
