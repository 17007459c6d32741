#pragma once

// Residuals for data outside the training tensor: offline projection of new
// mode-1 slices and the two sliding-window online schemes (FWO, PWO).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "tensorad/cp_model.hpp"
#include "tensorad/error.hpp"
#include "tensorad/tensor.hpp"

namespace tensorad {

/// Loading and residual of one projected slice.
struct SliceProjection {
  RowVector a_new;   // on the scale of CpModel::weighted_A()
  Tensor3 residual;  // 1 x J x K, masked where the input was
  double fit = 0.0;  // Frobenius norm of the observed residual
};

/// Projects new mode-1 slices onto a trained model with B and C held fixed:
/// a = x_(1) ((C kr B)^T)^+. The pseudo-inverse is computed once.
class Projector {
 public:
  explicit Projector(const CpModel& model)
      : J_(static_cast<std::size_t>(model.B.rows())), K_(static_cast<std::size_t>(model.C.rows())) {
    model.validate();
    design_ = khatri_rao(model.C, model.B).transpose();
    pinv_ = pinv(design_);
  }

  std::size_t J() const { return J_; }
  std::size_t K() const { return K_; }
  const Matrix& design() const { return design_; }
  const Matrix& design_pinv() const { return pinv_; }

  SliceProjection project(const Tensor3& x_new) const {
    const Dims d = x_new.dims();
    if (d.I != 1 || d.J != J_ || d.K != K_) {
      throw DataError("project_slice: slice dims " + to_string(d) + " do not match model (1, " +
                      std::to_string(J_) + ", " + std::to_string(K_) + ")");
    }
    const RowVector row = x_new.mode1_view();
    SliceProjection out;
    if (x_new.has_mask()) {
      out.a_new = lsq_row_masked(row, x_new.mask(), design_);
    } else {
      out.a_new = row * pinv_;
    }
    const RowVector e = row - out.a_new * design_;
    std::vector<double> ev(e.data(), e.data() + e.size());
    std::vector<std::uint8_t> mask;
    if (x_new.has_mask()) {
      mask.assign(x_new.mask().begin(), x_new.mask().end());
      for (std::size_t p = 0; p < ev.size(); ++p) {
        if (!mask[p]) ev[p] = 0.0;
      }
    }
    double ss = 0.0;
    for (double v : ev) ss += v * v;
    out.fit = std::sqrt(ss);
    out.residual = Tensor3(d, std::move(ev), std::move(mask));
    return out;
  }

  /// Projects every mode-1 slice of `x`; returns the loadings (I x R) and the
  /// residual tensor. Fully observed slices share one matrix product.
  std::pair<Matrix, Tensor3> project_all(const Tensor3& x) const {
    const Dims d = x.dims();
    if (d.J != J_ || d.K != K_) {
      throw DataError("project: tensor dims " + to_string(d) + " do not match model J, K (" +
                      std::to_string(J_) + ", " + std::to_string(K_) + ")");
    }
    const auto x1 = x.mode1_view();
    Matrix loadings = x1 * pinv_;
    if (x.has_mask()) {
      std::vector<std::uint8_t> obs(J_ * K_);
      for (std::size_t i = 0; i < d.I; ++i) {
        bool full = true;
        for (std::size_t c = 0; c < obs.size(); ++c) {
          obs[c] = x.observed(i + d.I * c) ? 1 : 0;
          full = full && obs[c];
        }
        if (!full) {
          loadings.row(static_cast<Eigen::Index>(i)) =
              lsq_row_masked(x1.row(static_cast<Eigen::Index>(i)), obs, design_);
        }
      }
    }
    const Matrix e = x1 - loadings * design_;
    std::vector<double> ev(e.data(), e.data() + e.size());
    std::vector<std::uint8_t> mask;
    if (x.has_mask()) {
      mask.assign(x.mask().begin(), x.mask().end());
      for (std::size_t p = 0; p < ev.size(); ++p) {
        if (!mask[p]) ev[p] = 0.0;
      }
    }
    return {std::move(loadings), Tensor3(d, std::move(ev), std::move(mask))};
  }

 private:
  std::size_t J_, K_;
  Matrix design_;  // (C kr B)^T, R x JK
  Matrix pinv_;    // JK x R
};

inline SliceProjection project_slice(const Tensor3& x_new, const CpModel& model) {
  return Projector(model).project(x_new);
}

/// Per-minute output of an online step.
struct StepResult {
  std::int64_t minute = 0;
  Matrix residual;  // I x J: X(:,:,t) - A diag(c(t)) B^T
  std::size_t iterations = 0;
  double fit = 0.0;  // window residual norm after the step
  double wall_seconds = 0.0;
};

/// Sliding window over the last W frontal (time) slices together with the
/// current model. Slices are I x J matrices (entities x metrics). The first W
/// slices warm the buffer; the initial model is then fitted offline.
///
/// Factors are kept raw (unit weights). `snapshot()` hands out an immutable
/// copy that stays valid while the window keeps stepping.
class TensorWindow {
 public:
  TensorWindow(std::size_t I, std::size_t J, std::size_t W, std::size_t R, AlsConfig init_cfg = {})
      : I_(I), J_(J), W_(W), R_(R), init_cfg_(std::move(init_cfg)) {
    if (I < 1 || J < 1) throw DataError("TensorWindow: I and J must be positive");
    if (W < 2) throw DataError("TensorWindow: window length must be >= 2");
    if (R < 1) throw std::invalid_argument("TensorWindow: rank must be >= 1");
    init_cfg_.validate();
    data_.reserve(I * J * W);
  }

  std::size_t I() const { return I_; }
  std::size_t J() const { return J_; }
  std::size_t W() const { return W_; }
  std::size_t rank() const { return R_; }
  bool warmed_up() const { return static_cast<bool>(model_); }
  /// Minute of the newest slice (-1 before the first push).
  std::int64_t t() const { return t_; }

  /// Buffer contents, oldest slice first (I x J x filled).
  Tensor3 tensor() const {
    return Tensor3(Dims{I_, J_, data_.size() / (I_ * J_)}, data_);
  }

  std::shared_ptr<const CpModel> snapshot() const { return model_; }
  const CpModel& model() const {
    if (!model_) throw DataError("TensorWindow: no model before warm-up completes");
    return *model_;
  }

  /// Appends a slice during warm-up. Returns true once the buffer is full and
  /// the initial model has been fitted.
  bool push(const Matrix& slice) {
    if (warmed_up()) throw DataError("TensorWindow: warm-up already complete; use a step function");
    check_slice(slice);
    data_.insert(data_.end(), slice.data(), slice.data() + slice.size());
    ++t_;
    if (data_.size() < I_ * J_ * W_) return false;
    CpModel m = als_fit(tensor(), R_, init_cfg_);
    m.A = m.weighted_A();
    m.weights = Vector::Ones(static_cast<Eigen::Index>(R_));
    model_ = std::make_shared<const CpModel>(std::move(m));
    return true;
  }

  /// Full Window Optimization: slide, then refit A, B and every row of C by
  /// ALS warm-started from the previous (shifted) model.
  StepResult fwo_step(const Matrix& slice, const AlsConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    auto [A, B, C] = slide(slice);
    AlsConfig c = cfg;
    c.normalize = false;
    c.warm_start = CpModel::from_factors(std::move(A), std::move(B), std::move(C));
    CpModel m = als_fit(tensor(), R_, c);
    StepResult out;
    out.iterations = m.info.iterations;
    out.fit = m.info.final_fit;
    finish(std::move(m), slice, out, t0);
    return out;
  }

  /// Partial Window Optimization: rows 1..W-1 of C stay fixed; the newest
  /// loading c(t), then A and B, are re-solved until the window fit settles.
  StepResult pwo_step(const Matrix& slice, const AlsConfig& cfg) {
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    auto [A, B, C] = slide(slice);
    const Dims d{I_, J_, W_};
    const std::span<const double> xs(data_);
    const Eigen::Index last = static_cast<Eigen::Index>(W_ - 1);
    const Eigen::Map<const RowVector> xt(slice.data(), slice.size());
    double xx = 0.0;
    for (double v : data_) xx += v * v;
    const double floor = 1e-8 * std::sqrt(xx);

    StepResult out;
    double prev = -1.0, fit = 0.0;
    for (std::size_t it = 1; it <= cfg.max_iters; ++it) {
      const Matrix gab = (B.transpose() * B).cwiseProduct(A.transpose() * A);
      C.row(last) = (xt * khatri_rao(B, A)) * pinv(gab);
      A = detail::factor_update(detail::mttkrp(xs, d, 1, A, B, C), C, B);
      const Matrix m2 = detail::mttkrp(xs, d, 2, A, B, C);
      B = detail::factor_update(m2, C, A);
      if (!A.allFinite() || !B.allFinite() || !C.allFinite()) {
        throw NumericError("pwo_step: factors diverged to non-finite values");
      }
      // |X - M|^2 = |X|^2 - 2<X, M> + |M|^2 with <X, M> = sum(B .* mttkrp_2).
      const double xm = B.cwiseProduct(m2).sum();
      const double mm = ((A.transpose() * A).cwiseProduct(B.transpose() * B))
                            .cwiseProduct(C.transpose() * C)
                            .sum();
      fit = std::sqrt(std::max(0.0, xx - 2.0 * xm + mm));
      out.iterations = it;
      if (prev >= 0.0 && std::abs(prev - fit) <= cfg.rel_change_tol * std::max(prev, floor)) break;
      prev = fit;
    }
    out.fit = fit;
    finish(CpModel::from_factors(std::move(A), std::move(B), std::move(C)), slice, out, t0);
    return out;
  }

  /// Adds entities that join mid-stream. `history` is n_new x J x W (oldest
  /// minute first) with a mask marking the minutes actually measured. Each
  /// new row of A is the least-squares fit against the current B and C over
  /// its observed entries; unmeasured window cells are filled with the
  /// resulting model estimate.
  void add_entities(const Tensor3& history) {
    if (!warmed_up()) throw DataError("add_entities: window is not warmed up");
    const Dims hd = history.dims();
    if (hd.J != J_ || hd.K != W_) {
      throw DataError("add_entities: history dims " + to_string(hd) + " do not match (n, " +
                      std::to_string(J_) + ", " + std::to_string(W_) + ")");
    }
    const CpModel& cur = *model_;
    const Matrix design = khatri_rao(cur.C, cur.B).transpose();
    const auto h1 = history.mode1_view();
    Matrix A_new(static_cast<Eigen::Index>(hd.I), static_cast<Eigen::Index>(R_));
    std::vector<std::uint8_t> obs(J_ * W_);
    for (std::size_t n = 0; n < hd.I; ++n) {
      for (std::size_t c = 0; c < obs.size(); ++c) obs[c] = history.observed(n + hd.I * c) ? 1 : 0;
      A_new.row(static_cast<Eigen::Index>(n)) = lsq_row_masked(h1.row(static_cast<Eigen::Index>(n)), obs, design);
    }
    const Matrix est = A_new * design;

    const std::size_t I2 = I_ + hd.I;
    std::vector<double> grown(I2 * J_ * W_);
    for (std::size_t c = 0; c < J_ * W_; ++c) {
      std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(c * I_), I_,
                  grown.begin() + static_cast<std::ptrdiff_t>(c * I2));
      for (std::size_t n = 0; n < hd.I; ++n) {
        const std::size_t src = n + hd.I * c;
        grown[I_ + n + I2 * c] = history.observed(src)
                                     ? history.values()[src]
                                     : est(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(c));
      }
    }
    Matrix A(static_cast<Eigen::Index>(I2), static_cast<Eigen::Index>(R_));
    A << cur.A, A_new;
    data_ = std::move(grown);
    I_ = I2;
    model_ = std::make_shared<const CpModel>(CpModel::from_factors(std::move(A), cur.B, cur.C));
  }

 private:
  struct Factors {
    Matrix A, B, C;
  };

  void check_slice(const Matrix& slice) const {
    if (static_cast<std::size_t>(slice.rows()) != I_ || static_cast<std::size_t>(slice.cols()) != J_) {
      throw DataError("slice is " + std::to_string(slice.rows()) + "x" + std::to_string(slice.cols()) +
                      ", expected " + std::to_string(I_) + "x" + std::to_string(J_));
    }
    if (!slice.allFinite()) throw DataError("slice has non-finite values");
  }

  // Drops the oldest slice, appends the new one and returns the initial
  // factors for the new window: A, B unchanged; C shifted up by one row with
  // the evicted loading c(t-W) seeding the last row.
  Factors slide(const Matrix& slice) {
    if (!warmed_up()) throw DataError("online step before warm-up completes");
    check_slice(slice);
    const std::size_t n = I_ * J_;
    std::copy(data_.begin() + static_cast<std::ptrdiff_t>(n), data_.end(), data_.begin());
    std::copy_n(slice.data(), n, data_.end() - static_cast<std::ptrdiff_t>(n));
    ++t_;
    const CpModel& prev = *model_;
    Factors f{prev.A, prev.B, Matrix(prev.C.rows(), prev.C.cols())};
    const Eigen::Index W = prev.C.rows();
    f.C.topRows(W - 1) = prev.C.bottomRows(W - 1);
    f.C.row(W - 1) = prev.C.row(0);
    return f;
  }

  void finish(CpModel m, const Matrix& slice, StepResult& out,
              std::chrono::steady_clock::time_point t0) {
    const RowVector ct = m.C.row(m.C.rows() - 1);
    out.residual = slice - m.A * ct.asDiagonal() * m.B.transpose();
    out.minute = t_;
    model_ = std::make_shared<const CpModel>(std::move(m));
    out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }

  std::size_t I_, J_, W_, R_;
  AlsConfig init_cfg_;
  std::vector<double> data_;  // Fortran order, oldest slice first
  std::shared_ptr<const CpModel> model_;
  std::int64_t t_ = -1;
};

/// Online-scheme defaults: FWO uses the offline ALS settings; PWO stops at a
/// relative window-fit change of 1e-4 or 20 inner iterations.
inline AlsConfig fwo_defaults() { return AlsConfig{}; }
inline AlsConfig pwo_defaults() {
  AlsConfig c;
  c.max_iters = 20;
  c.rel_change_tol = 1e-4;
  return c;
}

}  // namespace tensorad
