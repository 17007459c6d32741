#pragma once

// PARAFAC (CP) models fitted by alternating least squares.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "tensorad/error.hpp"
#include "tensorad/tensor.hpp"

namespace tensorad {

/// Bookkeeping attached to a fitted model.
struct FitInfo {
  std::size_t iterations = 0;
  double final_fit = 0.0;            // Frobenius norm of the observed residual
  std::uint64_t seed = 0;
  bool converged = false;
  bool degenerate = false;           // two components reached congruence > 0.999
  std::vector<double> fit_history;   // fit after each full sweep
};

/// Rank-R PARAFAC model: M(i,j,k) = sum_r w_r A(i,r) B(j,r) C(k,r).
///
/// `weights` holds the component norms when the factors are normalized to
/// unit columns; models produced by the online schemes keep raw factors and
/// unit weights.
struct CpModel {
  Matrix A, B, C;
  Vector weights;
  FitInfo info;

  std::size_t rank() const { return static_cast<std::size_t>(A.cols()); }
  Dims dims() const {
    return {static_cast<std::size_t>(A.rows()), static_cast<std::size_t>(B.rows()),
            static_cast<std::size_t>(C.rows())};
  }

  /// Factor matrix for mode 1, 2 or 3.
  const Matrix& factor(int mode) const {
    switch (mode) {
      case 1: return A;
      case 2: return B;
      case 3: return C;
      default: throw std::invalid_argument("factor: mode must be 1, 2 or 3");
    }
  }

  void validate() const {
    detail::require(A.cols() >= 1, "model rank must be positive");
    detail::require(B.cols() == A.cols() && C.cols() == A.cols() && weights.size() == A.cols(),
                    "model factors disagree on rank");
    detail::require(A.rows() >= 1 && B.rows() >= 1 && C.rows() >= 1, "model dims must be positive");
    detail::require(A.allFinite() && B.allFinite() && C.allFinite() && weights.allFinite(),
                    "model has non-finite entries");
  }

  /// A with the component weights folded in.
  Matrix weighted_A() const { return A * weights.asDiagonal(); }

  static CpModel from_factors(Matrix a, Matrix b, Matrix c) {
    CpModel m;
    m.weights = Vector::Ones(a.cols());
    m.A = std::move(a);
    m.B = std::move(b);
    m.C = std::move(c);
    m.validate();
    return m;
  }
};

/// ALS settings. Defaults: stop when the relative change of the observed fit
/// drops below 1e-6 or after 200 sweeps.
struct AlsConfig {
  std::size_t max_iters = 200;
  double rel_change_tol = 1e-6;
  std::uint64_t seed = 0;
  /// Initial factors; uniform [0,1) random factors when empty.
  std::optional<CpModel> warm_start;
  /// Rescale the result to unit-norm columns with weights (sorted by weight).
  bool normalize = true;

  void validate() const {
    if (max_iters < 1) throw std::invalid_argument("AlsConfig.max_iters must be >= 1");
    if (!(rel_change_tol > 0.0)) throw std::invalid_argument("AlsConfig.rel_change_tol must be > 0");
  }
};

/// Tucker congruence coefficient <u,v> / (|u| |v|).
inline double tcc(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size() || u.empty()) throw DataError("tcc: vectors must have equal nonzero length");
  double mu = 0.0, mv = 0.0;
  for (std::size_t n = 0; n < u.size(); ++n) {
    mu = std::max(mu, std::abs(u[n]));
    mv = std::max(mv, std::abs(v[n]));
  }
  if (mu == 0.0 || mv == 0.0) throw DataError("tcc: zero vector");
  // Max-abs scaling keeps the sums in range; sqrt(uu * vv) makes tcc(u, u) exactly 1.
  double uv = 0.0, uu = 0.0, vv = 0.0;
  for (std::size_t n = 0; n < u.size(); ++n) {
    const double a = u[n] / mu, b = v[n] / mv;
    uv += a * b;
    uu += a * a;
    vv += b * b;
  }
  return std::clamp(uv / std::sqrt(uu * vv), -1.0, 1.0);
}

inline double tcc(const Vector& u, const Vector& v) {
  return tcc(std::span<const double>(u.data(), static_cast<std::size_t>(u.size())),
             std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
}

namespace detail {

// Congruence that treats zero columns as uncorrelated instead of failing.
inline double column_tcc(const Matrix& p, Eigen::Index r, const Matrix& q, Eigen::Index s) {
  const double np = p.col(r).norm(), nq = q.col(s).norm();
  if (np == 0.0 || nq == 0.0) return 0.0;
  return std::clamp(p.col(r).dot(q.col(s)) / (np * nq), -1.0, 1.0);
}

inline bool has_degenerate_pair(const Matrix& A, const Matrix& B, const Matrix& C) {
  for (Eigen::Index r = 0; r < A.cols(); ++r) {
    for (Eigen::Index s = r + 1; s < A.cols(); ++s) {
      const double cong = column_tcc(A, r, A, s) * column_tcc(B, r, B, s) * column_tcc(C, r, C, s);
      if (std::abs(cong) > 0.999) return true;
    }
  }
  return false;
}

inline Matrix uniform_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = u(rng);
  }
  return m;
}

// Matricized tensor times Khatri-Rao product for each mode, computed from the
// Fortran-ordered buffer without forming the mode-2 unfolding.
inline Matrix mttkrp(std::span<const double> x, const Dims& d, int mode, const Matrix& A,
                     const Matrix& B, const Matrix& C) {
  const auto I = static_cast<Eigen::Index>(d.I), J = static_cast<Eigen::Index>(d.J),
             K = static_cast<Eigen::Index>(d.K);
  switch (mode) {
    case 1: {
      Eigen::Map<const Matrix> x1(x.data(), I, J * K);
      return x1 * khatri_rao(C, B);
    }
    case 2: {
      Matrix out = Matrix::Zero(J, A.cols());
      for (Eigen::Index k = 0; k < K; ++k) {
        Eigen::Map<const Matrix> slab(x.data() + I * J * k, I, J);
        out.noalias() += (slab.transpose() * A) * C.row(k).asDiagonal();
      }
      return out;
    }
    default: {
      Eigen::Map<const Matrix> x3t(x.data(), I * J, K);
      return x3t.transpose() * khatri_rao(B, A);
    }
  }
}

// Least-squares factor update given the MTTKRP and the two other factors:
// F = mttkrp * ((P^T P) .* (Q^T Q))^+, identical to X_(n) ((P kr Q)^T)^+.
inline Matrix factor_update(const Matrix& mttkrp_out, const Matrix& P, const Matrix& Q) {
  const Matrix gram = (P.transpose() * P).cwiseProduct(Q.transpose() * Q);
  return mttkrp_out * pinv(gram);
}

// Reconstruction in Fortran order as an IJ x K matrix.
inline Matrix reconstruct_ijk(const Matrix& A, const Matrix& B, const Matrix& C) {
  return khatri_rao(B, A) * C.transpose();
}

inline void check_observed_slices(const Tensor3& x) {
  if (!x.has_mask()) return;
  const auto [I, J, K] = x.dims();
  std::vector<std::size_t> ci(I, 0), cj(J, 0), ck(K, 0);
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t j = 0; j < J; ++j) {
      for (std::size_t i = 0; i < I; ++i) {
        if (x.observed(i + I * (j + J * k))) {
          ++ci[i];
          ++cj[j];
          ++ck[k];
        }
      }
    }
  }
  auto empty = [](const std::vector<std::size_t>& c) {
    return std::find(c.begin(), c.end(), std::size_t{0}) != c.end();
  };
  if (empty(ci) || empty(cj) || empty(ck)) {
    throw DataError("als_fit: a tensor slice has no observed entries");
  }
}

// Unit-norm columns, weights = product of norms, components sorted by weight.
inline void normalize_model(CpModel& m) {
  const Eigen::Index R = m.A.cols();
  Vector w(R);
  for (Eigen::Index r = 0; r < R; ++r) {
    const double na = m.A.col(r).norm(), nb = m.B.col(r).norm(), nc = m.C.col(r).norm();
    w(r) = m.weights(r) * na * nb * nc;
    if (na > 0) m.A.col(r) /= na;
    if (nb > 0) m.B.col(r) /= nb;
    if (nc > 0) m.C.col(r) /= nc;
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(R));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return w(a) > w(b); });
  m.A = m.A(Eigen::all, order).eval();
  m.B = m.B(Eigen::all, order).eval();
  m.C = m.C(Eigen::all, order).eval();
  m.weights = w(order).eval();
}

}  // namespace detail

/// Fits a rank-R PARAFAC model by alternating least squares.
///
/// Each sweep solves A, B and C in turn, each an exact least-squares problem
/// with the other two fixed. Missing entries (mask) are handled by EM
/// imputation: they start at the mean of the observed entries and are
/// replaced with the model estimate after every sweep. `info.fit_history`
/// records the observed-entry residual norm after each sweep.
inline CpModel als_fit(const Tensor3& x, std::size_t R, const AlsConfig& cfg = {}) {
  cfg.validate();
  if (R < 1) throw std::invalid_argument("als_fit: rank must be >= 1");
  detail::check_observed_slices(x);
  const Dims d = x.dims();

  std::vector<double> z(x.values().begin(), x.values().end());
  std::vector<std::size_t> missing;
  if (x.has_mask()) {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t p = 0; p < z.size(); ++p) {
      if (x.observed(p)) {
        sum += z[p];
        ++n;
      } else {
        missing.push_back(p);
      }
    }
    const double mean = sum / static_cast<double>(n);
    for (std::size_t p : missing) z[p] = mean;
  }

  Matrix A, B, C;
  if (cfg.warm_start) {
    const CpModel& ws = *cfg.warm_start;
    ws.validate();
    if (ws.rank() != R || !(ws.dims() == d)) {
      throw DataError("als_fit: warm start has rank " + std::to_string(ws.rank()) + " and dims " +
                      to_string(ws.dims()) + ", expected rank " + std::to_string(R) + " and " +
                      to_string(d));
    }
    A = ws.weighted_A();
    B = ws.B;
    C = ws.C;
  } else {
    std::mt19937_64 rng(cfg.seed);
    A = detail::uniform_matrix(d.I, R, rng);
    B = detail::uniform_matrix(d.J, R, rng);
    C = detail::uniform_matrix(d.K, R, rng);
  }

  const std::span<const double> zs(z);
  FitInfo info;
  info.seed = cfg.seed;
  const auto ijk = x.values();
  double prev = std::numeric_limits<double>::quiet_NaN();
  double xss = 0.0;
  for (std::size_t p = 0; p < z.size(); ++p) {
    if (missing.empty() || x.observed(p)) xss += ijk[p] * ijk[p];
  }
  const double exact_fit = 64.0 * std::numeric_limits<double>::epsilon() * std::sqrt(xss);
  for (std::size_t it = 1; it <= cfg.max_iters; ++it) {
    A = detail::factor_update(detail::mttkrp(zs, d, 1, A, B, C), C, B);
    B = detail::factor_update(detail::mttkrp(zs, d, 2, A, B, C), C, A);
    C = detail::factor_update(detail::mttkrp(zs, d, 3, A, B, C), B, A);

    const Matrix model = detail::reconstruct_ijk(A, B, C);
    const double* mv = model.data();
    double ss = 0.0;
    if (missing.empty()) {
      for (std::size_t p = 0; p < z.size(); ++p) ss += (ijk[p] - mv[p]) * (ijk[p] - mv[p]);
    } else {
      for (std::size_t p = 0; p < z.size(); ++p) {
        if (x.observed(p)) ss += (ijk[p] - mv[p]) * (ijk[p] - mv[p]);
      }
      for (std::size_t p : missing) z[p] = mv[p];
    }
    const double fit = std::sqrt(ss);
    info.fit_history.push_back(fit);
    info.iterations = it;
    info.final_fit = fit;
    if (!info.degenerate && R > 1) info.degenerate = detail::has_degenerate_pair(A, B, C);
    if (!A.allFinite() || !B.allFinite() || !C.allFinite()) {
      throw NumericError("als_fit: factors diverged to non-finite values");
    }
    // A fit at rounding level is exact; its relative change is only noise.
    if (fit <= exact_fit || (it > 1 && std::abs(prev - fit) <= cfg.rel_change_tol * prev)) {
      info.converged = true;
      break;
    }
    prev = fit;
  }

  CpModel m;
  m.A = std::move(A);
  m.B = std::move(B);
  m.C = std::move(C);
  m.weights = Vector::Ones(static_cast<Eigen::Index>(R));
  m.info = std::move(info);
  if (cfg.normalize) detail::normalize_model(m);
  return m;
}

/// Dense tensor of model estimates.
inline Tensor3 reconstruct(const CpModel& m) {
  m.validate();
  const Matrix ijk = detail::reconstruct_ijk(m.weighted_A(), m.B, m.C);
  return Tensor3(m.dims(), std::vector<double>(ijk.data(), ijk.data() + ijk.size()));
}

/// Residual tensor x - reconstruct(m); unobserved positions stay masked.
inline Tensor3 residual(const Tensor3& x, const CpModel& m) {
  m.validate();
  if (!(x.dims() == m.dims())) {
    throw DataError("residual: tensor dims " + to_string(x.dims()) + " differ from model dims " +
                    to_string(m.dims()));
  }
  const Matrix ijk = detail::reconstruct_ijk(m.weighted_A(), m.B, m.C);
  const auto xv = x.values();
  std::vector<double> e(xv.size());
  for (std::size_t p = 0; p < e.size(); ++p) e[p] = x.observed(p) ? xv[p] - ijk.data()[p] : 0.0;
  return Tensor3(x.dims(), std::move(e), std::vector<std::uint8_t>(x.mask().begin(), x.mask().end()));
}

/// Column matching between two models of equal rank.
struct Alignment {
  std::vector<std::size_t> permutation;    // permutation[r]: column of `other` matched to ref column r
  std::vector<std::vector<int>> signs;     // signs[mode-1][r]; empty for modes not compared
  std::vector<double> mode_tcc;            // mean aligned congruence per mode, NaN if not compared
  std::vector<double> column_tcc;          // aligned congruence per ref column (mean over modes)
  double mean_tcc = 0.0;
};

/// Greedy maximum-congruence matching of the columns of `other` to those of
/// `ref` over the given modes (1 = A, 2 = B, 3 = C). Signs are chosen per
/// mode so that aligned congruences are non-negative.
inline Alignment align_factors(const CpModel& ref, const CpModel& other,
                               const std::vector<int>& modes = {1, 2, 3}) {
  if (ref.rank() != other.rank()) {
    throw DataError("align_factors: rank mismatch (" + std::to_string(ref.rank()) + " vs " +
                    std::to_string(other.rank()) + ")");
  }
  if (modes.empty()) throw std::invalid_argument("align_factors: no modes to compare");
  for (int mode : modes) {
    if (mode < 1 || mode > 3) throw std::invalid_argument("align_factors: bad mode");
    if (ref.factor(mode).rows() != other.factor(mode).rows()) {
      throw DataError("align_factors: mode-" + std::to_string(mode) + " sizes differ");
    }
  }
  const auto R = static_cast<Eigen::Index>(ref.rank());
  const double nm = static_cast<double>(modes.size());
  Matrix score = Matrix::Zero(R, R);
  for (int mode : modes) {
    for (Eigen::Index r = 0; r < R; ++r) {
      for (Eigen::Index s = 0; s < R; ++s) {
        score(r, s) += std::abs(detail::column_tcc(ref.factor(mode), r, other.factor(mode), s)) / nm;
      }
    }
  }

  Alignment out;
  out.permutation.assign(static_cast<std::size_t>(R), 0);
  std::vector<bool> ref_used(static_cast<std::size_t>(R), false), oth_used(static_cast<std::size_t>(R), false);
  for (Eigen::Index step = 0; step < R; ++step) {
    double best = -1.0;
    Eigen::Index br = 0, bs = 0;
    for (Eigen::Index r = 0; r < R; ++r) {
      if (ref_used[static_cast<std::size_t>(r)]) continue;
      for (Eigen::Index s = 0; s < R; ++s) {
        if (oth_used[static_cast<std::size_t>(s)]) continue;
        if (score(r, s) > best) {
          best = score(r, s);
          br = r;
          bs = s;
        }
      }
    }
    ref_used[static_cast<std::size_t>(br)] = true;
    oth_used[static_cast<std::size_t>(bs)] = true;
    out.permutation[static_cast<std::size_t>(br)] = static_cast<std::size_t>(bs);
  }

  out.signs.assign(3, {});
  out.mode_tcc.assign(3, std::numeric_limits<double>::quiet_NaN());
  out.column_tcc.assign(static_cast<std::size_t>(R), 0.0);
  for (int mode : modes) {
    auto& sg = out.signs[static_cast<std::size_t>(mode - 1)];
    sg.resize(static_cast<std::size_t>(R));
    double total = 0.0;
    for (Eigen::Index r = 0; r < R; ++r) {
      const auto s = static_cast<Eigen::Index>(out.permutation[static_cast<std::size_t>(r)]);
      const double c = detail::column_tcc(ref.factor(mode), r, other.factor(mode), s);
      sg[static_cast<std::size_t>(r)] = c < 0.0 ? -1 : 1;
      total += std::abs(c);
      out.column_tcc[static_cast<std::size_t>(r)] += std::abs(c) / nm;
    }
    out.mode_tcc[static_cast<std::size_t>(mode - 1)] = total / static_cast<double>(R);
  }
  out.mean_tcc = std::accumulate(out.column_tcc.begin(), out.column_tcc.end(), 0.0) /
                 static_cast<double>(R);
  return out;
}

/// One candidate rank in a split-half validation.
struct RankRecord {
  std::size_t rank = 0;
  double tcc_B = 0.0;
  double tcc_C = 0.0;
  double uniqueness = 1.0;  // min column congruence between equally good restarts
  bool accepted = false;
  bool degenerate = false;
};

struct RankValidationReport {
  std::vector<RankRecord> records;
  std::size_t chosen_rank = 0;  // 0 when no candidate was accepted
  double threshold = 0.85;
};

namespace detail {

inline double min_column_tcc(const Alignment& al) {
  return *std::min_element(al.column_tcc.begin(), al.column_tcc.end());
}

struct HalfFit {
  CpModel best;
  double uniqueness = 1.0;
};

// Best of `starts` random restarts. Restarts that reach (nearly) the same fit
// must also agree on all three factors; an over-factored model fits equally
// well from every start but lands on different factors.
inline HalfFit fit_half(const Tensor3& x, std::size_t R, const AlsConfig& cfg, std::size_t starts) {
  std::vector<CpModel> fits;
  for (std::size_t s = 0; s < starts; ++s) {
    AlsConfig c = cfg;
    c.seed = cfg.seed + 1000 * s;
    fits.push_back(als_fit(x, R, c));
  }
  std::size_t b = 0;
  for (std::size_t s = 1; s < fits.size(); ++s) {
    if (fits[s].info.final_fit < fits[b].info.final_fit) b = s;
  }
  HalfFit out;
  const double best_fit = fits[b].info.final_fit;
  const double slack = 1e-3 * best_fit + 1e-9 * x.norm();
  for (std::size_t s = 0; s < fits.size(); ++s) {
    if (s == b || fits[s].info.final_fit > best_fit + slack) continue;
    out.uniqueness = std::min(out.uniqueness, min_column_tcc(align_factors(fits[b], fits[s])));
  }
  out.best = std::move(fits[b]);
  return out;
}

}  // namespace detail

/// Split-half validation: the mode-1 slices are randomly split into two
/// halves and each half is fitted independently (best of `starts` random
/// restarts). A rank is accepted when the aligned mean congruence of both
/// the B and C factors across halves reaches `threshold` and, within each
/// half, restarts with equally good fits agree column by column to the same
/// threshold. With `repetitions` > 1 the congruences are averaged over
/// independent splits.
inline RankValidationReport split_half_validate(const Tensor3& x, const std::vector<std::size_t>& ranks,
                                                const AlsConfig& cfg = {}, double threshold = 0.85,
                                                std::size_t repetitions = 1, std::size_t starts = 3) {
  const Dims d = x.dims();
  if (d.I < 4) throw DataError("split_half_validate: need at least 4 mode-1 slices, got " + std::to_string(d.I));
  if (ranks.empty()) throw std::invalid_argument("split_half_validate: no candidate ranks");
  if (repetitions < 1) throw std::invalid_argument("split_half_validate: repetitions must be >= 1");
  if (starts < 1) throw std::invalid_argument("split_half_validate: starts must be >= 1");

  auto subtensor = [&](const std::vector<std::size_t>& rows) {
    Dims sd{rows.size(), d.J, d.K};
    std::vector<double> v(sd.size());
    std::vector<std::uint8_t> m(x.has_mask() ? sd.size() : 0);
    const auto xv = x.values();
    for (std::size_t k = 0; k < d.K; ++k) {
      for (std::size_t j = 0; j < d.J; ++j) {
        for (std::size_t n = 0; n < rows.size(); ++n) {
          const std::size_t src = rows[n] + d.I * (j + d.J * k);
          const std::size_t dst = n + sd.I * (j + sd.J * k);
          v[dst] = xv[src];
          if (!m.empty()) m[dst] = x.observed(src) ? 1 : 0;
        }
      }
    }
    return Tensor3(sd, std::move(v), std::move(m));
  };

  RankValidationReport report;
  report.threshold = threshold;
  for (std::size_t R : ranks) report.records.push_back({R, 0.0, 0.0, 1.0, false, false});

  for (std::size_t rep = 0; rep < repetitions; ++rep) {
    std::vector<std::size_t> order(d.I);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(cfg.seed + 7919 * (rep + 1));
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t half = d.I / 2;
    std::vector<std::size_t> first(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(half));
    std::vector<std::size_t> second(order.begin() + static_cast<std::ptrdiff_t>(half), order.end());
    std::sort(first.begin(), first.end());
    std::sort(second.begin(), second.end());
    const Tensor3 x1 = subtensor(first), x2 = subtensor(second);
    for (auto& rec : report.records) {
      const auto h1 = detail::fit_half(x1, rec.rank, cfg, starts);
      const auto h2 = detail::fit_half(x2, rec.rank, cfg, starts);
      const Alignment al = align_factors(h1.best, h2.best, {2, 3});
      rec.tcc_B += al.mode_tcc[1] / static_cast<double>(repetitions);
      rec.tcc_C += al.mode_tcc[2] / static_cast<double>(repetitions);
      rec.uniqueness = std::min({rec.uniqueness, h1.uniqueness, h2.uniqueness});
      rec.degenerate = rec.degenerate || h1.best.info.degenerate || h2.best.info.degenerate;
    }
  }
  for (auto& rec : report.records) {
    rec.accepted = std::min(rec.tcc_B, rec.tcc_C) >= threshold && rec.uniqueness >= threshold;
    if (rec.accepted) report.chosen_rank = std::max(report.chosen_rank, rec.rank);
  }
  return report;
}

}  // namespace tensorad
