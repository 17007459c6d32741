#pragma once

// DDoS application features: log + min-max scaling, the six residual
// features per (UD pair, minute), and a diagonal two-component GMM whose
// per-component log densities serve as two extra features.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "tensorad/datagen.hpp"
#include "tensorad/error.hpp"
#include "tensorad/tensor.hpp"

namespace tensorad {

inline const std::array<std::string, 8> kDdosFeatureNames = {
    "down_bytes", "up_bytes", "down_pkts", "up_pkts", "diff_bytes", "diff_pkts", "gmm_logpdf_0", "gmm_logpdf_1"};

/// Per-metric bounds of log(1 + v) on the training split.
struct ScalingParams {
  std::vector<double> min, max;

  /// (log(1 + v) - min) / (max - min); a degenerate metric maps to 0.
  double apply(std::size_t metric, double v) const {
    if (v < 0.0) throw DataError("preprocess: negative traffic value " + std::to_string(v));
    const double span = max.at(metric) - min.at(metric);
    if (span <= 0.0) return 0.0;
    return (std::log1p(v) - min[metric]) / span;
  }
};

inline ScalingParams fit_scaling(const std::vector<const datagen::TrafficDay*>& days) {
  detail::require(!days.empty(), "fit_scaling: no training days");
  ScalingParams p;
  p.min.assign(4, std::numeric_limits<double>::infinity());
  p.max.assign(4, -std::numeric_limits<double>::infinity());
  for (const auto* d : days) {
    for (std::size_t j = 0; j < 4; ++j) {
      for (double v : d->series[j]) {
        if (v < 0.0) throw DataError("preprocess: negative traffic value " + std::to_string(v));
        const double l = std::log1p(v);
        p.min[j] = std::min(p.min[j], l);
        p.max[j] = std::max(p.max[j], l);
      }
    }
  }
  return p;
}

/// Scaled UD-pair tensor (days.size() x 4 x 1440), one mode-1 slice per day.
inline Tensor3 ud_tensor(const std::vector<const datagen::TrafficDay*>& days, const ScalingParams& s) {
  detail::require(!days.empty(), "ud_tensor: no days");
  const std::size_t I = days.size(), K = datagen::kMinutes;
  std::vector<double> v(I * 4 * K);
  for (std::size_t i = 0; i < I; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      const auto& series = days[i]->series[j];
      detail::require(series.size() == K, "ud_tensor: series must have 1440 minutes");
      for (std::size_t k = 0; k < K; ++k) v[i + I * (j + 4 * k)] = s.apply(j, series[k]);
    }
  }
  return Tensor3(Dims{I, 4, K}, std::move(v));
}

/// Six base features from the four metric residuals of one minute:
/// the residuals themselves, then upload - download for bytes and packets.
inline std::array<double, 6> base_features(double down_bytes, double up_bytes, double down_pkts, double up_pkts) {
  return {down_bytes, up_bytes, down_pkts, up_pkts, up_bytes - down_bytes, up_pkts - down_pkts};
}

/// Feature rows for every minute of every slice of a UD residual tensor
/// (I x 4 x K). Row index = i * K + k.
inline Matrix extract_features(const Tensor3& residual) {
  const Dims d = residual.dims();
  if (d.J != 4) throw DataError("extract_features: residual must have 4 metrics, got " + std::to_string(d.J));
  if (residual.has_mask() && residual.observed_count() != residual.size()) {
    throw DataError("extract_features: residual has missing metric values");
  }
  Matrix f(static_cast<Eigen::Index>(d.I * d.K), 6);
  for (std::size_t i = 0; i < d.I; ++i) {
    for (std::size_t k = 0; k < d.K; ++k) {
      const auto b = base_features(residual.at(i, 0, k), residual.at(i, 1, k), residual.at(i, 2, k),
                                   residual.at(i, 3, k));
      const auto row = static_cast<Eigen::Index>(i * d.K + k);
      for (Eigen::Index c = 0; c < 6; ++c) f(row, c) = b[static_cast<std::size_t>(c)];
    }
  }
  return f;
}

/// Two-component Gaussian mixture with diagonal covariances.
struct Gmm2 {
  std::array<double, 2> weight{0.5, 0.5};
  std::array<Vector, 2> mean;
  std::array<Vector, 2> var;
  std::vector<double> loglik_history;  // mean log-likelihood per EM iteration
  std::size_t iterations = 0;

  Eigen::Index dim() const { return mean[0].size(); }

  double log_density(std::size_t c, const Eigen::Ref<const RowVector>& x) const {
    double s = -0.5 * static_cast<double>(dim()) * std::log(2.0 * std::numbers::pi);
    for (Eigen::Index n = 0; n < dim(); ++n) {
      const double dx = x(n) - mean[c](n);
      s -= 0.5 * (std::log(var[c](n)) + dx * dx / var[c](n));
    }
    return s;
  }

  void validate() const {
    detail::require(mean[0].size() >= 1 && mean[1].size() == mean[0].size() && var[0].size() == mean[0].size() &&
                        var[1].size() == mean[0].size(),
                    "gmm: inconsistent dimensions");
    detail::require(weight[0] > 0 && weight[1] > 0 && std::abs(weight[0] + weight[1] - 1.0) < 1e-9,
                    "gmm: weights must be positive and sum to 1");
    detail::require((var[0].array() > 0).all() && (var[1].array() > 0).all(), "gmm: variances must be positive");
  }
};

struct GmmConfig {
  std::size_t max_iters = 200;
  double rel_tol = 1e-6;
  double var_floor = 1e-9;
};

namespace detail {

inline double log_sum_exp(double a, double b) {
  const double m = std::max(a, b);
  if (m == -std::numeric_limits<double>::infinity()) return m;
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// Two-means with k-means++ seeding; returns hard assignments.
inline std::vector<int> two_means(const Matrix& x, std::mt19937_64& rng) {
  const Eigen::Index n = x.rows();
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  RowVector c0 = x.row(pick(rng));
  std::vector<double> d2(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) d2[static_cast<std::size_t>(i)] = (x.row(i) - c0).squaredNorm();
  std::discrete_distribution<Eigen::Index> by_d2(d2.begin(), d2.end());
  RowVector c1 = x.row(by_d2(rng));
  std::vector<int> a(static_cast<std::size_t>(n), -1);
  for (int it = 0; it < 300; ++it) {
    bool changed = false;
    RowVector s0 = RowVector::Zero(x.cols()), s1 = RowVector::Zero(x.cols());
    double n0 = 0, n1 = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const int c = (x.row(i) - c0).squaredNorm() <= (x.row(i) - c1).squaredNorm() ? 0 : 1;
      changed = changed || c != a[static_cast<std::size_t>(i)];
      a[static_cast<std::size_t>(i)] = c;
      if (c == 0) {
        s0 += x.row(i);
        ++n0;
      } else {
        s1 += x.row(i);
        ++n1;
      }
    }
    if (n0 > 0) c0 = s0 / n0;
    if (n1 > 0) c1 = s1 / n1;
    if (!changed) break;
  }
  return a;
}

}  // namespace detail

/// EM for a diagonal two-component mixture, initialized from a 2-means
/// partition. Stops when the mean log-likelihood changes by less than
/// rel_tol (relative) or after max_iters iterations.
inline Gmm2 fit_gmm2(const Matrix& x, std::uint64_t seed, const GmmConfig& cfg = {}) {
  const Eigen::Index n = x.rows(), p = x.cols();
  if (n < 2 || p < 1) throw DataError("fit_gmm2: need at least 2 points");
  if (!x.allFinite()) throw DataError("fit_gmm2: non-finite features");
  bool distinct = false;
  for (Eigen::Index i = 1; i < n && !distinct; ++i) distinct = x.row(i) != x.row(0);
  if (!distinct) throw DataError("fit_gmm2: fewer than 2 distinct points");

  std::mt19937_64 rng(seed);
  const std::vector<int> a = detail::two_means(x, rng);
  Matrix resp(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    resp(i, 0) = a[static_cast<std::size_t>(i)] == 0 ? 1.0 : 0.0;
    resp(i, 1) = 1.0 - resp(i, 0);
  }

  Gmm2 g;
  auto m_step = [&] {
    for (std::size_t c = 0; c < 2; ++c) {
      const auto col = static_cast<Eigen::Index>(c);
      // An empty component restarts from one point so that weights stay positive.
      const double nk = std::max(resp.col(col).sum(), 1e-12);
      g.weight[c] = nk / static_cast<double>(n);
      g.mean[c] = (x.transpose() * resp.col(col)) / nk;
      Vector v(p);
      for (Eigen::Index j = 0; j < p; ++j) {
        v(j) = (resp.col(col).array() * (x.col(j).array() - g.mean[c](j)).square()).sum() / nk;
      }
      g.var[c] = v.cwiseMax(cfg.var_floor);
    }
    const double tot = g.weight[0] + g.weight[1];
    g.weight[0] /= tot;
    g.weight[1] /= tot;
  };

  m_step();
  double prev = -std::numeric_limits<double>::infinity();
  for (std::size_t it = 1; it <= cfg.max_iters; ++it) {
    double ll = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double l0 = std::log(g.weight[0]) + g.log_density(0, x.row(i));
      const double l1 = std::log(g.weight[1]) + g.log_density(1, x.row(i));
      const double lse = detail::log_sum_exp(l0, l1);
      resp(i, 0) = std::exp(l0 - lse);
      resp(i, 1) = std::exp(l1 - lse);
      ll += lse;
    }
    ll /= static_cast<double>(n);
    g.loglik_history.push_back(ll);
    g.iterations = it;
    if (std::isfinite(prev) && std::abs(ll - prev) <= cfg.rel_tol * std::abs(prev)) break;
    prev = ll;
    m_step();
  }
  return g;
}

/// Per-component log densities of each feature row (n x 2).
inline Matrix gmm_likelihood_features(const Matrix& f, const Gmm2& g) {
  if (f.cols() != g.dim()) {
    throw DataError("gmm_likelihood_features: features have " + std::to_string(f.cols()) +
                    " columns, model has " + std::to_string(g.dim()));
  }
  Matrix out(f.rows(), 2);
  for (Eigen::Index i = 0; i < f.rows(); ++i) {
    out(i, 0) = g.log_density(0, f.row(i));
    out(i, 1) = g.log_density(1, f.row(i));
  }
  return out;
}

}  // namespace tensorad
