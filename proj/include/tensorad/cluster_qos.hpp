#pragma once

// QoS degradation analysis: latency/loss preprocessing into a masked
// (entity-day x {latency, loss} x minute) tensor, nine residual statistics
// per entity-day, z-scored k-means with an elbow rule, cluster summaries and
// per-node spatial fractions over the topology tree.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "tensorad/datagen.hpp"
#include "tensorad/error.hpp"
#include "tensorad/tensor.hpp"

namespace tensorad {

inline const std::array<std::string, 9> kQosFeatureNames = {
    "lat_mean",      "lat_std",      "lat_p95",      "loss_ex1_mean", "loss_ex1_std",
    "loss_ex1_p95",  "loss_all_mean", "loss_all_std", "loss_all_p95"};

struct QosPreprocessConfig {
  double theta = 2.5;      // Mbps; samples taken under heavier user traffic are discarded
  std::size_t eta = 1000;  // minimum surviving loss samples (encoded ones included) to keep a day
};

/// Masked input tensor plus the bookkeeping needed to map rows back to days.
struct QosTensor {
  Tensor3 x;                          // log1p values, modes (entity-day, {latency, loss}, minute)
  std::vector<std::size_t> source;    // row -> index into the input days
  std::vector<std::uint8_t> loss_one; // row + n*minute: loss encoded as 1 for a missing sample
  std::vector<std::size_t> dropped;   // input days with fewer than eta surviving samples

  std::size_t rows() const { return source.size(); }
  bool is_loss_one(std::size_t row, std::size_t minute) const { return loss_one[row + rows() * minute] != 0; }
};

/// Per minute:
///   server offline         -> both metrics masked
///   no sample (client side)-> loss = 1 observed, latency masked
///   cross traffic > theta  -> both metrics masked
///   otherwise              -> both observed
/// Days whose loss series keeps fewer than eta minutes are dropped. Encoded
/// loss = 1 minutes count, otherwise long outages would never be seen.
/// Surviving values go through log(1 + v).
inline QosTensor qos_preprocess(const std::vector<datagen::QosDay>& days, const QosPreprocessConfig& cfg = {}) {
  if (!(cfg.theta > 0.0)) throw DataError("qos_preprocess: theta must be > 0");
  if (cfg.eta < 1) throw DataError("qos_preprocess: eta must be >= 1");
  constexpr std::size_t K = datagen::kMinutes;
  struct Row {
    std::size_t src;
    std::vector<double> lat, loss;
    std::vector<std::uint8_t> lat_ok, loss_ok, one;
  };
  std::vector<Row> rows;
  QosTensor out;
  for (std::size_t s = 0; s < days.size(); ++s) {
    const auto& d = days[s];
    if (d.latency.size() != K || d.loss.size() != K || d.cross_traffic.size() != K || d.missing.size() != K ||
        d.server_offline.size() != K) {
      throw DataError("qos_preprocess: entity " + std::to_string(d.entity) + " day " + std::to_string(d.day) +
                      " does not have 1440 minutes");
    }
    Row r{s, std::vector<double>(K, 0.0), std::vector<double>(K, 0.0), std::vector<std::uint8_t>(K, 0),
          std::vector<std::uint8_t>(K, 0), std::vector<std::uint8_t>(K, 0)};
    std::size_t surviving = 0;
    for (std::size_t m = 0; m < K; ++m) {
      if (d.server_offline[m]) continue;
      if (d.missing[m]) {
        r.loss[m] = std::log1p(1.0);
        r.loss_ok[m] = 1;
        r.one[m] = 1;
        ++surviving;
        continue;
      }
      if (d.cross_traffic[m] > cfg.theta) continue;
      if (!(d.latency[m] > 0.0) || !(d.loss[m] >= 0.0 && d.loss[m] <= 1.0)) {
        throw DataError("qos_preprocess: invalid sample for entity " + std::to_string(d.entity) + " day " +
                        std::to_string(d.day) + " minute " + std::to_string(m));
      }
      ++surviving;
      r.lat[m] = std::log1p(d.latency[m]);
      r.loss[m] = std::log1p(d.loss[m]);
      r.lat_ok[m] = r.loss_ok[m] = 1;
    }
    if (surviving < cfg.eta) {
      out.dropped.push_back(s);
      continue;
    }
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw DataError("qos_preprocess: every series has fewer than eta samples");

  const std::size_t n = rows.size();
  std::vector<double> v(n * 2 * K);
  std::vector<std::uint8_t> mask(n * 2 * K);
  out.loss_one.assign(n * K, 0);
  for (std::size_t i = 0; i < n; ++i) {
    out.source.push_back(rows[i].src);
    for (std::size_t m = 0; m < K; ++m) {
      v[i + n * (0 + 2 * m)] = rows[i].lat[m];
      mask[i + n * (0 + 2 * m)] = rows[i].lat_ok[m];
      v[i + n * (1 + 2 * m)] = rows[i].loss[m];
      mask[i + n * (1 + 2 * m)] = rows[i].loss_ok[m];
      out.loss_one[i + n * m] = rows[i].one[m];
    }
  }
  out.x = Tensor3(Dims{n, 2, K}, std::move(v), std::move(mask));
  return out;
}

// ---------------------------------------------------------------- statistics

struct SeriesStats {
  double mean = 0.0, std = 0.0, p95 = 0.0;
  bool present = false;
};

/// Population standard deviation and nearest-rank 95th percentile
/// (sorted[ceil(0.95 n) - 1]). An empty series gives zeros, not present.
inline SeriesStats series_stats(std::vector<double> v) {
  SeriesStats s;
  if (v.empty()) return s;
  s.present = true;
  const double n = static_cast<double>(v.size());
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(ss / n);
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * n));
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(rank - 1), v.end());
  s.p95 = v[rank - 1];
  return s;
}

struct QosFeatures {
  Matrix f;                            // rows x 9, order of kQosFeatureNames
  std::vector<std::uint8_t> ex1_present;  // 0: every observed loss sample was an encoded 1
};

/// Nine statistics per row of a residual tensor from qos_preprocess: latency
/// residuals, loss residuals without loss=1 minutes, and all loss residuals.
/// Missing "without loss=1" statistics are reported as zeros with the flag
/// cleared.
inline QosFeatures qos_residual_stats(const Tensor3& residual, const QosTensor& q) {
  const Dims d = residual.dims();
  if (d.J != 2 || d.I != q.rows() || d.K != datagen::kMinutes) {
    throw DataError("qos_residual_stats: residual dims " + to_string(d) + " do not match the preprocessed tensor");
  }
  QosFeatures out;
  out.f = Matrix::Zero(static_cast<Eigen::Index>(d.I), 9);
  out.ex1_present.assign(d.I, 0);
  std::vector<double> lat, ex1, all;
  for (std::size_t i = 0; i < d.I; ++i) {
    lat.clear();
    ex1.clear();
    all.clear();
    for (std::size_t m = 0; m < d.K; ++m) {
      if (residual.observed(i + d.I * (0 + 2 * m))) lat.push_back(residual.at(i, 0, m));
      if (residual.observed(i + d.I * (1 + 2 * m))) {
        all.push_back(residual.at(i, 1, m));
        if (!q.is_loss_one(i, m)) ex1.push_back(residual.at(i, 1, m));
      }
    }
    const std::array<SeriesStats, 3> st = {series_stats(lat), series_stats(ex1), series_stats(all)};
    out.ex1_present[i] = st[1].present ? 1 : 0;
    for (std::size_t s = 0; s < 3; ++s) {
      const auto c = static_cast<Eigen::Index>(3 * s);
      out.f(static_cast<Eigen::Index>(i), c) = st[s].mean;
      out.f(static_cast<Eigen::Index>(i), c + 1) = st[s].std;
      out.f(static_cast<Eigen::Index>(i), c + 2) = st[s].p95;
    }
  }
  return out;
}

// ---------------------------------------------------------------- clustering

struct ZScore {
  Vector mean, std;  // std of 0 stored as 1

  static ZScore fit(const Matrix& x) {
    ZScore z;
    z.mean = x.colwise().mean().transpose();
    z.std = ((x.rowwise() - z.mean.transpose()).array().square().colwise().mean()).sqrt().transpose();
    for (Eigen::Index c = 0; c < z.std.size(); ++c) {
      if (!(z.std(c) > 0.0)) z.std(c) = 1.0;
    }
    return z;
  }

  Matrix apply(const Matrix& x) const {
    if (x.cols() != mean.size()) throw DataError("zscore: feature count mismatch");
    return (x.rowwise() - mean.transpose()).array().rowwise() / std.transpose().array();
  }
};

struct ClusterModel {
  ZScore z;
  Matrix centroids;         // k x p, in z-scored space
  std::vector<int> labels;  // fitting points
  double inertia = 0.0;     // within-cluster sum of squares, z-scored space
  std::vector<double> inertia_history;  // per Lloyd iteration of the kept restart
  std::size_t iterations = 0;

  std::size_t k() const { return static_cast<std::size_t>(centroids.rows()); }

  std::vector<int> predict(const Matrix& x) const {
    const Matrix zx = z.apply(x);
    std::vector<int> out(static_cast<std::size_t>(zx.rows()));
    for (Eigen::Index i = 0; i < zx.rows(); ++i) {
      Eigen::Index best = 0;
      (centroids.rowwise() - zx.row(i)).rowwise().squaredNorm().minCoeff(&best);
      out[static_cast<std::size_t>(i)] = static_cast<int>(best);
    }
    return out;
  }
};

struct KMeansConfig {
  std::size_t n_init = 10;
  std::size_t max_iters = 300;
};

namespace detail {

inline std::size_t distinct_rows(const Matrix& x) {
  std::vector<std::vector<double>> rows(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    auto& r = rows[static_cast<std::size_t>(i)];
    r.resize(static_cast<std::size_t>(x.cols()));
    for (Eigen::Index c = 0; c < x.cols(); ++c) r[static_cast<std::size_t>(c)] = x(i, c);
  }
  std::sort(rows.begin(), rows.end());
  return static_cast<std::size_t>(std::unique(rows.begin(), rows.end()) - rows.begin());
}

struct LloydRun {
  Matrix centroids;
  std::vector<int> labels;
  double inertia = 0.0;
  std::vector<double> history;
  std::size_t iterations = 0;
};

inline LloydRun lloyd(const Matrix& x, std::size_t k, std::mt19937_64& rng, std::size_t max_iters) {
  const Eigen::Index n = x.rows(), kk = static_cast<Eigen::Index>(k);
  LloydRun run;
  run.centroids.resize(kk, x.cols());
  // k-means++ seeding.
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  run.centroids.row(0) = x.row(pick(rng));
  Vector d2 = (x.rowwise() - run.centroids.row(0)).rowwise().squaredNorm();
  for (Eigen::Index c = 1; c < kk; ++c) {
    std::discrete_distribution<Eigen::Index> by_d2(d2.data(), d2.data() + n);
    run.centroids.row(c) = x.row(by_d2(rng));
    d2 = d2.cwiseMin((x.rowwise() - run.centroids.row(c)).rowwise().squaredNorm());
  }
  run.labels.assign(static_cast<std::size_t>(n), -1);
  for (std::size_t it = 1; it <= max_iters; ++it) {
    bool changed = false;
    double wcss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index best = 0;
      wcss += (run.centroids.rowwise() - x.row(i)).rowwise().squaredNorm().minCoeff(&best);
      auto& l = run.labels[static_cast<std::size_t>(i)];
      changed = changed || l != static_cast<int>(best);
      l = static_cast<int>(best);
    }
    run.history.push_back(wcss);
    run.inertia = wcss;
    run.iterations = it;
    if (!changed) break;
    Matrix sum = Matrix::Zero(kk, x.cols());
    std::vector<double> cnt(k, 0.0);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto l = run.labels[static_cast<std::size_t>(i)];
      sum.row(l) += x.row(i);
      cnt[static_cast<std::size_t>(l)] += 1.0;
    }
    for (Eigen::Index c = 0; c < kk; ++c) {
      // An emptied cluster keeps its centroid.
      if (cnt[static_cast<std::size_t>(c)] > 0) run.centroids.row(c) = sum.row(c) / cnt[static_cast<std::size_t>(c)];
    }
  }
  return run;
}

}  // namespace detail

/// z-scores the points, then runs k-means++ seeded Lloyd iterations from
/// n_init restarts and keeps the lowest inertia.
inline ClusterModel kmeans(const Matrix& points, std::size_t k, std::uint64_t seed, const KMeansConfig& cfg = {}) {
  if (points.rows() < 1 || points.cols() < 1) throw DataError("kmeans: no points");
  if (!points.allFinite()) throw DataError("kmeans: non-finite features");
  if (k < 1) throw DataError("kmeans: k must be >= 1");
  const std::size_t distinct = detail::distinct_rows(points);
  if (k > distinct) {
    throw DataError("kmeans: k = " + std::to_string(k) + " exceeds the " + std::to_string(distinct) +
                    " distinct points");
  }
  ClusterModel m;
  m.z = ZScore::fit(points);
  const Matrix zx = m.z.apply(points);
  std::mt19937_64 rng(seed);
  detail::LloydRun best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < std::max<std::size_t>(cfg.n_init, 1); ++r) {
    auto run = detail::lloyd(zx, k, rng, cfg.max_iters);
    if (run.inertia < best.inertia) best = std::move(run);
  }
  m.centroids = std::move(best.centroids);
  m.labels = std::move(best.labels);
  m.inertia = best.inertia;
  m.inertia_history = std::move(best.history);
  m.iterations = best.iterations;
  return m;
}

struct ElbowResult {
  std::vector<std::size_t> ks;
  std::vector<double> inertia;
  std::size_t chosen = 0;
  double knee_distance = 0.0;  // distance to the endpoint chord, both axes scaled to [0, 1]
  double sharpness = 1.0;      // (I(k-1)/I(k)) / (I(k)/I(k+1)) at the chosen k
  bool low_confidence = true;
};

/// Inertia for each k in [k_min, k_max]; the knee is the point farthest from
/// the chord joining the curve's endpoints. The knee is flagged low
/// confidence when the drop into it is not clearly steeper than the drop out
/// of it (sharpness < min_sharpness).
inline ElbowResult elbow_select(const Matrix& points, std::size_t k_min, std::size_t k_max, std::uint64_t seed,
                                const KMeansConfig& cfg = {}, double min_sharpness = 2.0) {
  if (k_min < 1 || k_max < k_min) throw DataError("elbow_select: empty k range");
  ElbowResult r;
  for (std::size_t k = k_min; k <= k_max; ++k) {
    r.ks.push_back(k);
    r.inertia.push_back(kmeans(points, k, seed, cfg).inertia);
  }
  r.chosen = k_min;
  const std::size_t n = r.ks.size();
  if (n < 3) return r;
  const double lo = *std::min_element(r.inertia.begin(), r.inertia.end());
  const double hi = *std::max_element(r.inertia.begin(), r.inertia.end());
  if (!(hi > lo)) return r;
  auto px = [&](std::size_t i) { return static_cast<double>(i) / static_cast<double>(n - 1); };
  auto py = [&](std::size_t i) { return (r.inertia[i] - lo) / (hi - lo); };
  const double x0 = px(0), y0 = py(0), x1 = px(n - 1), y1 = py(n - 1);
  const double len = std::hypot(x1 - x0, y1 - y0);
  std::size_t best = 0;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double dist = std::abs((y1 - y0) * px(i) - (x1 - x0) * py(i) + x1 * y0 - y1 * x0) / len;
    if (dist > r.knee_distance) {
      r.knee_distance = dist;
      best = i;
    }
  }
  r.chosen = r.ks[best];
  if (best > 0 && best + 1 < n && r.inertia[best] > 0.0 && r.inertia[best + 1] > 0.0) {
    r.sharpness = (r.inertia[best - 1] / r.inertia[best]) / (r.inertia[best] / r.inertia[best + 1]);
  } else if (best > 0 && r.inertia[best] <= 0.0) {
    r.sharpness = std::numeric_limits<double>::infinity();  // knee reaches zero inertia
  }
  r.low_confidence = !(r.sharpness >= min_sharpness);
  return r;
}

// ---------------------------------------------------------------- summaries

struct ClusterSummary {
  std::size_t size = 0;
  std::vector<double> latency;  // per-minute median of (latency - that day's minimum latency), ms
  std::vector<double> loss;     // per-minute median of encoded loss
  std::vector<double> missing;  // per-minute fraction of member days without a sample
  double mean_latency = 0.0;    // mean of the latency series
  double mean_loss = 0.0;       // mean observed loss excluding encoded-1 minutes, over members
  double missing_fraction = 0.0;  // mean fraction of missing minutes per member day
  std::string name;             // C1..C5 after name_clusters
};

namespace detail {

inline double median_of(std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  const std::size_t h = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(h), v.end());
  const double upper = v[h];
  if (v.size() % 2) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(h));
  return 0.5 * (lower + upper);
}

}  // namespace detail

/// Per-cluster median profiles over member days, using raw (unlogged)
/// measurements at the minutes the preprocessing kept. Empty clusters get
/// size 0 and NaN series.
inline std::vector<ClusterSummary> summarize_clusters(const std::vector<int>& labels, std::size_t k,
                                                      const QosTensor& q,
                                                      const std::vector<datagen::QosDay>& days) {
  if (labels.size() != q.rows()) throw DataError("summarize_clusters: label count does not match tensor rows");
  constexpr std::size_t K = datagen::kMinutes;
  const std::size_t n = q.rows();
  std::vector<std::vector<std::size_t>> members(k);
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= k) throw DataError("summarize_clusters: label out of range");
    members[static_cast<std::size_t>(labels[i])].push_back(i);
  }
  // Latency minus each day's minimum observed latency.
  std::vector<std::vector<double>> norm_lat(n, std::vector<double>(K, std::numeric_limits<double>::quiet_NaN()));
  std::vector<double> loss_mean(n, 0.0), miss_frac(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& d = days.at(q.source[i]);
    double lo = std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < K; ++m) {
      if (q.x.observed(i + n * (0 + 2 * m))) lo = std::min(lo, d.latency[m]);
    }
    double ls = 0.0, lc = 0.0;
    for (std::size_t m = 0; m < K; ++m) {
      if (q.x.observed(i + n * (0 + 2 * m))) norm_lat[i][m] = d.latency[m] - lo;
      if (q.x.observed(i + n * (1 + 2 * m)) && !q.is_loss_one(i, m)) {
        ls += d.loss[m];
        lc += 1.0;
      }
      miss_frac[i] += d.missing[m] ? 1.0 : 0.0;
    }
    loss_mean[i] = lc > 0 ? ls / lc : 0.0;
    miss_frac[i] /= static_cast<double>(K);
  }
  std::vector<ClusterSummary> out(k);
  std::vector<double> buf;
  for (std::size_t c = 0; c < k; ++c) {
    auto& s = out[c];
    const auto& mem = members[c];
    s.size = mem.size();
    s.latency.assign(K, std::numeric_limits<double>::quiet_NaN());
    s.loss.assign(K, std::numeric_limits<double>::quiet_NaN());
    s.missing.assign(K, std::numeric_limits<double>::quiet_NaN());
    if (mem.empty()) {
      s.mean_latency = s.mean_loss = s.missing_fraction = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    double lat_sum = 0.0, lat_cnt = 0.0;
    for (std::size_t m = 0; m < K; ++m) {
      buf.clear();
      for (auto i : mem) {
        if (!std::isnan(norm_lat[i][m])) buf.push_back(norm_lat[i][m]);
      }
      s.latency[m] = detail::median_of(buf);
      if (!std::isnan(s.latency[m])) {
        lat_sum += s.latency[m];
        lat_cnt += 1.0;
      }
      buf.clear();
      double miss = 0.0;
      for (auto i : mem) {
        const auto& d = days[q.source[i]];
        if (q.x.observed(i + n * (1 + 2 * m))) buf.push_back(q.is_loss_one(i, m) ? 1.0 : d.loss[m]);
        miss += d.missing[m] ? 1.0 : 0.0;
      }
      s.loss[m] = detail::median_of(buf);
      s.missing[m] = miss / static_cast<double>(mem.size());
    }
    s.mean_latency = lat_cnt > 0 ? lat_sum / lat_cnt : 0.0;
    double ls = 0.0, mf = 0.0;
    for (auto i : mem) {
      ls += loss_mean[i];
      mf += miss_frac[i];
    }
    s.mean_loss = ls / static_cast<double>(mem.size());
    s.missing_fraction = mf / static_cast<double>(mem.size());
  }
  return out;
}

/// Assigns C1..C5. Every cluster whose missing fraction exceeds
/// `missing_floor` is an unavailability cluster: C5 when its loss is above
/// `loss_factor` times the lowest cluster loss, C4 otherwise (several clusters
/// may share either name). Among the rest the highest latency is C3, then the
/// highest loss C2; whatever remains is C1. Empty clusters are named "empty".
inline void name_clusters(std::vector<ClusterSummary>& s, double missing_floor = 0.01, double loss_factor = 2.0) {
  std::vector<std::size_t> live;
  for (std::size_t c = 0; c < s.size(); ++c) {
    s[c].name = s[c].size ? "C1" : "empty";
    if (s[c].size) live.push_back(c);
  }
  double base_loss = std::numeric_limits<double>::infinity();
  for (auto c : live) base_loss = std::min(base_loss, s[c].mean_loss);
  std::vector<std::size_t> unavail;
  for (auto c : live) {
    if (live.size() > 1 && s[c].missing_fraction > missing_floor) {
      unavail.push_back(c);
      s[c].name = s[c].mean_loss > loss_factor * base_loss ? "C5" : "C4";
    }
  }
  std::vector<std::size_t> rest;
  for (auto c : live) {
    if (std::find(unavail.begin(), unavail.end(), c) == unavail.end()) rest.push_back(c);
  }
  auto take_max = [&](auto key) {
    if (rest.size() < 2) return rest.size();
    std::size_t b = 0;
    for (std::size_t t = 1; t < rest.size(); ++t) {
      if (key(rest[t]) > key(rest[b])) b = t;
    }
    return b;
  };
  const std::size_t c3 = take_max([&](std::size_t c) { return s[c].mean_latency; });
  if (c3 < rest.size()) {
    s[rest[c3]].name = "C3";
    rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(c3));
  }
  const std::size_t c2 = take_max([&](std::size_t c) { return s[c].mean_loss; });
  if (c2 < rest.size()) s[rest[c2]].name = "C2";
}

// ---------------------------------------------------------------- spatial correlation

struct RegionSummary {
  int node = 0;
  std::string name;
  std::vector<std::size_t> count;                // kept entity-days per day
  std::vector<std::vector<double>> fraction;     // [day][cluster]; all zero when count is 0
};

/// Per tree node and day, the fraction of descendant entity-days assigned to
/// each cluster.
inline std::vector<RegionSummary> spatial_correlate(const std::vector<int>& labels, std::size_t k, const QosTensor& q,
                                                    const std::vector<datagen::QosDay>& days,
                                                    const datagen::Topology& topo) {
  if (labels.size() != q.rows()) throw DataError("spatial_correlate: label count does not match tensor rows");
  std::size_t n_days = 0;
  for (auto s : q.source) n_days = std::max(n_days, days.at(s).day + 1);
  std::vector<RegionSummary> out(topo.size());
  for (std::size_t n = 0; n < topo.size(); ++n) {
    out[n].node = static_cast<int>(n);
    out[n].name = topo.name[n];
    out[n].count.assign(n_days, 0);
    out[n].fraction.assign(n_days, std::vector<double>(k, 0.0));
  }
  for (std::size_t i = 0; i < q.rows(); ++i) {
    const auto& d = days[q.source[i]];
    if (d.entity >= topo.entity_leaf.size()) {
      throw DataError("spatial_correlate: entity " + std::to_string(d.entity) + " is not in the topology");
    }
    const auto c = static_cast<std::size_t>(labels[i]);
    if (c >= k) throw DataError("spatial_correlate: label out of range");
    for (int node = topo.entity_leaf[d.entity]; node >= 0; node = topo.parent[static_cast<std::size_t>(node)]) {
      auto& r = out[static_cast<std::size_t>(node)];
      ++r.count[d.day];
      r.fraction[d.day][c] += 1.0;
    }
  }
  for (auto& r : out) {
    for (std::size_t d = 0; d < n_days; ++d) {
      if (r.count[d] == 0) continue;
      for (auto& f : r.fraction[d]) f /= static_cast<double>(r.count[d]);
    }
  }
  return out;
}

/// Daily fraction of a node's entity-days in one cluster (the good-cluster
/// series when `cluster` is C1).
inline std::vector<double> cluster_fraction_series(const RegionSummary& r, std::size_t cluster) {
  std::vector<double> out;
  for (const auto& f : r.fraction) out.push_back(f.at(cluster));
  return out;
}

}  // namespace tensorad
