#pragma once

// End-to-end runs over synthetic data.
//
// DDoS: traffic -> attack injection -> Tr1/Tr2/Te split by day -> scaling
// from Tr1 -> residuals (offline: model fitted on Tr1 UD pairs, Tr2/Te UD
// pairs projected onto it; online: PWO over a sliding user window) -> six
// features (+ two GMM log densities) -> forest trained on Tr2, evaluated on
// Te -> MAP aggregation of per-home flags.
//
// QoS: latency/loss days -> preprocessing -> CP fit -> nine residual stats
// -> k-means -> cluster names -> per-node fractions.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "tensorad/cluster_qos.hpp"
#include "tensorad/cp_model.hpp"
#include "tensorad/datagen.hpp"
#include "tensorad/detect.hpp"
#include "tensorad/features_ddos.hpp"
#include "tensorad/residual_stream.hpp"

namespace tensorad {

enum class ResidualMode { offline, pwo, fwo };

inline std::string to_string(ResidualMode m) {
  switch (m) {
    case ResidualMode::offline: return "offline";
    case ResidualMode::pwo: return "pwo";
    case ResidualMode::fwo: return "fwo";
  }
  return "?";
}

inline ResidualMode parse_residual_mode(const std::string& s) {
  if (s == "offline") return ResidualMode::offline;
  if (s == "pwo") return ResidualMode::pwo;
  if (s == "fwo") return ResidualMode::fwo;
  throw DataError("unknown residual mode '" + s + "' (offline|pwo|fwo)");
}

struct DdosConfig {
  std::size_t n_users = 100;
  std::size_t n_days = 14;
  std::size_t tr1_days = 3;
  std::size_t tr2_days = 7;  // Te is the remaining days
  std::size_t rank = 2;
  std::uint64_t seed = 1;
  ResidualMode mode = ResidualMode::offline;
  std::size_t window = 1440;  // online modes: minutes in the window
  datagen::TrafficConfig traffic;
  datagen::AttackConfig attack;
  AlsConfig als;                       // offline fit and online warm-up fit
  AlsConfig stream = pwo_defaults();   // per-step settings for online modes
  ForestConfig forest;
  GmmConfig gmm;
  std::size_t max_negatives = 50000;   // normal minutes sampled for classifier training
  MapAggregatorParams map;             // n_homes and q are taken from the run

  std::size_t te_days() const { return n_days - tr1_days - tr2_days; }

  void validate() const {
    if (n_users < 1) throw DataError("ddos config: n_users must be >= 1");
    if (tr1_days < 1 || tr2_days < 1 || tr1_days + tr2_days >= n_days) {
      throw DataError("ddos config: need tr1_days >= 1, tr2_days >= 1 and at least one test day");
    }
    if (rank < 1) throw DataError("ddos config: rank must be >= 1");
    if (mode != ResidualMode::offline && (window < rank || window > tr1_days * datagen::kMinutes)) {
      throw DataError("ddos config: window must lie in [rank, tr1_days * 1440]");
    }
  }
};

/// Feature rows of one split with the labels and attack episodes that index them.
struct SplitFeatures {
  Matrix x;                           // rows x 6
  std::vector<std::uint8_t> y;
  std::vector<Episode> episodes;
  std::vector<std::size_t> entity;    // per row
  std::vector<std::size_t> minute;    // per row: minute since the start of the split
};

struct DdosRun {
  std::vector<datagen::TrafficDay> days;  // day-major
  datagen::GroundTruth truth;
  ScalingParams scaling;
  CpModel model;                           // offline model, or the window model after warm-up
  SplitFeatures tr2, te;
  Gmm2 gmm;
  double residual_seconds = 0.0;
  std::vector<double> step_seconds;        // online modes
};

namespace detail {

inline std::vector<const datagen::TrafficDay*> day_range(const std::vector<datagen::TrafficDay>& days,
                                                         std::size_t n_users, std::size_t d0, std::size_t d1) {
  std::vector<const datagen::TrafficDay*> out;
  for (std::size_t d = d0; d < d1; ++d) {
    for (std::size_t u = 0; u < n_users; ++u) out.push_back(&days[d * n_users + u]);
  }
  return out;
}

// Labels and episodes for feature rows laid out as row(u, d, k).
template <class RowOf>
void label_split(SplitFeatures& s, const std::vector<datagen::TrafficDay>& days, const datagen::GroundTruth& gt,
                 std::size_t n_users, std::size_t d0, std::size_t d1, RowOf row_of) {
  const std::size_t K = datagen::kMinutes;
  const std::size_t rows = n_users * (d1 - d0) * K;
  s.y.assign(rows, 0);
  s.entity.assign(rows, 0);
  s.minute.assign(rows, 0);
  for (std::size_t d = d0; d < d1; ++d) {
    for (std::size_t u = 0; u < n_users; ++u) {
      const auto& td = days[d * n_users + u];
      for (std::size_t k = 0; k < K; ++k) {
        const std::size_t r = row_of(u, d - d0, k);
        s.y[r] = td.attack[k];
        s.entity[r] = u;
        s.minute[r] = (d - d0) * K + k;
      }
    }
  }
  for (const auto& ev : gt.events) {
    if (ev.day < d0 || ev.day >= d1) continue;
    for (auto u : gt.infected) {
      Episode e{ev.id, {}};
      for (int m = ev.start; m < ev.start + ev.duration; ++m) e.samples.push_back(row_of(u, ev.day - d0, static_cast<std::size_t>(m)));
      s.episodes.push_back(std::move(e));
    }
  }
}

}  // namespace detail

/// Synthetic traffic with injected attacks, ordered day-major.
inline std::pair<std::vector<datagen::TrafficDay>, datagen::GroundTruth> ddos_dataset(const DdosConfig& cfg) {
  cfg.validate();
  return datagen::inject_attacks(datagen::gen_traffic(cfg.n_users, cfg.n_days, cfg.seed, cfg.traffic), cfg.attack,
                                 cfg.seed + 1);
}

/// Residual features for Tr2 and Te from an existing dataset.
inline DdosRun ddos_residuals(std::vector<datagen::TrafficDay> days, datagen::GroundTruth truth, const DdosConfig& cfg) {
  cfg.validate();
  const std::size_t U = cfg.n_users, K = datagen::kMinutes;
  const std::size_t d1 = cfg.tr1_days, d2 = cfg.tr1_days + cfg.tr2_days, d3 = cfg.n_days;
  if (days.size() != U * cfg.n_days) {
    throw DataError("ddos: expected " + std::to_string(U * cfg.n_days) + " user-days, got " + std::to_string(days.size()));
  }
  DdosRun run;
  run.days = std::move(days);
  run.truth = std::move(truth);
  run.scaling = fit_scaling(detail::day_range(run.days, U, 0, d1));
  const auto t0 = std::chrono::steady_clock::now();

  if (cfg.mode == ResidualMode::offline) {
    // Rows of a split tensor are (day, user) day-major; feature row = i*K + k.
    const Tensor3 tr1 = ud_tensor(detail::day_range(run.days, U, 0, d1), run.scaling);
    run.model = als_fit(tr1, cfg.rank, cfg.als);
    const Projector proj(run.model);
    auto build = [&](std::size_t a, std::size_t b, SplitFeatures& s) {
      const Tensor3 x = ud_tensor(detail::day_range(run.days, U, a, b), run.scaling);
      s.x = extract_features(proj.project_all(x).second);
      detail::label_split(s, run.days, run.truth, U, a, b,
                          [&](std::size_t u, std::size_t d, std::size_t k) { return (d * U + u) * K + k; });
    };
    build(d1, d2, run.tr2);
    build(d2, d3, run.te);
  } else {
    // Online: users x metrics x minute stream. The window is warmed up on the
    // last `window` minutes of Tr1; every later minute yields one residual
    // slice. Feature row = minute * U + user.
    TensorWindow win(U, 4, cfg.window, cfg.rank, cfg.als);
    auto slice_at = [&](std::size_t t) {
      const std::size_t d = t / K, k = t % K;
      Matrix s(static_cast<Eigen::Index>(U), 4);
      for (std::size_t u = 0; u < U; ++u) {
        for (std::size_t j = 0; j < 4; ++j) {
          s(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(j)) = run.scaling.apply(j, run.days[d * U + u].series[j][k]);
        }
      }
      return s;
    };
    for (std::size_t t = d1 * K - cfg.window; t < d1 * K; ++t) win.push(slice_at(t));
    run.model = win.model();
    auto build = [&](std::size_t a, std::size_t b, SplitFeatures& s) {
      s.x.resize(static_cast<Eigen::Index>((b - a) * K * U), 6);
      for (std::size_t t = a * K; t < b * K; ++t) {
        const auto st = cfg.mode == ResidualMode::pwo ? win.pwo_step(slice_at(t), cfg.stream)
                                                      : win.fwo_step(slice_at(t), cfg.stream);
        run.step_seconds.push_back(st.wall_seconds);
        for (std::size_t u = 0; u < U; ++u) {
          const auto e = st.residual.row(static_cast<Eigen::Index>(u));
          const auto f = base_features(e(0), e(1), e(2), e(3));
          const auto row = static_cast<Eigen::Index>((t - a * K) * U + u);
          for (Eigen::Index c = 0; c < 6; ++c) s.x(row, c) = f[static_cast<std::size_t>(c)];
        }
      }
      detail::label_split(s, run.days, run.truth, U, a, b,
                          [&](std::size_t u, std::size_t d, std::size_t k) { return (d * K + k) * U + u; });
    };
    build(d1, d2, run.tr2);
    build(d2, d3, run.te);
  }
  run.residual_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return run;
}

/// Tr2 rows used for training: every attack minute plus up to max_negatives
/// normal minutes drawn without replacement.
inline std::vector<std::size_t> training_rows(const SplitFeatures& s, std::size_t max_negatives, std::uint64_t seed) {
  std::vector<std::size_t> pos, neg;
  for (std::size_t r = 0; r < s.y.size(); ++r) (s.y[r] ? pos : neg).push_back(r);
  if (neg.size() > max_negatives) {
    std::mt19937_64 rng(seed);
    std::shuffle(neg.begin(), neg.end(), rng);
    neg.resize(max_negatives);
  }
  pos.insert(pos.end(), neg.begin(), neg.end());
  std::sort(pos.begin(), pos.end());
  return pos;
}

/// Mixture fitted to the Tr2 attack minutes and an equal number of normal
/// minutes, so that one component settles on each.
inline Gmm2 fit_ddos_gmm(const SplitFeatures& tr2, std::uint64_t seed, const GmmConfig& cfg = {}) {
  std::vector<std::size_t> pos, neg;
  for (std::size_t r = 0; r < tr2.y.size(); ++r) (tr2.y[r] ? pos : neg).push_back(r);
  if (pos.empty()) throw DataError("fit_ddos_gmm: no attack minutes in the training split");
  std::mt19937_64 rng(seed);
  std::shuffle(neg.begin(), neg.end(), rng);
  neg.resize(std::min(neg.size(), pos.size()));
  pos.insert(pos.end(), neg.begin(), neg.end());
  Matrix x(static_cast<Eigen::Index>(pos.size()), tr2.x.cols());
  for (std::size_t i = 0; i < pos.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = tr2.x.row(static_cast<Eigen::Index>(pos[i]));
  return fit_gmm2(x, seed, cfg);
}

inline Matrix with_gmm_features(const Matrix& x, const Gmm2& g) {
  Matrix out(x.rows(), x.cols() + 2);
  out << x, gmm_likelihood_features(x, g);
  return out;
}

struct DetectorResult {
  std::size_t n_features = 0;
  EvalReport report;
  std::vector<double> importance;
  std::vector<std::uint8_t> pred;  // per Te row
  double train_seconds = 0.0;
};

inline DetectorResult run_detector(const SplitFeatures& tr2, const SplitFeatures& te, const Matrix& train_x,
                                   const Matrix& test_x, const std::vector<std::size_t>& rows,
                                   const ForestConfig& fcfg) {
  DetectorResult r;
  r.n_features = static_cast<std::size_t>(train_x.cols());
  Matrix xs(static_cast<Eigen::Index>(rows.size()), train_x.cols());
  std::vector<std::uint8_t> ys(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    xs.row(static_cast<Eigen::Index>(i)) = train_x.row(static_cast<Eigen::Index>(rows[i]));
    ys[i] = tr2.y[rows[i]];
  }
  const auto t0 = std::chrono::steady_clock::now();
  const ForestModel f = train_forest(xs, ys, fcfg);
  r.train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.importance = gini_importance(f);
  r.pred = f.predict(test_x);
  r.report = evaluate(r.pred, te.y, te.episodes);
  return r;
}

struct SyncResult {
  MapThreshold threshold;
  MapAggregatorParams params;
  double p_fp = 0.0, p_rc = 0.0;     // per-home rates measured on Te
  std::size_t attack_minutes = 0, detected_minutes = 0, false_minutes = 0, total_minutes = 0;
  std::size_t attacks = 0, attacks_detected = 0;
};

/// Synchronized-attack verdicts on Te from per-home forest flags. The MAP
/// threshold uses the configured probabilities with n_homes and q from the run.
inline SyncResult synchronize(const DdosRun& run, const std::vector<std::uint8_t>& pred, const DdosConfig& cfg) {
  SyncResult s;
  const std::size_t U = cfg.n_users, T = cfg.te_days() * datagen::kMinutes;
  std::vector<std::vector<std::uint8_t>> flags(U, std::vector<std::uint8_t>(T, 0));
  double fp = 0, neg = 0, tp = 0, pos = 0;
  for (std::size_t r = 0; r < pred.size(); ++r) {
    flags[run.te.entity[r]][run.te.minute[r]] = pred[r];
    if (run.te.y[r]) {
      pos += 1;
      tp += pred[r];
    } else {
      neg += 1;
      fp += pred[r];
    }
  }
  s.p_fp = neg > 0 ? fp / neg : 0.0;
  s.p_rc = pos > 0 ? tp / pos : 0.0;
  s.params = cfg.map;
  s.params.n_homes = U;
  s.params.q = cfg.attack.q;
  s.threshold = map_threshold(s.params);
  const auto verdict = aggregate_sync(flags, s.threshold.threshold);
  const std::size_t d0 = cfg.tr1_days + cfg.tr2_days;
  std::vector<std::uint8_t> attack(T, 0);
  for (const auto& ev : run.truth.events) {
    if (ev.day < d0) continue;
    ++s.attacks;
    bool hit = false;
    for (int m = ev.start; m < ev.start + ev.duration; ++m) {
      const std::size_t t = (ev.day - d0) * datagen::kMinutes + static_cast<std::size_t>(m);
      attack[t] = 1;
      hit = hit || verdict[t];
    }
    s.attacks_detected += hit;
  }
  s.total_minutes = T;
  for (std::size_t t = 0; t < T; ++t) {
    s.attack_minutes += attack[t];
    s.detected_minutes += attack[t] && verdict[t];
    s.false_minutes += !attack[t] && verdict[t];
  }
  return s;
}

struct DdosResult {
  DetectorResult six, eight;
  SyncResult sync;
  std::size_t train_rows = 0;
  double seconds = 0.0;
};

/// Forest on the six base features and on six + two GMM features.
inline DdosResult ddos_detect(DdosRun& run, const DdosConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  DdosResult r;
  const auto rows = training_rows(run.tr2, cfg.max_negatives, cfg.seed + 7);
  r.train_rows = rows.size();
  r.six = run_detector(run.tr2, run.te, run.tr2.x, run.te.x, rows, cfg.forest);
  run.gmm = fit_ddos_gmm(run.tr2, cfg.seed + 11, cfg.gmm);
  r.eight = run_detector(run.tr2, run.te, with_gmm_features(run.tr2.x, run.gmm), with_gmm_features(run.te.x, run.gmm),
                         rows, cfg.forest);
  r.sync = synchronize(run, r.eight.pred, cfg);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

// ---------------------------------------------------------------- QoS

struct QosPipelineConfig {
  std::size_t n_users = 60;
  std::size_t n_days = 14;
  std::size_t regions = 2;
  std::size_t aggs_per_region = 3;
  std::uint64_t seed = 1;
  std::size_t rank = 4;
  std::size_t k = 5;
  datagen::QosConfig gen;
  datagen::BackgroundRates background;
  QosPreprocessConfig preprocess;
  AlsConfig als;
  KMeansConfig kmeans;
};

struct QosRun {
  datagen::Topology topo;
  std::vector<datagen::QosEvent> events;
  std::vector<datagen::QosDay> days;
  QosTensor tensor;
  CpModel model;
  QosFeatures features;
  ClusterModel clusters;
  std::vector<ClusterSummary> summaries;
  std::vector<RegionSummary> regions;

  /// Cluster labels carrying a given name.
  std::vector<int> labels_named(const std::string& name) const {
    std::vector<int> out;
    for (std::size_t c = 0; c < summaries.size(); ++c) {
      if (summaries[c].name == name) out.push_back(static_cast<int>(c));
    }
    return out;
  }
};

/// Full QoS analysis on already generated days.
inline QosRun qos_analyze(datagen::Topology topo, std::vector<datagen::QosEvent> events,
                          std::vector<datagen::QosDay> days, const QosPipelineConfig& cfg) {
  QosRun run;
  run.topo = std::move(topo);
  run.events = std::move(events);
  run.days = std::move(days);
  run.tensor = qos_preprocess(run.days, cfg.preprocess);
  run.model = als_fit(run.tensor.x, cfg.rank, cfg.als);
  run.features = qos_residual_stats(residual(run.tensor.x, run.model), run.tensor);
  run.clusters = kmeans(run.features.f, cfg.k, cfg.seed, cfg.kmeans);
  run.summaries = summarize_clusters(run.clusters.labels, cfg.k, run.tensor, run.days);
  name_clusters(run.summaries);
  run.regions = spatial_correlate(run.clusters.labels, cfg.k, run.tensor, run.days, run.topo);
  return run;
}

/// Generates a topology, background events plus `planted`, and the days.
inline QosRun qos_pipeline(const QosPipelineConfig& cfg, const std::vector<datagen::QosEvent>& planted = {}) {
  auto topo = datagen::make_tree(cfg.n_users, cfg.regions, cfg.aggs_per_region);
  auto events = datagen::background_events(topo, cfg.n_days, cfg.seed + 1, cfg.background);
  events.insert(events.end(), planted.begin(), planted.end());
  auto days = datagen::gen_qos(cfg.n_users, cfg.n_days, topo, events, cfg.seed + 2, cfg.gen);
  return qos_analyze(std::move(topo), std::move(events), std::move(days), cfg);
}

}  // namespace tensorad
