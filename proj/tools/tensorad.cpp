// tensorad: generate | fit | validate-rank | stream | detect | cluster | report

#include <algorithm>
#include <iostream>
#include <sstream>

#include "cli_common.hpp"
#include "tensorad/dataset_io.hpp"
#include "tensorad/pipeline.hpp"

namespace tensorad::cli {
namespace {

// ---------------------------------------------------------------- datasets

struct TrafficData {
  std::vector<datagen::TrafficDay> days;
  datagen::GroundTruth truth;
  std::size_t n_users = 0, n_days = 0;
};

TrafficData load_traffic(const std::string& dir, RunDir& run) {
  const fs::path d(dir);
  for (const char* f : {"traffic.csv", "attacks.csv", "infected.csv"}) {
    if (!fs::exists(d / f)) throw DataError("data directory '" + dir + "' has no " + f);
    run.input(f, d / f);
  }
  auto attacks = csv::open_input((d / "attacks.csv").string());
  auto infected = csv::open_input((d / "infected.csv").string());
  TrafficData t;
  t.truth = io::read_ground_truth(attacks, infected);
  auto in = csv::open_input((d / "traffic.csv").string());
  t.days = io::read_traffic(in, t.truth);
  for (const auto& td : t.days) {
    t.n_users = std::max(t.n_users, td.entity + 1);
    t.n_days = std::max(t.n_days, td.day + 1);
  }
  return t;
}

struct QosData {
  std::vector<datagen::QosDay> days;
  datagen::Topology topo;
  std::vector<datagen::QosEvent> events;
  std::size_t n_users = 0, n_days = 0;
};

QosData load_qos(const std::string& dir, RunDir& run) {
  const fs::path d(dir);
  for (const char* f : {"qos.csv", "topology.csv"}) {
    if (!fs::exists(d / f)) throw DataError("data directory '" + dir + "' has no " + f);
    run.input(f, d / f);
  }
  QosData q;
  auto topo = csv::open_input((d / "topology.csv").string());
  q.topo = io::read_topology(topo);
  auto in = csv::open_input((d / "qos.csv").string());
  q.days = io::read_qos(in);
  if (fs::exists(d / "events.csv")) {
    run.input("events.csv", d / "events.csv");
    auto ev = csv::open_input((d / "events.csv").string());
    q.events = io::read_events(ev);
  }
  for (const auto& day : q.days) {
    q.n_users = std::max(q.n_users, day.entity + 1);
    q.n_days = std::max(q.n_days, day.day + 1);
  }
  if (q.topo.entity_leaf.size() != q.n_users) {
    throw DataError("topology.csv lists " + std::to_string(q.topo.entity_leaf.size()) + " entities, qos.csv has " +
                    std::to_string(q.n_users));
  }
  return q;
}

std::vector<std::size_t> parse_list(const std::string& s, const std::string& field) {
  std::vector<std::size_t> out;
  for (auto part : csv::split(s)) {
    const auto v = csv::to_int(part, field);
    require_field(v >= 1, field, "entries must be >= 1");
    out.push_back(static_cast<std::size_t>(v));
  }
  require_field(!out.empty(), field, "empty list");
  return out;
}

void write_factor(std::ostream& out, const Matrix& m, const std::string& index_name,
                  const std::function<std::string(Eigen::Index)>& label) {
  out << index_name;
  for (Eigen::Index r = 0; r < m.cols(); ++r) out << ",c" << r;
  out << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    out << label(i);
    for (Eigen::Index r = 0; r < m.cols(); ++r) out << ',' << m(i, r);
    out << '\n';
  }
}

// ---------------------------------------------------------------- generate

struct GenerateOpts {
  std::string kind = "traffic", out;
  std::size_t users = 0, days = 14, regions = 2, aggs = 3;
  std::uint64_t seed = 1;
  double q = 0.05, mu = 2.0, sd = 0.5, rate = 1.0, pkt_rate = 2000.0;
  std::string events;
  bool no_background = false;
};

void cmd_generate(const GenerateOpts& o, RunDir& run) {
  require_field(o.kind == "traffic" || o.kind == "qos", "kind", "must be 'traffic' or 'qos'");
  require_field(o.days >= 1, "days", "must be >= 1");
  if (o.kind == "traffic") {
    const std::size_t users = o.users ? o.users : 100;
    datagen::AttackConfig ac;
    ac.q = o.q;
    ac.mean_duration = o.mu;
    ac.sd_duration = o.sd;
    ac.attacks_per_day = o.rate;
    ac.pkt_rate = o.pkt_rate;
    require_field(o.q > 0.0 && o.q <= 1.0, "q", "must be in (0, 1]");
    require_field(o.q * static_cast<double>(users) >= 1.0 - 1e-9, "q", "q * users must be >= 1");
    require_field(o.mu >= 1.0, "mu", "must be >= 1 minute");
    require_field(o.sd >= 0.0, "sd-duration", "must be >= 0");
    require_field(o.rate >= 0.0, "attacks-per-day", "must be >= 0");
    require_field(o.pkt_rate > 0.0, "pkt-rate", "must be > 0");
    DdosConfig dc;
    dc.n_users = users;
    dc.n_days = o.days;
    dc.seed = o.seed;
    dc.attack = ac;
    auto [days, gt] = datagen::inject_attacks(datagen::gen_traffic(users, o.days, o.seed, dc.traffic), ac, o.seed + 1);
    auto t = run.open("traffic.csv");
    io::write_traffic(t, days);
    auto a = run.open("attacks.csv");
    io::write_attacks(a, gt);
    auto i = run.open("infected.csv");
    io::write_infected(i, gt);
    auto l = run.open("labels.csv");
    io::write_labels(l, gt);
    run.resolved["users"] = users;
    run.resolved["traffic_model"] = to_json(dc.traffic);
  } else {
    const std::size_t users = o.users ? o.users : 60;
    require_field(o.regions >= 1, "regions", "must be >= 1");
    require_field(o.aggs >= 1, "aggs", "must be >= 1");
    const auto topo = datagen::make_tree(users, o.regions, o.aggs);
    std::vector<datagen::QosEvent> events;
    if (!o.no_background) events = datagen::background_events(topo, o.days, o.seed + 1);
    if (!o.events.empty()) {
      run.input("planted_events", o.events);
      auto in = csv::open_input(o.events);
      const auto planted = io::read_events(in);
      for (const auto& e : planted) {
        require_field(e.day < o.days, "events", "event day " + std::to_string(e.day) + " beyond --days");
      }
      events.insert(events.end(), planted.begin(), planted.end());
    }
    const datagen::QosConfig gc;
    const auto days = datagen::gen_qos(users, o.days, topo, events, o.seed + 2, gc);
    auto q = run.open("qos.csv");
    io::write_qos(q, days);
    auto tp = run.open("topology.csv");
    io::write_topology(tp, topo);
    auto tj = run.open("topology.json");
    tj << to_json(topo).dump(1) << '\n';
    auto ev = run.open("events.csv");
    io::write_events(ev, events);
    run.resolved["users"] = users;
    run.resolved["qos_model"] = to_json(gc);
  }
}

// ---------------------------------------------------------------- fit / validate-rank

struct FitOpts {
  std::string data, out;
  std::size_t rank = 2, days = 3, max_iters = 200;
  double tol = 1e-6;
  std::uint64_t seed = 0;
};

std::pair<Tensor3, ScalingParams> training_tensor(const TrafficData& t, std::size_t days, const std::string& field) {
  require_field(days >= 1 && days <= t.n_days, field, "must lie in [1, " + std::to_string(t.n_days) + "]");
  const auto range = detail::day_range(t.days, t.n_users, 0, days);
  auto scaling = fit_scaling(range);
  return {ud_tensor(range, scaling), scaling};
}

void cmd_fit(const FitOpts& o, RunDir& run) {
  require_field(o.rank >= 1, "rank", "must be >= 1");
  require_field(o.max_iters >= 1, "max-iters", "must be >= 1");
  require_field(o.tol > 0.0, "tol", "must be > 0");
  const TrafficData t = load_traffic(o.data, run);
  const auto [x, scaling] = training_tensor(t, o.days, "days");
  AlsConfig cfg;
  cfg.max_iters = o.max_iters;
  cfg.rel_change_tol = o.tol;
  cfg.seed = o.seed;
  const CpModel m = als_fit(x, o.rank, cfg);
  auto mj = run.open("model.json");
  mj << json{{"cp", to_json(m)}, {"scaling", to_json(scaling)}}.dump(1) << '\n';
  auto fa = run.open("factor_A.csv");
  write_factor(fa, m.weighted_A(), "ud", [&](Eigen::Index i) {
    const auto u = static_cast<std::size_t>(i) % t.n_users, d = static_cast<std::size_t>(i) / t.n_users;
    return datagen::user_id(u) + "/d" + std::to_string(d);
  });
  auto fb = run.open("factor_B.csv");
  write_factor(fb, m.B, "metric", [](Eigen::Index i) { return datagen::kTrafficMetricNames[static_cast<std::size_t>(i)]; });
  auto fc = run.open("factor_C.csv");
  write_factor(fc, m.C, "minute", [](Eigen::Index i) { return std::to_string(i); });
  auto fh = run.open("fit_history.csv");
  fh << "sweep,fit\n";
  for (std::size_t s = 0; s < m.info.fit_history.size(); ++s) fh << s + 1 << ',' << m.info.fit_history[s] << '\n';
  std::cout << "rank " << o.rank << ": residual norm " << m.info.final_fit << " after " << m.info.iterations << " sweeps"
            << (m.info.converged ? "" : " (not converged)") << (m.info.degenerate ? ", degenerate components" : "")
            << '\n';
}

struct RankOpts {
  std::string data, out, ranks = "1,2,3,4";
  std::size_t days = 3, max_iters = 200, starts = 3, repetitions = 1;
  double tol = 1e-6, threshold = 0.85;
  std::uint64_t seed = 0;
};

void cmd_validate_rank(const RankOpts& o, RunDir& run) {
  const auto ranks = parse_list(o.ranks, "ranks");
  require_field(o.threshold > 0.0 && o.threshold <= 1.0, "threshold", "must be in (0, 1]");
  require_field(o.starts >= 1, "starts", "must be >= 1");
  require_field(o.repetitions >= 1, "repetitions", "must be >= 1");
  const TrafficData t = load_traffic(o.data, run);
  const auto [x, scaling] = training_tensor(t, o.days, "days");
  AlsConfig cfg;
  cfg.max_iters = o.max_iters;
  cfg.rel_change_tol = o.tol;
  cfg.seed = o.seed;
  const auto rep = split_half_validate(x, ranks, cfg, o.threshold, o.repetitions, o.starts);
  auto out = run.open("rank_validation.csv");
  out << "rank,tcc_B,tcc_C,uniqueness,accepted,degenerate\n";
  for (const auto& r : rep.records) {
    out << r.rank << ',' << r.tcc_B << ',' << r.tcc_C << ',' << r.uniqueness << ',' << r.accepted << ',' << r.degenerate
        << '\n';
  }
  auto ch = run.open("chosen_rank.csv");
  ch << "chosen_rank\n" << rep.chosen_rank << '\n';
  std::cout << "chosen rank: " << rep.chosen_rank << (rep.chosen_rank == 0 ? " (no candidate accepted)" : "") << '\n';
}

// ---------------------------------------------------------------- stream

struct StreamOpts {
  std::string data, out, mode = "pwo";
  std::size_t window = 1440, rank = 2, start_day = 3, steps = 1440, users = 0, max_iters = 0;
  double tol = 0.0;
  std::uint64_t seed = 0;
};

void cmd_stream(const StreamOpts& o, RunDir& run) {
  require_field(o.mode == "pwo" || o.mode == "fwo" || o.mode == "both", "mode", "must be pwo, fwo or both");
  require_field(o.rank >= 1, "rank", "must be >= 1");
  require_field(o.window >= 2, "window", "must be >= 2");
  require_field(o.steps >= 1, "steps", "must be >= 1");
  const TrafficData t = load_traffic(o.data, run);
  const std::size_t K = datagen::kMinutes, U = o.users ? o.users : t.n_users;
  require_field(U <= t.n_users, "users", "dataset has only " + std::to_string(t.n_users) + " users");
  require_field(o.start_day >= 1 && o.start_day < t.n_days, "start-day", "must lie in [1, days - 1]");
  const std::size_t t0 = o.start_day * K;
  require_field(o.window <= t0, "window", "must fit in the days before --start-day");
  require_field(t0 + o.steps <= t.n_days * K, "steps", "stream runs past the last minute");
  const auto scaling = fit_scaling(detail::day_range(t.days, t.n_users, 0, o.start_day));
  auto slice_at = [&](std::size_t tm) {
    Matrix s(static_cast<Eigen::Index>(U), 4);
    for (std::size_t u = 0; u < U; ++u) {
      for (std::size_t j = 0; j < 4; ++j) {
        s(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(j)) =
            scaling.apply(j, t.days[(tm / K) * t.n_users + u].series[j][tm % K]);
      }
    }
    return s;
  };
  AlsConfig init;
  init.seed = o.seed;
  std::vector<std::string> modes = o.mode == "both" ? std::vector<std::string>{"pwo", "fwo"} : std::vector<std::string>{o.mode};
  auto timing = run.open("timing.csv");
  timing << "minute,scheme,iterations,wall_time_seconds,window_fit\n";
  for (const auto& mode : modes) {
    AlsConfig step = mode == "pwo" ? pwo_defaults() : fwo_defaults();
    if (o.max_iters) step.max_iters = o.max_iters;
    if (o.tol > 0.0) step.rel_change_tol = o.tol;
    TensorWindow win(U, 4, o.window, o.rank, init);
    for (std::size_t tm = t0 - o.window; tm < t0; ++tm) win.push(slice_at(tm));
    auto res = run.open("residuals_" + mode + ".csv");
    res << "minute,entity_id,metric,residual\n";
    std::vector<double> secs;
    for (std::size_t s = 0; s < o.steps; ++s) {
      const std::size_t tm = t0 + s;
      const StepResult r = mode == "pwo" ? win.pwo_step(slice_at(tm), step) : win.fwo_step(slice_at(tm), step);
      secs.push_back(r.wall_seconds);
      timing << tm << ',' << mode << ',' << r.iterations << ',' << r.wall_seconds << ',' << r.fit << '\n';
      for (std::size_t u = 0; u < U; ++u) {
        for (std::size_t j = 0; j < 4; ++j) {
          res << tm << ',' << datagen::user_id(u) << ',' << datagen::kTrafficMetricNames[j] << ','
              << r.residual(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(j)) << '\n';
        }
      }
    }
    std::nth_element(secs.begin(), secs.begin() + static_cast<std::ptrdiff_t>(secs.size() / 2), secs.end());
    std::cout << mode << ": " << o.steps << " steps, median step " << secs[secs.size() / 2] << " s\n";
  }
}

// ---------------------------------------------------------------- detect

struct DetectOpts {
  std::string data, out, mode = "offline";
  std::size_t tr1 = 3, tr2 = 7, rank = 2, window = 1440, trees = 100, min_leaf = 5, max_negatives = 50000,
              threads = 0;
  std::uint64_t seed = 1;
  double q = 0.05, p_d = 0.0014, p_fp = 2.64e-6, p_rc = 0.8266;
  std::string sync_model = "mixture";
  bool save_forest = false, write_features = false;
};

json report_json(const EvalReport& r) {
  return {{"tp", r.tp}, {"fp", r.fp}, {"fn", r.fn}, {"tn", r.tn}, {"precision", r.precision},
          {"precision_defined", r.precision_defined}, {"detection_accuracy", r.detection_accuracy},
          {"episodes", r.episodes}, {"detected", r.detected}, {"within_1min", r.fraction_within(1)},
          {"within_2min", r.fraction_within(2)}};
}

void write_predictions(RunDir& run, const DdosRun& r, const DdosResult& res, std::size_t U) {
  // Rows sorted by (minute, entity) whichever layout the residual mode used.
  std::vector<std::size_t> order(r.te.y.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](auto a, auto b) {
    return r.te.minute[a] * U + r.te.entity[a] < r.te.minute[b] * U + r.te.entity[b];
  });
  auto out = run.open("predictions.csv");
  out << "minute,entity,attack,pred_six,pred_eight\n";
  for (auto i : order) {
    out << r.te.minute[i] << ',' << datagen::user_id(r.te.entity[i]) << ',' << int(r.te.y[i]) << ','
        << int(res.six.pred[i]) << ',' << int(res.eight.pred[i]) << '\n';
  }
}

void cmd_detect(const DetectOpts& o, RunDir& run) {
  const TrafficData t = load_traffic(o.data, run);
  DdosConfig cfg;
  cfg.n_users = t.n_users;
  cfg.n_days = t.n_days;
  cfg.tr1_days = o.tr1;
  cfg.tr2_days = o.tr2;
  cfg.rank = o.rank;
  cfg.seed = o.seed;
  cfg.window = o.window;
  cfg.forest.n_trees = o.trees;
  cfg.forest.min_leaf = o.min_leaf;
  cfg.forest.threads = o.threads;
  cfg.forest.seed = o.seed;
  cfg.max_negatives = o.max_negatives;
  cfg.attack.q = o.q;
  cfg.map.p_d = o.p_d;
  cfg.map.p_fp = o.p_fp;
  cfg.map.p_rc = o.p_rc;
  try {
    cfg.mode = parse_residual_mode(o.mode);
  } catch (const DataError& e) {
    throw ConfigError("mode", e.what());
  }
  require_field(o.sync_model == "mixture" || o.sync_model == "fixed_infected", "sync-model",
                "must be mixture or fixed_infected");
  cfg.map.model = o.sync_model == "mixture" ? SyncModel::mixture : SyncModel::fixed_infected;
  require_field(o.tr1 >= 1, "tr1-days", "must be >= 1");
  require_field(o.tr2 >= 1, "tr2-days", "must be >= 1");
  require_field(o.tr1 + o.tr2 < t.n_days, "tr2-days", "no test days left (dataset has " + std::to_string(t.n_days) + ")");
  require_field(o.rank >= 1, "rank", "must be >= 1");
  require_field(o.trees >= 1, "trees", "must be >= 1");
  require_field(o.min_leaf >= 1, "min-leaf", "must be >= 1");
  require_field(o.q > 0.0 && o.q <= 1.0, "q", "must be in (0, 1]");
  require_field(o.q * static_cast<double>(t.n_users) >= 1.0 - 1e-9, "q",
                "q * users must be >= 1 (dataset has " + std::to_string(t.n_users) + " users)");
  require_field(cfg.mode == ResidualMode::offline || (o.window >= o.rank && o.window <= o.tr1 * datagen::kMinutes),
                "window", "must lie in [rank, tr1-days * 1440]");
  run.resolved["pipeline"] = to_json(cfg);

  DdosRun r = ddos_residuals(t.days, t.truth, cfg);
  DdosResult res = ddos_detect(r, cfg);

  write_predictions(run, r, res, t.n_users);
  auto imp = run.open("importance.csv");
  imp << "model,feature,gini\n";
  for (const auto* d : {&res.six, &res.eight}) {
    for (std::size_t f = 0; f < d->importance.size(); ++f) {
      imp << (d->n_features == 6 ? "six" : "eight") << ',' << kDdosFeatureNames[f] << ',' << d->importance[f] << '\n';
    }
  }
  auto mj = run.open("model.json");
  json models = {{"cp", to_json(r.model)}, {"scaling", to_json(r.scaling)}, {"gmm", to_json(r.gmm)},
                 {"mode", to_string(cfg.mode)}};
  mj << models.dump(1) << '\n';
  if (o.save_forest) {
    // Retraining is deterministic, so the saved forest equals the evaluated one.
    const auto rows = training_rows(r.tr2, cfg.max_negatives, cfg.seed + 7);
    Matrix xs(static_cast<Eigen::Index>(rows.size()), 8);
    std::vector<std::uint8_t> ys(rows.size());
    const Matrix x8 = with_gmm_features(r.tr2.x, r.gmm);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      xs.row(static_cast<Eigen::Index>(i)) = x8.row(static_cast<Eigen::Index>(rows[i]));
      ys[i] = r.tr2.y[rows[i]];
    }
    auto fj = run.open("forest_eight.json");
    fj << to_json(train_forest(xs, ys, cfg.forest)).dump() << '\n';
  }
  auto gj = run.open("gmm.json");
  gj << to_json(r.gmm).dump(1) << '\n';
  if (o.write_features) {
    const Matrix x8 = with_gmm_features(r.te.x, r.gmm);
    auto fo = run.open("features_test.csv");
    fo << "minute,entity";
    for (const auto& n : kDdosFeatureNames) fo << ',' << n;
    fo << ",attack\n";
    for (Eigen::Index i = 0; i < x8.rows(); ++i) {
      const auto k = static_cast<std::size_t>(i);
      fo << r.te.minute[k] << ',' << datagen::user_id(r.te.entity[k]);
      for (Eigen::Index c = 0; c < x8.cols(); ++c) fo << ',' << x8(i, c);
      fo << ',' << int(r.te.y[k]) << '\n';
    }
  }
  auto sy = run.open("sync.csv");
  sy << "n_homes,q,p_d,p_fp,p_rc,m0,threshold,type1,type2,measured_p_fp,measured_p_rc,attacks,attacks_detected,"
        "attack_minutes,detected_minutes,false_minutes,total_minutes\n";
  const auto& s = res.sync;
  sy << s.params.n_homes << ',' << s.params.q << ',' << s.params.p_d << ',' << s.params.p_fp << ',' << s.params.p_rc
     << ',' << s.threshold.m0 << ',' << s.threshold.threshold << ',' << s.threshold.type1 << ',' << s.threshold.type2
     << ',' << s.p_fp << ',' << s.p_rc << ',' << s.attacks << ',' << s.attacks_detected << ',' << s.attack_minutes
     << ',' << s.detected_minutes << ',' << s.false_minutes << ',' << s.total_minutes << '\n';
  auto rj = run.open("report.json");
  rj << json{{"six", report_json(res.six.report)},
             {"eight", report_json(res.eight.report)},
             {"sync",
              {{"m0", s.threshold.m0}, {"threshold", s.threshold.threshold}, {"type1", s.threshold.type1},
               {"type2", s.threshold.type2}, {"attacks", s.attacks}, {"attacks_detected", s.attacks_detected},
               {"false_minutes", s.false_minutes}}}}
            .dump(1)
     << '\n';
  auto tm = run.open("timing.csv");
  tm << "stage,seconds\nresiduals," << r.residual_seconds << "\nforest_six," << res.six.train_seconds
     << "\nforest_eight," << res.eight.train_seconds << "\ndetect_total," << res.seconds << '\n';
  for (const auto* d : {&res.six, &res.eight}) {
    std::cout << d->n_features << " features: precision " << d->report.precision << ", detection accuracy "
              << d->report.detection_accuracy << " (" << d->report.detected << "/" << d->report.episodes
              << " episodes)\n";
  }
  std::cout << "synchronized attacks detected: " << s.attacks_detected << "/" << s.attacks << " at threshold "
            << s.threshold.threshold << '\n';
}

// ---------------------------------------------------------------- cluster

struct ClusterOpts {
  std::string data, out;
  std::size_t rank = 4, k = 5, k_min = 1, k_max = 10, n_init = 10, eta = 1000, max_iters = 200;
  double theta = 2.5, tol = 1e-6;
  std::uint64_t seed = 1;
};

void cmd_cluster(const ClusterOpts& o, RunDir& run) {
  require_field(o.rank >= 1, "rank", "must be >= 1");
  require_field(o.k_min >= 1 && o.k_min < o.k_max, "k-min", "need 1 <= k-min < k-max");
  require_field(o.n_init >= 1, "n-init", "must be >= 1");
  require_field(o.theta > 0.0, "theta", "must be > 0");
  require_field(o.eta >= 1 && o.eta <= datagen::kMinutes, "eta", "must lie in [1, 1440]");
  QosData q = load_qos(o.data, run);
  QosPipelineConfig cfg;
  cfg.n_users = q.n_users;
  cfg.n_days = q.n_days;
  cfg.seed = o.seed;
  cfg.rank = o.rank;
  cfg.preprocess.theta = o.theta;
  cfg.preprocess.eta = o.eta;
  cfg.als.max_iters = o.max_iters;
  cfg.als.rel_change_tol = o.tol;
  cfg.kmeans.n_init = o.n_init;

  // Features first so the elbow can pick k when --k is 0.
  const QosTensor qt = qos_preprocess(q.days, cfg.preprocess);
  const CpModel model = als_fit(qt.x, cfg.rank, cfg.als);
  const QosFeatures feats = qos_residual_stats(residual(qt.x, model), qt);
  const std::size_t k_hi = std::min(o.k_max, detail::distinct_rows(feats.f));
  const ElbowResult elbow = elbow_select(feats.f, o.k_min, k_hi, o.seed, cfg.kmeans);
  cfg.k = o.k ? o.k : elbow.chosen;
  run.resolved["pipeline"] = to_json(cfg);
  const QosRun r = qos_analyze(q.topo, q.events, q.days, cfg);

  auto in = run.open("inertia.csv");
  in << "k,inertia\n";
  for (std::size_t i = 0; i < elbow.ks.size(); ++i) in << elbow.ks[i] << ',' << elbow.inertia[i] << '\n';
  auto el = run.open("elbow.csv");
  el << "chosen_k,knee_distance,sharpness,low_confidence,used_k\n"
     << elbow.chosen << ',' << elbow.knee_distance << ',' << elbow.sharpness << ',' << elbow.low_confidence << ','
     << cfg.k << '\n';

  auto ff = run.open("features.csv");
  ff << "entity,day";
  for (const auto& n : kQosFeatureNames) ff << ',' << n;
  ff << ",ex1_present\n";
  for (std::size_t i = 0; i < r.tensor.rows(); ++i) {
    const auto& d = r.days[r.tensor.source[i]];
    ff << datagen::user_id(d.entity) << ',' << d.day;
    for (Eigen::Index c = 0; c < 9; ++c) ff << ',' << r.features.f(static_cast<Eigen::Index>(i), c);
    ff << ',' << int(r.features.ex1_present[i]) << '\n';
  }
  auto as = run.open("assignments.csv");
  as << "entity,day,cluster,name\n";
  for (std::size_t i = 0; i < r.tensor.rows(); ++i) {
    const auto& d = r.days[r.tensor.source[i]];
    const auto c = static_cast<std::size_t>(r.clusters.labels[i]);
    as << datagen::user_id(d.entity) << ',' << d.day << ',' << c << ',' << r.summaries[c].name << '\n';
  }
  auto dr = run.open("dropped.csv");
  dr << "entity,day\n";
  for (auto s : r.tensor.dropped) dr << datagen::user_id(r.days[s].entity) << ',' << r.days[s].day << '\n';
  auto cs = run.open("clusters.csv");
  cs << "cluster,name,size,mean_latency,mean_loss,missing_fraction\n";
  auto ser = run.open("cluster_series.csv");
  ser << "cluster,name,minute,latency,loss,missing\n";
  for (std::size_t c = 0; c < r.summaries.size(); ++c) {
    const auto& s = r.summaries[c];
    cs << c << ',' << s.name << ',' << s.size << ',' << s.mean_latency << ',' << s.mean_loss << ','
       << s.missing_fraction << '\n';
    for (std::size_t m = 0; m < s.latency.size(); ++m) {
      ser << c << ',' << s.name << ',' << m << ',' << s.latency[m] << ',' << s.loss[m] << ',' << s.missing[m] << '\n';
    }
  }
  auto rg = run.open("regions.csv");
  rg << "node,day,count,cluster,name,fraction\n";
  for (const auto& reg : r.regions) {
    for (std::size_t d = 0; d < reg.count.size(); ++d) {
      for (std::size_t c = 0; c < reg.fraction[d].size(); ++c) {
        rg << reg.name << ',' << d << ',' << reg.count[d] << ',' << c << ',' << r.summaries[c].name << ','
           << reg.fraction[d][c] << '\n';
      }
    }
  }
  std::cout << "k = " << cfg.k << (o.k ? "" : " (elbow)") << ", elbow suggests " << elbow.chosen
            << (elbow.low_confidence ? " (low confidence)" : "") << '\n';
  for (std::size_t c = 0; c < r.summaries.size(); ++c) {
    std::cout << "  cluster " << c << " " << r.summaries[c].name << ": " << r.summaries[c].size << " entity-days\n";
  }
}

// ---------------------------------------------------------------- report

struct ReportOpts {
  std::string detect, cluster, out;
};

std::vector<std::vector<std::string>> read_rows(const fs::path& p, const std::vector<std::string>& cols,
                                                RunDir& run) {
  run.input(p.parent_path().filename().string() + "/" + p.filename().string(), p);
  auto in = csv::open_input(p.string());
  csv::Reader r(in);
  std::vector<std::size_t> idx;
  for (const auto& c : cols) idx.push_back(r.column(c));
  std::vector<std::vector<std::string>> out;
  std::vector<std::string_view> f;
  while (r.next(f)) {
    std::vector<std::string> row;
    for (auto i : idx) row.emplace_back(csv::trim(f[i]));
    out.push_back(std::move(row));
  }
  return out;
}

void cmd_report(const ReportOpts& o, RunDir& run) {
  require_field(!o.detect.empty() || !o.cluster.empty(), "detect", "give --detect and/or --cluster");
  std::ostringstream md;
  if (!o.detect.empty()) {
    const fs::path d(o.detect);
    const auto pred = read_rows(d / "predictions.csv", {"minute", "entity", "attack", "pred_six", "pred_eight"}, run);
    // Episodes are maximal runs of attack minutes per entity.
    std::map<std::string, std::vector<std::pair<std::int64_t, std::size_t>>> by_entity;
    for (std::size_t i = 0; i < pred.size(); ++i) by_entity[pred[i][1]].push_back({csv::to_int(pred[i][0], "minute"), i});
    std::vector<Episode> episodes;
    for (auto& [e, rows] : by_entity) {
      std::sort(rows.begin(), rows.end());
      for (std::size_t j = 0; j < rows.size(); ++j) {
        if (pred[rows[j].second][2] != "1") continue;
        const bool starts = j == 0 || pred[rows[j - 1].second][2] != "1" || rows[j - 1].first + 1 != rows[j].first;
        if (starts) episodes.push_back({episodes.size(), {}});
        episodes.back().samples.push_back(rows[j].second);
      }
    }
    std::vector<std::uint8_t> truth(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) truth[i] = pred[i][2] == "1";
    auto t2 = run.open("detection_metrics.csv");
    t2 << "model,precision,detection_accuracy,tp,fp,fn,episodes,detected,within_1min,within_2min\n";
    auto dl = run.open("delays.csv");
    dl << "model,delay_minutes,episodes,cumulative_fraction\n";
    md << "## Detection (test split)\n\n| model | precision | detection accuracy | within 1 min | within 2 min |\n"
          "|---|---|---|---|---|\n";
    for (const auto& [name, col] : std::vector<std::pair<std::string, std::size_t>>{{"six", 3}, {"eight", 4}}) {
      std::vector<std::uint8_t> p(pred.size());
      for (std::size_t i = 0; i < pred.size(); ++i) p[i] = pred[i][col] == "1";
      const EvalReport rep = evaluate(p, truth, episodes);
      t2 << name << ',' << rep.precision << ',' << rep.detection_accuracy << ',' << rep.tp << ',' << rep.fp << ','
         << rep.fn << ',' << rep.episodes << ',' << rep.detected << ',' << rep.fraction_within(1) << ','
         << rep.fraction_within(2) << '\n';
      md << "| " << name << " features | " << rep.precision << " | " << rep.detection_accuracy << " | "
         << rep.fraction_within(1) << " | " << rep.fraction_within(2) << " |\n";
      std::map<std::size_t, std::size_t> hist;
      for (auto dv : rep.delays) ++hist[dv];
      std::size_t cum = 0;
      for (const auto& [dv, n] : hist) {
        cum += n;
        dl << name << ',' << dv << ',' << n << ',' << static_cast<double>(cum) / static_cast<double>(rep.delays.size())
           << '\n';
      }
    }
    auto imp = read_rows(d / "importance.csv", {"model", "feature", "gini"}, run);
    std::erase_if(imp, [](const auto& r) { return r[0] != "six"; });
    std::stable_sort(imp.begin(), imp.end(), [](const auto& a, const auto& b) {
      return csv::to_double(a[2], "gini") > csv::to_double(b[2], "gini");
    });
    auto t3 = run.open("importance_ranked.csv");
    t3 << "rank,feature,gini\n";
    md << "\n## Gini importance (six features)\n\n| rank | feature | gini |\n|---|---|---|\n";
    for (std::size_t i = 0; i < imp.size(); ++i) {
      t3 << i + 1 << ',' << imp[i][1] << ',' << imp[i][2] << '\n';
      md << "| " << i + 1 << " | " << imp[i][1] << " | " << imp[i][2] << " |\n";
    }
  }
  if (!o.cluster.empty()) {
    const fs::path c(o.cluster);
    const auto cl = read_rows(c / "clusters.csv", {"cluster", "name", "size", "mean_latency", "mean_loss", "missing_fraction"}, run);
    md << "\n## Clusters\n\n| cluster | name | entity-days | latency | loss | missing |\n|---|---|---|---|---|---|\n";
    for (const auto& r : cl) {
      md << "| " << r[0] << " | " << r[1] << " | " << r[2] << " | " << r[3] << " | " << r[4] << " | " << r[5] << " |\n";
    }
    // Per node and day: fraction per cluster name, and the C1 (good) fraction.
    const auto rg = read_rows(c / "regions.csv", {"node", "day", "count", "name", "fraction"}, run);
    std::map<std::pair<std::string, std::int64_t>, std::map<std::string, double>> frac;
    std::map<std::pair<std::string, std::int64_t>, std::string> count;
    std::vector<std::string> node_order;
    for (const auto& r : rg) {
      const auto key = std::make_pair(r[0], csv::to_int(r[1], "day"));
      if (std::find(node_order.begin(), node_order.end(), r[0]) == node_order.end()) node_order.push_back(r[0]);
      frac[key][r[3]] += csv::to_double(r[4], "fraction");
      count[key] = r[2];
    }
    const std::vector<std::string> names = {"C1", "C2", "C3", "C4", "C5"};
    auto f7 = run.open("region_fractions.csv");
    f7 << "node,day,count,C1,C2,C3,C4,C5\n";
    auto f8 = run.open("good_fraction.csv");
    f8 << "node,day,count,good_fraction\n";
    for (const auto& node : node_order) {
      for (const auto& [key, m] : frac) {
        if (key.first != node) continue;
        f7 << node << ',' << key.second << ',' << count[key];
        for (const auto& n : names) f7 << ',' << (m.count(n) ? m.at(n) : 0.0);
        f7 << '\n';
        f8 << node << ',' << key.second << ',' << count[key] << ',' << (m.count("C1") ? m.at("C1") : 0.0) << '\n';
      }
    }
  }
  auto rep = run.open("report.md");
  rep << md.str();
  std::cout << md.str();
}

// ---------------------------------------------------------------- main

int run_cli(int argc, char** argv) {
  CLI::App app{"Tensor-decomposition anomaly detection on network time series"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  std::string config_file;

  auto add_common = [&](CLI::App* s, std::string& out) {
    s->add_option("--out", out, "output directory")->required();
    s->add_option("--config", config_file, "JSON object of option values (a previous config.json works)");
  };

  GenerateOpts g;
  auto* sg = app.add_subcommand("generate", "write a synthetic dataset");
  add_common(sg, g.out);
  sg->add_option("--kind", g.kind, "traffic | qos");
  sg->add_option("--users", g.users, "number of users (0: 100 for traffic, 60 for qos)");
  sg->add_option("--days", g.days, "number of days");
  sg->add_option("--seed", g.seed, "random seed");
  sg->add_option("--q", g.q, "traffic: infected fraction of users");
  sg->add_option("--mu", g.mu, "traffic: mean attack duration (minutes)");
  sg->add_option("--sd-duration", g.sd, "traffic: attack duration spread (minutes)");
  sg->add_option("--attacks-per-day", g.rate, "traffic: mean synchronized attacks per day");
  sg->add_option("--pkt-rate", g.pkt_rate, "traffic: attack packets/s per infected home");
  sg->add_option("--regions", g.regions, "qos: regions under the root");
  sg->add_option("--aggs", g.aggs, "qos: aggregation nodes per region");
  sg->add_option("--events", g.events, "qos: CSV of planted events (type,node,day,start,end,magnitude)");
  sg->add_flag("--no-background", g.no_background, "qos: no random background events");

  FitOpts f;
  auto* sf = app.add_subcommand("fit", "fit the offline CP model on the first days of a traffic dataset");
  add_common(sf, f.out);
  sf->add_option("--data", f.data, "traffic dataset directory")->required();
  sf->add_option("--rank", f.rank, "number of components R");
  sf->add_option("--days", f.days, "leading days used for fitting");
  sf->add_option("--max-iters", f.max_iters, "ALS sweep limit");
  sf->add_option("--tol", f.tol, "relative fit change that stops ALS");
  sf->add_option("--seed", f.seed, "initialization seed");

  RankOpts rk;
  auto* sr = app.add_subcommand("validate-rank", "split-half rank validation");
  add_common(sr, rk.out);
  sr->add_option("--data", rk.data, "traffic dataset directory")->required();
  sr->add_option("--ranks", rk.ranks, "comma-separated candidate ranks");
  sr->add_option("--days", rk.days, "leading days used");
  sr->add_option("--threshold", rk.threshold, "minimum aligned congruence");
  sr->add_option("--starts", rk.starts, "random starts per half");
  sr->add_option("--repetitions", rk.repetitions, "independent splits averaged");
  sr->add_option("--max-iters", rk.max_iters, "ALS sweep limit");
  sr->add_option("--tol", rk.tol, "relative fit change that stops ALS");
  sr->add_option("--seed", rk.seed, "seed");

  StreamOpts st;
  auto* ss = app.add_subcommand("stream", "online residuals (PWO/FWO) with per-step timing");
  add_common(ss, st.out);
  ss->add_option("--data", st.data, "traffic dataset directory")->required();
  ss->add_option("--mode", st.mode, "pwo | fwo | both");
  ss->add_option("--window", st.window, "window length W in minutes");
  ss->add_option("--rank", st.rank, "number of components R");
  ss->add_option("--start-day", st.start_day, "first streamed day; the window warms up on the minutes before it");
  ss->add_option("--steps", st.steps, "minutes streamed");
  ss->add_option("--users", st.users, "first N users (0: all)");
  ss->add_option("--max-iters", st.max_iters, "per-step iteration limit (0: mode default)");
  ss->add_option("--tol", st.tol, "per-step relative fit change (0: mode default)");
  ss->add_option("--seed", st.seed, "warm-up initialization seed");

  DetectOpts dt;
  auto* sd = app.add_subcommand("detect", "DDoS detection: residuals, forest, GMM features, MAP aggregation");
  add_common(sd, dt.out);
  sd->add_option("--data", dt.data, "traffic dataset directory")->required();
  sd->add_option("--mode", dt.mode, "offline | pwo | fwo");
  sd->add_option("--tr1-days", dt.tr1, "days for the normal model");
  sd->add_option("--tr2-days", dt.tr2, "days for classifier training; the rest is the test split");
  sd->add_option("--rank", dt.rank, "number of components R");
  sd->add_option("--window", dt.window, "online window length W");
  sd->add_option("--trees", dt.trees, "forest size");
  sd->add_option("--min-leaf", dt.min_leaf, "minimum samples per leaf");
  sd->add_option("--max-negatives", dt.max_negatives, "normal minutes sampled for training");
  sd->add_option("--threads", dt.threads, "forest training threads (0: all cores)");
  sd->add_option("--seed", dt.seed, "seed");
  sd->add_option("--q", dt.q, "infected fraction assumed by the MAP rule");
  sd->add_option("--p-d", dt.p_d, "prior probability of a synchronized attack per minute");
  sd->add_option("--p-fp", dt.p_fp, "per-home false positive rate");
  sd->add_option("--p-rc", dt.p_rc, "per-home recall");
  sd->add_option("--sync-model", dt.sync_model, "mixture | fixed_infected");
  sd->add_flag("--save-forest", dt.save_forest, "also write the eight-feature forest as JSON");
  sd->add_flag("--write-features", dt.write_features, "also write the test-split feature matrix");

  ClusterOpts cl;
  auto* sc = app.add_subcommand("cluster", "QoS degradation clustering and spatial correlation");
  add_common(sc, cl.out);
  sc->add_option("--data", cl.data, "qos dataset directory")->required();
  sc->add_option("--rank", cl.rank, "number of components R");
  sc->add_option("--k", cl.k, "clusters (0: elbow choice)");
  sc->add_option("--k-min", cl.k_min, "elbow range start");
  sc->add_option("--k-max", cl.k_max, "elbow range end");
  sc->add_option("--n-init", cl.n_init, "k-means restarts");
  sc->add_option("--theta", cl.theta, "cross-traffic filter (Mbps)");
  sc->add_option("--eta", cl.eta, "minimum surviving samples per day");
  sc->add_option("--max-iters", cl.max_iters, "ALS sweep limit");
  sc->add_option("--tol", cl.tol, "relative fit change that stops ALS");
  sc->add_option("--seed", cl.seed, "seed");

  ReportOpts rp;
  auto* sp = app.add_subcommand("report", "metric, importance and region tables from detect/cluster outputs");
  add_common(sp, rp.out);
  sp->add_option("--detect", rp.detect, "detect output directory");
  sp->add_option("--cluster", rp.cluster, "cluster output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  CLI::App* sub = app.get_subcommands().front();
  try {
    if (!config_file.empty()) apply_config_file(*sub, config_file);
    const std::string name = sub->get_name();
    std::string out_dir = sub->get_option("--out")->as<std::string>();
    RunDir run(name, out_dir);
    run.config = resolved_options(*sub);
    if (name == "generate") cmd_generate(g, run);
    if (name == "fit") cmd_fit(f, run);
    if (name == "validate-rank") cmd_validate_rank(rk, run);
    if (name == "stream") cmd_stream(st, run);
    if (name == "detect") cmd_detect(dt, run);
    if (name == "cluster") cmd_cluster(cl, run);
    if (name == "report") cmd_report(rp, run);
    run.write();
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace
}  // namespace tensorad::cli

int main(int argc, char** argv) { return tensorad::cli::run_cli(argc, argv); }
