#pragma once

// JSON for models and configurations. Matrices are nested row-major arrays.

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

#include "tensorad/pipeline.hpp"

namespace tensorad {

using nlohmann::json;

namespace detail {

template <class T>
T field(const json& j, const char* name) {
  if (!j.contains(name)) throw DataError(std::string("json: missing field '") + name + "'");
  try {
    return j.at(name).get<T>();
  } catch (const json::exception&) {
    throw DataError(std::string("json: field '") + name + "' has the wrong type");
  }
}

}  // namespace detail

inline json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) r.push_back(m(i, c));
    rows.push_back(std::move(r));
  }
  return rows;
}

inline Matrix matrix_from_json(const json& j, const char* what) {
  if (!j.is_array()) throw DataError(std::string("json: '") + what + "' must be an array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& r = j[static_cast<std::size_t>(i)];
    if (!r.is_array() || static_cast<Eigen::Index>(r.size()) != cols) {
      throw DataError(std::string("json: '") + what + "' rows have unequal length");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (!r[static_cast<std::size_t>(c)].is_number()) throw DataError(std::string("json: '") + what + "' has a non-number");
      m(i, c) = r[static_cast<std::size_t>(c)].get<double>();
    }
  }
  return m;
}

inline json vector_to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline Vector vector_from_json(const json& j, const char* what) {
  if (!j.is_array()) throw DataError(std::string("json: '") + what + "' must be an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw DataError(std::string("json: '") + what + "' has a non-number");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

// ---------------------------------------------------------------- models

inline json to_json(const CpModel& m) {
  return {{"rank", m.rank()},
          {"dims", {m.A.rows(), m.B.rows(), m.C.rows()}},
          {"weights", vector_to_json(m.weights)},
          {"A", matrix_to_json(m.A)},
          {"B", matrix_to_json(m.B)},
          {"C", matrix_to_json(m.C)},
          {"info",
           {{"iterations", m.info.iterations},
            {"final_fit", m.info.final_fit},
            {"seed", m.info.seed},
            {"converged", m.info.converged},
            {"degenerate", m.info.degenerate},
            {"fit_history", m.info.fit_history}}}};
}

inline CpModel cp_model_from_json(const json& j) {
  CpModel m;
  m.A = matrix_from_json(j.at("A"), "A");
  m.B = matrix_from_json(j.at("B"), "B");
  m.C = matrix_from_json(j.at("C"), "C");
  m.weights = vector_from_json(j.at("weights"), "weights");
  if (j.contains("info")) {
    const auto& i = j["info"];
    m.info.iterations = detail::field<std::size_t>(i, "iterations");
    m.info.final_fit = detail::field<double>(i, "final_fit");
    m.info.seed = detail::field<std::uint64_t>(i, "seed");
    m.info.converged = detail::field<bool>(i, "converged");
    m.info.degenerate = detail::field<bool>(i, "degenerate");
    m.info.fit_history = detail::field<std::vector<double>>(i, "fit_history");
  }
  m.validate();
  return m;
}

inline json to_json(const ScalingParams& s) { return {{"min", s.min}, {"max", s.max}}; }

inline ScalingParams scaling_from_json(const json& j) {
  ScalingParams s{detail::field<std::vector<double>>(j, "min"), detail::field<std::vector<double>>(j, "max")};
  if (s.min.size() != s.max.size()) throw DataError("json: scaling min/max lengths differ");
  return s;
}

inline json to_json(const Gmm2& g) {
  json comps = json::array();
  for (std::size_t c = 0; c < 2; ++c) {
    comps.push_back({{"weight", g.weight[c]}, {"mean", vector_to_json(g.mean[c])}, {"var", vector_to_json(g.var[c])}});
  }
  return {{"components", comps}, {"iterations", g.iterations}, {"loglik_history", g.loglik_history}};
}

inline Gmm2 gmm_from_json(const json& j) {
  Gmm2 g;
  const auto& comps = j.at("components");
  if (!comps.is_array() || comps.size() != 2) throw DataError("json: gmm needs exactly two components");
  for (std::size_t c = 0; c < 2; ++c) {
    g.weight[c] = detail::field<double>(comps[c], "weight");
    g.mean[c] = vector_from_json(comps[c].at("mean"), "mean");
    g.var[c] = vector_from_json(comps[c].at("var"), "var");
  }
  g.iterations = detail::field<std::size_t>(j, "iterations");
  g.loglik_history = detail::field<std::vector<double>>(j, "loglik_history");
  return g;
}

inline json to_json(const ForestConfig& c) {
  return {{"n_trees", c.n_trees}, {"min_leaf", c.min_leaf}, {"max_depth", c.max_depth}, {"mtry", c.mtry},
          {"bootstrap", c.bootstrap}, {"seed", c.seed}, {"threshold", c.threshold}};
}

inline json to_json(const ForestModel& f) {
  json trees = json::array();
  for (const auto& t : f.trees) {
    json nodes = json::array();
    for (const auto& n : t.nodes) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.p1, n.n});
    trees.push_back({{"nodes", nodes}, {"importance", t.importance}});
  }
  return {{"n_features", f.n_features}, {"mtry", f.mtry}, {"constant", f.constant},
          {"config", to_json(f.config)}, {"node_layout", {"feature", "threshold", "left", "right", "p1", "n"}},
          {"trees", trees}};
}

inline ForestModel forest_from_json(const json& j) {
  ForestModel f;
  f.n_features = detail::field<std::size_t>(j, "n_features");
  f.mtry = detail::field<std::size_t>(j, "mtry");
  f.constant = detail::field<bool>(j, "constant");
  const auto& c = j.at("config");
  f.config.n_trees = detail::field<std::size_t>(c, "n_trees");
  f.config.min_leaf = detail::field<std::size_t>(c, "min_leaf");
  f.config.max_depth = detail::field<std::size_t>(c, "max_depth");
  f.config.mtry = detail::field<std::size_t>(c, "mtry");
  f.config.bootstrap = detail::field<bool>(c, "bootstrap");
  f.config.seed = detail::field<std::uint64_t>(c, "seed");
  f.config.threshold = detail::field<double>(c, "threshold");
  for (const auto& tj : j.at("trees")) {
    Tree t;
    t.importance = detail::field<std::vector<double>>(tj, "importance");
    for (const auto& n : tj.at("nodes")) {
      if (!n.is_array() || n.size() != 6) throw DataError("json: tree node must have 6 entries");
      t.nodes.push_back({n[0].get<int>(), n[1].get<double>(), n[2].get<int>(), n[3].get<int>(), n[4].get<double>(),
                         n[5].get<double>()});
    }
    const int size = static_cast<int>(t.nodes.size());
    if (size == 0) throw DataError("json: empty tree");
    for (const auto& n : t.nodes) {
      if (n.feature >= static_cast<int>(f.n_features) ||
          (n.feature >= 0 && (n.left <= 0 || n.left >= size || n.right <= 0 || n.right >= size))) {
        throw DataError("json: tree node references a missing feature or child");
      }
    }
    f.trees.push_back(std::move(t));
  }
  if (f.trees.empty()) throw DataError("json: forest has no trees");
  return f;
}

inline json to_json(const datagen::Topology& t) {
  json nodes = json::array();
  for (std::size_t n = 0; n < t.size(); ++n) nodes.push_back({{"name", t.name[n]}, {"parent", t.parent[n]}});
  return {{"nodes", nodes}, {"entity_leaf", t.entity_leaf}};
}

inline datagen::Topology topology_from_json(const json& j) {
  datagen::Topology t;
  for (const auto& n : j.at("nodes")) {
    t.name.push_back(detail::field<std::string>(n, "name"));
    t.parent.push_back(detail::field<int>(n, "parent"));
  }
  t.entity_leaf = detail::field<std::vector<int>>(j, "entity_leaf");
  t.validate();
  return t;
}

// ---------------------------------------------------------------- configs

inline json to_json(const AlsConfig& c) {
  return {{"max_iters", c.max_iters}, {"rel_change_tol", c.rel_change_tol}, {"seed", c.seed}, {"normalize", c.normalize}};
}

inline json to_json(const datagen::TrafficConfig& c) {
  return {{"median_down_bytes", c.median_down_bytes}, {"user_sigma", c.user_sigma}, {"up_byte_ratio", c.up_byte_ratio},
          {"pkt_size_lo", c.pkt_size_lo}, {"pkt_size_hi", c.pkt_size_hi}, {"ack_ratio", c.ack_ratio},
          {"ack_bytes", c.ack_bytes}, {"day_sigma", c.day_sigma}, {"common_sigma", c.common_sigma},
          {"metric_sigma", c.metric_sigma}, {"burst_prob", c.burst_prob}, {"up_burst_prob", c.up_burst_prob},
          {"up_burst_max", c.up_burst_max}};
}

inline json to_json(const datagen::AttackConfig& c) {
  return {{"q", c.q}, {"mean_duration", c.mean_duration}, {"sd_duration", c.sd_duration},
          {"attacks_per_day", c.attacks_per_day}, {"pkt_rate", c.pkt_rate}};
}

inline json to_json(const MapAggregatorParams& p) {
  return {{"n_homes", p.n_homes}, {"p_d", p.p_d}, {"p_fp", p.p_fp}, {"p_rc", p.p_rc}, {"q", p.q},
          {"model", p.model == SyncModel::mixture ? "mixture" : "fixed_infected"}};
}

inline json to_json(const DdosConfig& c) {
  return {{"n_users", c.n_users}, {"n_days", c.n_days}, {"tr1_days", c.tr1_days}, {"tr2_days", c.tr2_days},
          {"rank", c.rank}, {"seed", c.seed}, {"mode", to_string(c.mode)}, {"window", c.window},
          {"traffic", to_json(c.traffic)}, {"attack", to_json(c.attack)}, {"als", to_json(c.als)},
          {"stream", to_json(c.stream)}, {"forest", to_json(c.forest)},
          {"gmm", {{"max_iters", c.gmm.max_iters}, {"rel_tol", c.gmm.rel_tol}, {"var_floor", c.gmm.var_floor}}},
          {"max_negatives", c.max_negatives}, {"map", to_json(c.map)}};
}

inline json to_json(const datagen::QosConfig& c) {
  return {{"latency_median", c.latency_median}, {"latency_sigma", c.latency_sigma},
          {"latency_noise", c.latency_noise}, {"evening_load", c.evening_load}, {"base_loss", c.base_loss},
          {"cross_mean", c.cross_mean}, {"cross_spike_prob", c.cross_spike_prob}};
}

inline json to_json(const QosPipelineConfig& c) {
  return {{"n_users", c.n_users}, {"n_days", c.n_days}, {"regions", c.regions},
          {"aggs_per_region", c.aggs_per_region}, {"seed", c.seed}, {"rank", c.rank}, {"k", c.k},
          {"gen", to_json(c.gen)},
          {"background", {{"loss", c.background.loss}, {"congestion", c.background.congestion},
                          {"outage", c.background.outage}, {"outage_loss", c.background.outage_loss}}},
          {"preprocess", {{"theta", c.preprocess.theta}, {"eta", c.preprocess.eta}}},
          {"als", to_json(c.als)}, {"kmeans", {{"n_init", c.kmeans.n_init}, {"max_iters", c.kmeans.max_iters}}}};
}

}  // namespace tensorad
