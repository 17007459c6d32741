#pragma once

// Synthetic telemetry: home-router traffic with injected DDoS floods, and
// latency/loss series over an ISP-like tree with planted degradation events.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "tensorad/error.hpp"

namespace tensorad::datagen {

inline constexpr int kMinutes = 1440;

// Per-(purpose, entity, day) generator so that output does not depend on the
// order in which users or days are produced.
inline std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t tag, std::uint64_t a, std::uint64_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(a),
                    static_cast<std::uint32_t>(a >> 32), static_cast<std::uint32_t>(b)};
  return std::mt19937_64(seq);
}

// ---------------------------------------------------------------- traffic

/// Metric order used everywhere for traffic: mode-2 index of the tensors.
enum TrafficMetric : std::size_t { kDownBytes = 0, kUpBytes = 1, kDownPkts = 2, kUpPkts = 3 };
inline const std::array<std::string, 4> kTrafficMetricNames = {"down_bytes", "up_bytes", "down_pkts",
                                                               "up_pkts"};

/// One user's day: four per-minute rates (bytes/s, packets/s).
struct TrafficDay {
  std::size_t entity = 0;
  std::size_t day = 0;
  std::array<std::vector<double>, 4> series;
  std::vector<std::uint8_t> attack;  // 1 on injected attack minutes
};

struct TrafficConfig {
  double median_down_bytes = 2.0e5;  // bytes/s, population median of user means
  double user_sigma = 0.8;           // lognormal spread of user volume
  double up_byte_ratio = 0.1;        // upload payload relative to download payload
  double pkt_size_lo = 800.0, pkt_size_hi = 1200.0;  // mean data packet size per user
  double ack_ratio = 0.5;            // ACK packets sent per data packet received
  double ack_bytes = 66.0;
  double day_sigma = 0.15;           // day-to-day volume variation
  double common_sigma = 0.25;        // per-minute activity noise shared by all metrics
  double metric_sigma = 0.05;        // independent per-metric noise
  double burst_prob = 0.01;          // download-heavy bursts (streaming)
  double up_burst_prob = 2e-3;       // upload-heavy bursts (calls, backups)
  double up_burst_max = 20.0;
};

/// Diurnal usage shape of one user: constant floor plus day-part bumps.
struct DiurnalShape {
  double floor = 0.3;
  std::array<double, 4> weight{};
  static constexpr std::array<double, 4> center{540.0, 840.0, 1230.0, 60.0};  // minutes
  static constexpr std::array<double, 4> width{90.0, 120.0, 120.0, 90.0};

  double at(int minute) const {
    double v = floor;
    for (std::size_t b = 0; b < 4; ++b) {
      double dm = std::abs(minute - center[b]);
      dm = std::min(dm, kMinutes - dm);  // wraps around midnight
      v += weight[b] * std::exp(-0.5 * (dm / width[b]) * (dm / width[b]));
    }
    return v;
  }
};

struct UserProfile {
  double volume = 0.0;    // download bytes/s scale
  double pkt_size = 0.0;  // download bytes per packet
  DiurnalShape shape;
};

inline UserProfile traffic_user(std::uint64_t seed, std::size_t u, const TrafficConfig& cfg) {
  auto rng = stream_rng(seed, 1, u, 0);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  UserProfile p;
  p.volume = cfg.median_down_bytes * std::exp(cfg.user_sigma * z(rng));
  p.pkt_size = cfg.pkt_size_lo + (cfg.pkt_size_hi - cfg.pkt_size_lo) * unit(rng);
  p.shape.floor = 0.2 + 0.3 * unit(rng);
  for (auto& w : p.shape.weight) w = unit(rng);
  // Normalize so the daily mean of the shape is 1.
  double mean = 0.0;
  for (int m = 0; m < kMinutes; ++m) mean += p.shape.at(m);
  mean /= kMinutes;
  p.shape.floor /= mean;
  for (auto& w : p.shape.weight) w /= mean;
  return p;
}

inline TrafficDay traffic_day(std::uint64_t seed, std::size_t u, std::size_t d, const UserProfile& p,
                              const TrafficConfig& cfg) {
  auto rng = stream_rng(seed, 2, u, d);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  TrafficDay t;
  t.entity = u;
  t.day = d;
  for (auto& s : t.series) s.resize(kMinutes);
  t.attack.assign(kMinutes, 0);
  const double day_factor = std::exp(cfg.day_sigma * z(rng));
  // Data flows in each direction are acknowledged in the other, so packet
  // counts of normal traffic move together even when bytes do not.
  for (int m = 0; m < kMinutes; ++m) {
    double activity = p.volume * day_factor * p.shape.at(m) * std::exp(cfg.common_sigma * z(rng));
    if (unit(rng) < cfg.burst_prob) activity *= 3.0 + 7.0 * unit(rng);
    double up_boost = 1.0;
    if (unit(rng) < cfg.up_burst_prob) up_boost = 1.0 + (cfg.up_burst_max - 1.0) * unit(rng);
    const auto mz = [&] { return std::exp(cfg.metric_sigma * z(rng)); };
    const double down_data = activity * mz();
    const double up_data = cfg.up_byte_ratio * activity * up_boost * mz();
    const double down_pkts = down_data / p.pkt_size, up_pkts = up_data / p.pkt_size;
    const double up_acks = cfg.ack_ratio * down_pkts * mz(), down_acks = cfg.ack_ratio * up_pkts * mz();
    const auto i = static_cast<std::size_t>(m);
    t.series[kDownBytes][i] = down_data + cfg.ack_bytes * down_acks;
    t.series[kUpBytes][i] = up_data + cfg.ack_bytes * up_acks;
    t.series[kDownPkts][i] = down_pkts + down_acks;
    t.series[kUpPkts][i] = up_pkts + up_acks;
  }
  return t;
}

/// Users x days of normal traffic, ordered day-major (index = day * n_users + user).
inline std::vector<TrafficDay> gen_traffic(std::size_t n_users, std::size_t n_days, std::uint64_t seed,
                                           const TrafficConfig& cfg = {}) {
  detail::require(n_users >= 1 && n_days >= 1, "gen_traffic: n_users and n_days must be >= 1");
  std::vector<UserProfile> users;
  for (std::size_t u = 0; u < n_users; ++u) users.push_back(traffic_user(seed, u, cfg));
  std::vector<TrafficDay> out;
  out.reserve(n_users * n_days);
  for (std::size_t d = 0; d < n_days; ++d) {
    for (std::size_t u = 0; u < n_users; ++u) out.push_back(traffic_day(seed, u, d, users[u], cfg));
  }
  return out;
}

// ---------------------------------------------------------------- attacks

struct AttackVector {
  const char* malware;
  const char* flood;
  int payload;        // bytes of application payload per packet
  double wire_bytes;  // bytes per packet on the wire
};

// 1400-byte UDP floods carry payload plus Ethernet/IP/UDP headers (42 B);
// empty TCP floods are minimum-size 60-byte frames.
inline const std::array<AttackVector, 7> kAttackVectors = {{
    {"Mirai", "UDP flood", 1400, 1442.0},
    {"Mirai", "TCP SYN flood", 0, 60.0},
    {"Mirai", "TCP ACK flood", 0, 60.0},
    {"Mirai", "UDP PLAIN flood", 1400, 1442.0},
    {"BASHLITE", "UDP flood", 1400, 1442.0},
    {"BASHLITE", "TCP SYN flood", 0, 60.0},
    {"BASHLITE", "TCP ACK flood", 0, 60.0},
}};

inline std::string attack_name(std::size_t v) {
  const auto& a = kAttackVectors.at(v);
  return std::string(a.malware) + " " + a.flood + " (" + std::to_string(a.payload) + "B)";
}

struct AttackConfig {
  double q = 0.05;              // infected fraction of users
  double mean_duration = 2.0;   // minutes
  double sd_duration = 0.5;
  double attacks_per_day = 1.0;
  double pkt_rate = 2000.0;     // upload packets/s added per infected home
};

/// One synchronized attack; every infected home takes part.
struct AttackEvent {
  std::size_t id = 0;
  std::size_t day = 0;
  int start = 0;     // minute of day
  int duration = 1;  // minutes
  std::size_t vector = 0;
};

struct GroundTruth {
  std::vector<std::size_t> infected;  // sorted entity ids
  std::vector<AttackEvent> events;    // sorted by (day, start)
};

inline std::size_t infected_count(double q, std::size_t n_users) {
  const double target = q * static_cast<double>(n_users);
  if (target < 1.0 - 1e-9) {
    throw DataError("inject_attacks: q * n_users = " + std::to_string(target) + " < 1, no infectable user");
  }
  return std::min(n_users, static_cast<std::size_t>(std::ceil(target - 1e-9)));
}

/// Adds flood traffic of randomly timed synchronized attacks to the infected
/// homes. Per day the attack count is Poisson(attacks_per_day); start minutes
/// are uniform, attacks on the same day do not overlap, and durations are
/// max(1, round(N(mean, sd))) whole minutes.
inline std::pair<std::vector<TrafficDay>, GroundTruth> inject_attacks(std::vector<TrafficDay> days,
                                                                      const AttackConfig& cfg,
                                                                      std::uint64_t seed) {
  if (!(cfg.q > 0.0 && cfg.q <= 1.0)) throw DataError("inject_attacks: q must be in (0, 1]");
  if (!(cfg.mean_duration >= 1.0)) throw DataError("inject_attacks: mean_duration must be >= 1");
  if (!(cfg.sd_duration >= 0.0)) throw DataError("inject_attacks: sd_duration must be >= 0");
  if (!(cfg.attacks_per_day >= 0.0)) throw DataError("inject_attacks: attacks_per_day must be >= 0");
  if (!(cfg.pkt_rate > 0.0)) throw DataError("inject_attacks: pkt_rate must be > 0");
  detail::require(!days.empty(), "inject_attacks: no traffic");

  std::size_t n_users = 0, n_days = 0;
  for (const auto& d : days) {
    n_users = std::max(n_users, d.entity + 1);
    n_days = std::max(n_days, d.day + 1);
  }
  GroundTruth gt;
  auto rng = stream_rng(seed, 3, 0, 0);
  std::vector<std::size_t> users(n_users);
  std::iota(users.begin(), users.end(), std::size_t{0});
  std::shuffle(users.begin(), users.end(), rng);
  users.resize(infected_count(cfg.q, n_users));
  std::sort(users.begin(), users.end());
  gt.infected = users;

  std::poisson_distribution<int> count(cfg.attacks_per_day);
  std::normal_distribution<double> dur(cfg.mean_duration, cfg.sd_duration);
  std::uniform_int_distribution<std::size_t> pick_vector(0, kAttackVectors.size() - 1);
  for (std::size_t d = 0; d < n_days; ++d) {
    const int n = count(rng);
    std::vector<std::pair<int, int>> taken;
    for (int a = 0; a < n; ++a) {
      const int len = std::min(kMinutes, std::max(1, static_cast<int>(std::lround(dur(rng)))));
      std::uniform_int_distribution<int> start(0, kMinutes - len);
      bool placed = false;
      int s = 0;
      for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
        s = start(rng);
        placed = std::none_of(taken.begin(), taken.end(),
                              [&](auto iv) { return s < iv.second && iv.first < s + len; });
      }
      const std::size_t v = pick_vector(rng);
      if (!placed) continue;
      taken.emplace_back(s, s + len);
      gt.events.push_back({0, d, s, len, v});
    }
  }
  std::sort(gt.events.begin(), gt.events.end(),
            [](const auto& a, const auto& b) { return std::tie(a.day, a.start) < std::tie(b.day, b.start); });
  for (std::size_t e = 0; e < gt.events.size(); ++e) gt.events[e].id = e;

  std::set<std::size_t> infected(users.begin(), users.end());
  std::map<std::size_t, std::vector<const AttackEvent*>> by_day;
  for (const auto& ev : gt.events) by_day[ev.day].push_back(&ev);
  for (auto& td : days) {
    if (!infected.count(td.entity)) continue;
    auto it = by_day.find(td.day);
    if (it == by_day.end()) continue;
    for (const AttackEvent* ev : it->second) {
      const auto& av = kAttackVectors[ev->vector];
      for (int m = ev->start; m < ev->start + ev->duration; ++m) {
        const auto i = static_cast<std::size_t>(m);
        td.series[kUpPkts][i] += cfg.pkt_rate;
        td.series[kUpBytes][i] += cfg.pkt_rate * av.wire_bytes;
        td.attack[i] = 1;
      }
    }
  }
  return {std::move(days), std::move(gt)};
}

// ---------------------------------------------------------------- topology

/// Rooted tree. Node 0 is the root (measurement server); every entity is one
/// leaf. `parent[0]` is -1.
struct Topology {
  std::vector<std::string> name;
  std::vector<int> parent;
  std::vector<int> entity_leaf;  // entity id -> node index

  std::size_t size() const { return name.size(); }

  int node(const std::string& id) const {
    for (std::size_t n = 0; n < name.size(); ++n) {
      if (name[n] == id) return static_cast<int>(n);
    }
    throw DataError("topology: unknown node '" + id + "'");
  }

  bool is_ancestor(int anc, int n) const {
    for (int cur = n; cur >= 0; cur = parent[static_cast<std::size_t>(cur)]) {
      if (cur == anc) return true;
    }
    return false;
  }

  /// Entities whose leaf lies in the subtree of `n` (inclusive).
  std::vector<std::size_t> entities_under(int n) const {
    std::vector<std::size_t> out;
    for (std::size_t e = 0; e < entity_leaf.size(); ++e) {
      if (is_ancestor(n, entity_leaf[e])) out.push_back(e);
    }
    return out;
  }

  std::vector<int> children(int n) const {
    std::vector<int> out;
    for (std::size_t c = 0; c < parent.size(); ++c) {
      if (parent[c] == n) out.push_back(static_cast<int>(c));
    }
    return out;
  }

  void validate() const {
    detail::require(!name.empty() && name.size() == parent.size(), "topology: malformed node table");
    detail::require(parent[0] == -1, "topology: node 0 must be the root");
    std::set<std::string> seen;
    for (std::size_t n = 0; n < name.size(); ++n) {
      detail::require(seen.insert(name[n]).second, "topology: duplicate node '" + name[n] + "'");
      if (n > 0) {
        detail::require(parent[n] >= 0 && static_cast<std::size_t>(parent[n]) < name.size(),
                        "topology: node '" + name[n] + "' has no valid parent");
        detail::require(is_ancestor(0, static_cast<int>(n)), "topology: node '" + name[n] + "' is not connected to the root");
      }
    }
    std::set<int> leaves;
    for (int leaf : entity_leaf) {
      detail::require(leaf > 0 && static_cast<std::size_t>(leaf) < name.size(), "topology: entity leaf out of range");
      detail::require(children(leaf).empty(), "topology: entity node '" + name[static_cast<std::size_t>(leaf)] + "' is not a leaf");
      detail::require(leaves.insert(leaf).second, "topology: two entities share a leaf");
    }
  }
};

inline std::string user_id(std::size_t e) {
  std::string s = std::to_string(e);
  return "u" + std::string(s.size() < 4 ? 4 - s.size() : 0, '0') + s;
}

/// root -> regions -> aggregation nodes -> users. Users are dealt to
/// aggregation nodes round-robin so subtree sizes differ by at most one.
inline Topology make_tree(std::size_t n_users, std::size_t n_regions, std::size_t aggs_per_region) {
  detail::require(n_users >= 1 && n_regions >= 1 && aggs_per_region >= 1, "make_tree: sizes must be >= 1");
  Topology t;
  t.name.push_back("root");
  t.parent.push_back(-1);
  std::vector<int> aggs;
  for (std::size_t r = 0; r < n_regions; ++r) {
    const int rn = static_cast<int>(t.name.size());
    t.name.push_back("r" + std::to_string(r));
    t.parent.push_back(0);
    for (std::size_t a = 0; a < aggs_per_region; ++a) {
      aggs.push_back(static_cast<int>(t.name.size()));
      t.name.push_back("r" + std::to_string(r) + "a" + std::to_string(a));
      t.parent.push_back(rn);
    }
  }
  for (std::size_t e = 0; e < n_users; ++e) {
    t.entity_leaf.push_back(static_cast<int>(t.name.size()));
    t.name.push_back(user_id(e));
    t.parent.push_back(aggs[e % aggs.size()]);
  }
  return t;
}

// ---------------------------------------------------------------- QoS

enum class QosEventType { outage, loss, congestion, server_offline };

inline std::string to_string(QosEventType t) {
  switch (t) {
    case QosEventType::outage: return "outage";
    case QosEventType::loss: return "loss";
    case QosEventType::congestion: return "congestion";
    default: return "server_offline";
  }
}

inline QosEventType parse_event_type(const std::string& s) {
  if (s == "outage") return QosEventType::outage;
  if (s == "loss") return QosEventType::loss;
  if (s == "congestion") return QosEventType::congestion;
  if (s == "server_offline") return QosEventType::server_offline;
  throw DataError("unknown event type '" + s + "'");
}

/// Degradation attached to a tree node; affects every leaf beneath it during
/// minutes [start, end) of `day`. magnitude: loss fraction for loss events,
/// latency multiplier for congestion; unused otherwise.
struct QosEvent {
  QosEventType type = QosEventType::outage;
  std::string node;
  std::size_t day = 0;
  int start = 0, end = kMinutes;
  double magnitude = 0.0;
};

/// One user's day of latency/loss probes.
struct QosDay {
  std::size_t entity = 0;
  std::size_t day = 0;
  std::vector<double> latency;        // ms; meaningless where missing
  std::vector<double> loss;           // fraction in [0, 1]; meaningless where missing
  std::vector<double> cross_traffic;  // Mbps of user traffic during the probe
  std::vector<std::uint8_t> missing;  // 1: no sample reached the server
  std::vector<std::uint8_t> server_offline;  // 1: measurement server down
};

struct QosConfig {
  double latency_median = 15.0;  // ms, population median of user base latency
  double latency_sigma = 0.3;    // lognormal user spread
  double latency_noise = 0.08;   // per-minute lognormal noise
  double evening_load = 0.25;    // diurnal latency inflation at the evening peak
  double base_loss = 0.002;      // mean loss fraction
  double cross_mean = 0.5;       // Mbps
  double cross_spike_prob = 0.02;
};

/// Latency/loss days for every (user, day), ordered day-major. Events must
/// reference topology nodes.
inline std::vector<QosDay> gen_qos(std::size_t n_users, std::size_t n_days, const Topology& topo,
                                   const std::vector<QosEvent>& events, std::uint64_t seed,
                                   const QosConfig& cfg = {}) {
  detail::require(n_users >= 1 && n_days >= 1, "gen_qos: n_users and n_days must be >= 1");
  if (topo.entity_leaf.size() < n_users) {
    throw DataError("gen_qos: topology has " + std::to_string(topo.entity_leaf.size()) + " entities, need " +
                    std::to_string(n_users));
  }
  struct Resolved {
    const QosEvent* ev;
    int node;
  };
  std::vector<Resolved> resolved;
  for (const auto& ev : events) {
    if (ev.start < 0 || ev.end > kMinutes || ev.start >= ev.end) {
      throw DataError("gen_qos: event on node '" + ev.node + "' has an empty or out-of-day span");
    }
    resolved.push_back({&ev, topo.node(ev.node)});
  }
  std::vector<double> base(n_users);
  for (std::size_t u = 0; u < n_users; ++u) {
    auto rng = stream_rng(seed, 4, u, 0);
    std::normal_distribution<double> z(0.0, 1.0);
    base[u] = cfg.latency_median * std::exp(cfg.latency_sigma * z(rng));
  }
  std::vector<QosDay> out;
  out.reserve(n_users * n_days);
  for (std::size_t d = 0; d < n_days; ++d) {
    for (std::size_t u = 0; u < n_users; ++u) {
      auto rng = stream_rng(seed, 5, u, d);
      std::normal_distribution<double> z(0.0, 1.0);
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      std::exponential_distribution<double> loss_draw(1.0 / cfg.base_loss);
      std::exponential_distribution<double> cross_draw(1.0 / cfg.cross_mean);
      QosDay q;
      q.entity = u;
      q.day = d;
      q.latency.resize(kMinutes);
      q.loss.resize(kMinutes);
      q.cross_traffic.resize(kMinutes);
      q.missing.assign(kMinutes, 0);
      q.server_offline.assign(kMinutes, 0);
      for (int m = 0; m < kMinutes; ++m) {
        const auto i = static_cast<std::size_t>(m);
        const double peak = std::exp(-0.5 * std::pow((m - 1260.0) / 120.0, 2.0));
        q.latency[i] = base[u] * (1.0 + cfg.evening_load * peak) * std::exp(cfg.latency_noise * z(rng));
        q.loss[i] = std::min(1.0, loss_draw(rng));
        q.cross_traffic[i] = cross_draw(rng);
        if (unit(rng) < cfg.cross_spike_prob) q.cross_traffic[i] += 2.5 + 5.0 * unit(rng);
      }
      const int leaf = topo.entity_leaf[u];
      for (const auto& r : resolved) {
        if (r.ev->day != d || !topo.is_ancestor(r.node, leaf)) continue;
        for (int m = r.ev->start; m < r.ev->end; ++m) {
          const auto i = static_cast<std::size_t>(m);
          switch (r.ev->type) {
            case QosEventType::outage: q.missing[i] = 1; break;
            case QosEventType::server_offline: q.server_offline[i] = 1; break;
            case QosEventType::loss:
              q.loss[i] = std::clamp(r.ev->magnitude * std::exp(0.2 * z(rng)), 0.0, 1.0);
              break;
            case QosEventType::congestion: q.latency[i] *= r.ev->magnitude; break;
          }
        }
      }
      out.push_back(std::move(q));
    }
  }
  return out;
}

/// Background degradations that give the population its usual mix of
/// behaviours: on each day every aggregation-level node independently draws a
/// loss episode, a congestion episode, an outage, or an outage plus loss.
struct BackgroundRates {
  double loss = 0.08;
  double congestion = 0.08;
  double outage = 0.06;
  double outage_loss = 0.04;
};

inline std::vector<QosEvent> background_events(const Topology& topo, std::size_t n_days, std::uint64_t seed,
                                                const BackgroundRates& rates = {}) {
  std::vector<QosEvent> out;
  std::vector<int> aggs;
  for (std::size_t n = 1; n < topo.size(); ++n) {
    const auto kids = topo.children(static_cast<int>(n));
    if (!kids.empty() && topo.children(kids.front()).empty()) aggs.push_back(static_cast<int>(n));
  }
  for (std::size_t d = 0; d < n_days; ++d) {
    for (int a : aggs) {
      auto rng = stream_rng(seed, 6, static_cast<std::uint64_t>(a), d);
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      std::uniform_int_distribution<int> hour(0, 19);
      const std::string& node = topo.name[static_cast<std::size_t>(a)];
      const double u = unit(rng);
      const int s = hour(rng) * 60;
      const int span = 120 + 60 * static_cast<int>(unit(rng) * 3.0);
      const auto end = [](int e) { return std::min(e, kMinutes); };
      double acc = rates.loss;
      if (u < acc) {
        out.push_back({QosEventType::loss, node, d, s, end(s + span), 0.1 + 0.2 * unit(rng)});
        continue;
      }
      if (u < (acc += rates.congestion)) {
        out.push_back({QosEventType::congestion, node, d, s, end(s + span), 3.0 + 3.0 * unit(rng)});
        continue;
      }
      if (u < (acc += rates.outage)) {
        out.push_back({QosEventType::outage, node, d, s, end(s + span + 60), 0.0});
        continue;
      }
      if (u < (acc += rates.outage_loss)) {
        out.push_back({QosEventType::outage, node, d, s, end(s + span), 0.0});
        const int s2 = (s + 600) % (kMinutes - span);
        out.push_back({QosEventType::loss, node, d, s2, s2 + span, 0.2 + 0.2 * unit(rng)});
      }
    }
  }
  return out;
}

}  // namespace tensorad::datagen
