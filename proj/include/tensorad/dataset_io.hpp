#pragma once

// CSV files of generated datasets.
//
//   traffic.csv   entity,metric,minute,value   (long format, minute counted from day 0)
//   attacks.csv   id,day,start,duration,vector,name
//   infected.csv  entity
//   qos.csv       entity,metric,minute,value   metrics latency, loss, cross_traffic, missing, server_offline
//   topology.csv  node,parent,entity          (parent empty for the root, entity empty for inner nodes)
//   events.csv    type,node,day,start,end,magnitude

#include <iomanip>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "tensorad/csv.hpp"
#include "tensorad/datagen.hpp"
#include "tensorad/tensor_io.hpp"

namespace tensorad::io {

namespace detail {

inline std::size_t parse_user(const std::string& s) {
  if (s.size() < 2 || s[0] != 'u') throw DataError("entity id '" + s + "' is not of the form u<number>");
  return static_cast<std::size_t>(csv::to_int(std::string_view(s).substr(1), "entity"));
}

inline std::size_t as_index(std::int64_t v, const char* field) {
  if (v < 0) throw DataError(std::string("field '") + field + "' must be non-negative");
  return static_cast<std::size_t>(v);
}

// Splits an entity x metric x minute tensor into per-day rows; every
// (entity, day) must be complete and entities must be u0000..u(n-1).
template <class F>
void for_each_day(const LongTensor& lt, F f) {
  const Dims d = lt.tensor.dims();
  if (lt.first_minute != 0 || d.K % datagen::kMinutes != 0) {
    throw DataError("dataset minutes must start at 0 and cover whole days");
  }
  if (lt.tensor.has_mask()) throw DataError("dataset has missing (entity, metric, minute) records");
  for (std::size_t i = 0; i < d.I; ++i) {
    if (parse_user(lt.entities[i]) != i) {
      throw DataError("dataset entities must be listed in order u0000, u0001, ...; found '" + lt.entities[i] + "'");
    }
  }
  for (std::size_t day = 0; day < d.K / datagen::kMinutes; ++day) {
    for (std::size_t i = 0; i < d.I; ++i) f(i, day);
  }
}

}  // namespace detail

// ---------------------------------------------------------------- traffic

inline void write_traffic(std::ostream& out, const std::vector<datagen::TrafficDay>& days) {
  out << std::setprecision(17);
  out << "entity,metric,minute,value\n";
  std::size_t n_users = 0;
  for (const auto& d : days) n_users = std::max(n_users, d.entity + 1);
  // Minute-major within a day so that entities appear in id order.
  for (std::size_t base = 0; base < days.size(); base += n_users) {
    for (std::size_t m = 0; m < datagen::kMinutes; ++m) {
      for (std::size_t u = 0; u < n_users; ++u) {
        const auto& d = days[base + u];
        const std::size_t minute = d.day * datagen::kMinutes + m;
        for (std::size_t j = 0; j < 4; ++j) {
          out << datagen::user_id(d.entity) << ',' << datagen::kTrafficMetricNames[j] << ',' << minute << ','
              << d.series[j][m] << '\n';
        }
      }
    }
  }
}

inline void write_attacks(std::ostream& out, const datagen::GroundTruth& gt) {
  out << "id,day,start,duration,vector,name\n";
  for (const auto& e : gt.events) {
    out << e.id << ',' << e.day << ',' << e.start << ',' << e.duration << ',' << e.vector << ','
        << datagen::attack_name(e.vector) << '\n';
  }
}

/// One row per attacked (entity, minute); minute is of day.
inline void write_labels(std::ostream& out, const datagen::GroundTruth& gt) {
  out << "entity,day,minute,attack_type\n";
  for (const auto& e : gt.events) {
    for (int m = e.start; m < e.start + e.duration; ++m) {
      for (auto u : gt.infected) {
        out << datagen::user_id(u) << ',' << e.day << ',' << m << ',' << datagen::attack_name(e.vector) << '\n';
      }
    }
  }
}

inline void write_infected(std::ostream& out, const datagen::GroundTruth& gt) {
  out << "entity\n";
  for (auto u : gt.infected) out << datagen::user_id(u) << '\n';
}

inline datagen::GroundTruth read_ground_truth(std::istream& attacks, std::istream& infected) {
  datagen::GroundTruth gt;
  csv::Reader ri(infected);
  const auto ce = ri.column("entity");
  std::vector<std::string_view> f;
  while (ri.next(f)) gt.infected.push_back(detail::parse_user(std::string(csv::trim(f[ce]))));
  std::sort(gt.infected.begin(), gt.infected.end());
  csv::Reader ra(attacks);
  const auto cid = ra.column("id"), cday = ra.column("day"), cs = ra.column("start"), cd = ra.column("duration"),
             cv = ra.column("vector");
  while (ra.next(f)) {
    datagen::AttackEvent e;
    e.id = detail::as_index(csv::to_int(f[cid], "id"), "id");
    e.day = detail::as_index(csv::to_int(f[cday], "day"), "day");
    e.start = static_cast<int>(csv::to_int(f[cs], "start"));
    e.duration = static_cast<int>(csv::to_int(f[cd], "duration"));
    e.vector = detail::as_index(csv::to_int(f[cv], "vector"), "vector");
    if (e.start < 0 || e.duration < 1 || e.start + e.duration > datagen::kMinutes || e.vector >= datagen::kAttackVectors.size()) {
      throw DataError("attacks.csv: event " + std::to_string(e.id) + " has an invalid span or vector");
    }
    gt.events.push_back(e);
  }
  return gt;
}

/// Reads traffic and re-applies attack labels from the ground truth.
inline std::vector<datagen::TrafficDay> read_traffic(std::istream& in, const datagen::GroundTruth& gt) {
  std::vector<std::string> metrics(datagen::kTrafficMetricNames.begin(), datagen::kTrafficMetricNames.end());
  const LongTensor lt = import_long_csv(in, metrics);
  if (lt.metrics.size() != 4) throw DataError("traffic.csv must contain all four metrics");
  std::vector<datagen::TrafficDay> days;
  const std::size_t n = lt.tensor.dims().I;
  detail::for_each_day(lt, [&](std::size_t u, std::size_t day) {
    datagen::TrafficDay td;
    td.entity = u;
    td.day = day;
    td.attack.assign(datagen::kMinutes, 0);
    for (std::size_t j = 0; j < 4; ++j) {
      td.series[j].resize(datagen::kMinutes);
      for (std::size_t m = 0; m < datagen::kMinutes; ++m) {
        const double v = lt.tensor.at(u, j, day * datagen::kMinutes + m);
        if (!(v >= 0.0)) throw DataError("traffic.csv: negative or non-numeric rate for " + lt.entities[u]);
        td.series[j][m] = v;
      }
    }
    days.push_back(std::move(td));
  });
  for (auto u : gt.infected) {
    if (u >= n) throw DataError("infected.csv: entity " + datagen::user_id(u) + " not in traffic.csv");
  }
  for (const auto& e : gt.events) {
    if (e.day >= days.size() / n) throw DataError("attacks.csv: event " + std::to_string(e.id) + " after the last day");
    for (auto u : gt.infected) {
      for (int m = e.start; m < e.start + e.duration; ++m) days[e.day * n + u].attack[static_cast<std::size_t>(m)] = 1;
    }
  }
  return days;
}

// ---------------------------------------------------------------- QoS

inline const std::array<std::string, 5> kQosMetricNames = {"latency", "loss", "cross_traffic", "missing",
                                                           "server_offline"};

inline void write_qos(std::ostream& out, const std::vector<datagen::QosDay>& days) {
  out << std::setprecision(17);
  out << "entity,metric,minute,value\n";
  std::size_t n_users = 0;
  for (const auto& d : days) n_users = std::max(n_users, d.entity + 1);
  for (std::size_t base = 0; base < days.size(); base += n_users) {
    for (std::size_t m = 0; m < datagen::kMinutes; ++m) {
      for (std::size_t u = 0; u < n_users; ++u) {
        const auto& d = days[base + u];
        const std::size_t minute = d.day * datagen::kMinutes + m;
        const std::string id = datagen::user_id(d.entity);
        out << id << ",latency," << minute << ',' << d.latency[m] << '\n'
            << id << ",loss," << minute << ',' << d.loss[m] << '\n'
            << id << ",cross_traffic," << minute << ',' << d.cross_traffic[m] << '\n'
            << id << ",missing," << minute << ',' << int(d.missing[m]) << '\n'
            << id << ",server_offline," << minute << ',' << int(d.server_offline[m]) << '\n';
      }
    }
  }
}

inline std::vector<datagen::QosDay> read_qos(std::istream& in) {
  const LongTensor lt = import_long_csv(in, std::vector<std::string>(kQosMetricNames.begin(), kQosMetricNames.end()));
  if (lt.metrics.size() != kQosMetricNames.size()) throw DataError("qos.csv must contain all five metrics");
  std::vector<datagen::QosDay> days;
  detail::for_each_day(lt, [&](std::size_t u, std::size_t day) {
    datagen::QosDay q;
    q.entity = u;
    q.day = day;
    q.latency.resize(datagen::kMinutes);
    q.loss.resize(datagen::kMinutes);
    q.cross_traffic.resize(datagen::kMinutes);
    q.missing.resize(datagen::kMinutes);
    q.server_offline.resize(datagen::kMinutes);
    for (std::size_t m = 0; m < datagen::kMinutes; ++m) {
      const std::size_t t = day * datagen::kMinutes + m;
      q.latency[m] = lt.tensor.at(u, 0, t);
      q.loss[m] = lt.tensor.at(u, 1, t);
      q.cross_traffic[m] = lt.tensor.at(u, 2, t);
      const double miss = lt.tensor.at(u, 3, t), off = lt.tensor.at(u, 4, t);
      if ((miss != 0.0 && miss != 1.0) || (off != 0.0 && off != 1.0)) {
        throw DataError("qos.csv: missing/server_offline must be 0 or 1 (" + lt.entities[u] + ", minute " +
                        std::to_string(t) + ")");
      }
      q.missing[m] = static_cast<std::uint8_t>(miss);
      q.server_offline[m] = static_cast<std::uint8_t>(off);
    }
    days.push_back(std::move(q));
  });
  return days;
}

inline void write_topology(std::ostream& out, const datagen::Topology& t) {
  std::vector<std::string> entity(t.size());
  for (std::size_t e = 0; e < t.entity_leaf.size(); ++e) entity[static_cast<std::size_t>(t.entity_leaf[e])] = datagen::user_id(e);
  out << "node,parent,entity\n";
  for (std::size_t n = 0; n < t.size(); ++n) {
    out << t.name[n] << ',' << (t.parent[n] < 0 ? "" : t.name[static_cast<std::size_t>(t.parent[n])]) << ','
        << entity[n] << '\n';
  }
}

inline datagen::Topology read_topology(std::istream& in) {
  csv::Reader r(in);
  const auto cn = r.column("node"), cp = r.column("parent"), ce = r.column("entity");
  datagen::Topology t;
  std::vector<std::string> parents;
  std::map<std::size_t, int> leaf_of;
  std::vector<std::string_view> f;
  while (r.next(f)) {
    t.name.emplace_back(csv::trim(f[cn]));
    parents.emplace_back(csv::trim(f[cp]));
    const std::string e(csv::trim(f[ce]));
    if (!e.empty()) {
      if (!leaf_of.emplace(detail::parse_user(e), static_cast<int>(t.name.size() - 1)).second) {
        throw DataError("topology.csv: entity '" + e + "' appears twice");
      }
    }
  }
  if (t.name.empty() || !parents[0].empty()) throw DataError("topology.csv: first row must be the root (empty parent)");
  t.parent.push_back(-1);
  for (std::size_t n = 1; n < t.name.size(); ++n) t.parent.push_back(t.node(parents[n]));
  std::size_t next = 0;
  for (const auto& [e, leaf] : leaf_of) {
    if (e != next++) throw DataError("topology.csv: entity ids must be contiguous from u0000");
    t.entity_leaf.push_back(leaf);
  }
  t.validate();
  return t;
}

inline void write_events(std::ostream& out, const std::vector<datagen::QosEvent>& ev) {
  out << std::setprecision(17);
  out << "type,node,day,start,end,magnitude\n";
  for (const auto& e : ev) {
    out << datagen::to_string(e.type) << ',' << e.node << ',' << e.day << ',' << e.start << ',' << e.end << ','
        << e.magnitude << '\n';
  }
}

inline std::vector<datagen::QosEvent> read_events(std::istream& in) {
  csv::Reader r(in);
  const auto ct = r.column("type"), cn = r.column("node"), cd = r.column("day"), cs = r.column("start"),
             ce = r.column("end"), cm = r.column("magnitude");
  std::vector<datagen::QosEvent> out;
  std::vector<std::string_view> f;
  while (r.next(f)) {
    datagen::QosEvent e;
    e.type = datagen::parse_event_type(std::string(csv::trim(f[ct])));
    e.node = std::string(csv::trim(f[cn]));
    e.day = detail::as_index(csv::to_int(f[cd], "day"), "day");
    e.start = static_cast<int>(csv::to_int(f[cs], "start"));
    e.end = static_cast<int>(csv::to_int(f[ce], "end"));
    e.magnitude = csv::to_double(f[cm], "magnitude");
    if (e.start < 0 || e.end > datagen::kMinutes || e.start >= e.end) {
      throw DataError("events.csv: event on node '" + e.node + "' has an empty or out-of-day span");
    }
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace tensorad::io
