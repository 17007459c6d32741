#pragma once

#include <cstdint>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "tensorad/csv.hpp"
#include "tensorad/tensor.hpp"

namespace tensorad {

/// Text serialization:
///
///     TENSOR3 <I> <J> <K> <mask-flag>
///     <value>            one line per entry, canonical (Fortran) order
///
/// Unobserved entries are written as `NA` and require mask-flag 1.
inline void write_tensor(std::ostream& out, const Tensor3& t) {
  const auto& d = t.dims();
  out << "TENSOR3 " << d.I << ' ' << d.J << ' ' << d.K << ' ' << (t.has_mask() ? 1 : 0) << '\n';
  const auto old_precision = out.precision(17);
  const auto vals = t.values();
  for (std::size_t p = 0; p < vals.size(); ++p) {
    if (t.observed(p)) {
      out << vals[p] << '\n';
    } else {
      out << "NA\n";
    }
  }
  out.precision(old_precision);
}

inline Tensor3 read_tensor(std::istream& in) {
  std::string tag;
  Dims d;
  int mask_flag = 0;
  if (!(in >> tag >> d.I >> d.J >> d.K >> mask_flag) || tag != "TENSOR3") {
    throw DataError("tensor file: bad header");
  }
  if (d.I == 0 || d.J == 0 || d.K == 0) throw DataError("tensor file: dims must be positive");
  std::vector<double> values(d.size());
  std::vector<std::uint8_t> mask(mask_flag ? d.size() : 0, 1);
  std::string tok;
  for (std::size_t p = 0; p < values.size(); ++p) {
    if (!(in >> tok)) throw DataError("tensor file: truncated at entry " + std::to_string(p));
    if (tok == "NA") {
      if (!mask_flag) throw DataError("tensor file: NA entry without mask flag");
      mask[p] = 0;
      values[p] = 0.0;
    } else {
      values[p] = csv::to_double(tok, "value");
    }
  }
  return Tensor3(d, std::move(values), std::move(mask));
}

/// Result of importing long-format records.
struct LongTensor {
  Tensor3 tensor;
  std::vector<std::string> entities;  // mode-1 labels, first-appearance order
  std::vector<std::string> metrics;   // mode-2 labels
  std::int64_t first_minute = 0;      // minute of mode-3 index 0
};

/// Imports `entity,metric,minute,value` records into an entity x metric x
/// minute tensor. Absent (entity, metric, minute) cells become unobserved.
/// If `metric_order` is non-empty it fixes mode-2 ordering and any other
/// metric is rejected.
inline LongTensor import_long_csv(std::istream& in, std::vector<std::string> metric_order = {}) {
  csv::Reader reader(in);
  const std::size_t c_entity = reader.column("entity");
  const std::size_t c_metric = reader.column("metric");
  const std::size_t c_minute = reader.column("minute");
  const std::size_t c_value = reader.column("value");

  struct Record {
    std::uint32_t entity, metric;
    std::int64_t minute;
    double value;
  };
  std::vector<Record> records;
  LongTensor out;
  std::unordered_map<std::string, std::uint32_t> entity_ix, metric_ix;
  const bool fixed_metrics = !metric_order.empty();
  for (std::uint32_t m = 0; m < metric_order.size(); ++m) metric_ix.emplace(metric_order[m], m);
  out.metrics = std::move(metric_order);

  std::int64_t lo = std::numeric_limits<std::int64_t>::max();
  std::int64_t hi = std::numeric_limits<std::int64_t>::min();
  std::vector<std::string_view> f;
  while (reader.next(f)) {
    const std::string entity(csv::trim(f[c_entity]));
    const std::string metric(csv::trim(f[c_metric]));
    auto [eit, e_new] = entity_ix.try_emplace(entity, static_cast<std::uint32_t>(out.entities.size()));
    if (e_new) out.entities.push_back(entity);
    auto mit = metric_ix.find(metric);
    if (mit == metric_ix.end()) {
      if (fixed_metrics) throw DataError("unexpected metric '" + metric + "'");
      mit = metric_ix.emplace(metric, static_cast<std::uint32_t>(out.metrics.size())).first;
      out.metrics.push_back(metric);
    }
    const std::int64_t minute = csv::to_int(f[c_minute], "minute");
    const double value = csv::to_double(f[c_value], "value");
    lo = std::min(lo, minute);
    hi = std::max(hi, minute);
    records.push_back({eit->second, mit->second, minute, value});
  }
  if (records.empty()) throw DataError("long-format input has no records");

  Dims d{out.entities.size(), out.metrics.size(), static_cast<std::size_t>(hi - lo + 1)};
  std::vector<double> values(d.size(), 0.0);
  std::vector<std::uint8_t> mask(d.size(), 0);
  for (const auto& r : records) {
    const std::size_t k = static_cast<std::size_t>(r.minute - lo);
    const std::size_t p = r.entity + d.I * (r.metric + d.J * k);
    if (mask[p]) {
      throw DataError("duplicate record for entity '" + out.entities[r.entity] + "', metric '" +
                      out.metrics[r.metric] + "', minute " + std::to_string(r.minute));
    }
    mask[p] = 1;
    values[p] = r.value;
  }
  const bool complete = std::all_of(mask.begin(), mask.end(), [](auto m) { return m != 0; });
  if (complete) mask.clear();
  out.tensor = Tensor3(d, std::move(values), std::move(mask));
  out.first_minute = lo;
  return out;
}

}  // namespace tensorad
