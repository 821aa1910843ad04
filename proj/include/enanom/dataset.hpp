#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "error.hpp"
#include "io.hpp"
#include "timestamp.hpp"

namespace enanom {

// One meter observation. Missing power/temperature is std::nullopt, never 0.
struct ConsumptionRecord {
  Timestamp timestamp{};
  std::optional<double> power;        // kW
  std::optional<double> temperature;  // deg C
  std::optional<int> occupancy;
  std::optional<std::string> appliance_id;
  bool working_day = true;
};

struct TimeSeries {
  std::vector<ConsumptionRecord> records;  // strictly increasing timestamps
  Minutes cadence{60};

  std::size_t size() const noexcept { return records.size(); }
  bool empty() const noexcept { return records.empty(); }

  bool has_temperature() const {
    return std::any_of(records.begin(), records.end(), [](const auto& r) { return r.temperature.has_value(); });
  }
  bool has_occupancy() const {
    return std::any_of(records.begin(), records.end(), [](const auto& r) { return r.occupancy.has_value(); });
  }
  bool has_appliance_id() const {
    return std::any_of(records.begin(), records.end(), [](const auto& r) { return r.appliance_id.has_value(); });
  }
  std::size_t missing_power() const {
    return static_cast<std::size_t>(
        std::count_if(records.begin(), records.end(), [](const auto& r) { return !r.power; }));
  }

  // Observed power; throws if any value is missing.
  std::vector<double> power() const {
    std::vector<double> out;
    out.reserve(records.size());
    for (const auto& r : records) {
      if (!r.power) throw ValidationError("series has missing power at " + format_timestamp(r.timestamp));
      out.push_back(*r.power);
    }
    return out;
  }
};

// Maps the canonical fields onto CSV header names.
struct ColumnSchema {
  std::string timestamp = "timestamp";
  std::string power = "power";
  std::string temperature = "temperature";
  std::string occupancy = "occupancy";
  std::string appliance_id = "appliance_id";
  std::string working_day = "working_day";
  Minutes utc_offset{0};  // applied to timestamps without an explicit offset
};

struct LoadResult {
  TimeSeries series;
  std::size_t missing_cells = 0;  // unparseable power + temperature cells
};

namespace detail {

inline Minutes infer_cadence(const std::vector<ConsumptionRecord>& records) {
  std::map<Minutes::rep, std::size_t> counts;
  for (std::size_t i = 1; i < records.size(); ++i) {
    ++counts[(records[i].timestamp - records[i - 1].timestamp).count()];
  }
  if (counts.empty()) return Minutes{60};
  auto best = counts.begin();
  for (auto it = counts.begin(); it != counts.end(); ++it) {
    if (it->second > best->second) best = it;
  }
  return Minutes{best->first};
}

inline void require_strictly_increasing(const std::vector<ConsumptionRecord>& records) {
  for (std::size_t i = 1; i < records.size(); ++i) {
    if (records[i].timestamp == records[i - 1].timestamp) {
      throw ValidationError("duplicate timestamp " + format_timestamp(records[i].timestamp));
    }
  }
}

inline std::optional<bool> parse_flag(std::string_view text) {
  text = trim(text);
  if (text == "1" || text == "true" || text == "True" || text == "TRUE") return true;
  if (text == "0" || text == "false" || text == "False" || text == "FALSE") return false;
  return std::nullopt;
}

}  // namespace detail

inline LoadResult read_csv(std::istream& in, const ColumnSchema& schema = {}) {
  std::string line;
  if (!next_data_line(in, line)) throw SchemaError("empty CSV: no header line");
  const auto header = split_csv_line(line);
  auto find_column = [&](const std::string& name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (trim(header[i]) == name) return i;
    }
    return std::nullopt;
  };
  const auto ts_col = find_column(schema.timestamp);
  if (!ts_col) throw SchemaError("missing required column '" + schema.timestamp + "'");
  const auto power_col = find_column(schema.power);
  if (!power_col) throw SchemaError("missing required column '" + schema.power + "'");
  const auto temp_col = find_column(schema.temperature);
  const auto occ_col = find_column(schema.occupancy);
  const auto app_col = find_column(schema.appliance_id);
  const auto wd_col = find_column(schema.working_day);

  LoadResult result;
  std::size_t row = 0;
  while (next_data_line(in, line)) {
    ++row;
    const auto fields = split_csv_line(line);
    auto cell = [&](std::optional<std::size_t> col) -> std::string_view {
      if (!col || *col >= fields.size()) return {};
      return fields[*col];
    };
    if (*ts_col >= fields.size()) {
      throw SchemaError("row " + std::to_string(row) + " has too few fields");
    }
    ConsumptionRecord rec;
    rec.timestamp = parse_timestamp(fields[*ts_col], schema.utc_offset);
    rec.power = parse_optional_double(cell(power_col));
    if (!rec.power) ++result.missing_cells;
    if (rec.power && *rec.power < 0.0) {
      throw ValidationError("negative power at " + format_timestamp(rec.timestamp));
    }
    if (temp_col) {
      rec.temperature = parse_optional_double(cell(temp_col));
      if (!rec.temperature) ++result.missing_cells;
    }
    if (occ_col) {
      if (const auto occ = parse_optional_double(cell(occ_col)); occ && *occ >= 0.0) {
        rec.occupancy = static_cast<int>(std::lround(*occ));
      }
    }
    if (app_col) {
      const auto id = trim(cell(app_col));
      if (!id.empty()) rec.appliance_id = std::string(id);
    }
    std::optional<bool> wd;
    if (wd_col) wd = detail::parse_flag(cell(wd_col));
    rec.working_day = wd ? *wd : weekday_index(rec.timestamp) < 5;
    result.series.records.push_back(std::move(rec));
  }

  std::stable_sort(result.series.records.begin(), result.series.records.end(),
                   [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; });
  detail::require_strictly_increasing(result.series.records);
  result.series.cadence = detail::infer_cadence(result.series.records);
  return result;
}

inline LoadResult load_csv(const std::string& path, const ColumnSchema& schema = {}) {
  auto in = open_input(path);
  return read_csv(in, schema);
}

// Canonical column names; optional columns are written only if some record has them.
inline void write_csv(const TimeSeries& series, std::ostream& out, const ArtifactMeta* meta = nullptr) {
  if (meta) out << meta->csv_comment() << '\n';
  const bool temp = series.has_temperature();
  const bool occ = series.has_occupancy();
  const bool app = series.has_appliance_id();
  out << "timestamp,power";
  if (temp) out << ",temperature";
  if (occ) out << ",occupancy";
  if (app) out << ",appliance_id";
  out << ",working_day\n";
  for (const auto& r : series.records) {
    out << format_timestamp(r.timestamp) << ',' << (r.power ? format_double(*r.power) : "NaN");
    if (temp) out << ',' << (r.temperature ? format_double(*r.temperature) : "NaN");
    if (occ) out << ',' << (r.occupancy ? std::to_string(*r.occupancy) : "");
    if (app) out << ',' << (r.appliance_id ? quote_csv_field(*r.appliance_id) : "");
    out << ',' << (r.working_day ? '1' : '0') << '\n';
  }
}

inline void write_csv(const TimeSeries& series, const std::string& path, const ArtifactMeta* meta = nullptr) {
  auto out = open_output(path);
  write_csv(series, out, meta);
}

// Aggregates sub-hourly input to the canonical hourly cadence by per-hour means.
// Series already at hourly or coarser cadence are returned unchanged.
inline TimeSeries to_hourly(const TimeSeries& series) {
  if (series.cadence >= Minutes{60}) return series;
  TimeSeries out;
  out.cadence = Minutes{60};
  std::size_t i = 0;
  while (i < series.size()) {
    const auto hour = std::chrono::floor<std::chrono::hours>(series.records[i].timestamp);
    ConsumptionRecord agg;
    agg.timestamp = Timestamp{hour};
    agg.working_day = series.records[i].working_day;
    agg.appliance_id = series.records[i].appliance_id;
    double p_sum = 0.0, t_sum = 0.0, o_sum = 0.0;
    std::size_t p_n = 0, t_n = 0, o_n = 0;
    for (; i < series.size() && std::chrono::floor<std::chrono::hours>(series.records[i].timestamp) == hour; ++i) {
      const auto& r = series.records[i];
      if (r.power) { p_sum += *r.power; ++p_n; }
      if (r.temperature) { t_sum += *r.temperature; ++t_n; }
      if (r.occupancy) { o_sum += *r.occupancy; ++o_n; }
    }
    if (p_n) agg.power = p_sum / static_cast<double>(p_n);
    if (t_n) agg.temperature = t_sum / static_cast<double>(t_n);
    if (o_n) agg.occupancy = static_cast<int>(std::lround(o_sum / static_cast<double>(o_n)));
    out.records.push_back(std::move(agg));
  }
  return out;
}

// Inclusive index range into the series passed to fill_missing.
struct Span {
  std::size_t first = 0;
  std::size_t last = 0;
  std::size_t length() const noexcept { return last - first + 1; }
};

struct FillResult {
  TimeSeries series;
  std::vector<Span> filled;
  std::vector<Span> dropped;
};

namespace detail {

// Linear interpolation of every missing temperature; edges copy the nearest observation.
inline void fill_temperature(std::vector<ConsumptionRecord>& records) {
  std::vector<std::size_t> observed;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].temperature) observed.push_back(i);
  }
  if (observed.empty()) return;
  for (std::size_t i = 0; i < observed.front(); ++i) records[i].temperature = records[observed.front()].temperature;
  for (std::size_t i = observed.back() + 1; i < records.size(); ++i) {
    records[i].temperature = records[observed.back()].temperature;
  }
  for (std::size_t k = 1; k < observed.size(); ++k) {
    const std::size_t a = observed[k - 1], b = observed[k];
    const double ta = *records[a].temperature, tb = *records[b].temperature;
    for (std::size_t i = a + 1; i < b; ++i) {
      const double w = static_cast<double>(i - a) / static_cast<double>(b - a);
      records[i].temperature = ta + w * (tb - ta);
    }
  }
}

}  // namespace detail

// Interpolates runs of at most `max_gap` missing power samples between two observations;
// longer runs and unbounded leading/trailing runs are removed. Observed values never change.
inline FillResult fill_missing(const TimeSeries& series, std::size_t max_gap = 3) {
  const auto& in = series.records;
  const std::size_t observed = in.size() - series.missing_power();
  if (observed < 2) {
    throw InsufficientDataError("need at least 2 observed power values, have " + std::to_string(observed));
  }

  FillResult result;
  result.series.cadence = series.cadence;
  auto& out = result.series.records;
  out.reserve(in.size());

  std::size_t i = 0;
  while (i < in.size()) {
    if (in[i].power) {
      out.push_back(in[i]);
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < in.size() && !in[j].power) ++j;
    const Span gap{i, j - 1};
    const bool bounded = i > 0 && j < in.size();
    if (bounded && gap.length() <= max_gap) {
      const double left = *in[i - 1].power, right = *in[j].power;
      const double steps = static_cast<double>(j - (i - 1));
      for (std::size_t k = i; k < j; ++k) {
        auto rec = in[k];
        rec.power = left + (right - left) * static_cast<double>(k - (i - 1)) / steps;
        out.push_back(std::move(rec));
      }
      result.filled.push_back(gap);
    } else {
      result.dropped.push_back(gap);
    }
    i = j;
  }
  detail::fill_temperature(out);
  return result;
}

}  // namespace enanom
