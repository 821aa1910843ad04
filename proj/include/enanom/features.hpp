#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dataset.hpp"
#include "error.hpp"
#include "matrix.hpp"
#include "timestamp.hpp"

namespace enanom {

// Operating regime from mean daily temperature and working-day status.
enum class CaseLabel : int {
  warm_working = 1,  // t_mean > threshold, working day
  cool_working = 2,  // t_mean <= threshold, working day
  warm_off = 3,      // t_mean > threshold, non-working day
  cool_off = 4,      // t_mean <= threshold, non-working day
};

inline constexpr double kDefaultCaseThreshold = 17.0;  // deg C

inline int case_number(CaseLabel c) noexcept { return static_cast<int>(c); }

// The threshold itself belongs to the cool side, so every input gets exactly one label.
inline CaseLabel label_case(double mean_daily_temp, bool working_day,
                            double threshold = kDefaultCaseThreshold) noexcept {
  const bool warm = mean_daily_temp > threshold;
  if (working_day) return warm ? CaseLabel::warm_working : CaseLabel::cool_working;
  return warm ? CaseLabel::warm_off : CaseLabel::cool_off;
}

struct CyclicPair {
  double sin = 0.0;
  double cos = 1.0;
};

// Position on a circle of circumference `period`.
inline CyclicPair encode_cyclic(double value, double period) {
  if (!(period > 0.0)) throw DomainError("cyclic period must be positive");
  const double angle = 2.0 * std::numbers::pi * std::fmod(value, period) / period;
  return {std::sin(angle), std::cos(angle)};
}

struct FeatureVector {
  double hour_sin = 0.0;
  double hour_cos = 1.0;
  double day_sin = 0.0;
  double day_cos = 1.0;
  double temperature = 0.0;      // deg C
  double mean_daily_temp = 0.0;  // deg C, over the record's calendar day
  bool working_day = true;
  int occupancy = 0;
  CaseLabel case_label = CaseLabel::cool_working;
  std::optional<std::string> appliance_id;
  double target = 0.0;  // observed power, kW
};

// Standardized columns vs columns that are already bounded and pass through the scaler.
enum class ColumnKind { continuous, cyclic, binary };

struct FeatureOptions {
  bool include_occupancy = true;
  double case_threshold = kDefaultCaseThreshold;
};

// Column layout, fixed once per model so later series map onto the same columns.
struct FeatureLayout {
  FeatureOptions options;
  std::vector<std::string> appliance_vocab;  // sorted; unseen ids go to "other"

  std::vector<std::pair<std::string, ColumnKind>> columns() const {
    std::vector<std::pair<std::string, ColumnKind>> cols = {
        {"hour_sin", ColumnKind::cyclic},      {"hour_cos", ColumnKind::cyclic},
        {"day_sin", ColumnKind::cyclic},       {"day_cos", ColumnKind::cyclic},
        {"temperature", ColumnKind::continuous}, {"mean_daily_temp", ColumnKind::continuous},
        {"working_day", ColumnKind::binary}};
    if (options.include_occupancy) cols.emplace_back("occupancy", ColumnKind::continuous);
    for (int c = 1; c <= 4; ++c) cols.emplace_back("case_" + std::to_string(c), ColumnKind::binary);
    if (!appliance_vocab.empty()) {
      for (const auto& id : appliance_vocab) cols.emplace_back("appliance=" + id, ColumnKind::binary);
      cols.emplace_back("appliance=<other>", ColumnKind::binary);
    }
    return cols;
  }
};

inline FeatureLayout fit_layout(const TimeSeries& series, const FeatureOptions& options = {}) {
  FeatureLayout layout;
  layout.options = options;
  for (const auto& r : series.records) {
    if (r.appliance_id) layout.appliance_vocab.push_back(*r.appliance_id);
  }
  std::sort(layout.appliance_vocab.begin(), layout.appliance_vocab.end());
  layout.appliance_vocab.erase(std::unique(layout.appliance_vocab.begin(), layout.appliance_vocab.end()),
                               layout.appliance_vocab.end());
  return layout;
}

struct FeatureMatrix {
  std::vector<std::string> names;
  std::vector<ColumnKind> kinds;
  Matrix values;
  bool scaled = false;

  Eigen::Index rows() const noexcept { return values.rows(); }
  Eigen::Index cols() const noexcept { return values.cols(); }

  FeatureMatrix select_rows(const std::vector<std::size_t>& idx) const {
    return {names, kinds, take_rows(values, idx), scaled};
  }
};

struct FeatureSet {
  std::vector<FeatureVector> vectors;
  FeatureMatrix matrix;
  std::vector<double> target;  // kW
  std::vector<CaseLabel> cases;
};

inline FeatureVector encode_record(const ConsumptionRecord& rec, double mean_daily_temp,
                                   const FeatureOptions& options) {
  FeatureVector fv;
  const auto hour = encode_cyclic(hour_of_day(rec.timestamp), 24.0);
  const auto day = encode_cyclic(day_of_year(rec.timestamp), days_in_year(rec.timestamp));
  fv.hour_sin = hour.sin;
  fv.hour_cos = hour.cos;
  fv.day_sin = day.sin;
  fv.day_cos = day.cos;
  fv.temperature = rec.temperature.value_or(0.0);
  fv.mean_daily_temp = mean_daily_temp;
  fv.working_day = rec.working_day;
  fv.occupancy = rec.occupancy.value_or(0);
  fv.case_label = label_case(mean_daily_temp, rec.working_day, options.case_threshold);
  fv.appliance_id = rec.appliance_id;
  fv.target = rec.power.value_or(0.0);
  return fv;
}

// One feature row per record. Power must already be repaired.
inline FeatureSet build_features(const TimeSeries& series, const FeatureLayout& layout) {
  std::map<std::chrono::sys_days, std::pair<double, std::size_t>> day_temps;
  for (const auto& r : series.records) {
    if (!r.power) throw ValidationError("build_features needs repaired power; missing at " + format_timestamp(r.timestamp));
    auto& acc = day_temps[calendar_day(r.timestamp)];
    if (r.temperature) {
      acc.first += *r.temperature;
      ++acc.second;
    }
  }

  const auto cols = layout.columns();
  FeatureSet fs;
  fs.matrix.values.resize(static_cast<Eigen::Index>(series.size()), static_cast<Eigen::Index>(cols.size()));
  fs.matrix.values.setZero();
  for (const auto& [name, kind] : cols) {
    fs.matrix.names.push_back(name);
    fs.matrix.kinds.push_back(kind);
  }

  const std::size_t case_col = layout.options.include_occupancy ? 8 : 7;
  const std::size_t app_col = case_col + 4;
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& rec = series.records[i];
    const auto& acc = day_temps[calendar_day(rec.timestamp)];
    const double t_mean = acc.second ? acc.first / static_cast<double>(acc.second) : 0.0;
    auto fv = encode_record(rec, t_mean, layout.options);

    auto row = fs.matrix.values.row(static_cast<Eigen::Index>(i));
    row(0) = fv.hour_sin;
    row(1) = fv.hour_cos;
    row(2) = fv.day_sin;
    row(3) = fv.day_cos;
    row(4) = fv.temperature;
    row(5) = fv.mean_daily_temp;
    row(6) = fv.working_day ? 1.0 : 0.0;
    if (layout.options.include_occupancy) row(7) = fv.occupancy;
    row(static_cast<Eigen::Index>(case_col) + case_number(fv.case_label) - 1) = 1.0;
    if (!layout.appliance_vocab.empty()) {
      std::size_t slot = layout.appliance_vocab.size();
      if (fv.appliance_id) {
        const auto it = std::lower_bound(layout.appliance_vocab.begin(), layout.appliance_vocab.end(), *fv.appliance_id);
        if (it != layout.appliance_vocab.end() && *it == *fv.appliance_id) {
          slot = static_cast<std::size_t>(it - layout.appliance_vocab.begin());
        }
      }
      row(static_cast<Eigen::Index>(app_col + slot)) = 1.0;
    }

    fs.target.push_back(fv.target);
    fs.cases.push_back(fv.case_label);
    fs.vectors.push_back(std::move(fv));
  }
  return fs;
}

inline FeatureSet build_features(const TimeSeries& series, const FeatureOptions& options = {}) {
  return build_features(series, fit_layout(series, options));
}

// Per-column z-score for continuous columns; cyclic and binary columns pass through.
struct Scaler {
  std::vector<double> mean;
  std::vector<double> stddev;
  std::vector<ColumnKind> kinds;
  std::vector<std::string> warnings;
};

inline Scaler fit_scaler(const FeatureMatrix& m) {
  if (m.rows() == 0 || m.cols() == 0) throw DomainError("cannot fit a scaler on an empty matrix");
  if (m.scaled) throw DomainError("cannot fit a scaler on an already scaled matrix");
  Scaler s;
  s.kinds = m.kinds;
  const auto n = static_cast<double>(m.rows());
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    const auto kind = m.kinds[static_cast<std::size_t>(c)];
    if (kind != ColumnKind::continuous) {
      s.mean.push_back(0.0);
      s.stddev.push_back(1.0);
      continue;
    }
    const double mu = m.values.col(c).mean();
    double sd = 0.0;
    if (m.rows() > 1) {
      sd = std::sqrt((m.values.col(c).array() - mu).square().sum() / (n - 1.0));
    }
    if (!(sd > 0.0)) {
      s.warnings.push_back("column '" + m.names[static_cast<std::size_t>(c)] + "' is constant; std set to 1");
      sd = 1.0;
    }
    s.mean.push_back(mu);
    s.stddev.push_back(sd);
  }
  return s;
}

inline FeatureMatrix apply_scaler(const Scaler& s, const FeatureMatrix& m) {
  if (m.scaled) throw DomainError("matrix is already scaled");
  if (static_cast<std::size_t>(m.cols()) != s.mean.size()) {
    throw ShapeError("scaler fitted on " + std::to_string(s.mean.size()) + " columns, matrix has " +
                     std::to_string(m.cols()));
  }
  FeatureMatrix out = m;
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    const auto k = static_cast<std::size_t>(c);
    if (s.kinds[k] != ColumnKind::continuous) continue;
    out.values.col(c) = (m.values.col(c).array() - s.mean[k]) / s.stddev[k];
  }
  out.scaled = true;
  return out;
}

}  // namespace enanom
