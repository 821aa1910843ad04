#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dataset.hpp"
#include "error.hpp"
#include "features.hpp"

namespace enanom {

// Prediction minus observation.
inline std::vector<double> residuals(std::span<const double> predicted, std::span<const double> observed) {
  if (predicted.size() != observed.size()) {
    throw ShapeError("residuals: " + std::to_string(predicted.size()) + " predictions vs " +
                     std::to_string(observed.size()) + " observations");
  }
  std::vector<double> delta(predicted.size());
  for (std::size_t i = 0; i < delta.size(); ++i) delta[i] = predicted[i] - observed[i];
  return delta;
}

struct ScoreSeries {
  std::vector<double> delta;  // kW
  double delta_mean = 0.0;    // kW
  double delta_std = 1.0;     // kW, sample std (n - 1)
  std::vector<double> epsilon;

  // (delta - mean) / std, before taking the absolute value.
  std::vector<double> signed_scores() const {
    std::vector<double> z(delta.size());
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = (delta[i] - delta_mean) / delta_std;
    return z;
  }
};

// Scores residuals against externally fitted location and spread.
inline ScoreSeries score_with(std::span<const double> delta, double mean, double stddev) {
  if (!(stddev > 0.0)) throw DegenerateSeriesError("residual spread is zero");
  ScoreSeries s;
  s.delta.assign(delta.begin(), delta.end());
  s.delta_mean = mean;
  s.delta_std = stddev;
  s.epsilon.resize(delta.size());
  for (std::size_t i = 0; i < delta.size(); ++i) s.epsilon[i] = std::abs((delta[i] - mean) / stddev);
  return s;
}

// epsilon = |(delta - mean) / sd| with sd = sqrt(sum (delta - mean)^2 / (n - 1)).
inline ScoreSeries normalize_scores(std::span<const double> delta) {
  const std::size_t n = delta.size();
  if (n < 2) throw InsufficientDataError("normalize_scores needs at least 2 residuals");
  const double mean = std::accumulate(delta.begin(), delta.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (const double d : delta) ss += (d - mean) * (d - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  if (!(sd > 0.0)) throw DegenerateSeriesError("residuals are constant; anomaly scores undefined");
  return score_with(delta, mean, sd);
}

struct ThresholdCurve {
  std::vector<double> thresholds;
  std::vector<double> anomaly_rates;  // fraction of scores strictly above each threshold
};

// Evenly spaced grid, each point computed from its index so no rounding drift accumulates.
inline std::vector<double> threshold_grid(double lo, double hi, double step) {
  if (!(step > 0.0) || hi < lo) throw DomainError("threshold grid needs lo <= hi and step > 0");
  std::vector<double> grid;
  const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  for (std::size_t i = 0; i < count; ++i) {
    grid.push_back(std::round((lo + static_cast<double>(i) * step) * 1e9) / 1e9);
  }
  return grid;
}

inline std::vector<double> default_threshold_grid() { return threshold_grid(2.5, 4.5, 0.05); }

inline ThresholdCurve sweep_thresholds(std::span<const double> epsilon, std::span<const double> grid) {
  if (grid.empty()) throw DomainError("threshold grid is empty");
  if (!std::is_sorted(grid.begin(), grid.end())) throw DomainError("threshold grid must be ascending");
  std::vector<double> sorted(epsilon.begin(), epsilon.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  ThresholdCurve curve;
  for (const double thr : grid) {
    const auto above = sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), thr);
    curve.thresholds.push_back(thr);
    curve.anomaly_rates.push_back(sorted.empty() ? 0.0 : static_cast<double>(above) / n);
  }
  return curve;
}

inline ThresholdCurve sweep_thresholds(const ScoreSeries& scores, std::span<const double> grid) {
  return sweep_thresholds(scores.epsilon, grid);
}

struct ThresholdChoice {
  double threshold = 0.0;
  double rate = 0.0;
  bool at_target = false;  // false when no grid point reaches the target rate
};

// Smallest grid threshold whose anomaly rate is at most the target.
inline ThresholdChoice select_threshold(const ThresholdCurve& curve, double target_rate) {
  if (curve.thresholds.empty()) throw DomainError("threshold curve is empty");
  if (!(target_rate > 0.0 && target_rate < 1.0)) throw DomainError("target rate must be in (0, 1)");
  for (std::size_t i = 0; i < curve.thresholds.size(); ++i) {
    if (curve.anomaly_rates[i] <= target_rate) return {curve.thresholds[i], curve.anomaly_rates[i], true};
  }
  return {curve.thresholds.back(), curve.anomaly_rates.back(), false};
}

enum class AnomalyTag { short_spike, short_dip, time_of_day, day_of_week, untagged };

inline std::string_view tag_name(AnomalyTag tag) {
  switch (tag) {
    case AnomalyTag::short_spike: return "short-spike";
    case AnomalyTag::short_dip: return "short-dip";
    case AnomalyTag::time_of_day: return "time-of-day";
    case AnomalyTag::day_of_week: return "day-of-week";
    case AnomalyTag::untagged: return "untagged";
  }
  return "untagged";
}

inline AnomalyTag parse_tag(std::string_view name) {
  for (const auto t : {AnomalyTag::short_spike, AnomalyTag::short_dip, AnomalyTag::time_of_day,
                       AnomalyTag::day_of_week, AnomalyTag::untagged}) {
    if (tag_name(t) == name) return t;
  }
  throw SchemaError("unknown anomaly tag '" + std::string(name) + "'");
}

struct Flag {
  std::size_t index = 0;
  double epsilon = 0.0;
  double threshold = 0.0;
  AnomalyTag tag = AnomalyTag::untagged;
};

struct AnomalyReport {
  std::vector<Flag> flags;  // descending epsilon

  std::vector<bool> mask(std::size_t n) const {
    std::vector<bool> m(n, false);
    for (const auto& f : flags) m[f.index] = true;
    return m;
  }
};

namespace detail {

inline void sort_flags(std::vector<Flag>& flags) {
  std::sort(flags.begin(), flags.end(), [](const Flag& a, const Flag& b) {
    return a.epsilon != b.epsilon ? a.epsilon > b.epsilon : a.index < b.index;
  });
}

}  // namespace detail

// Marks every index with epsilon strictly above its threshold.
inline AnomalyReport flag_anomalies(std::span<const double> epsilon, std::span<const double> thresholds) {
  if (epsilon.size() != thresholds.size()) throw ShapeError("one threshold per score required");
  AnomalyReport report;
  for (std::size_t i = 0; i < epsilon.size(); ++i) {
    if (!(thresholds[i] > 0.0)) throw DomainError("threshold must be positive");
    if (epsilon[i] > thresholds[i]) report.flags.push_back({i, epsilon[i], thresholds[i], AnomalyTag::untagged});
  }
  detail::sort_flags(report.flags);
  return report;
}

inline AnomalyReport flag_anomalies(std::span<const double> epsilon, double threshold) {
  return flag_anomalies(epsilon, std::vector<double>(epsilon.size(), threshold));
}

inline AnomalyReport flag_anomalies(const ScoreSeries& scores, double threshold) {
  return flag_anomalies(scores.epsilon, threshold);
}

// Heuristics mapping flag patterns onto the three qualitative anomaly classes.
struct TaxonomyConfig {
  std::size_t max_short_run = 3;    // consecutive flagged samples
  std::size_t min_distinct_days = 3;  // same hour-of-day flagged on this many days
  double min_day_fraction = 0.25;   // of a calendar day's samples flagged
};

// Precedence when several rules match: day-of-week, time-of-day, short run.
// Short runs are spikes when the observation exceeds the prediction (delta < 0).
inline AnomalyReport tag_taxonomy(const AnomalyReport& report, const TimeSeries& series,
                                  std::span<const double> delta, const TaxonomyConfig& config = {}) {
  const std::size_t n = series.size();
  if (delta.size() != n) throw ShapeError("tag_taxonomy: delta and series lengths differ");
  for (const auto& f : report.flags) {
    if (f.index >= n) throw ShapeError("flag index outside series");
  }
  const auto flagged = report.mask(n);

  std::map<std::chrono::sys_days, std::pair<std::size_t, std::size_t>> per_day;  // flagged, total
  std::map<int, std::set<std::chrono::sys_days>> hour_days;
  for (std::size_t i = 0; i < n; ++i) {
    const auto day = calendar_day(series.records[i].timestamp);
    auto& d = per_day[day];
    ++d.second;
    if (flagged[i]) {
      ++d.first;
      hour_days[hour_of_day(series.records[i].timestamp)].insert(day);
    }
  }

  // Length of the maximal run of adjacent flagged samples through each index.
  std::vector<std::size_t> run_length(n, 0);
  for (std::size_t i = 0; i < n;) {
    if (!flagged[i]) {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    while (j < n && flagged[j] &&
           series.records[j].timestamp - series.records[j - 1].timestamp == series.cadence) {
      ++j;
    }
    for (std::size_t k = i; k < j; ++k) run_length[k] = j - i;
    i = j;
  }

  AnomalyReport out = report;
  for (auto& f : out.flags) {
    const auto ts = series.records[f.index].timestamp;
    const auto& d = per_day[calendar_day(ts)];
    const double day_fraction = static_cast<double>(d.first) / static_cast<double>(d.second);
    if (day_fraction >= config.min_day_fraction) {
      f.tag = AnomalyTag::day_of_week;
    } else if (hour_days[hour_of_day(ts)].size() >= config.min_distinct_days) {
      f.tag = AnomalyTag::time_of_day;
    } else if (run_length[f.index] <= config.max_short_run) {
      f.tag = delta[f.index] < 0.0 ? AnomalyTag::short_spike : AnomalyTag::short_dip;
    } else {
      f.tag = AnomalyTag::untagged;
    }
  }
  return out;
}

enum class Grouping { per_case, global };

struct DetectOptions {
  Grouping grouping = Grouping::per_case;
  std::vector<double> grid = default_threshold_grid();
  double target_rate = 0.01;
  std::size_t min_group_size = 48;  // smaller case groups are scored with global statistics
  TaxonomyConfig taxonomy;
};

struct GroupResult {
  int group = 0;  // case number, or 0 for the global group
  std::vector<std::size_t> indices;
  double delta_mean = 0.0;
  double delta_std = 1.0;
  ThresholdCurve curve;
  ThresholdChoice choice;
};

struct Detection {
  std::vector<double> delta;
  std::vector<double> epsilon;
  std::vector<double> threshold;  // per index, from its group
  std::vector<int> group;         // per index
  std::vector<GroupResult> groups;
  AnomalyReport report;           // tagged
};

// Residuals -> grouped normalization -> per-group threshold at the target rate -> flags -> tags.
inline Detection detect_anomalies(std::span<const double> predicted, std::span<const double> observed,
                                  std::span<const CaseLabel> cases, const TimeSeries& series,
                                  const DetectOptions& options = {}) {
  const std::size_t n = observed.size();
  if (cases.size() != n || series.size() != n) throw ShapeError("detect_anomalies: input lengths differ");
  Detection det;
  det.delta = residuals(predicted, observed);
  det.epsilon.assign(n, 0.0);
  det.threshold.assign(n, 0.0);
  det.group.assign(n, 0);

  std::map<int, std::vector<std::size_t>> members;
  if (options.grouping == Grouping::per_case) {
    std::map<int, std::vector<std::size_t>> by_case;
    for (std::size_t i = 0; i < n; ++i) by_case[case_number(cases[i])].push_back(i);
    for (auto& [c, idx] : by_case) {
      auto& target = idx.size() >= options.min_group_size ? members[c] : members[0];
      target.insert(target.end(), idx.begin(), idx.end());
    }
  } else {
    auto& all = members[0];
    all.resize(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
  }

  for (auto& [g, idx] : members) {
    std::sort(idx.begin(), idx.end());
    const auto d = take(det.delta, idx);
    const auto scores = normalize_scores(d);
    GroupResult gr;
    gr.group = g;
    gr.delta_mean = scores.delta_mean;
    gr.delta_std = scores.delta_std;
    gr.curve = sweep_thresholds(scores.epsilon, options.grid);
    gr.choice = select_threshold(gr.curve, options.target_rate);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      det.epsilon[idx[k]] = scores.epsilon[k];
      det.threshold[idx[k]] = gr.choice.threshold;
      det.group[idx[k]] = g;
    }
    gr.indices = idx;
    det.groups.push_back(std::move(gr));
  }

  det.report = tag_taxonomy(flag_anomalies(det.epsilon, det.threshold), series, det.delta, options.taxonomy);
  return det;
}

enum class CombineRule { union_, intersection };

// Merges two detectors' flag masks.
inline std::vector<bool> combine_flags(const std::vector<bool>& a, const std::vector<bool>& b,
                                       CombineRule rule = CombineRule::union_) {
  if (a.size() != b.size()) throw ShapeError("combine_flags: length mismatch");
  std::vector<bool> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = rule == CombineRule::union_ ? (a[i] || b[i]) : (a[i] && b[i]);
  return out;
}

}  // namespace enanom
