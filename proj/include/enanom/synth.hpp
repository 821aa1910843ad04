#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include "anomaly.hpp"
#include "dataset.hpp"
#include "error.hpp"
#include "timestamp.hpp"

namespace enanom {

// Clean load f = base_load + occupancy_load * occupancy + thermal_coupling * max(0, T - thermal_threshold),
// observed = max(0, f + N(0, noise)).
struct SynthConfig {
  Timestamp start = Timestamp{std::chrono::sys_days{std::chrono::year{2023} / 1 / 1}};
  std::size_t hours = 8760;
  double base_load = 100.0;         // kW
  double occupancy_load = 0.3;      // kW per occupant
  double thermal_coupling = 3.0;    // kW per deg C above the threshold
  double thermal_threshold = 17.0;  // deg C
  double temp_mean = 20.0;          // deg C
  double temp_annual_amplitude = 10.0;
  double temp_daily_amplitude = 5.0;
  int temp_peak_day = 200;          // day of year of the annual maximum
  int temp_peak_hour = 15;
  double temp_day_noise_std = 2.0;  // per-day weather offset, deg C
  std::set<int> weekend = {5, 6};   // 0 = Monday
  std::set<std::chrono::sys_days> holidays;
  std::array<int, 24> occupancy_working = {0, 0, 0, 0, 0, 0, 20, 60, 120, 120, 120, 120,
                                           120, 120, 120, 120, 120, 120, 90, 60, 40, 20, 0, 0};
  std::array<int, 24> occupancy_off = {0, 0, 0, 0, 0, 0, 0, 0, 0, 40, 40, 40,
                                       40, 40, 40, 40, 40, 40, 40, 40, 40, 0, 0, 0};
  double noise_std = 0.0;      // kW
  double noise_std_rel = 0.0;  // if > 0, noise std = noise_std_rel * mean clean load (overrides noise_std)

  void validate() const {
    if (!(base_load > 0.0)) throw SpecError("base_load must be positive");
    if (noise_std < 0.0 || noise_std_rel < 0.0) throw SpecError("noise std must be non-negative");
    if (hours < 48) throw SpecError("synthetic series needs at least 48 hours");
  }
};

struct InjectionSpec {
  double rate = 0.01;  // fraction of samples perturbed
  // short-spike, short-dip, time-of-day, day-of-week
  std::array<double, 4> mix = {0.4, 0.2, 0.2, 0.2};
  double magnitude_min = 5.0;  // multiples of the input series' power std
  double magnitude_max = 10.0;
  int time_of_day_hour = 14;
  int day_of_week = 2;          // weekday receiving day blocks, 0 = Monday
  bool day_of_week_high = false;
  std::uint64_t seed = 7;

  void validate() const {
    if (!(rate >= 0.0 && rate <= 0.2)) throw SpecError("injection rate must be in [0, 0.2]");
    double sum = 0.0;
    for (const double m : mix) {
      if (m < 0.0) throw SpecError("mix fractions must be non-negative");
      sum += m;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw SpecError("mix fractions must sum to 1");
    if (!(magnitude_min > 0.0 && magnitude_max >= magnitude_min)) throw SpecError("bad magnitude range");
    if (time_of_day_hour < 0 || time_of_day_hour > 23) throw SpecError("time_of_day_hour must be 0..23");
    if (day_of_week < 0 || day_of_week > 6) throw SpecError("day_of_week must be 0..6");
  }
};

struct GeneratedSeries {
  TimeSeries series;
  std::vector<double> clean;  // noise-free load, kW
};

inline bool is_working_day(const SynthConfig& config, Timestamp ts) {
  return !config.weekend.contains(weekday_index(ts)) && !config.holidays.contains(calendar_day(ts));
}

// Noise-free load for one hour given its temperature.
inline double clean_load(const SynthConfig& config, int occupancy, double temperature) {
  return config.base_load + config.occupancy_load * occupancy +
         config.thermal_coupling * std::max(0.0, temperature - config.thermal_threshold);
}

inline GeneratedSeries generate(const SynthConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  constexpr double two_pi = 2.0 * std::numbers::pi;

  GeneratedSeries out;
  out.series.cadence = Minutes{60};
  out.series.records.reserve(config.hours);
  out.clean.reserve(config.hours);
  std::chrono::sys_days current_day{};
  double day_offset = 0.0;
  for (std::size_t h = 0; h < config.hours; ++h) {
    const Timestamp ts = config.start + std::chrono::hours{static_cast<long>(h)};
    if (h == 0 || calendar_day(ts) != current_day) {
      current_day = calendar_day(ts);
      day_offset = config.temp_day_noise_std * unit(rng);
    }
    const double doy = day_of_year(ts);
    const double temp = config.temp_mean +
                        config.temp_annual_amplitude * std::cos(two_pi * (doy - config.temp_peak_day) / days_in_year(ts)) +
                        config.temp_daily_amplitude * std::cos(two_pi * (hour_of_day(ts) - config.temp_peak_hour) / 24.0) +
                        day_offset;
    ConsumptionRecord rec;
    rec.timestamp = ts;
    rec.working_day = is_working_day(config, ts);
    rec.occupancy = (rec.working_day ? config.occupancy_working : config.occupancy_off)[static_cast<std::size_t>(hour_of_day(ts))];
    rec.temperature = temp;
    out.clean.push_back(clean_load(config, *rec.occupancy, temp));
    out.series.records.push_back(std::move(rec));
  }

  double noise = config.noise_std;
  if (config.noise_std_rel > 0.0) {
    noise = config.noise_std_rel * std::accumulate(out.clean.begin(), out.clean.end(), 0.0) /
            static_cast<double>(out.clean.size());
  }
  for (std::size_t i = 0; i < out.clean.size(); ++i) {
    const double eta = noise > 0.0 ? noise * unit(rng) : 0.0;
    out.series.records[i].power = std::max(0.0, out.clean[i] + eta);
  }
  return out;
}

struct InjectionResult {
  TimeSeries series;
  std::vector<bool> labels;
  std::vector<AnomalyTag> types;  // untagged where not injected
};

namespace detail {

inline std::array<std::size_t, 4> split_counts(std::size_t total, const std::array<double, 4>& mix) {
  std::array<std::size_t, 4> counts{};
  std::array<double, 4> remainder{};
  std::size_t assigned = 0;
  for (std::size_t t = 0; t < 4; ++t) {
    const double exact = mix[t] * static_cast<double>(total);
    counts[t] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    remainder[t] = exact - static_cast<double>(counts[t]);
    assigned += counts[t];
  }
  while (assigned < total) {
    std::size_t best = 0;
    for (std::size_t t = 1; t < 4; ++t) {
      if (remainder[t] > remainder[best]) best = t;
    }
    ++counts[best];
    remainder[best] = -1.0;
    ++assigned;
  }
  return counts;
}

inline double power_std(const TimeSeries& series) {
  const auto p = series.power();
  const double mean = std::accumulate(p.begin(), p.end(), 0.0) / static_cast<double>(p.size());
  double ss = 0.0;
  for (const double v : p) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(p.size() - 1));
}

}  // namespace detail

// Adds `delta` kW to one sample, clamping at zero. A decrease that cannot change a
// zero reading is applied upwards instead, so every perturbed sample really changes.
inline void perturb(ConsumptionRecord& rec, double delta) {
  const double before = *rec.power;
  double after = std::max(0.0, before + delta);
  if (after == before) after = before + std::abs(delta);
  rec.power = after;
}

// Perturbs exactly floor(rate * n) samples, split over the four anomaly types by `mix`.
// Day-of-week anomalies are whole-day blocks on spec.day_of_week (the last block may be
// partial), time-of-day anomalies sit at spec.time_of_day_hour on distinct days, and
// spikes/dips are isolated single samples.
inline InjectionResult inject_anomalies(const TimeSeries& series, const InjectionSpec& spec) {
  spec.validate();
  const std::size_t n = series.size();
  const auto total = static_cast<std::size_t>(std::floor(spec.rate * static_cast<double>(n) + 1e-9));
  if (total < 1) throw SpecError("injection rate * length < 1: nothing to inject");
  const auto counts = detail::split_counts(total, spec.mix);
  const double sigma = detail::power_std(series);

  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> magnitude(spec.magnitude_min, spec.magnitude_max);

  InjectionResult out;
  out.series = series;
  out.labels.assign(n, false);
  out.types.assign(n, AnomalyTag::untagged);
  auto& recs = out.series.records;

  std::map<std::chrono::sys_days, std::vector<std::size_t>> days;
  for (std::size_t i = 0; i < n; ++i) days[calendar_day(recs[i].timestamp)].push_back(i);

  auto mark = [&](std::size_t i, AnomalyTag type, double delta) {
    perturb(recs[i], delta);
    out.labels[i] = true;
    out.types[i] = type;
  };

  std::set<std::chrono::sys_days> used_days;
  if (std::size_t remaining = counts[3]; remaining > 0) {
    if (days.size() < 7) throw SpecError("day-of-week anomalies need at least 7 days of data");
    std::vector<std::chrono::sys_days> candidates;
    for (const auto& [day, idx] : days) {
      if (weekday_index(recs[idx.front()].timestamp) == spec.day_of_week) candidates.push_back(day);
    }
    std::shuffle(candidates.begin(), candidates.end(), rng);
    for (const auto day : candidates) {
      if (remaining == 0) break;
      const auto& idx = days[day];
      const std::size_t len = std::min(remaining, idx.size());
      const std::size_t first = (idx.size() - len) / 2;
      const double m = magnitude(rng) * sigma * (spec.day_of_week_high ? 1.0 : -1.0);
      for (std::size_t k = first; k < first + len; ++k) mark(idx[k], AnomalyTag::day_of_week, m);
      used_days.insert(day);
      remaining -= len;
    }
    if (remaining > 0) throw SpecError("not enough matching weekdays for day-of-week anomalies");
  }

  if (counts[2] > 0) {
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < n; ++i) {
      if (hour_of_day(recs[i].timestamp) == spec.time_of_day_hour && !used_days.contains(calendar_day(recs[i].timestamp))) {
        candidates.push_back(i);
      }
    }
    if (candidates.size() < counts[2]) throw SpecError("not enough days for time-of-day anomalies");
    std::shuffle(candidates.begin(), candidates.end(), rng);
    candidates.resize(counts[2]);
    std::sort(candidates.begin(), candidates.end());
    for (const auto i : candidates) mark(i, AnomalyTag::time_of_day, magnitude(rng) * sigma);
  }

  const std::size_t singles = counts[0] + counts[1];
  if (singles > 0) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    auto isolated = [&](std::size_t i) {
      return !out.labels[i] && (i == 0 || !out.labels[i - 1]) && (i + 1 >= n || !out.labels[i + 1]);
    };
    std::size_t placed = 0;
    for (const auto i : order) {
      if (placed == singles) break;
      if (!isolated(i)) continue;
      const bool spike = placed < counts[0];
      const double m = magnitude(rng) * sigma;
      mark(i, spike ? AnomalyTag::short_spike : AnomalyTag::short_dip, spike ? m : -m);
      ++placed;
    }
    if (placed < singles) throw SpecError("series too short to place isolated spikes and dips");
  }
  return out;
}

// One year hourly, noise 3% of mean load, 1% injected at 5-10 sigma.
struct Benchmark {
  SynthConfig config;
  InjectionSpec injection;
  std::uint64_t seed = 2024;
};

inline Benchmark standard_benchmark() {
  Benchmark b;
  b.config.hours = 8760;
  b.config.noise_std_rel = 0.03;
  b.injection.rate = 0.01;
  b.injection.magnitude_min = 5.0;
  b.injection.magnitude_max = 10.0;
  return b;
}

}  // namespace enanom
