#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"

namespace enanom {

enum class MapeBand { high, good, reasonable, inaccurate };

// <= 10 high, (10, 20] good, (20, 50] reasonable, > 50 inaccurate.
inline MapeBand mape_band(double percent) noexcept {
  if (percent <= 10.0) return MapeBand::high;
  if (percent <= 20.0) return MapeBand::good;
  if (percent <= 50.0) return MapeBand::reasonable;
  return MapeBand::inaccurate;
}

inline std::string_view band_name(MapeBand b) {
  switch (b) {
    case MapeBand::high: return "high";
    case MapeBand::good: return "good";
    case MapeBand::reasonable: return "reasonable";
    case MapeBand::inaccurate: return "inaccurate";
  }
  return "inaccurate";
}

struct MapeResult {
  double percent = 0.0;
  std::size_t used = 0;
  std::size_t excluded_zero = 0;  // observations equal to 0, left out
  MapeBand band = MapeBand::high;
};

namespace detail {

inline void require_pair(std::span<const double> predicted, std::span<const double> observed) {
  if (predicted.size() != observed.size()) throw ShapeError("metric inputs have different lengths");
  if (predicted.empty()) throw DomainError("metric inputs are empty");
}

}  // namespace detail

// Mean of |pred - obs| / |obs| * 100. `signed_terms` drops the absolute value
// (deviations of opposite sign cancel); kept for comparing against that variant.
inline MapeResult mape(std::span<const double> predicted, std::span<const double> observed, bool signed_terms = false) {
  detail::require_pair(predicted, observed);
  MapeResult r;
  double sum = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    if (observed[i] == 0.0) {
      ++r.excluded_zero;
      continue;
    }
    const double rel = (predicted[i] - observed[i]) / observed[i];
    sum += signed_terms ? rel : std::abs(rel);
    ++r.used;
  }
  if (r.used == 0) throw DomainError("MAPE undefined: every observed value is zero");
  r.percent = 100.0 * sum / static_cast<double>(r.used);
  r.band = mape_band(std::abs(r.percent));
  return r;
}

inline double rmse(std::span<const double> predicted, std::span<const double> observed) {
  detail::require_pair(predicted, observed);
  double s = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) s += (predicted[i] - observed[i]) * (predicted[i] - observed[i]);
  return std::sqrt(s / static_cast<double>(observed.size()));
}

inline double mae(std::span<const double> predicted, std::span<const double> observed) {
  detail::require_pair(predicted, observed);
  double s = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) s += std::abs(predicted[i] - observed[i]);
  return s / static_cast<double>(observed.size());
}

struct RegressionMetrics {
  MapeResult mape;
  double rmse = 0.0;  // kW
  double mae = 0.0;   // kW
  std::size_t n = 0;
};

inline RegressionMetrics regression_metrics(std::span<const double> predicted, std::span<const double> observed) {
  return {mape(predicted, observed), rmse(predicted, observed), mae(predicted, observed), observed.size()};
}

struct ClassificationMetrics {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool degenerate = false;  // precision + recall == 0, f1 reported as 0
};

inline ClassificationMetrics classification_metrics(const std::vector<bool>& flags, const std::vector<bool>& truth) {
  if (flags.size() != truth.size()) throw ShapeError("flags and truth have different lengths");
  ClassificationMetrics m;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    if (flags[i] && truth[i]) ++m.tp;
    else if (flags[i]) ++m.fp;
    else if (truth[i]) ++m.fn;
    else ++m.tn;
  }
  const auto n = static_cast<double>(flags.size());
  m.accuracy = flags.empty() ? 0.0 : static_cast<double>(m.tp + m.tn) / n;
  m.precision = (m.tp + m.fp) ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp) : 0.0;
  m.recall = (m.tp + m.fn) ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn) : 0.0;
  if (m.precision + m.recall > 0.0) {
    m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  } else {
    m.degenerate = true;
  }
  return m;
}

}  // namespace enanom
