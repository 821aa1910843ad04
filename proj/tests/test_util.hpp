#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <enanom/dataset.hpp>

namespace enanom::testing {

inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::path(ENANOM_TEST_TMP) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

// Hourly series starting 2023-01-02 00:00 (a Monday) with the given powers.
inline TimeSeries hourly_series(const std::vector<double>& power, double temperature = 20.0) {
  TimeSeries s;
  const auto start = parse_timestamp("2023-01-02T00:00");
  for (std::size_t i = 0; i < power.size(); ++i) {
    ConsumptionRecord r;
    r.timestamp = start + std::chrono::hours(static_cast<long>(i));
    r.power = power[i];
    r.temperature = temperature;
    r.working_day = weekday_index(r.timestamp) < 5;
    s.records.push_back(r);
  }
  return s;
}

}  // namespace enanom::testing
