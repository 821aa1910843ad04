#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "test_util.hpp"

using namespace enanom;
using enanom::testing::hourly_series;

namespace {

LoadResult parse(const std::string& csv, const ColumnSchema& schema = {}) {
  std::istringstream in(csv);
  return read_csv(in, schema);
}

}  // namespace

TEST(LoadCsv, WellFormedRows) {
  const auto r = parse("timestamp,power,temperature\n2023-01-01T00:00,1.5,10\n2023-01-01T01:00,2.5,11\n"
                       "2023-01-01T02:00,3.5,12\n");
  ASSERT_EQ(r.series.size(), 3u);
  EXPECT_EQ(r.missing_cells, 0u);
  EXPECT_EQ(r.series.cadence, std::chrono::minutes(60));
  EXPECT_DOUBLE_EQ(*r.series.records[1].power, 2.5);
  EXPECT_DOUBLE_EQ(*r.series.records[2].temperature, 12.0);
  EXPECT_TRUE(r.series.has_temperature());
  EXPECT_FALSE(r.series.has_occupancy());
}

TEST(LoadCsv, NanPowerBecomesMissing) {
  const auto r = parse("timestamp,power\n2023-01-01T00:00,1\n2023-01-01T01:00,NaN\n2023-01-01T02:00,3\n");
  ASSERT_EQ(r.series.size(), 3u);
  EXPECT_EQ(r.missing_cells, 1u);
  EXPECT_FALSE(r.series.records[1].power.has_value());
  EXPECT_EQ(r.series.missing_power(), 1u);
  EXPECT_THROW(r.series.power(), ValidationError);
}

TEST(LoadCsv, OutOfOrderRowsAreSorted) {
  std::mt19937_64 rng(5);
  std::vector<std::pair<std::string, double>> rows;
  for (int h = 0; h < 48; ++h) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "2023-05-%02dT%02d:00", 1 + h / 24, h % 24);
    rows.emplace_back(buf, static_cast<double>(h) * 1.25);
  }
  std::shuffle(rows.begin(), rows.end(), rng);
  std::string csv = "timestamp,power\n";
  for (const auto& [ts, p] : rows) csv += ts + "," + format_double(p) + "\n";
  auto expected = rows;
  std::sort(expected.begin(), expected.end());

  const auto r = parse(csv);
  ASSERT_EQ(r.series.size(), expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) {
    EXPECT_EQ(format_timestamp(r.series.records[i].timestamp), expected[i].first);
    EXPECT_EQ(*r.series.records[i].power, expected[i].second);
  }
}

TEST(LoadCsv, Errors) {
  EXPECT_THROW(parse("time,power\n2023-01-01T00:00,1\n"), SchemaError);
  EXPECT_THROW(parse("timestamp,watts\n2023-01-01T00:00,1\n"), SchemaError);
  EXPECT_THROW(parse("timestamp,power\n2023-01-01T00:00,-2\n"), ValidationError);
  try {
    parse("timestamp,power\n2023-01-01T02:00,1\n2023-01-01T01:00,1\n2023-01-01T02:00,2\n2023-01-01T01:00,5\n");
    FAIL() << "duplicate timestamps accepted";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("2023-01-01T01:00"), std::string::npos) << e.what();
  }
}

TEST(LoadCsv, ColumnRemappingAndOptionalColumns) {
  ColumnSchema schema;
  schema.timestamp = "when";
  schema.power = "kw";
  const auto r = parse("# comment\nwhen,kw,occupancy,appliance_id,working_day\n"
                       "2023-01-07T00:00,4,12,\"hvac,main\",1\n",
                       schema);
  ASSERT_EQ(r.series.size(), 1u);
  const auto& rec = r.series.records[0];
  EXPECT_EQ(*rec.occupancy, 12);
  EXPECT_EQ(*rec.appliance_id, "hvac,main");
  EXPECT_TRUE(rec.working_day);  // Saturday, but the column says working
}

TEST(LoadCsv, WorkingDayDefaultsToWeekdays) {
  const auto r = parse("timestamp,power\n2023-01-06T00:00,1\n2023-01-07T00:00,1\n");
  EXPECT_TRUE(r.series.records[0].working_day);   // Friday
  EXPECT_FALSE(r.series.records[1].working_day);  // Saturday
}

TEST(WriteCsv, RoundTripIsBitExact) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1000.0);
  std::vector<double> power(200);
  for (auto& p : power) p = u(rng) / 7.0;
  auto series = hourly_series(power);
  for (auto& r : series.records) r.temperature = u(rng) / 13.0 - 20.0;

  std::ostringstream first;
  write_csv(series, first);
  std::istringstream in(first.str());
  const auto loaded = read_csv(in);
  ASSERT_EQ(loaded.series.size(), series.size());
  for (std::size_t i = 0; i < series.size(); ++i) {
    EXPECT_EQ(*loaded.series.records[i].power, *series.records[i].power);
    EXPECT_EQ(*loaded.series.records[i].temperature, *series.records[i].temperature);
    EXPECT_EQ(loaded.series.records[i].timestamp, series.records[i].timestamp);
  }
  std::ostringstream second;
  write_csv(loaded.series, second);
  EXPECT_EQ(first.str(), second.str());
}

TEST(WriteCsv, MetadataHeaderIsSkippedOnLoad) {
  const auto series = hourly_series({1, 2, 3});
  const ArtifactMeta meta{7, "abc"};
  std::ostringstream out;
  write_csv(series, out, &meta);
  EXPECT_EQ(out.str().rfind("# enanom ", 0), 0u);
  std::istringstream in(out.str());
  EXPECT_EQ(read_csv(in).series.size(), 3u);
}

TEST(ToHourly, AveragesSubHourlySamples) {
  const auto r = parse("timestamp,power,temperature\n2023-01-01T00:00,1,10\n2023-01-01T00:15,3,\n"
                       "2023-01-01T00:30,NaN,14\n2023-01-01T01:00,8,1\n");
  EXPECT_EQ(r.series.cadence, std::chrono::minutes(15));
  const auto h = to_hourly(r.series);
  ASSERT_EQ(h.size(), 2u);
  EXPECT_EQ(h.cadence, std::chrono::minutes(60));
  EXPECT_DOUBLE_EQ(*h.records[0].power, 2.0);
  EXPECT_DOUBLE_EQ(*h.records[0].temperature, 12.0);
  EXPECT_DOUBLE_EQ(*h.records[1].power, 8.0);
}

TEST(FillMissing, InterpolatesShortGap) {
  auto s = hourly_series({10, 0, 14});
  s.records[1].power.reset();
  const auto f = fill_missing(s, 1);
  ASSERT_EQ(f.series.size(), 3u);
  EXPECT_DOUBLE_EQ(*f.series.records[1].power, 12.0);
  ASSERT_EQ(f.filled.size(), 1u);
  EXPECT_EQ(f.filled[0].first, 1u);
  EXPECT_TRUE(f.dropped.empty());
}

TEST(FillMissing, DropsLongGap) {
  auto s = hourly_series({10, 0, 0, 0, 14});
  for (int i = 1; i <= 3; ++i) s.records[static_cast<std::size_t>(i)].power.reset();
  const auto f = fill_missing(s, 2);
  ASSERT_EQ(f.series.size(), 2u);
  EXPECT_DOUBLE_EQ(*f.series.records[0].power, 10.0);
  EXPECT_DOUBLE_EQ(*f.series.records[1].power, 14.0);
  ASSERT_EQ(f.dropped.size(), 1u);
  EXPECT_EQ(f.dropped[0].length(), 3u);
}

TEST(FillMissing, ConstantSeriesStaysConstant) {
  auto s = hourly_series({7, 7, 7, 7, 7});
  s.records[2].power.reset();
  const auto f = fill_missing(s);
  for (const auto& r : f.series.records) EXPECT_DOUBLE_EQ(*r.power, 7.0);
}

TEST(FillMissing, InsufficientData) {
  auto s = hourly_series({1, 2, 3});
  s.records[0].power.reset();
  s.records[1].power.reset();
  EXPECT_THROW(fill_missing(s), InsufficientDataError);
}

TEST(FillMissing, NeverAltersObservedValues) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 50.0);
  std::bernoulli_distribution gap(0.3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> power(100);
    for (auto& p : power) p = u(rng);
    auto s = hourly_series(power);
    for (auto& r : s.records) {
      if (gap(rng)) r.power.reset();
    }
    const auto f = fill_missing(s, 3);
    EXPECT_EQ(f.series.missing_power(), 0u);
    std::size_t j = 0;
    for (const auto& out : f.series.records) {
      while (s.records[j].timestamp != out.timestamp) ++j;
      if (s.records[j].power) {
        EXPECT_EQ(*out.power, *s.records[j].power);
      }
    }
    for (std::size_t k = 1; k < f.series.size(); ++k) {
      EXPECT_LT(f.series.records[k - 1].timestamp, f.series.records[k].timestamp);
    }
  }
}
