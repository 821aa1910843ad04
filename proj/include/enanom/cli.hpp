#pragma once

#include <CLI11.hpp>
#include <algorithm>
#include <functional>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "pipeline.hpp"
#include "synth.hpp"

namespace enanom::cli {

enum ExitCode : int { kOk = 0, kRuntimeFailure = 1, kUsage = 2, kDataValidation = 3, kDivergence = 4 };

class UsageError : public Error {
public:
  using Error::Error;
};

// Fully resolved settings of one invocation.
struct RunConfig {
  std::string command;
  std::uint64_t seed = 42;
  std::optional<std::uint64_t> inject_seed;

  std::string input, out, out_json, labels, clean, clean_out;
  std::string model_in, model_out, report, report_json, scores, curve, dump_features;

  ColumnSchema schema;
  std::size_t max_gap = 3;
  ModelSettings model;
  EvaluationPlan plan;
  DetectOptions detect;
  SynthConfig synth;
  InjectionSpec injection;
};

namespace detail {

inline std::string normalize_key(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return key;
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    const auto t = trim(item);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

inline double to_double(const std::string& key, const std::string& v) {
  const auto d = parse_optional_double(v);
  if (!d) throw UsageError("--" + key + ": expected a number, got '" + v + "'");
  return *d;
}

inline std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto t = trim(v);
  const auto res = std::from_chars(t.data(), t.data() + t.size(), out);
  if (res.ec != std::errc{} || res.ptr != t.data() + t.size()) {
    throw UsageError("--" + key + ": expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

inline std::size_t to_size(const std::string& key, const std::string& v) {
  return static_cast<std::size_t>(to_u64(key, v));
}

inline int to_int(const std::string& key, const std::string& v) {
  const auto d = to_double(key, v);
  if (d != std::floor(d)) throw UsageError("--" + key + ": expected an integer, got '" + v + "'");
  return static_cast<int>(d);
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw UsageError("--" + key + ": expected true/false, got '" + v + "'");
}

inline std::vector<double> to_doubles(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& item : split_list(v)) out.push_back(to_double(key, item));
  return out;
}

inline int to_weekday(const std::string& key, const std::string& v) {
  static const std::vector<std::string> names = {"mon", "tue", "wed", "thu", "fri", "sat", "sun"};
  std::string lower = v;
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (lower.rfind(names[i], 0) == 0) return static_cast<int>(i);
  }
  const int d = to_int(key, v);
  if (d < 0 || d > 6) throw UsageError("--" + key + ": weekday must be 0..6 or a name");
  return d;
}

inline std::array<int, 24> to_profile(const std::string& key, const std::string& v) {
  const auto values = to_doubles(key, v);
  if (values.size() != 24) throw UsageError("--" + key + ": expected 24 comma-separated counts");
  std::array<int, 24> out{};
  for (std::size_t i = 0; i < 24; ++i) {
    if (values[i] < 0) throw UsageError("--" + key + ": counts must be non-negative");
    out[i] = static_cast<int>(std::lround(values[i]));
  }
  return out;
}

inline Minutes to_offset(const std::string& key, const std::string& v) {
  const auto t = std::string(trim(v));
  if (!t.empty() && (t[0] == '+' || t[0] == '-') && t.find(':') != std::string::npos) {
    try {
      // Reuse the timestamp parser on a fixed date; the offset is what moves the result.
      const auto base = parse_timestamp("2000-01-01T00:00");
      return base - parse_timestamp("2000-01-01T00:00" + t);
    } catch (const ValidationError&) {
      throw UsageError("--" + key + ": expected +HH:MM, -HH:MM or minutes, got '" + v + "'");
    }
  }
  return Minutes{to_int(key, t)};
}

}  // namespace detail

struct Key {
  std::string name;
  std::string help;
  std::function<void(RunConfig&, const std::string&)> apply;
  bool path = false;  // excluded from the config hash
};

namespace detail {

inline void add_path(std::vector<Key>& keys, const std::string& name, std::string RunConfig::*field, std::string help) {
  keys.push_back({name, std::move(help), [field](RunConfig& c, const std::string& v) { c.*field = v; }, true});
}

inline void add_data_keys(std::vector<Key>& k) {
  add_path(k, "input", &RunConfig::input, "input series CSV");
  auto col = [&k](const std::string& name, std::string ColumnSchema::*field) {
    k.push_back({"col-" + name, "CSV column holding " + name,
                 [field](RunConfig& c, const std::string& v) { c.schema.*field = v; }});
  };
  col("timestamp", &ColumnSchema::timestamp);
  col("power", &ColumnSchema::power);
  col("temperature", &ColumnSchema::temperature);
  col("occupancy", &ColumnSchema::occupancy);
  col("appliance-id", &ColumnSchema::appliance_id);
  col("working-day", &ColumnSchema::working_day);
  k.push_back({"utc-offset", "offset of naive timestamps, +HH:MM or minutes (default 0)",
               [](RunConfig& c, const std::string& v) { c.schema.utc_offset = to_offset("utc-offset", v); }});
  k.push_back({"max-gap", "longest run of missing power samples to interpolate (default 3)",
               [](RunConfig& c, const std::string& v) { c.max_gap = to_size("max-gap", v); }});
}

inline void add_model_keys(std::vector<Key>& k, bool with_kind) {
  if (with_kind) {
    k.push_back({"model", "regressor: dfnn (default) or knn", [](RunConfig& c, const std::string& v) {
                   try {
                     c.model.kind = parse_model_kind(v);
                   } catch (const SchemaError& e) {
                     throw UsageError(e.what());
                   }
                 }});
  }
  k.push_back({"hidden", "hidden layer widths, comma separated (default 1024,1024,1024,1024,1024)",
               [](RunConfig& c, const std::string& v) {
                 c.model.mlp.hidden_layers.clear();
                 for (const auto& w : split_list(v)) c.model.mlp.hidden_layers.push_back(to_size("hidden", w));
               }});
  k.push_back({"dropout", "dropout probability after each hidden layer (default 0.5)",
               [](RunConfig& c, const std::string& v) { c.model.mlp.dropout_p = to_double("dropout", v); }});
  k.push_back({"epochs", "training epochs (default 8)",
               [](RunConfig& c, const std::string& v) { c.model.mlp.epochs = to_int("epochs", v); }});
  k.push_back({"batch-size", "mini-batch size (default 64)",
               [](RunConfig& c, const std::string& v) { c.model.mlp.batch_size = to_size("batch-size", v); }});
  k.push_back({"lr", "Adam learning rate (default 1e-3)",
               [](RunConfig& c, const std::string& v) { c.model.mlp.adam.learning_rate = to_double("lr", v); }});
  k.push_back({"beta1", "Adam beta1 (default 0.9)",
               [](RunConfig& c, const std::string& v) { c.model.mlp.adam.beta1 = to_double("beta1", v); }});
  k.push_back({"beta2", "Adam beta2 (default 0.999)",
               [](RunConfig& c, const std::string& v) { c.model.mlp.adam.beta2 = to_double("beta2", v); }});
  k.push_back({"adam-eps", "Adam epsilon (default 1e-8)",
               [](RunConfig& c, const std::string& v) { c.model.mlp.adam.epsilon = to_double("adam-eps", v); }});
  k.push_back({"k", "KNN neighbour count (default 5)",
               [](RunConfig& c, const std::string& v) { c.model.knn.k = to_size("k", v); }});
  k.push_back({"occupancy", "use occupancy as a feature (default true)",
               [](RunConfig& c, const std::string& v) { c.model.features.include_occupancy = to_bool("occupancy", v); }});
  k.push_back({"case-threshold", "mean daily temperature splitting the cases, deg C (default 17)",
               [](RunConfig& c, const std::string& v) { c.model.features.case_threshold = to_double("case-threshold", v); }});
}

inline void add_fold_keys(std::vector<Key>& k) {
  k.push_back({"folds", "out-of-fold count K (default 5)",
               [](RunConfig& c, const std::string& v) { c.plan.folds = to_size("folds", v); }});
  k.push_back({"fold-mode", "contiguous (default) or shuffled", [](RunConfig& c, const std::string& v) {
                 if (v == "contiguous") c.plan.fold_mode = FoldMode::contiguous;
                 else if (v == "shuffled") c.plan.fold_mode = FoldMode::shuffled;
                 else throw UsageError("--fold-mode: expected contiguous or shuffled");
               }});
  k.push_back({"split", "train on this leading fraction and score the rest instead of K folds",
               [](RunConfig& c, const std::string& v) { c.plan.split = to_double("split", v); }});
}

inline void add_grid_key(std::vector<Key>& k) {
  k.push_back({"grid", "threshold grid lo:hi:step (default 2.5:4.5:0.05)", [](RunConfig& c, const std::string& v) {
                 std::vector<std::string> parts;
                 std::istringstream in(v);
                 for (std::string p; std::getline(in, p, ':');) parts.push_back(p);
                 if (parts.size() != 3) throw UsageError("--grid: expected lo:hi:step");
                 try {
                   c.detect.grid = threshold_grid(to_double("grid", parts[0]), to_double("grid", parts[1]),
                                                  to_double("grid", parts[2]));
                 } catch (const DomainError& e) {
                   throw UsageError(std::string("--grid: ") + e.what());
                 }
               }});
}

inline void add_detect_keys(std::vector<Key>& k) {
  add_grid_key(k);
  k.push_back({"target-rate", "target anomaly rate for threshold selection (default 0.01)",
               [](RunConfig& c, const std::string& v) { c.detect.target_rate = to_double("target-rate", v); }});
  k.push_back({"grouping", "case (default): score per case label; global: one group",
               [](RunConfig& c, const std::string& v) {
                 if (v == "case") c.detect.grouping = Grouping::per_case;
                 else if (v == "global") c.detect.grouping = Grouping::global;
                 else throw UsageError("--grouping: expected case or global");
               }});
  k.push_back({"min-group-size", "case groups smaller than this use global statistics (default 48)",
               [](RunConfig& c, const std::string& v) { c.detect.min_group_size = to_size("min-group-size", v); }});
  k.push_back({"taxonomy-run", "longest flagged run tagged as a spike/dip (default 3)",
               [](RunConfig& c, const std::string& v) { c.detect.taxonomy.max_short_run = to_size("taxonomy-run", v); }});
  k.push_back({"taxonomy-days", "distinct days at one hour for a time-of-day tag (default 3)",
               [](RunConfig& c, const std::string& v) { c.detect.taxonomy.min_distinct_days = to_size("taxonomy-days", v); }});
  k.push_back({"taxonomy-day-fraction", "flagged share of a day for a day-of-week tag (default 0.25)",
               [](RunConfig& c, const std::string& v) {
                 c.detect.taxonomy.min_day_fraction = to_double("taxonomy-day-fraction", v);
               }});
}

inline void add_synth_keys(std::vector<Key>& k) {
  auto num = [&k](const std::string& name, double SynthConfig::*field, const std::string& help) {
    k.push_back({name, help, [name, field](RunConfig& c, const std::string& v) { c.synth.*field = to_double(name, v); }});
  };
  k.push_back({"start", "first timestamp (default 2023-01-01T00:00)", [](RunConfig& c, const std::string& v) {
                 try {
                   c.synth.start = parse_timestamp(v);
                 } catch (const ValidationError& e) {
                   throw UsageError(std::string("--start: ") + e.what());
                 }
               }});
  k.push_back({"hours", "series length in hours (default 8760)",
               [](RunConfig& c, const std::string& v) { c.synth.hours = to_size("hours", v); }});
  num("base-load", &SynthConfig::base_load, "constant load, kW (default 100)");
  num("occupancy-load", &SynthConfig::occupancy_load, "kW per occupant (default 0.3)");
  num("thermal-coupling", &SynthConfig::thermal_coupling, "kW per deg C above the thermal threshold (default 3)");
  num("thermal-threshold", &SynthConfig::thermal_threshold, "deg C (default 17)");
  num("temp-mean", &SynthConfig::temp_mean, "annual mean temperature, deg C (default 20)");
  num("temp-annual-amplitude", &SynthConfig::temp_annual_amplitude, "deg C (default 10)");
  num("temp-daily-amplitude", &SynthConfig::temp_daily_amplitude, "deg C (default 5)");
  num("temp-day-noise", &SynthConfig::temp_day_noise_std, "std of the per-day weather offset, deg C (default 2)");
  num("noise-std", &SynthConfig::noise_std, "measurement noise std, kW (default 0)");
  num("noise-std-rel", &SynthConfig::noise_std_rel, "noise std as a fraction of mean clean load; overrides noise-std");
  k.push_back({"temp-peak-day", "day of year of the temperature maximum (default 200)",
               [](RunConfig& c, const std::string& v) { c.synth.temp_peak_day = to_int("temp-peak-day", v); }});
  k.push_back({"temp-peak-hour", "hour of the daily temperature maximum (default 15)",
               [](RunConfig& c, const std::string& v) { c.synth.temp_peak_hour = to_int("temp-peak-hour", v); }});
  k.push_back({"weekend", "non-working weekdays, e.g. sat,sun (default)", [](RunConfig& c, const std::string& v) {
                 c.synth.weekend.clear();
                 for (const auto& d : split_list(v)) c.synth.weekend.insert(to_weekday("weekend", d));
               }});
  k.push_back({"holidays", "comma-separated YYYY-MM-DD dates", [](RunConfig& c, const std::string& v) {
                 c.synth.holidays.clear();
                 for (const auto& d : split_list(v)) {
                   try {
                     c.synth.holidays.insert(calendar_day(parse_timestamp(d)));
                   } catch (const ValidationError& e) {
                     throw UsageError(std::string("--holidays: ") + e.what());
                   }
                 }
               }});
  k.push_back({"occupancy-working", "24 hourly occupant counts on working days",
               [](RunConfig& c, const std::string& v) { c.synth.occupancy_working = to_profile("occupancy-working", v); }});
  k.push_back({"occupancy-off", "24 hourly occupant counts on non-working days",
               [](RunConfig& c, const std::string& v) { c.synth.occupancy_off = to_profile("occupancy-off", v); }});
  k.push_back({"inject-rate", "fraction of samples to perturb, 0 disables (default 0.01)",
               [](RunConfig& c, const std::string& v) { c.injection.rate = to_double("inject-rate", v); }});
  k.push_back({"inject-mix", "spike,dip,time-of-day,day-of-week fractions (default 0.4,0.2,0.2,0.2)",
               [](RunConfig& c, const std::string& v) {
                 const auto m = to_doubles("inject-mix", v);
                 if (m.size() != 4) throw UsageError("--inject-mix: expected 4 fractions");
                 std::copy(m.begin(), m.end(), c.injection.mix.begin());
               }});
  k.push_back({"inject-magnitude", "min,max magnitude in multiples of the series std (default 5,10)",
               [](RunConfig& c, const std::string& v) {
                 const auto m = to_doubles("inject-magnitude", v);
                 if (m.size() != 2) throw UsageError("--inject-magnitude: expected min,max");
                 c.injection.magnitude_min = m[0];
                 c.injection.magnitude_max = m[1];
               }});
  k.push_back({"inject-hour", "hour of day for time-of-day anomalies (default 14)",
               [](RunConfig& c, const std::string& v) { c.injection.time_of_day_hour = to_int("inject-hour", v); }});
  k.push_back({"inject-weekday", "weekday for day-of-week anomalies (default wed)",
               [](RunConfig& c, const std::string& v) { c.injection.day_of_week = to_weekday("inject-weekday", v); }});
  k.push_back({"inject-weekday-high", "day-of-week anomalies raise instead of lower consumption (default false)",
               [](RunConfig& c, const std::string& v) { c.injection.day_of_week_high = to_bool("inject-weekday-high", v); }});
  k.push_back({"inject-seed", "injection RNG seed (default: seed + 1)",
               [](RunConfig& c, const std::string& v) { c.inject_seed = to_u64("inject-seed", v); }});
}

}  // namespace detail

// Keys accepted by each subcommand, both as --flags and in --config files.
inline std::vector<Key> keys_for(const std::string& command) {
  std::vector<Key> k;
  k.push_back({"seed", "base RNG seed (default 42)",
               [](RunConfig& c, const std::string& v) { c.seed = detail::to_u64("seed", v); }});
  if (command == "generate") {
    detail::add_path(k, "out", &RunConfig::out, "output series CSV");
    detail::add_path(k, "labels", &RunConfig::labels, "output label CSV (timestamp,is_anomaly,type)");
    detail::add_path(k, "clean-out", &RunConfig::clean_out, "output noise-free load CSV (timestamp,clean_power)");
    detail::add_synth_keys(k);
  } else if (command == "train") {
    detail::add_data_keys(k);
    detail::add_model_keys(k, true);
    detail::add_path(k, "model-out", &RunConfig::model_out, "output model file");
    detail::add_path(k, "dump-features", &RunConfig::dump_features, "write the raw feature matrix as CSV");
  } else if (command == "detect") {
    detail::add_data_keys(k);
    detail::add_model_keys(k, true);
    detail::add_fold_keys(k);
    detail::add_detect_keys(k);
    detail::add_path(k, "model-in", &RunConfig::model_in, "score with a trained model instead of out-of-fold training");
    detail::add_path(k, "report", &RunConfig::report, "anomaly report CSV (timestamp,epsilon,threshold,tag)");
    detail::add_path(k, "report-json", &RunConfig::report_json, "anomaly report JSON");
    detail::add_path(k, "scores", &RunConfig::scores, "per-sample scores CSV");
    detail::add_path(k, "curve", &RunConfig::curve, "anomaly rate vs threshold CSV");
    detail::add_path(k, "dump-features", &RunConfig::dump_features, "write the raw feature matrix as CSV");
  } else if (command == "sweep") {
    detail::add_grid_key(k);
    detail::add_path(k, "scores", &RunConfig::scores, "per-sample scores CSV from detect");
    detail::add_path(k, "out", &RunConfig::out, "output curve CSV (threshold,anomaly_rate)");
  } else if (command == "evaluate") {
    detail::add_path(k, "scores", &RunConfig::scores, "per-sample scores CSV from detect");
    detail::add_path(k, "labels", &RunConfig::labels, "label CSV from generate");
    detail::add_path(k, "clean", &RunConfig::clean, "noise-free load CSV from generate");
    detail::add_path(k, "out", &RunConfig::out, "metrics JSON");
  } else if (command == "compare") {
    detail::add_data_keys(k);
    detail::add_model_keys(k, false);
    detail::add_fold_keys(k);
    detail::add_detect_keys(k);
    detail::add_path(k, "labels", &RunConfig::labels, "label CSV from generate");
    detail::add_path(k, "clean", &RunConfig::clean, "noise-free load CSV from generate");
    detail::add_path(k, "out", &RunConfig::out, "comparison table CSV");
    detail::add_path(k, "out-json", &RunConfig::out_json, "comparison table JSON");
  }
  return k;
}

inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names = {"generate", "train", "detect", "sweep", "evaluate", "compare"};
  return names;
}

inline std::string subcommand_help(const std::string& name) {
  static const std::map<std::string, std::string> help = {
      {"generate", "write a synthetic hourly series, optionally with injected anomalies"},
      {"train", "fit a model on a series and save it"},
      {"detect", "score residuals, pick thresholds and flag anomalies"},
      {"sweep", "flag rate per threshold from a scores file"},
      {"evaluate", "classification and regression metrics against labels"},
      {"compare", "DFNN against the KNN baseline on one series"},
  };
  return help.at(name);
}

// `key = value` lines; '#' starts a comment.
inline std::map<std::string, std::string> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file '" + path + "'");
  std::map<std::string, std::string> values;
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) {
      throw UsageError(path + ":" + std::to_string(lineno) + ": expected key = value");
    }
    auto key = detail::normalize_key(std::string(trim(t.substr(0, eq))));
    if (key.rfind("--", 0) == 0) key.erase(0, 2);
    values[key] = std::string(trim(t.substr(eq + 1)));
  }
  return values;
}

// Applies config-file values, then flag values, in key-table order.
inline RunConfig resolve(const std::string& command, const std::map<std::string, std::string>& file_values,
                         const std::map<std::string, std::string>& flag_values, ArtifactMeta* meta) {
  const auto keys = keys_for(command);
  for (const auto& [name, value] : file_values) {
    if (std::none_of(keys.begin(), keys.end(), [&](const Key& k) { return k.name == name; })) {
      throw UsageError("unknown key '" + name + "' in config file for '" + command + "'");
    }
  }
  RunConfig cfg;
  cfg.command = command;
  std::string canonical = command + "\n";
  for (const auto& key : keys) {
    std::optional<std::string> value;
    if (const auto it = flag_values.find(key.name); it != flag_values.end()) value = it->second;
    else if (const auto it2 = file_values.find(key.name); it2 != file_values.end()) value = it2->second;
    if (!value) continue;
    key.apply(cfg, *value);
    if (!key.path) canonical += key.name + "=" + *value + "\n";
  }
  cfg.model.mlp.seed = cfg.seed;
  cfg.plan.fold_seed = cfg.seed;
  cfg.injection.seed = cfg.inject_seed.value_or(cfg.seed + 1);
  if (meta) {
    meta->seed = cfg.seed;
    meta->config_hash = hex64(fnv1a64(canonical));
  }
  return cfg;
}

namespace detail {

inline void require(const std::string& value, const std::string& flag) {
  if (value.empty()) throw UsageError("--" + flag + " is required");
}

inline void write_json(const Json& j, const std::string& path) {
  auto out = open_output(path);
  out << j.dump(2) << '\n';
}

inline void dump_features(const FeatureSet& fs, const TimeSeries& series, const std::string& path,
                          const ArtifactMeta& meta) {
  auto out = open_output(path);
  out << meta.csv_comment() << "\ntimestamp";
  for (const auto& n : fs.matrix.names) out << ',' << quote_csv_field(n);
  out << ",target\n";
  for (Eigen::Index r = 0; r < fs.matrix.rows(); ++r) {
    out << format_timestamp(series.records[static_cast<std::size_t>(r)].timestamp);
    for (Eigen::Index c = 0; c < fs.matrix.cols(); ++c) out << ',' << format_double(fs.matrix.values(r, c));
    out << ',' << format_double(fs.target[static_cast<std::size_t>(r)]) << '\n';
  }
}

inline std::map<Timestamp, double> read_clean(const std::string& path) {
  const auto t = read_table(path);
  const auto ts = t.column("timestamp"), val = t.column("clean_power");
  std::map<Timestamp, double> out;
  for (const auto& r : t.rows) out[parse_timestamp(r[ts])] = parse_double_strict(r[val], "clean_power");
  return out;
}

template <typename T>
std::vector<T> align(const std::map<Timestamp, T>& by_time, const std::vector<Timestamp>& when, const std::string& what) {
  std::vector<T> out;
  out.reserve(when.size());
  for (const auto ts : when) {
    const auto it = by_time.find(ts);
    if (it == by_time.end()) throw ValidationError(what + " has no row for " + format_timestamp(ts));
    out.push_back(it->second);
  }
  return out;
}

inline std::vector<Timestamp> timestamps_of(const TimeSeries& s) {
  std::vector<Timestamp> out;
  for (const auto& r : s.records) out.push_back(r.timestamp);
  return out;
}

inline void print_prepared(const PreparedSeries& p, std::ostream& out) {
  std::size_t dropped = 0;
  for (const auto& s : p.dropped) dropped += s.length();
  out << "series: " << p.series.size() << " hourly samples, " << p.missing_cells << " missing cells, "
      << p.filled.size() << " gaps interpolated, " << dropped << " samples dropped\n";
}

inline int run_generate(const RunConfig& cfg, const ArtifactMeta& meta, std::ostream& out) {
  require(cfg.out, "out");
  const auto gen = generate(cfg.synth, cfg.seed);
  InjectionResult inj{gen.series, std::vector<bool>(gen.series.size(), false),
                      std::vector<AnomalyTag>(gen.series.size(), AnomalyTag::untagged)};
  if (cfg.injection.rate > 0.0) inj = inject_anomalies(gen.series, cfg.injection);
  write_csv(inj.series, cfg.out, &meta);
  if (!cfg.labels.empty()) {
    auto f = open_output(cfg.labels);
    write_labels_csv(inj.series, inj.labels, inj.types, f, meta);
  }
  if (!cfg.clean_out.empty()) {
    auto f = open_output(cfg.clean_out);
    f << meta.csv_comment() << "\ntimestamp,clean_power\n";
    for (std::size_t i = 0; i < gen.clean.size(); ++i) {
      f << format_timestamp(gen.series.records[i].timestamp) << ',' << format_double(gen.clean[i]) << '\n';
    }
  }
  const auto injected = static_cast<std::size_t>(std::count(inj.labels.begin(), inj.labels.end(), true));
  out << "generated " << inj.series.size() << " samples, " << injected << " injected anomalies -> " << cfg.out << '\n';
  return kOk;
}

inline int run_train(const RunConfig& cfg, const ArtifactMeta& meta, std::ostream& out) {
  require(cfg.input, "input");
  require(cfg.model_out, "model-out");
  const auto prepared = prepare_series(cfg.input, cfg.schema, cfg.max_gap);
  print_prepared(prepared, out);
  if (!cfg.dump_features.empty()) {
    dump_features(build_features(prepared.series, fit_layout(prepared.series, cfg.model.features)), prepared.series,
                  cfg.dump_features, meta);
  }
  TrainReport report;
  const auto bundle = fit_bundle(prepared.series, cfg.model, &report);
  save_bundle(bundle, meta, cfg.model_out);
  if (cfg.model.kind == ModelKind::dfnn) {
    out << "epoch losses (MAE, kW):";
    for (const double l : report.epoch_losses) out << ' ' << format_double(l);
    out << "\ninitial MAE " << format_double(report.initial_loss) << ", final MAE " << format_double(report.final_loss)
        << ", " << report.optimizer_steps << " Adam steps\n";
  }
  out << "model -> " << cfg.model_out << '\n';
  return kOk;
}

inline int run_detect(const RunConfig& cfg, const ArtifactMeta& meta, std::ostream& out) {
  require(cfg.input, "input");
  const auto prepared = prepare_series(cfg.input, cfg.schema, cfg.max_gap);
  print_prepared(prepared, out);
  const auto& series = prepared.series;

  FeatureSet fs;
  ScoredRows rows;
  std::string model_name;
  if (!cfg.model_in.empty()) {
    const auto bundle = load_bundle(cfg.model_in);
    fs = build_features(series, bundle.layout);
    rows.indices.resize(series.size());
    std::iota(rows.indices.begin(), rows.indices.end(), std::size_t{0});
    rows.predicted = bundle.predict(fs.matrix);
    model_name = std::string(model_kind_name(bundle.kind));
  } else {
    fs = build_features(series, fit_layout(series, cfg.model.features));
    rows = held_out_predictions(fs, make_trainer(cfg.model), cfg.plan);
    model_name = std::string(model_kind_name(cfg.model.kind));
  }
  if (!cfg.dump_features.empty()) dump_features(fs, series, cfg.dump_features, meta);

  const auto sd = detect_on(series, fs, rows, cfg.detect);
  if (!cfg.report.empty()) {
    auto f = open_output(cfg.report);
    write_report_csv(sd, f, meta);
  }
  if (!cfg.report_json.empty()) write_json(report_json(sd, meta, model_name), cfg.report_json);
  if (!cfg.scores.empty()) {
    auto f = open_output(cfg.scores);
    write_scores_csv(sd, f, meta);
  }
  if (!cfg.curve.empty()) {
    auto f = open_output(cfg.curve);
    write_curve_csv(sweep_thresholds(sd.detection.epsilon, cfg.detect.grid), f, meta);
  }
  out << model_name << ": " << sd.detection.report.flags.size() << " anomalies in " << sd.series.size()
      << " scored samples\n";
  for (const auto& g : sd.detection.groups) {
    out << "  group " << (g.group == 0 ? std::string("global") : "case " + std::to_string(g.group)) << ": "
        << g.indices.size() << " samples, threshold " << format_double(g.choice.threshold) << ", rate "
        << format_double(g.choice.rate) << (g.choice.at_target ? "" : " (target not reached)") << '\n';
  }
  return kOk;
}

inline int run_sweep(const RunConfig& cfg, const ArtifactMeta& meta, std::ostream& out) {
  require(cfg.scores, "scores");
  require(cfg.out, "out");
  const auto scores = read_scores(cfg.scores);
  const auto curve = sweep_thresholds(scores.epsilon, cfg.detect.grid);
  auto f = open_output(cfg.out);
  write_curve_csv(curve, f, meta);
  out << "swept " << curve.thresholds.size() << " thresholds over " << scores.epsilon.size() << " scores -> "
      << cfg.out << '\n';
  return kOk;
}

inline void print_metrics_row(std::ostream& out, const std::string& name, const ClassificationMetrics& c,
                              const RegressionMetrics& r) {
  out << std::left << std::setw(6) << name << std::right << std::fixed << std::setprecision(4) << std::setw(10)
      << c.accuracy << std::setw(11) << c.precision << std::setw(8) << c.recall << std::setw(8) << c.f1
      << std::setw(10) << r.mape.percent << std::setw(10) << r.rmse << std::setw(10) << r.mae << '\n';
  out.unsetf(std::ios::fixed);
}

inline void print_metrics_header(std::ostream& out) {
  out << "model   accuracy  precision  recall      f1   MAPE(%)      RMSE       MAE\n";
}

inline int run_evaluate(const RunConfig& cfg, const ArtifactMeta& meta, std::ostream& out) {
  require(cfg.scores, "scores");
  require(cfg.labels, "labels");
  require(cfg.out, "out");
  const auto scores = read_scores(cfg.scores);
  const auto labels = read_labels(cfg.labels);
  const auto truth = align(labels.is_anomaly, scores.timestamps, "label file");
  const auto cls = classification_metrics(scores.flagged, truth);
  const auto reg = regression_metrics(scores.predicted, scores.observed);
  Json j;
  j["meta"] = {{"tool", kToolName}, {"tool_version", kToolVersion}, {"seed", meta.seed},
               {"config_hash", meta.config_hash}};
  j["classification"] = classification_json(cls);
  j["regression_observed"] = regression_json(reg);
  if (!cfg.clean.empty()) {
    const auto clean = align(read_clean(cfg.clean), scores.timestamps, "clean file");
    j["regression_clean"] = regression_json(regression_metrics(scores.predicted, clean));
  }
  write_json(j, cfg.out);
  print_metrics_header(out);
  print_metrics_row(out, "scores", cls, reg);
  return kOk;
}

inline int run_compare(const RunConfig& cfg, const ArtifactMeta& meta, std::ostream& out) {
  require(cfg.input, "input");
  require(cfg.labels, "labels");
  require(cfg.out, "out");
  const auto prepared = prepare_series(cfg.input, cfg.schema, cfg.max_gap);
  print_prepared(prepared, out);
  const auto labels = read_labels(cfg.labels);
  std::optional<std::map<Timestamp, double>> clean;
  if (!cfg.clean.empty()) clean = read_clean(cfg.clean);
  const auto fs = build_features(prepared.series, fit_layout(prepared.series, cfg.model.features));

  auto table = open_output(cfg.out);
  table << meta.csv_comment() << "\nmodel,accuracy,precision,recall,f1,mape,rmse,mae"
        << (clean ? ",clean_mape" : "") << '\n';
  Json rows = Json::array();
  print_metrics_header(out);
  for (const auto kind : {ModelKind::dfnn, ModelKind::knn}) {
    ModelSettings settings = cfg.model;
    settings.kind = kind;
    const auto scored = held_out_predictions(fs, make_trainer(settings), cfg.plan);
    const auto sd = detect_on(prepared.series, fs, scored, cfg.detect);
    const auto when = timestamps_of(sd.series);
    const auto cls = classification_metrics(sd.detection.report.mask(sd.series.size()),
                                            align(labels.is_anomaly, when, "label file"));
    const auto reg = regression_metrics(sd.predicted, sd.observed);
    const std::string name(model_kind_name(kind));
    table << name << ',' << format_double(cls.accuracy) << ',' << format_double(cls.precision) << ','
          << format_double(cls.recall) << ',' << format_double(cls.f1) << ',' << format_double(reg.mape.percent) << ','
          << format_double(reg.rmse) << ',' << format_double(reg.mae);
    Json row = {{"model", name}, {"classification", classification_json(cls)}, {"regression_observed", regression_json(reg)}};
    if (clean) {
      const auto c = regression_metrics(sd.predicted, align(*clean, when, "clean file"));
      table << ',' << format_double(c.mape.percent);
      row["regression_clean"] = regression_json(c);
    }
    table << '\n';
    rows.push_back(std::move(row));
    print_metrics_row(out, name, cls, reg);
  }
  if (!cfg.out_json.empty()) {
    Json j;
    j["meta"] = {{"tool", kToolName}, {"tool_version", kToolVersion}, {"seed", meta.seed},
                 {"config_hash", meta.config_hash}};
    j["rows"] = rows;
    write_json(j, cfg.out_json);
  }
  return kOk;
}

}  // namespace detail

// Entry point shared by the executable and the test suites. `args` excludes the program name.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Residual-based energy consumption anomaly detection", "enanom"};
  app.require_subcommand(1, 1);
  app.set_version_flag("--version", std::string(kToolVersion));

  std::map<std::string, std::map<std::string, std::string>> given;
  std::map<std::string, std::string> config_paths;
  std::map<std::string, std::vector<std::pair<std::string, CLI::Option*>>> options;
  for (const auto& name : subcommands()) {
    auto* sub = app.add_subcommand(name, subcommand_help(name));
    sub->add_option("--config", config_paths[name], "key = value settings file; flags override it");
    for (const auto& key : keys_for(name)) {
      auto* opt = sub->add_option("--" + key.name, given[name][key.name], key.help);
      options[name].emplace_back(key.name, opt);
    }
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "enanom: error: " << e.what() << '\n';
    return kUsage;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    std::map<std::string, std::string> flag_values;
    for (const auto& [key, opt] : options[command]) {
      if (opt->count() > 0) flag_values[key] = given[command][key];
    }
    std::map<std::string, std::string> file_values;
    if (!config_paths[command].empty()) file_values = read_config_file(config_paths[command]);
    ArtifactMeta meta;
    const auto cfg = resolve(command, file_values, flag_values, &meta);
    if (command == "generate") return detail::run_generate(cfg, meta, out);
    if (command == "train") return detail::run_train(cfg, meta, out);
    if (command == "detect") return detail::run_detect(cfg, meta, out);
    if (command == "sweep") return detail::run_sweep(cfg, meta, out);
    if (command == "evaluate") return detail::run_evaluate(cfg, meta, out);
    return detail::run_compare(cfg, meta, out);
  } catch (const UsageError& e) {
    err << "enanom: usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const SpecError& e) {
    err << "enanom: usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::system_error& e) {
    err << "enanom: usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const DivergenceError& e) {
    err << "enanom: divergence: " << e.what() << '\n';
    return kDivergence;
  } catch (const SchemaError& e) {
    err << "enanom: data error: " << e.what() << '\n';
    return kDataValidation;
  } catch (const ValidationError& e) {
    err << "enanom: data error: " << e.what() << '\n';
    return kDataValidation;
  } catch (const std::exception& e) {
    err << "enanom: error: " << e.what() << '\n';
    return kRuntimeFailure;
  }
}

}  // namespace enanom::cli
