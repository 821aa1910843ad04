#pragma once

#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "anomaly.hpp"
#include "crossfit.hpp"
#include "dataset.hpp"
#include "features.hpp"
#include "io.hpp"
#include "metrics.hpp"
#include "serialize.hpp"

namespace enanom {

struct PreparedSeries {
  TimeSeries series;  // hourly, repaired
  std::size_t missing_cells = 0;
  std::vector<Span> filled;
  std::vector<Span> dropped;
};

// load -> hourly aggregation -> gap repair.
inline PreparedSeries prepare_series(const std::string& path, const ColumnSchema& schema, std::size_t max_gap) {
  auto loaded = load_csv(path, schema);
  auto filled = fill_missing(to_hourly(loaded.series), max_gap);
  return {std::move(filled.series), loaded.missing_cells, std::move(filled.filled), std::move(filled.dropped)};
}

struct ModelSettings {
  ModelKind kind = ModelKind::dfnn;
  MlpConfig mlp;
  KnnConfig knn;
  FeatureOptions features;
};

inline Trainer make_trainer(const ModelSettings& s, std::vector<TrainReport>* reports = nullptr) {
  return s.kind == ModelKind::dfnn ? make_mlp_trainer(s.mlp, reports) : make_knn_trainer(s.knn);
}

// Fits layout, scaler and regressor on the whole series.
inline ModelBundle fit_bundle(const TimeSeries& series, const ModelSettings& s, TrainReport* report = nullptr) {
  ModelBundle b;
  b.kind = s.kind;
  b.layout = fit_layout(series, s.features);
  const auto fs = build_features(series, b.layout);
  b.scaler = fit_scaler(fs.matrix);
  const auto x = apply_scaler(b.scaler, fs.matrix);
  if (s.kind == ModelKind::dfnn) {
    auto model = MlpModel::init(s.mlp, static_cast<std::size_t>(x.cols()));
    auto r = train(model, x.values, fs.target, s.mlp);
    if (report) *report = std::move(r);
    b.mlp = std::move(model);
  } else {
    b.knn.emplace(x.values, fs.target, s.knn);
  }
  return b;
}

struct EvaluationPlan {
  std::size_t folds = 5;
  FoldMode fold_mode = FoldMode::contiguous;
  std::uint64_t fold_seed = 0;
  std::optional<double> split;  // train fraction; replaces folds when set
};

// Predictions for the scored rows (all rows under K-fold, the trailing rows under a split).
struct ScoredRows {
  std::vector<std::size_t> indices;
  std::vector<double> predicted;
};

inline ScoredRows held_out_predictions(const FeatureSet& fs, const Trainer& trainer, const EvaluationPlan& plan) {
  ScoredRows out;
  if (plan.split) {
    auto sp = split_predict(fs.matrix, fs.target, *plan.split, trainer);
    out.indices = std::move(sp.test_indices);
    out.predicted = std::move(sp.predictions);
  } else {
    const auto fp = plan_folds(fs.target.size(), plan.folds, plan.fold_mode, plan.fold_seed);
    auto oof = out_of_fold_predict(fs.matrix, fs.target, fp, trainer);
    out.indices.resize(fs.target.size());
    std::iota(out.indices.begin(), out.indices.end(), std::size_t{0});
    out.predicted = std::move(oof.predictions);
  }
  return out;
}

inline TimeSeries subset(const TimeSeries& s, const std::vector<std::size_t>& idx) {
  TimeSeries out;
  out.cadence = s.cadence;
  out.records = take(s.records, idx);
  return out;
}

// Detection over the scored rows of a series.
struct ScoredDetection {
  TimeSeries series;  // scored rows only
  std::vector<double> observed;
  std::vector<double> predicted;
  Detection detection;
};

inline ScoredDetection detect_on(const TimeSeries& series, const FeatureSet& fs, const ScoredRows& rows,
                                 const DetectOptions& options) {
  ScoredDetection sd;
  sd.series = subset(series, rows.indices);
  sd.observed = take(fs.target, rows.indices);
  sd.predicted = rows.predicted;
  const auto cases = take(fs.cases, rows.indices);
  sd.detection = detect_anomalies(sd.predicted, sd.observed, cases, sd.series, options);
  return sd;
}

// ---- report files ----

inline void write_report_csv(const ScoredDetection& sd, std::ostream& out, const ArtifactMeta& meta) {
  out << meta.csv_comment() << '\n' << "timestamp,epsilon,threshold,tag\n";
  for (const auto& f : sd.detection.report.flags) {
    out << format_timestamp(sd.series.records[f.index].timestamp) << ',' << format_double(f.epsilon) << ','
        << format_double(f.threshold) << ',' << tag_name(f.tag) << '\n';
  }
}

inline Json report_json(const ScoredDetection& sd, const ArtifactMeta& meta, std::string_view model) {
  Json j;
  j["meta"] = {{"tool", kToolName}, {"tool_version", kToolVersion}, {"seed", meta.seed},
               {"config_hash", meta.config_hash}};
  j["model"] = model;
  j["samples"] = sd.series.size();
  Json groups = Json::array();
  for (const auto& g : sd.detection.groups) {
    groups.push_back({{"group", g.group == 0 ? std::string("global") : "case_" + std::to_string(g.group)},
                      {"samples", g.indices.size()},
                      {"delta_mean", g.delta_mean},
                      {"delta_std", g.delta_std},
                      {"threshold", g.choice.threshold},
                      {"anomaly_rate", g.choice.rate},
                      {"at_target", g.choice.at_target}});
  }
  j["groups"] = groups;
  Json flags = Json::array();
  for (const auto& f : sd.detection.report.flags) {
    flags.push_back({{"timestamp", format_timestamp(sd.series.records[f.index].timestamp)},
                     {"epsilon", f.epsilon},
                     {"threshold", f.threshold},
                     {"tag", tag_name(f.tag)}});
  }
  j["flags"] = flags;
  return j;
}

inline void write_scores_csv(const ScoredDetection& sd, std::ostream& out, const ArtifactMeta& meta) {
  const auto& det = sd.detection;
  std::vector<std::string> tags(sd.series.size());
  for (const auto& f : det.report.flags) tags[f.index] = std::string(tag_name(f.tag));
  out << meta.csv_comment() << '\n'
      << "timestamp,observed,predicted,delta,epsilon,threshold,group,flagged,tag\n";
  for (std::size_t i = 0; i < sd.series.size(); ++i) {
    out << format_timestamp(sd.series.records[i].timestamp) << ',' << format_double(sd.observed[i]) << ','
        << format_double(sd.predicted[i]) << ',' << format_double(det.delta[i]) << ','
        << format_double(det.epsilon[i]) << ',' << format_double(det.threshold[i]) << ',' << det.group[i] << ','
        << (tags[i].empty() ? '0' : '1') << ',' << tags[i] << '\n';
  }
}

inline void write_curve_csv(const ThresholdCurve& curve, std::ostream& out, const ArtifactMeta& meta) {
  out << meta.csv_comment() << '\n' << "threshold,anomaly_rate\n";
  for (std::size_t i = 0; i < curve.thresholds.size(); ++i) {
    out << format_double(curve.thresholds[i]) << ',' << format_double(curve.anomaly_rates[i]) << '\n';
  }
}

inline void write_labels_csv(const TimeSeries& series, const std::vector<bool>& labels,
                             const std::vector<AnomalyTag>& types, std::ostream& out, const ArtifactMeta& meta) {
  out << meta.csv_comment() << '\n' << "timestamp,is_anomaly,type\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    out << format_timestamp(series.records[i].timestamp) << ',' << (labels[i] ? '1' : '0') << ','
        << (labels[i] ? tag_name(types[i]) : std::string_view("none")) << '\n';
  }
}

// Generic reader for the CLI's own CSV artifacts: header names -> column values per row.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw SchemaError("missing required column '" + name + "'");
  }
};

inline CsvTable read_table(const std::string& path) {
  auto in = open_input(path);
  CsvTable t;
  std::string line;
  if (!next_data_line(in, line)) throw SchemaError("'" + path + "' has no header");
  for (auto& h : split_csv_line(line)) t.header.emplace_back(trim(h));
  while (next_data_line(in, line)) {
    auto fields = split_csv_line(line);
    if (fields.size() < t.header.size()) throw SchemaError("'" + path + "': short row");
    t.rows.push_back(std::move(fields));
  }
  return t;
}

struct LabelTable {
  std::map<Timestamp, bool> is_anomaly;
  std::map<Timestamp, AnomalyTag> type;
};

inline LabelTable read_labels(const std::string& path) {
  const auto t = read_table(path);
  const auto ts = t.column("timestamp"), flag = t.column("is_anomaly"), type = t.column("type");
  LabelTable labels;
  for (const auto& r : t.rows) {
    const auto when = parse_timestamp(r[ts]);
    labels.is_anomaly[when] = trim(r[flag]) == "1";
    const auto name = trim(r[type]);
    labels.type[when] = name == "none" ? AnomalyTag::untagged : parse_tag(name);
  }
  return labels;
}

// Per-sample scores written by `detect`.
struct ScoreTable {
  std::vector<Timestamp> timestamps;
  std::vector<double> observed, predicted, epsilon;
  std::vector<bool> flagged;
};

inline ScoreTable read_scores(const std::string& path) {
  const auto t = read_table(path);
  const auto ts = t.column("timestamp"), obs = t.column("observed"), pred = t.column("predicted"),
             eps = t.column("epsilon"), flag = t.column("flagged");
  ScoreTable s;
  for (const auto& r : t.rows) {
    s.timestamps.push_back(parse_timestamp(r[ts]));
    s.observed.push_back(parse_double_strict(r[obs], "observed"));
    s.predicted.push_back(parse_double_strict(r[pred], "predicted"));
    s.epsilon.push_back(parse_double_strict(r[eps], "epsilon"));
    s.flagged.push_back(trim(r[flag]) == "1");
  }
  return s;
}

inline Json regression_json(const RegressionMetrics& m) {
  return {{"mape", m.mape.percent},
          {"mape_band", band_name(m.mape.band)},
          {"mape_excluded_zero", m.mape.excluded_zero},
          {"rmse", m.rmse},
          {"mae", m.mae},
          {"n", m.n}};
}

inline Json classification_json(const ClassificationMetrics& m) {
  return {{"accuracy", m.accuracy}, {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1},
          {"f1_degenerate", m.degenerate}, {"tp", m.tp}, {"fp", m.fp}, {"tn", m.tn}, {"fn", m.fn}};
}

}  // namespace enanom
