#pragma once

#include <json.hpp>
#include <optional>
#include <string>

#include "error.hpp"
#include "features.hpp"
#include "io.hpp"
#include "knn.hpp"
#include "mlp.hpp"

namespace enanom {

using Json = nlohmann::ordered_json;

inline constexpr std::string_view kModelFormat = "enanom-model";
inline constexpr int kModelFormatVersion = 1;

enum class ModelKind { dfnn, knn };

inline std::string_view model_kind_name(ModelKind k) { return k == ModelKind::dfnn ? "dfnn" : "knn"; }

inline ModelKind parse_model_kind(std::string_view s) {
  if (s == "dfnn") return ModelKind::dfnn;
  if (s == "knn") return ModelKind::knn;
  throw SchemaError("unknown model kind '" + std::string(s) + "' (expected dfnn or knn)");
}

// Everything needed to score a new series: feature layout, fitted scaler and the regressor.
struct ModelBundle {
  ModelKind kind = ModelKind::dfnn;
  FeatureLayout layout;
  Scaler scaler;
  std::optional<MlpModel> mlp;
  std::optional<KnnRegressor> knn;

  std::vector<double> predict(const FeatureMatrix& raw) const {
    const auto x = apply_scaler(scaler, raw);
    if (kind == ModelKind::dfnn) return mlp.value().predict_batch(x.values);
    return knn.value().predict_batch(x.values);
  }
};

namespace detail {

inline Json matrix_to_json(const Matrix& m) {
  Json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  j["data"] = std::vector<double>(m.data(), m.data() + m.size());
  return j;
}

inline Matrix matrix_from_json(const Json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw SchemaError("matrix data size mismatch");
  Matrix m(rows, cols);
  std::copy(data.begin(), data.end(), m.data());
  return m;
}

inline std::string kind_name(ColumnKind k) {
  switch (k) {
    case ColumnKind::continuous: return "continuous";
    case ColumnKind::cyclic: return "cyclic";
    case ColumnKind::binary: return "binary";
  }
  return "continuous";
}

inline ColumnKind kind_from_name(const std::string& s) {
  if (s == "continuous") return ColumnKind::continuous;
  if (s == "cyclic") return ColumnKind::cyclic;
  if (s == "binary") return ColumnKind::binary;
  throw SchemaError("unknown column kind '" + s + "'");
}

}  // namespace detail

inline Json mlp_config_to_json(const MlpConfig& c) {
  return Json{{"hidden_layers", c.hidden_layers},
              {"dropout_p", c.dropout_p},
              {"adam", {{"learning_rate", c.adam.learning_rate}, {"beta1", c.adam.beta1},
                        {"beta2", c.adam.beta2}, {"epsilon", c.adam.epsilon}}},
              {"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"seed", c.seed}};
}

inline MlpConfig mlp_config_from_json(const Json& j) {
  MlpConfig c;
  c.hidden_layers = j.at("hidden_layers").get<std::vector<std::size_t>>();
  c.dropout_p = j.at("dropout_p").get<double>();
  const auto& a = j.at("adam");
  c.adam = {a.at("learning_rate").get<double>(), a.at("beta1").get<double>(), a.at("beta2").get<double>(),
            a.at("epsilon").get<double>()};
  c.epochs = j.at("epochs").get<int>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

inline Json bundle_to_json(const ModelBundle& b, const ArtifactMeta& meta) {
  Json j;
  j["format"] = kModelFormat;
  j["version"] = kModelFormatVersion;
  j["meta"] = {{"tool", kToolName}, {"tool_version", kToolVersion}, {"seed", meta.seed},
               {"config_hash", meta.config_hash}};
  j["kind"] = model_kind_name(b.kind);
  j["layout"] = {{"include_occupancy", b.layout.options.include_occupancy},
                 {"case_threshold", b.layout.options.case_threshold},
                 {"appliance_vocab", b.layout.appliance_vocab}};
  Json kinds = Json::array();
  for (const auto k : b.scaler.kinds) kinds.push_back(detail::kind_name(k));
  j["scaler"] = {{"mean", b.scaler.mean}, {"stddev", b.scaler.stddev}, {"kinds", kinds}};
  if (b.kind == ModelKind::dfnn) {
    const auto& m = b.mlp.value();
    Json layers = Json::array();
    for (const auto& l : m.layers()) {
      layers.push_back({{"weights", detail::matrix_to_json(l.weights)},
                        {"bias", std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size())}});
    }
    j["mlp"] = {{"config", mlp_config_to_json(m.config())},
                {"input_width", m.input_width()},
                {"target_mean", m.target_mean()},
                {"target_scale", m.target_scale()},
                {"layers", layers}};
  } else {
    const auto& k = b.knn.value();
    j["knn"] = {{"k", k.config().k}, {"train_x", detail::matrix_to_json(k.train_x())}, {"train_y", k.train_y()}};
  }
  return j;
}

inline ModelBundle bundle_from_json(const Json& j) {
  try {
    if (j.at("format").get<std::string>() != kModelFormat) throw SchemaError("not an enanom model file");
    const int version = j.at("version").get<int>();
    if (version != kModelFormatVersion) {
      throw SchemaError("unsupported model format version " + std::to_string(version));
    }
    ModelBundle b;
    b.kind = parse_model_kind(j.at("kind").get<std::string>());
    const auto& lay = j.at("layout");
    b.layout.options.include_occupancy = lay.at("include_occupancy").get<bool>();
    b.layout.options.case_threshold = lay.at("case_threshold").get<double>();
    b.layout.appliance_vocab = lay.at("appliance_vocab").get<std::vector<std::string>>();
    const auto& sc = j.at("scaler");
    b.scaler.mean = sc.at("mean").get<std::vector<double>>();
    b.scaler.stddev = sc.at("stddev").get<std::vector<double>>();
    for (const auto& k : sc.at("kinds")) b.scaler.kinds.push_back(detail::kind_from_name(k.get<std::string>()));
    if (b.kind == ModelKind::dfnn) {
      const auto& m = j.at("mlp");
      std::vector<DenseLayer> layers;
      for (const auto& l : m.at("layers")) {
        DenseLayer d;
        d.weights = detail::matrix_from_json(l.at("weights"));
        const auto bias = l.at("bias").get<std::vector<double>>();
        d.bias = Eigen::Map<const Vector>(bias.data(), static_cast<Eigen::Index>(bias.size()));
        layers.push_back(std::move(d));
      }
      b.mlp = MlpModel::restore(mlp_config_from_json(m.at("config")), m.at("input_width").get<std::size_t>(),
                                std::move(layers), m.at("target_mean").get<double>(),
                                m.at("target_scale").get<double>());
    } else {
      const auto& k = j.at("knn");
      b.knn.emplace(detail::matrix_from_json(k.at("train_x")), k.at("train_y").get<std::vector<double>>(),
                    KnnConfig{k.at("k").get<std::size_t>()});
    }
    return b;
  } catch (const Json::exception& e) {
    throw SchemaError(std::string("malformed model file: ") + e.what());
  }
}

inline void save_bundle(const ModelBundle& b, const ArtifactMeta& meta, const std::string& path) {
  auto out = open_output(path);
  out << bundle_to_json(b, meta).dump(1) << '\n';
}

inline ModelBundle load_bundle(const std::string& path) {
  auto in = open_input(path);
  Json j;
  try {
    in >> j;
  } catch (const Json::exception& e) {
    throw SchemaError("model file '" + path + "' is not valid JSON: " + e.what());
  }
  return bundle_from_json(j);
}

}  // namespace enanom
