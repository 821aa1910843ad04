#include <gtest/gtest.h>

#include <enanom/pipeline.hpp>
#include <enanom/synth.hpp>

#include "test_util.hpp"

using namespace enanom;

namespace {

TimeSeries small_series() {
  SynthConfig cfg;
  cfg.hours = 24 * 20;
  cfg.noise_std = 2.0;
  auto s = generate(cfg, 3).series;
  for (std::size_t i = 0; i < s.size(); ++i) s.records[i].appliance_id = i % 3 == 0 ? "a" : "b";
  return s;
}

}  // namespace

TEST(Serialize, DfnnBundleRoundTrip) {
  const auto s = small_series();
  ModelSettings settings;
  settings.mlp.hidden_layers = {8, 4};
  settings.mlp.epochs = 2;
  const auto bundle = fit_bundle(s, settings);
  const ArtifactMeta meta{42, "feedface"};
  const auto dir = enanom::testing::scratch_dir("serialize_dfnn");
  save_bundle(bundle, meta, (dir / "m.json").string());
  const auto loaded = load_bundle((dir / "m.json").string());
  EXPECT_EQ(loaded.kind, ModelKind::dfnn);
  EXPECT_EQ(loaded.layout.appliance_vocab, bundle.layout.appliance_vocab);
  EXPECT_EQ(loaded.mlp->config().hidden_layers, settings.mlp.hidden_layers);
  const auto fs = build_features(s, bundle.layout);
  EXPECT_EQ(loaded.predict(fs.matrix), bundle.predict(fs.matrix));

  const auto text = enanom::testing::slurp(dir / "m.json");
  EXPECT_NE(text.find("\"format\""), std::string::npos);
  EXPECT_NE(text.find("feedface"), std::string::npos);
}

TEST(Serialize, KnnBundleRoundTrip) {
  const auto s = small_series();
  ModelSettings settings;
  settings.kind = ModelKind::knn;
  settings.knn.k = 3;
  const auto bundle = fit_bundle(s, settings);
  const auto j = bundle_to_json(bundle, {});
  const auto loaded = bundle_from_json(j);
  EXPECT_EQ(loaded.kind, ModelKind::knn);
  EXPECT_EQ(loaded.knn->config().k, 3u);
  const auto fs = build_features(s, bundle.layout);
  EXPECT_EQ(loaded.predict(fs.matrix), bundle.predict(fs.matrix));
}

TEST(Serialize, MalformedInputIsSchemaError) {
  EXPECT_THROW(bundle_from_json(Json::parse("{}")), SchemaError);
  EXPECT_THROW(bundle_from_json(Json::parse(R"({"format":"something-else","version":1})")), SchemaError);
  const auto s = small_series();
  ModelSettings settings;
  settings.kind = ModelKind::knn;
  auto j = bundle_to_json(fit_bundle(s, settings), {});
  j["version"] = 99;
  EXPECT_THROW(bundle_from_json(j), SchemaError);
  const auto dir = enanom::testing::scratch_dir("serialize_bad");
  enanom::testing::spit(dir / "bad.json", "{not json");
  EXPECT_THROW(load_bundle((dir / "bad.json").string()), SchemaError);
}
