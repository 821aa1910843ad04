#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "error.hpp"
#include "features.hpp"
#include "knn.hpp"
#include "mlp.hpp"

namespace enanom {

enum class FoldMode { contiguous, shuffled };

struct FoldPlan {
  std::size_t folds = 0;
  std::vector<std::size_t> assignment;  // fold of each index

  std::vector<std::size_t> members(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignment.size(); ++i) {
      if (assignment[i] == fold) out.push_back(i);
    }
    return out;
  }
  std::vector<std::size_t> complement(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignment.size(); ++i) {
      if (assignment[i] != fold) out.push_back(i);
    }
    return out;
  }
  std::vector<std::size_t> sizes() const {
    std::vector<std::size_t> s(folds, 0);
    for (const auto f : assignment) ++s[f];
    return s;
  }
};

// Balanced folds (sizes differ by at most one; the first n % K folds take the extra index).
// Contiguous mode keeps time order; shuffled mode deals a seeded permutation into blocks.
inline FoldPlan plan_folds(std::size_t n, std::size_t folds, FoldMode mode = FoldMode::contiguous,
                           std::uint64_t seed = 0) {
  if (folds < 2 || folds > n) {
    throw DomainError("fold count must satisfy 2 <= K <= n (K=" + std::to_string(folds) + ", n=" + std::to_string(n) + ")");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (mode == FoldMode::shuffled) {
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
  }
  FoldPlan plan;
  plan.folds = folds;
  plan.assignment.assign(n, 0);
  const std::size_t base = n / folds, extra = n % folds;
  std::size_t pos = 0;
  for (std::size_t f = 0; f < folds; ++f) {
    const std::size_t size = base + (f < extra ? 1 : 0);
    for (std::size_t k = 0; k < size; ++k) plan.assignment[order[pos++]] = f;
  }
  return plan;
}

// Fits a model on scaled training rows and predicts scaled test rows.
using Trainer = std::function<std::vector<double>(const FeatureMatrix& train_x, std::span<const double> train_y,
                                                  const FeatureMatrix& test_x, std::size_t fold)>;

struct OutOfFold {
  std::vector<double> predictions;
  std::vector<std::size_t> times_predicted;  // coverage count per index
  std::vector<Scaler> fold_scalers;
};

// Each fold is predicted by a model trained on the other folds only; the scaler is refit
// per fold on its training rows.
inline OutOfFold out_of_fold_predict(const FeatureMatrix& x, std::span<const double> y, const FoldPlan& plan,
                                     const Trainer& trainer) {
  const auto n = static_cast<std::size_t>(x.rows());
  if (y.size() != n || plan.assignment.size() != n) throw ShapeError("out_of_fold_predict: length mismatch");
  OutOfFold result;
  result.predictions.assign(n, 0.0);
  result.times_predicted.assign(n, 0);
  const std::vector<double> targets(y.begin(), y.end());
  for (std::size_t f = 0; f < plan.folds; ++f) {
    const auto test_idx = plan.members(f);
    const auto train_idx = plan.complement(f);
    if (test_idx.empty() || train_idx.empty()) continue;
    const auto train_raw = x.select_rows(train_idx);
    const Scaler scaler = fit_scaler(train_raw);
    const auto train_x = apply_scaler(scaler, train_raw);
    const auto test_x = apply_scaler(scaler, x.select_rows(test_idx));
    const auto train_y = take(targets, train_idx);
    std::vector<double> pred;
    try {
      pred = trainer(train_x, train_y, test_x, f);
    } catch (const DivergenceError& e) {
      throw DivergenceError("fold " + std::to_string(f) + ": " + e.what(), e.epoch());
    }
    if (pred.size() != test_idx.size()) throw ShapeError("trainer returned the wrong number of predictions");
    for (std::size_t k = 0; k < test_idx.size(); ++k) {
      result.predictions[test_idx[k]] = pred[k];
      ++result.times_predicted[test_idx[k]];
    }
    result.fold_scalers.push_back(scaler);
  }
  return result;
}

struct SplitPrediction {
  std::vector<std::size_t> test_indices;
  std::vector<double> predictions;
  Scaler scaler;
};

// Trains on the leading `train_fraction` of rows and predicts the rest.
inline SplitPrediction split_predict(const FeatureMatrix& x, std::span<const double> y, double train_fraction,
                                     const Trainer& trainer) {
  const auto n = static_cast<std::size_t>(x.rows());
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw DomainError("split fraction must be in (0, 1)");
  const auto cut = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(n)));
  if (cut == 0 || cut == n) throw DomainError("split leaves an empty train or test part");
  std::vector<std::size_t> train_idx(cut), test_idx(n - cut);
  std::iota(train_idx.begin(), train_idx.end(), std::size_t{0});
  std::iota(test_idx.begin(), test_idx.end(), cut);
  SplitPrediction out;
  const auto train_raw = x.select_rows(train_idx);
  out.scaler = fit_scaler(train_raw);
  const std::vector<double> targets(y.begin(), y.end());
  out.predictions = trainer(apply_scaler(out.scaler, train_raw), take(targets, train_idx),
                            apply_scaler(out.scaler, x.select_rows(test_idx)), 0);
  out.test_indices = std::move(test_idx);
  return out;
}

// Fold f trains with seed config.seed + f.
inline Trainer make_mlp_trainer(const MlpConfig& config, std::vector<TrainReport>* reports = nullptr) {
  return [config, reports](const FeatureMatrix& train_x, std::span<const double> train_y, const FeatureMatrix& test_x,
                           std::size_t fold) {
    MlpConfig c = config;
    c.seed = config.seed + fold;
    auto model = MlpModel::init(c, static_cast<std::size_t>(train_x.cols()));
    auto report = train(model, train_x.values, train_y, c);
    if (reports) reports->push_back(std::move(report));
    return model.predict_batch(test_x.values);
  };
}

inline Trainer make_knn_trainer(const KnnConfig& config) {
  return [config](const FeatureMatrix& train_x, std::span<const double> train_y, const FeatureMatrix& test_x,
                  std::size_t) {
    const KnnRegressor knn(train_x.values, std::vector<double>(train_y.begin(), train_y.end()), config);
    return knn.predict_batch(test_x.values);
  };
}

}  // namespace enanom
