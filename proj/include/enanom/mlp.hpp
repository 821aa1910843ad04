#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "matrix.hpp"

namespace enanom {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Feedforward regressor: ReLU hidden layers, inverted dropout after each hidden
// layer, linear scalar output, MAE loss, Adam.
struct MlpConfig {
  std::vector<std::size_t> hidden_layers = std::vector<std::size_t>(5, 1024);
  double dropout_p = 0.5;
  AdamConfig adam;
  int epochs = 8;
  std::size_t batch_size = 64;
  std::uint64_t seed = 42;

  void validate() const {
    for (const auto w : hidden_layers) {
      if (w < 1) throw DomainError("hidden layer width must be >= 1");
    }
    if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw DomainError("dropout_p must be in [0, 1)");
    if (epochs < 1) throw DomainError("epochs must be >= 1");
    if (batch_size < 1) throw DomainError("batch_size must be >= 1");
    if (!(adam.learning_rate > 0.0)) throw DomainError("learning rate must be positive");
  }
};

// Reduced architecture used by the test suites; same code path as the default.
inline MlpConfig test_scale_config() {
  MlpConfig c;
  c.hidden_layers = {128, 128, 128};
  return c;
}

enum class Mode { train, infer };

struct DenseLayer {
  Matrix weights;  // fan_in x fan_out
  Vector bias;     // fan_out
  // Adam moments, same shapes as the parameters.
  Matrix m_weights, v_weights;
  Vector m_bias, v_bias;

  Eigen::Index fan_in() const noexcept { return weights.rows(); }
  Eigen::Index fan_out() const noexcept { return weights.cols(); }
};

struct LayerGradient {
  Matrix weights;
  Vector bias;
};

struct TrainReport {
  std::vector<double> epoch_losses;  // mean training-mode MAE per epoch, kW
  double initial_loss = 0.0;         // infer-mode MAE before training, kW
  double final_loss = 0.0;           // infer-mode MAE after training, kW
  std::size_t optimizer_steps = 0;
  double wall_seconds = 0.0;
};

class MlpModel {
public:
  // He-style scaled uniform weights U(-sqrt(6/fan_in), sqrt(6/fan_in)), zero biases.
  static MlpModel init(const MlpConfig& config, std::size_t input_width) {
    config.validate();
    if (input_width < 1) throw DomainError("input width must be >= 1");
    MlpModel model;
    model.config_ = config;
    model.input_width_ = input_width;
    model.rng_.seed(config.seed);

    std::vector<std::size_t> widths = {input_width};
    widths.insert(widths.end(), config.hidden_layers.begin(), config.hidden_layers.end());
    widths.push_back(1);
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
      const auto fan_in = static_cast<Eigen::Index>(widths[l]);
      const auto fan_out = static_cast<Eigen::Index>(widths[l + 1]);
      const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
      std::uniform_real_distribution<double> dist(-limit, limit);
      DenseLayer layer;
      layer.weights.resize(fan_in, fan_out);
      for (Eigen::Index i = 0; i < layer.weights.size(); ++i) layer.weights.data()[i] = dist(model.rng_);
      layer.bias = Vector::Zero(fan_out);
      layer.m_weights = Matrix::Zero(fan_in, fan_out);
      layer.v_weights = Matrix::Zero(fan_in, fan_out);
      layer.m_bias = Vector::Zero(fan_out);
      layer.v_bias = Vector::Zero(fan_out);
      model.layers_.push_back(std::move(layer));
    }
    return model;
  }

  // Rebuilds a trained model from stored parameters; optimizer moments start at zero.
  static MlpModel restore(const MlpConfig& config, std::size_t input_width, std::vector<DenseLayer> layers,
                          double target_mean, double target_scale) {
    MlpModel model = init(config, input_width);
    if (layers.size() != model.layers_.size()) throw ShapeError("stored layer count does not match config");
    for (std::size_t l = 0; l < layers.size(); ++l) {
      auto& dst = model.layers_[l];
      if (layers[l].weights.rows() != dst.weights.rows() || layers[l].weights.cols() != dst.weights.cols() ||
          layers[l].bias.size() != dst.bias.size()) {
        throw ShapeError("stored layer " + std::to_string(l) + " has the wrong shape");
      }
      dst.weights = std::move(layers[l].weights);
      dst.bias = std::move(layers[l].bias);
    }
    model.set_target_transform(target_mean, target_scale);
    return model;
  }

  const MlpConfig& config() const noexcept { return config_; }
  std::size_t input_width() const noexcept { return input_width_; }
  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
  std::vector<DenseLayer>& layers() noexcept { return layers_; }
  std::uint64_t steps() const noexcept { return steps_; }

  // Affine map from network output to kW; fitted on the first call to train().
  double target_mean() const noexcept { return target_mean_; }
  double target_scale() const noexcept { return target_scale_; }
  void set_target_transform(double mean, double scale) {
    if (!(scale > 0.0)) throw DomainError("target scale must be positive");
    target_mean_ = mean;
    target_scale_ = scale;
  }

  // Deterministic inference.
  double forward(std::span<const double> x) const { return row_output(x, nullptr); }

  // Train mode draws a fresh inverted-dropout mask per hidden layer from the model's RNG.
  double forward(std::span<const double> x, Mode mode) {
    if (mode == Mode::infer) return forward(x);
    return row_output(x, &rng_);
  }

  std::vector<double> predict_batch(const Matrix& x) const {
    check_width(x.cols());
    std::vector<double> out(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index r = 0; r < x.rows(); ++r) out[static_cast<std::size_t>(r)] = forward(row_span(x, r));
    return out;
  }

  // Per-batch activations kept for backpropagation.
  struct Cache {
    std::vector<Matrix> activations;      // [0] = input, [l+1] = output of layer l
    std::vector<Matrix> pre_activations;  // per layer
    std::vector<Matrix> masks;            // per hidden layer; empty when dropout is off
  };

  // Network output in standardized target units, one entry per row.
  Vector forward_batch(const Matrix& x, bool dropout, Cache* cache) {
    check_width(x.cols());
    Matrix a = x;
    if (cache) {
      cache->activations.assign(1, x);
      cache->pre_activations.clear();
      cache->masks.clear();
    }
    const double p = config_.dropout_p;
    std::bernoulli_distribution keep(1.0 - p);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const auto& layer = layers_[l];
      Matrix z = a * layer.weights;
      z.rowwise() += layer.bias.transpose();
      const bool hidden = l + 1 < layers_.size();
      if (hidden) {
        a = z.cwiseMax(0.0);
        if (dropout && p > 0.0) {
          Matrix mask(a.rows(), a.cols());
          const double scale = 1.0 / (1.0 - p);
          for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(rng_) ? scale : 0.0;
          a.array() *= mask.array();
          if (cache) cache->masks.push_back(std::move(mask));
        } else if (cache) {
          cache->masks.emplace_back();
        }
      } else {
        a = std::move(z);
        z = a;
      }
      if (cache) {
        cache->pre_activations.push_back(std::move(z));
        cache->activations.push_back(a);
      }
    }
    return a.col(0);
  }

  // Backprop of mean |output - target| over the batch. The subgradient at zero residual is 0.
  std::vector<LayerGradient> backward(const Cache& cache, const Vector& output, const Vector& target) const {
    const auto n = static_cast<double>(output.size());
    Matrix delta(output.size(), 1);
    for (Eigen::Index i = 0; i < output.size(); ++i) {
      const double r = output(i) - target(i);
      delta(i, 0) = (r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0)) / n;
    }
    std::vector<LayerGradient> grads(layers_.size());
    for (std::size_t l = layers_.size(); l-- > 0;) {
      const Matrix& input = cache.activations[l];
      grads[l].weights = input.transpose() * delta;
      grads[l].bias = delta.colwise().sum().transpose();
      if (l == 0) break;
      Matrix upstream = delta * layers_[l].weights.transpose();
      // Layer l-1 is hidden: undo its dropout mask and ReLU.
      const auto& mask = cache.masks[l - 1];
      if (mask.size() > 0) upstream.array() *= mask.array();
      upstream.array() *= (cache.pre_activations[l - 1].array() > 0.0).cast<double>();
      delta = std::move(upstream);
    }
    return grads;
  }

  void adam_step(const std::vector<LayerGradient>& grads, const AdamConfig& adam) {
    ++steps_;
    const double t = static_cast<double>(steps_);
    const double c1 = 1.0 - std::pow(adam.beta1, t);
    const double c2 = 1.0 - std::pow(adam.beta2, t);
    const double lr = adam.learning_rate;
    auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
      m = adam.beta1 * m + (1.0 - adam.beta1) * g;
      v.array() = adam.beta2 * v.array() + (1.0 - adam.beta2) * g.array().square();
      param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + adam.epsilon);
    };
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      auto& layer = layers_[l];
      update(layer.weights, layer.m_weights, layer.v_weights, grads[l].weights);
      update(layer.bias, layer.m_bias, layer.v_bias, grads[l].bias);
    }
  }

  std::mt19937_64& rng() noexcept { return rng_; }

private:
  void check_width(Eigen::Index width) const {
    if (static_cast<std::size_t>(width) != input_width_) {
      throw ShapeError("feature width " + std::to_string(width) + " does not match model input width " +
                       std::to_string(input_width_));
    }
  }

  double row_output(std::span<const double> x, std::mt19937_64* dropout_rng) const {
    check_width(static_cast<Eigen::Index>(x.size()));
    const double p = config_.dropout_p;
    Eigen::RowVectorXd a = Eigen::Map<const Eigen::RowVectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const auto& layer = layers_[l];
      Eigen::RowVectorXd z = layer.bias.transpose();
      for (Eigen::Index i = 0; i < layer.fan_in(); ++i) z += a(i) * layer.weights.row(i);
      if (l + 1 < layers_.size()) {
        a = z.cwiseMax(0.0);
        if (dropout_rng && p > 0.0) {
          std::bernoulli_distribution keep(1.0 - p);
          for (Eigen::Index j = 0; j < a.size(); ++j) a(j) = keep(*dropout_rng) ? a(j) / (1.0 - p) : 0.0;
        }
      } else {
        a = std::move(z);
      }
    }
    return target_mean_ + target_scale_ * a(0);
  }

  MlpConfig config_;
  std::size_t input_width_ = 0;
  std::vector<DenseLayer> layers_;
  double target_mean_ = 0.0;
  double target_scale_ = 1.0;
  std::uint64_t steps_ = 0;
  std::mt19937_64 rng_;
};

namespace detail {

inline double mean_abs(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return a.empty() ? 0.0 : s / static_cast<double>(a.size());
}

}  // namespace detail

// Runs config.epochs passes of shuffled mini-batch Adam on MAE.
// The target transform is fitted from y on the model's first training call.
inline TrainReport train(MlpModel& model, const Matrix& x, std::span<const double> y, const MlpConfig& config) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  const auto n = static_cast<std::size_t>(x.rows());
  if (y.size() != n) throw ShapeError("feature rows and target length differ");
  if (n < config.batch_size) {
    throw DomainError("training set (" + std::to_string(n) + " rows) is smaller than batch_size");
  }

  if (model.steps() == 0) {
    const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
    double var = 0.0;
    for (const double v : y) var += (v - mean) * (v - mean);
    const double sd = n > 1 ? std::sqrt(var / static_cast<double>(n - 1)) : 0.0;
    model.set_target_transform(mean, sd > 0.0 ? sd : 1.0);
  }
  const double mu = model.target_mean();
  const double scale = model.target_scale();

  TrainReport report;
  report.initial_loss = detail::mean_abs(model.predict_batch(x), y);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  MlpModel::Cache cache;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), model.rng());
    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < n; begin += config.batch_size) {
      const std::size_t end = std::min(n, begin + config.batch_size);
      const auto rows = static_cast<Eigen::Index>(end - begin);
      Matrix xb(rows, x.cols());
      Vector tb(rows);
      for (Eigen::Index r = 0; r < rows; ++r) {
        const auto src = order[begin + static_cast<std::size_t>(r)];
        xb.row(r) = x.row(static_cast<Eigen::Index>(src));
        tb(r) = (y[src] - mu) / scale;
      }
      const Vector out = model.forward_batch(xb, true, &cache);
      const double batch_loss = (out - tb).cwiseAbs().sum();
      if (!std::isfinite(batch_loss)) {
        throw DivergenceError("non-finite training loss in epoch " + std::to_string(epoch), epoch);
      }
      loss_sum += batch_loss;
      model.adam_step(model.backward(cache, out, tb), config.adam);
      ++report.optimizer_steps;
    }
    report.epoch_losses.push_back(scale * loss_sum / static_cast<double>(n));
  }
  report.final_loss = detail::mean_abs(model.predict_batch(x), y);
  if (!std::isfinite(report.final_loss)) {
    throw DivergenceError("non-finite loss after training", config.epochs);
  }
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

inline TrainReport train(MlpModel& model, const Matrix& x, std::span<const double> y) {
  const MlpConfig config = model.config();
  return train(model, x, y, config);
}

struct GradientCheckResult {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // parameters whose perturbation crosses an MAE or ReLU kink
};

// Compares backprop gradients of |f(x) - y| with central differences for every parameter.
// Runs without dropout. Parameters are skipped when the unperturbed residual is within
// `margin` of zero or when a +/- step flips the residual sign or any ReLU.
inline GradientCheckResult gradient_check(const MlpModel& model, std::span<const double> features, double target,
                                          double step = 1e-5, double margin = 1e-6) {
  MlpModel work = model;
  Matrix x = Eigen::Map<const Eigen::RowVectorXd>(features.data(), static_cast<Eigen::Index>(features.size()));
  Vector t(1);
  t(0) = (target - work.target_mean()) / work.target_scale();

  auto evaluate = [&](MlpModel::Cache& cache) {
    const Vector out = work.forward_batch(x, false, &cache);
    return out(0) - t(0);
  };
  auto pattern = [](const MlpModel::Cache& cache) {
    std::vector<bool> on;
    for (std::size_t l = 0; l + 1 < cache.pre_activations.size(); ++l) {
      const auto& z = cache.pre_activations[l];
      for (Eigen::Index i = 0; i < z.size(); ++i) on.push_back(z.data()[i] > 0.0);
    }
    return on;
  };

  MlpModel::Cache base;
  const double r0 = evaluate(base);
  const auto base_pattern = pattern(base);
  Vector out0(1);
  out0(0) = r0 + t(0);
  const auto grads = work.backward(base, out0, t);
  const bool at_kink = std::abs(r0) <= margin;

  GradientCheckResult result;
  MlpModel::Cache probe;
  auto check_param = [&](double& param, double analytic) {
    if (at_kink) {
      ++result.skipped;
      return;
    }
    const double saved = param;
    param = saved + step;
    const double rp = evaluate(probe);
    const bool same_plus = pattern(probe) == base_pattern;
    param = saved - step;
    const double rm = evaluate(probe);
    const bool same_minus = pattern(probe) == base_pattern;
    param = saved;
    if ((rp > 0.0) != (r0 > 0.0) || (rm > 0.0) != (r0 > 0.0) || !same_plus || !same_minus) {
      ++result.skipped;
      return;
    }
    const double numeric = (std::abs(rp) - std::abs(rm)) / (2.0 * step);
    const double denom = std::max(std::abs(analytic), std::abs(numeric));
    const double err = denom < 1e-8 ? std::abs(analytic - numeric) : std::abs(analytic - numeric) / denom;
    result.max_relative_error = std::max(result.max_relative_error, err);
    ++result.checked;
  };

  for (std::size_t l = 0; l < work.layers().size(); ++l) {
    auto& layer = work.layers()[l];
    for (Eigen::Index i = 0; i < layer.weights.size(); ++i) {
      check_param(layer.weights.data()[i], grads[l].weights.data()[i]);
    }
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) check_param(layer.bias(i), grads[l].bias(i));
  }
  return result;
}

inline GradientCheckResult gradient_check(const MlpConfig& config, std::span<const double> features, double target,
                                          double step = 1e-5, double margin = 1e-6) {
  MlpConfig no_dropout = config;
  no_dropout.dropout_p = 0.0;
  return gradient_check(MlpModel::init(no_dropout, features.size()), features, target, step, margin);
}

}  // namespace enanom
