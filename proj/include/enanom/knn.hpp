#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "error.hpp"
#include "matrix.hpp"

namespace enanom {

struct KnnConfig {
  std::size_t k = 5;
};

// Brute-force k-nearest-neighbour regressor: uniform mean of the k nearest targets by
// Euclidean distance. Equal distances resolve to the lower training row index.
class KnnRegressor {
public:
  KnnRegressor(Matrix train_x, std::vector<double> train_y, KnnConfig config = {})
      : x_(std::move(train_x)), y_(std::move(train_y)), config_(config) {
    if (x_.rows() == 0 || y_.empty()) throw DomainError("KNN needs a non-empty training set");
    if (static_cast<std::size_t>(x_.rows()) != y_.size()) throw ShapeError("KNN rows and targets differ");
    if (config_.k < 1 || config_.k > y_.size()) {
      throw DomainError("KNN k must be in [1, " + std::to_string(y_.size()) + "]");
    }
  }

  std::size_t size() const noexcept { return y_.size(); }
  const KnnConfig& config() const noexcept { return config_; }
  const Matrix& train_x() const noexcept { return x_; }
  const std::vector<double>& train_y() const noexcept { return y_; }

  // Indices of the k nearest training rows, nearest first.
  std::vector<std::size_t> neighbours(std::span<const double> query) const {
    if (static_cast<Eigen::Index>(query.size()) != x_.cols()) throw ShapeError("KNN query width mismatch");
    const auto n = y_.size();
    std::vector<std::pair<double, std::size_t>> dist(n);
    const Eigen::Map<const Eigen::RowVectorXd> q(query.data(), x_.cols());
    for (std::size_t i = 0; i < n; ++i) {
      dist[i] = {(x_.row(static_cast<Eigen::Index>(i)) - q).squaredNorm(), i};
    }
    const auto k = static_cast<std::ptrdiff_t>(config_.k);
    std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
    std::vector<std::size_t> out;
    out.reserve(config_.k);
    for (std::ptrdiff_t i = 0; i < k; ++i) out.push_back(dist[static_cast<std::size_t>(i)].second);
    return out;
  }

  double predict(std::span<const double> query) const {
    double s = 0.0;
    for (const auto i : neighbours(query)) s += y_[i];
    return s / static_cast<double>(config_.k);
  }

  std::vector<double> predict_batch(const Matrix& queries) const {
    std::vector<double> out(static_cast<std::size_t>(queries.rows()));
    for (Eigen::Index r = 0; r < queries.rows(); ++r) out[static_cast<std::size_t>(r)] = predict(row_span(queries, r));
    return out;
  }

private:
  Matrix x_;
  std::vector<double> y_;
  KnnConfig config_;
};

inline double knn_predict(const Matrix& train_x, const std::vector<double>& train_y, std::span<const double> query,
                          const KnnConfig& config = {}) {
  return KnnRegressor(train_x, train_y, config).predict(query);
}

}  // namespace enanom
