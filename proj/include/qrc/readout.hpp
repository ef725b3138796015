#pragma once

// Linear readout trained by least squares, plus the capacity and MSE metrics.

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "qrc/linalg.hpp"
#include "qrc/reservoir.hpp"

namespace qrc {

using TargetSeries = std::vector<std::optional<double>>;

struct TrainedReadout {
  RealVector weights;  // one per feature column, bias last
  double rcond_used = 1e-10;
  double ridge = 0.0;
  double training_residual = 0.0;  // Euclidean norm of X w - y on the training rows
  Eigen::Index rank = 0;
  std::vector<std::string> labels;
};

struct TrainOptions {
  double rcond = 1e-10;
  double ridge = 0.0;
};

// Trains on rows [range.begin, range.end) of the features; rows whose target
// is missing are dropped.
inline TrainedReadout train(const FeatureMatrix& features, RowRange range,
                            const TargetSeries& targets, const TrainOptions& opt = {}) {
  require(static_cast<Eigen::Index>(targets.size()) == features.rows(),
          ErrorCode::dimension_mismatch, "targets and features differ in length");
  require(range.begin >= 0 && range.end <= features.rows() && range.begin <= range.end,
          ErrorCode::invalid_argument, "training range outside the feature matrix");
  require(opt.ridge >= 0.0, ErrorCode::invalid_argument, "ridge must be >= 0");
  std::vector<Eigen::Index> rows;
  for (Eigen::Index r = range.begin; r < range.end; ++r)
    if (targets[static_cast<std::size_t>(r)]) rows.push_back(r);
  require(!rows.empty(), ErrorCode::invalid_argument, "empty training set");

  const Eigen::Index cols = features.cols();
  const auto n = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index extra = opt.ridge > 0.0 ? cols : 0;
  RealMatrix x(n + extra, cols);
  RealVector y = RealVector::Zero(n + extra);
  for (Eigen::Index i = 0; i < n; ++i) {
    x.row(i) = features.values.row(rows[i]);
    y(i) = *targets[static_cast<std::size_t>(rows[i])];
  }
  if (extra) x.bottomRows(extra) = std::sqrt(opt.ridge) * RealMatrix::Identity(cols, cols);

  const auto ls = svd_lstsq(x, y, opt.rcond);
  TrainedReadout r;
  r.weights = ls.solution;
  r.rcond_used = opt.rcond;
  r.ridge = opt.ridge;
  r.rank = ls.rank;
  r.training_residual = (x.topRows(n) * r.weights - y.head(n)).norm();
  r.labels = features.labels;
  return r;
}

inline TrainedReadout train(const FeatureMatrix& features, const TargetSeries& targets,
                            const TrainOptions& opt = {}) {
  return train(features, RowRange{0, features.rows()}, targets, opt);
}

inline double predict_row(const TrainedReadout& r, std::span<const double> row) {
  require(static_cast<Eigen::Index>(row.size()) == r.weights.size(),
          ErrorCode::dimension_mismatch, "feature row width does not match the readout");
  return Eigen::Map<const RealVector>(row.data(), static_cast<Eigen::Index>(row.size()))
      .dot(r.weights);
}

inline std::vector<double> predict(const TrainedReadout& r, const FeatureMatrix& f,
                                   RowRange range) {
  require(f.cols() == r.weights.size(), ErrorCode::dimension_mismatch,
          "feature width does not match the readout");
  const RealVector p = f.values.middleRows(range.begin, range.size()) * r.weights;
  return {p.data(), p.data() + p.size()};
}

inline std::vector<double> predict(const TrainedReadout& r, const FeatureMatrix& f) {
  return predict(r, f, RowRange{0, f.rows()});
}

// Squared Pearson correlation; 0 if either series is (numerically) constant.
inline double capacity(std::span<const double> y, std::span<const double> yhat) {
  require(y.size() == yhat.size(), ErrorCode::dimension_mismatch, "capacity: length mismatch");
  require(y.size() >= 2, ErrorCode::invalid_argument, "capacity needs at least two points");
  const auto n = static_cast<double>(y.size());
  double my = 0.0, mp = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    my += y[i];
    mp += yhat[i];
  }
  my /= n;
  mp /= n;
  double cov = 0.0, vy = 0.0, vp = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    cov += (y[i] - my) * (yhat[i] - mp);
    vy += (y[i] - my) * (y[i] - my);
    vp += (yhat[i] - mp) * (yhat[i] - mp);
  }
  cov /= n;
  vy /= n;
  vp /= n;
  if (vy < 1e-14 || vp < 1e-14) return 0.0;
  return std::min(1.0, cov * cov / (vy * vp));
}

inline double mse(std::span<const double> y, std::span<const double> yhat) {
  require(y.size() == yhat.size(), ErrorCode::dimension_mismatch, "mse: length mismatch");
  require(!y.empty(), ErrorCode::invalid_argument, "mse needs at least one point");
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) acc += (yhat[i] - y[i]) * (yhat[i] - y[i]);
  return acc / static_cast<double>(y.size());
}

// Capacity on rows of `range` where the target is defined.
inline double evaluate_capacity(const TrainedReadout& r, const FeatureMatrix& f, RowRange range,
                                const TargetSeries& targets) {
  const auto pred = predict(r, f, range);
  std::vector<double> y, p;
  for (Eigen::Index k = range.begin; k < range.end; ++k)
    if (const auto& t = targets[static_cast<std::size_t>(k)]) {
      y.push_back(*t);
      p.push_back(pred[static_cast<std::size_t>(k - range.begin)]);
    }
  return capacity(y, p);
}

inline nlohmann::json to_json(const TrainedReadout& r) {
  return {{"weights", std::vector<double>(r.weights.data(), r.weights.data() + r.weights.size())},
          {"labels", r.labels},
          {"rcond", r.rcond_used},
          {"ridge", r.ridge},
          {"rank", r.rank},
          {"training_residual", r.training_residual}};
}

}  // namespace qrc
