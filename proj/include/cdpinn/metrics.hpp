#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <string>

#include "cdpinn/errors.hpp"

namespace cdpinn {

namespace detail {
inline void check_pair(const Eigen::Ref<const Eigen::ArrayXd>& pred, const Eigen::Ref<const Eigen::ArrayXd>& truth) {
  if (pred.size() != truth.size()) throw ShapeError("prediction and truth differ in size");
  if (pred.size() < 1) throw MetricError("metric needs at least one point");
}
}  // namespace detail

inline double mse(const Eigen::Ref<const Eigen::ArrayXd>& pred, const Eigen::Ref<const Eigen::ArrayXd>& truth) {
  detail::check_pair(pred, truth);
  return (pred - truth).square().mean();
}

/// -log10(mean |error|); +infinity on an exact match.
inline double nlmae(const Eigen::Ref<const Eigen::ArrayXd>& pred, const Eigen::Ref<const Eigen::ArrayXd>& truth) {
  detail::check_pair(pred, truth);
  const double mae = (pred - truth).abs().mean();
  if (mae == 0.0) return std::numeric_limits<double>::infinity();
  return -std::log10(mae);
}

/// Relative L2 error ||pred - truth|| / ||truth||.
inline double nrmse(const Eigen::Ref<const Eigen::ArrayXd>& pred, const Eigen::Ref<const Eigen::ArrayXd>& truth) {
  detail::check_pair(pred, truth);
  const double tn = truth.matrix().norm();
  if (tn == 0.0) throw MetricError("NRMSE undefined: truth has zero norm");
  return (pred - truth).matrix().norm() / tn;
}

struct MetricReport {
  double mse = 0.0;
  double nrmse = 0.0;
  double nlmae = 0.0;
  long points = 0;
  std::string grid;
};

inline MetricReport metric_report(const Eigen::Ref<const Eigen::ArrayXd>& pred,
                                  const Eigen::Ref<const Eigen::ArrayXd>& truth, std::string grid = {}) {
  MetricReport r;
  r.mse = mse(pred, truth);
  r.nrmse = nrmse(pred, truth);
  r.nlmae = nlmae(pred, truth);
  r.points = static_cast<long>(pred.size());
  r.grid = std::move(grid);
  return r;
}

}  // namespace cdpinn
