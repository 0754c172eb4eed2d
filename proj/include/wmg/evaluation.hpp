#pragma once

#include <Eigen/Dense>

#include <vector>

#include "wmg/feature_table.hpp"

namespace wmg {

/// Root mean squared error over the entries selected by `at`.
double rmse(const FeatureTable& imputed, const FeatureTable& truth, const EntryMask& at);

struct LogisticConfig {
  double l2 = 1e-3;
  int iters = 2000;
  double lr = 0.1;
};

/// Logistic regression on standardized features. Standardization constants
/// come from the rows the model was fitted on.
struct LogisticModel {
  Eigen::VectorXd weights;
  double bias = 0.0;
  Eigen::VectorXd feature_mean;
  Eigen::VectorXd feature_scale;

  double probability(const Eigen::RowVectorXd& x) const;
};

/// Full-batch gradient descent on mean logistic loss + l2 * |w|^2 / 2.
LogisticModel fit_logistic(const FeatureTable& features, const std::vector<int>& labels,
                           const LogisticConfig& cfg);

/// Gradient of the fitting objective at the model's weights, in standardized
/// coordinates: (dw..., dbias).
Eigen::VectorXd logistic_gradient(const LogisticModel& model, const FeatureTable& features,
                                  const std::vector<int>& labels, double l2);

/// Fraction of rows whose thresholded probability (>= 0.5) equals the label.
double accuracy(const LogisticModel& model, const FeatureTable& features,
                const std::vector<int>& labels);

}  // namespace wmg
