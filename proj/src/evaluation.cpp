#include "wmg/evaluation.hpp"

#include <cmath>

#include "wmg/error.hpp"

namespace wmg {

double rmse(const FeatureTable& imputed, const FeatureTable& truth, const EntryMask& at) {
  if (imputed.rows() != truth.rows() || imputed.cols() != truth.cols() ||
      at.rows() != truth.rows() || at.cols() != truth.cols())
    throw ArgumentError("rmse: table and mask shapes differ");
  if (at.count() == 0) throw ArgumentError("rmse: empty evaluation mask");
  double ss = 0.0;
  for (Eigen::Index i = 0; i < at.rows(); ++i)
    for (Eigen::Index j = 0; j < at.cols(); ++j) {
      if (!at(i, j)) continue;
      if (!truth.is_present(i, j) || !imputed.is_present(i, j))
        throw ArgumentError("rmse: evaluation entry is missing in a table");
      const double d = imputed.value(i, j) - truth.value(i, j);
      ss += d * d;
    }
  return std::sqrt(ss / static_cast<double>(at.count()));
}

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

Eigen::MatrixXd design(const FeatureTable& features) {
  if (features.missing_count() != 0)
    throw ArgumentError("logistic regression needs fully observed features");
  return features.values();
}

Eigen::MatrixXd standardized(const LogisticModel& m, const Eigen::MatrixXd& x) {
  return (x.rowwise() - m.feature_mean.transpose()).array().rowwise() /
         m.feature_scale.transpose().array();
}

Eigen::VectorXd label_vector(const std::vector<int>& labels, Eigen::Index rows) {
  if (static_cast<Eigen::Index>(labels.size()) != rows)
    throw ArgumentError("label count does not match the feature rows");
  Eigen::VectorXd y(rows);
  for (Eigen::Index i = 0; i < rows; ++i) y(i) = labels[static_cast<std::size_t>(i)] != 0 ? 1.0 : 0.0;
  return y;
}

Eigen::VectorXd gradient_at(const Eigen::MatrixXd& z, const Eigen::VectorXd& y,
                            const Eigen::VectorXd& w, double b, double l2) {
  const auto n = static_cast<double>(z.rows());
  Eigen::VectorXd resid = ((z * w).array() + b).unaryExpr([](double v) { return sigmoid(v); }).matrix() - y;
  Eigen::VectorXd g(w.size() + 1);
  g.head(w.size()) = z.transpose() * resid / n + l2 * w;
  g(w.size()) = resid.sum() / n;
  return g;
}

}  // namespace

double LogisticModel::probability(const Eigen::RowVectorXd& x) const {
  const Eigen::RowVectorXd z =
      (x - feature_mean.transpose()).array() / feature_scale.transpose().array();
  return sigmoid(z.dot(weights) + bias);
}

LogisticModel fit_logistic(const FeatureTable& features, const std::vector<int>& labels,
                           const LogisticConfig& cfg) {
  const Eigen::MatrixXd x = design(features);
  const Eigen::VectorXd y = label_vector(labels, x.rows());
  const double positives = y.sum();
  if (positives == 0.0 || positives == static_cast<double>(y.size()))
    throw NumericError("logistic regression needs examples of both classes");
  if (cfg.iters < 0 || !(cfg.lr > 0.0) || cfg.l2 < 0.0)
    throw ArgumentError("invalid logistic regression settings");

  LogisticModel m;
  m.feature_mean = x.colwise().mean().transpose();
  m.feature_scale.resize(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double var = (x.col(j).array() - m.feature_mean(j)).square().sum() /
                       static_cast<double>(x.rows());
    m.feature_scale(j) = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  const Eigen::MatrixXd z = standardized(m, x);
  m.weights = Eigen::VectorXd::Zero(x.cols());
  m.bias = 0.0;
  for (int it = 0; it < cfg.iters; ++it) {
    const Eigen::VectorXd g = gradient_at(z, y, m.weights, m.bias, cfg.l2);
    m.weights -= cfg.lr * g.head(x.cols());
    m.bias -= cfg.lr * g(x.cols());
  }
  if (!m.weights.allFinite() || !std::isfinite(m.bias))
    throw NumericError("logistic regression diverged");
  return m;
}

Eigen::VectorXd logistic_gradient(const LogisticModel& model, const FeatureTable& features,
                                  const std::vector<int>& labels, double l2) {
  const Eigen::MatrixXd x = design(features);
  return gradient_at(standardized(model, x), label_vector(labels, x.rows()), model.weights,
                     model.bias, l2);
}

double accuracy(const LogisticModel& model, const FeatureTable& features,
                const std::vector<int>& labels) {
  const Eigen::MatrixXd x = design(features);
  const Eigen::VectorXd y = label_vector(labels, x.rows());
  if (x.rows() == 0) return 0.0;
  std::size_t correct = 0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const int pred = model.probability(x.row(i)) >= 0.5 ? 1 : 0;
    correct += pred == static_cast<int>(y(i)) ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(x.rows());
}

}  // namespace wmg
