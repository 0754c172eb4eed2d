#include "wmg/baselines.hpp"

#include <algorithm>
#include <numeric>

#include "wmg/error.hpp"
#include "wmg/log.hpp"
#include "wmg/rng.hpp"

namespace wmg {

std::string to_string(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::mean: return "mean";
    case BaselineKind::median: return "median";
    case BaselineKind::zero: return "zero";
    case BaselineKind::chained: return "chained";
  }
  return "unknown";
}

namespace {

std::vector<std::size_t> resolve_rows(const FeatureTable& table,
                                      const std::vector<std::size_t>& fit_rows) {
  if (!fit_rows.empty()) return fit_rows;
  std::vector<std::size_t> all(static_cast<std::size_t>(table.rows()));
  std::iota(all.begin(), all.end(), 0);
  return all;
}

double median_of(std::vector<double> v) {
  const std::size_t n = v.size();
  std::sort(v.begin(), v.end());
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double statistic(std::vector<double> v, BaselineKind kind) {
  if (kind == BaselineKind::median) return median_of(std::move(v));
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

FeatureTable impute_constant(const FeatureTable& table, BaselineKind kind,
                             const std::vector<std::size_t>& fit_rows) {
  if (kind == BaselineKind::chained)
    throw ArgumentError("impute_constant handles mean, median and zero only");
  FeatureTable out = table;
  if (table.missing_count() == 0) return out;
  if (kind == BaselineKind::zero) {
    for (Eigen::Index i = 0; i < table.rows(); ++i)
      for (Eigen::Index j = 0; j < table.cols(); ++j)
        if (!table.is_present(i, j)) out.set_value(i, j, 0.0);
    return out;
  }

  const auto rows = resolve_rows(table, fit_rows);
  std::vector<double> all;
  std::vector<std::vector<double>> per_col(static_cast<std::size_t>(table.cols()));
  for (const auto r : rows)
    for (Eigen::Index j = 0; j < table.cols(); ++j)
      if (table.is_present(static_cast<Eigen::Index>(r), j)) {
        per_col[static_cast<std::size_t>(j)].push_back(table.value(static_cast<Eigen::Index>(r), j));
        all.push_back(table.value(static_cast<Eigen::Index>(r), j));
      }

  double global = 0.0;
  bool have_global = false;
  for (Eigen::Index j = 0; j < table.cols(); ++j) {
    bool needs = false;
    for (Eigen::Index i = 0; i < table.rows() && !needs; ++i) needs = !table.is_present(i, j);
    if (!needs) continue;
    auto& col = per_col[static_cast<std::size_t>(j)];
    double fill = 0.0;
    if (col.empty()) {
      if (!have_global) {
        if (all.empty()) throw ArgumentError("no observed fit entries to compute a statistic");
        global = statistic(all, kind);
        have_global = true;
      }
      log::warn("column '", table.cluster_ids()[static_cast<std::size_t>(j)],
                "' has no observed fit entries; using the global ", to_string(kind));
      fill = global;
    } else {
      fill = statistic(std::move(col), kind);
    }
    for (Eigen::Index i = 0; i < table.rows(); ++i)
      if (!table.is_present(i, j)) out.set_value(i, j, fill);
  }
  return out;
}

FeatureTable impute_chained(const FeatureTable& table, const ChainedConfig& cfg,
                            const std::vector<std::size_t>& fit_rows) {
  if (table.cols() < 2) throw ArgumentError("chained imputation needs at least 2 columns");
  if (cfg.sweeps < 1) throw ArgumentError("chained imputation needs at least 1 sweep");
  if (cfg.ridge < 0.0) throw ArgumentError("ridge penalty must be non-negative");
  if (table.missing_count() == 0) return table;

  const auto rows = resolve_rows(table, fit_rows);
  FeatureTable init = impute_constant(table, BaselineKind::mean, rows);
  Eigen::MatrixXd cur = init.values();
  const Eigen::Index n_cols = table.cols();
  const Eigen::Index p = n_cols - 1;

  std::vector<std::size_t> incomplete;
  for (Eigen::Index j = 0; j < n_cols; ++j)
    if (!table.present().col(j).all()) incomplete.push_back(static_cast<std::size_t>(j));

  auto rng = Rng::stream(cfg.seed, "chained");
  for (int sweep = 0; sweep < cfg.sweeps; ++sweep) {
    std::vector<std::size_t> order = incomplete;
    rng.shuffle(order);
    for (const auto col : order) {
      const auto j = static_cast<Eigen::Index>(col);
      std::vector<Eigen::Index> fit;
      for (const auto r : rows)
        if (table.is_present(static_cast<Eigen::Index>(r), j)) fit.push_back(static_cast<Eigen::Index>(r));
      if (fit.empty()) continue;

      auto predictors = [&](Eigen::Index r) {
        Eigen::RowVectorXd x(p);
        x.head(j) = cur.row(r).head(j);
        x.tail(p - j) = cur.row(r).tail(p - j);
        return x;
      };
      const auto nf = static_cast<Eigen::Index>(fit.size());
      Eigen::MatrixXd x(nf, p);
      Eigen::VectorXd y(nf);
      for (Eigen::Index k = 0; k < nf; ++k) {
        x.row(k) = predictors(fit[static_cast<std::size_t>(k)]);
        y(k) = cur(fit[static_cast<std::size_t>(k)], j);
      }
      const Eigen::RowVectorXd x_mean = x.colwise().mean();
      const double y_mean = y.mean();
      x.rowwise() -= x_mean;
      y.array() -= y_mean;
      Eigen::MatrixXd gram = x.transpose() * x;
      gram.diagonal().array() += cfg.ridge;
      Eigen::LLT<Eigen::MatrixXd> llt(gram);
      if (llt.info() != Eigen::Success)
        throw NumericError("singular normal equations for column '" +
                           table.cluster_ids()[col] + "'; use a ridge penalty > 0");
      const Eigen::VectorXd beta = llt.solve(x.transpose() * y);
      if (!beta.allFinite())
        throw NumericError("non-finite regression for column '" + table.cluster_ids()[col] +
                           "'; use a ridge penalty > 0");
      for (Eigen::Index r = 0; r < table.rows(); ++r)
        if (!table.is_present(r, j)) cur(r, j) = y_mean + (predictors(r) - x_mean).dot(beta);
    }
  }

  FeatureTable out = table;
  for (Eigen::Index i = 0; i < table.rows(); ++i)
    for (Eigen::Index j = 0; j < n_cols; ++j)
      if (!table.is_present(i, j)) out.set_value(i, j, cur(i, j));
  return out;
}

}  // namespace wmg
