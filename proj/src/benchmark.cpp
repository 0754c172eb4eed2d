#include "wmg/benchmark.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "wmg/error.hpp"
#include "wmg/log.hpp"
#include "wmg/rng.hpp"

namespace wmg {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

FeatureTable run_method(const MethodSpec& m, const FeatureTable& input,
                        const std::vector<std::size_t>& train_rows, const DistanceMatrix* dist,
                        const BenchmarkConfig& cfg, std::size_t fold) {
  if (!m.diffusion) {
    if (m.baseline == BaselineKind::chained) {
      ChainedConfig cc = cfg.chained;
      cc.seed = derive_seed(cfg.seed, "bench-chained", fold);
      return impute_chained(input, cc, train_rows);
    }
    return impute_constant(input, m.baseline, train_rows);
  }
  MaskPolicyConfig policy;
  policy.mode = m.mode;
  policy.polarity = m.polarity;
  policy.observable_ratio = cfg.observable_ratio;
  policy.seed = derive_seed(cfg.seed, "bench-mask", fold);
  TrainConfig tc = cfg.train;
  tc.seed = derive_seed(cfg.seed, "bench-train", fold);
  const auto result = train(input.select_rows(train_rows), policy,
                            m.mode == MaskMode::geometry ? dist : nullptr, cfg.denoiser, tc,
                            cfg.schedule);
  return impute(result.checkpoint, input, cfg.impute_samples,
                derive_seed(cfg.seed, "bench-impute", fold));
}

std::vector<int> pick(const std::vector<int>& labels, const std::vector<std::size_t>& rows) {
  std::vector<int> out;
  out.reserve(rows.size());
  for (const auto r : rows) out.push_back(labels[r]);
  return out;
}

double downstream_accuracy(const FeatureTable& imputed, const std::vector<int>& labels,
                           const FoldSplit& split, const LogisticConfig& cfg) {
  const auto model = fit_logistic(imputed.select_rows(split.train_rows),
                                  pick(labels, split.train_rows), cfg);
  return accuracy(model, imputed.select_rows(split.test_rows), pick(labels, split.test_rows));
}

std::string fmt(double v) {
  if (!std::isfinite(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string fmt4(double v) {
  if (!std::isfinite(v)) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

MethodSpec parse_method(const std::string& name) {
  MethodSpec m;
  m.name = name;
  if (name == "mean") m.baseline = BaselineKind::mean;
  else if (name == "median") m.baseline = BaselineKind::median;
  else if (name == "zero") m.baseline = BaselineKind::zero;
  else if (name == "chained") m.baseline = BaselineKind::chained;
  else if (name == "diffusion" || name == "diffusion-geometry") {
    m.diffusion = true;
    m.name = "diffusion-geometry";
  } else if (name == "diffusion-random") {
    m.diffusion = true;
    m.mode = MaskMode::random;
  } else if (name == "diffusion-geometry-far") {
    m.diffusion = true;
    m.polarity = MaskPolarity::far;
  } else {
    throw ConfigError("unknown method '" + name +
                      "' (expected mean, median, zero, chained, diffusion, diffusion-random, "
                      "diffusion-geometry, diffusion-geometry-far)");
  }
  return m;
}

void BenchmarkConfig::validate() const {
  if (folds < 2) throw ConfigError("folds must be >= 2");
  if (!(missing_fraction > 0.0 && missing_fraction < 1.0))
    throw ConfigError("missing_fraction must lie in (0, 1)");
  if (impute_samples < 1) throw ConfigError("impute_samples must be >= 1");
  if (!(observable_ratio > 0.0 && observable_ratio < 1.0))
    throw ConfigError("observable_ratio must lie in (0, 1)");
  if (chained.sweeps < 1 || chained.ridge < 0.0)
    throw ConfigError("chained needs sweeps >= 1 and ridge >= 0");
  if (logistic.iters < 1 || !(logistic.lr > 0.0) || logistic.l2 < 0.0)
    throw ConfigError("logistic needs iters >= 1, lr > 0, l2 >= 0");
  train.validate();
}

Summary summarize(const std::vector<double>& values) {
  Summary s;
  double sum = 0.0;
  for (const double v : values)
    if (std::isfinite(v)) {
      sum += v;
      ++s.n;
    }
  if (s.n == 0) return {kNaN, kNaN, 0};
  s.mean = sum / static_cast<double>(s.n);
  if (s.n < 2) {
    s.std = kNaN;
    return s;
  }
  double ss = 0.0;
  for (const double v : values)
    if (std::isfinite(v)) ss += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(ss / static_cast<double>(s.n - 1));
  return s;
}

BenchmarkReport run_benchmark(const FeatureTable& truth, const FeatureTable& observed,
                              const std::vector<int>& labels, const DistanceMatrix* dist,
                              const std::vector<MethodSpec>& methods, const BenchmarkConfig& cfg) {
  cfg.validate();
  if (methods.empty()) throw ArgumentError("benchmark needs at least one method");
  if (truth.rows() != observed.rows() || truth.cols() != observed.cols() || truth.subject_ids() != observed.subject_ids() ||
      truth.cluster_ids() != observed.cluster_ids())
    throw ArgumentError("truth and observed tables must share subjects and clusters");
  if (truth.missing_count() != 0) throw ArgumentError("truth table must be fully observed");
  if (labels.size() != static_cast<std::size_t>(truth.rows()))
    throw ArgumentError("label count does not match the table");
  for (const auto& m : methods)
    if (m.diffusion && m.mode == MaskMode::geometry && dist == nullptr)
      throw ArgumentError("method '" + m.name + "' needs a distance matrix");

  const auto drop = inject_synthetic_missing(observed, cfg.missing_fraction,
                                             derive_seed(cfg.seed, "bench-drop"));
  const auto splits = split_folds(truth, static_cast<std::size_t>(cfg.folds),
                                  derive_seed(cfg.seed, "bench-folds"));

  BenchmarkReport report;
  report.folds = cfg.folds;
  for (const auto& m : methods)
    report.methods.push_back({m.name, std::vector<double>(splits.size(), kNaN),
                              std::vector<double>(splits.size(), kNaN),
                              std::vector<std::string>(splits.size())});
  MethodResult full{kFullDataRow, std::vector<double>(splits.size(), kNaN),
                    std::vector<double>(splits.size(), kNaN),
                    std::vector<std::string>(splits.size())};

  for (std::size_t f = 0; f < splits.size(); ++f) {
    const auto& split = splits[f];
    EntryMask at;
    at.bits = BoolMatrix::Constant(truth.rows(), truth.cols(), false);
    for (const auto r : split.test_rows)
      at.bits.row(static_cast<Eigen::Index>(r)) = drop.dropped.bits.row(static_cast<Eigen::Index>(r));
    report.dropped_per_fold.push_back(at.count());

    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
      auto& res = report.methods[mi];
      try {
        log::info("fold " + std::to_string(f + 1) + "/" + std::to_string(splits.size()) +
                  ": " + methods[mi].name);
        const auto imputed = run_method(methods[mi], drop.table, split.train_rows, dist, cfg, f);
        if (at.count() > 0) res.rmse[f] = rmse(imputed, truth, at);
        res.acc[f] = downstream_accuracy(imputed, labels, split, cfg.logistic);
      } catch (const std::exception& e) {
        res.rmse[f] = kNaN;
        res.acc[f] = kNaN;
        res.errors[f] = e.what();
        log::warn("fold " + std::to_string(f + 1) + " method " + methods[mi].name +
                  " failed: " + e.what());
      }
    }
    try {
      full.acc[f] = downstream_accuracy(truth, labels, split, cfg.logistic);
    } catch (const std::exception& e) {
      full.errors[f] = e.what();
    }
  }
  report.methods.push_back(std::move(full));
  return report;
}

std::string format_report_csv(const BenchmarkReport& report) {
  std::ostringstream out;
  out << "method";
  for (int f = 1; f <= report.folds; ++f) out << ",rmse_fold" << f;
  out << ",rmse_mean,rmse_std";
  for (int f = 1; f <= report.folds; ++f) out << ",acc_fold" << f;
  out << ",acc_mean,acc_std,failed_folds\n";
  for (const auto& m : report.methods) {
    out << m.name;
    for (const double v : m.rmse) out << ',' << fmt(v);
    const auto r = summarize(m.rmse);
    out << ',' << fmt(r.mean) << ',' << fmt(r.std);
    for (const double v : m.acc) out << ',' << fmt(v);
    const auto a = summarize(m.acc);
    out << ',' << fmt(a.mean) << ',' << fmt(a.std);
    int failed = 0;
    for (const auto& e : m.errors) failed += e.empty() ? 0 : 1;
    out << ',' << failed << '\n';
  }
  return out.str();
}

std::string format_report_text(const BenchmarkReport& report) {
  std::size_t width = 6;
  for (const auto& m : report.methods) width = std::max(width, m.name.size());
  auto cell = [](const Summary& s) {
    if (s.n == 0) return std::string("-");
    return fmt4(s.mean) + " ± " + fmt4(s.std);
  };
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s  %-17s  %-17s\n", static_cast<int>(width), "Method",
                "RMSE", "ACC");
  out << buf;
  for (const auto& m : report.methods) {
    std::snprintf(buf, sizeof buf, "%-*s  %-17s  %-17s\n", static_cast<int>(width),
                  m.name.c_str(), cell(summarize(m.rmse)).c_str(), cell(summarize(m.acc)).c_str());
    out << buf;
  }
  out << "(" << report.folds << " folds, mean ± sample std)\n";
  return out.str();
}

}  // namespace wmg
