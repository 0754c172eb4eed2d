#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wmg/atlas_geometry.hpp"
#include "wmg/baselines.hpp"
#include "wmg/diffusion_imputer.hpp"
#include "wmg/evaluation.hpp"
#include "wmg/feature_table.hpp"
#include "wmg/mask_policy.hpp"

namespace wmg {

/// One imputation method in a benchmark: a baseline, or the diffusion
/// imputer under a mask policy.
struct MethodSpec {
  std::string name;
  bool diffusion = false;
  BaselineKind baseline = BaselineKind::mean;
  MaskMode mode = MaskMode::geometry;
  MaskPolarity polarity = MaskPolarity::near;
};

/// Accepts mean, median, zero, chained, diffusion (= diffusion-geometry),
/// diffusion-random, diffusion-geometry, diffusion-geometry-far.
MethodSpec parse_method(const std::string& name);

struct BenchmarkConfig {
  int folds = 5;
  double missing_fraction = 0.2;
  std::uint64_t seed = 0;
  int impute_samples = kDefaultImputeSamples;
  double observable_ratio = 0.8;
  DenoiserConfig denoiser;
  TrainConfig train;
  ScheduleConfig schedule;
  ChainedConfig chained;
  LogisticConfig logistic;

  void validate() const;
};

struct MethodResult {
  std::string name;
  std::vector<double> rmse;   // per fold; NaN when failed or not scored
  std::vector<double> acc;    // per fold
  std::vector<std::string> errors;  // per fold; empty on success
};

struct BenchmarkReport {
  int folds = 0;
  std::vector<MethodResult> methods;  // the last row is the full-data reference
  std::vector<std::size_t> dropped_per_fold;
};

struct Summary {
  double mean = 0.0;
  double std = 0.0;  // sample std; NaN with fewer than 2 values
  std::size_t n = 0;
};

/// Mean and sample standard deviation over the finite entries.
Summary summarize(const std::vector<double>& values);

constexpr const char* kFullDataRow = "full-data";

/// Cross-validated comparison. `observed` is the truth with its actual
/// missingness applied; a further missing_fraction of the observed entries
/// (all rows) is dropped and scored. Per fold each method is fitted on the
/// training rows, imputes every row, and is scored by RMSE at the dropped
/// test entries and by the accuracy of a logistic model fitted on imputed
/// training rows. The full-data row scores accuracy on `truth` itself.
BenchmarkReport run_benchmark(const FeatureTable& truth, const FeatureTable& observed,
                              const std::vector<int>& labels, const DistanceMatrix* dist,
                              const std::vector<MethodSpec>& methods, const BenchmarkConfig& cfg);

std::string format_report_csv(const BenchmarkReport& report);
std::string format_report_text(const BenchmarkReport& report);

}  // namespace wmg
