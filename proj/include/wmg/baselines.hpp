#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wmg/feature_table.hpp"

namespace wmg {

enum class BaselineKind { mean, median, zero, chained };

std::string to_string(BaselineKind kind);

/// Replaces missing entries with a per-column statistic of the observed
/// entries in `fit_rows` (all rows when empty). Columns without observed fit
/// entries fall back to the global statistic with a warning.
FeatureTable impute_constant(const FeatureTable& table, BaselineKind kind,
                             const std::vector<std::size_t>& fit_rows = {});

struct ChainedConfig {
  int sweeps = 10;
  double ridge = 1e-3;
  std::uint64_t seed = 0;
};

/// Chained-equations imputation: start from column means, then for each
/// sweep visit the incomplete columns in a seeded random order, regress the
/// column on all others over its observed fit rows (ridge least squares with
/// an unpenalized intercept) and overwrite its missing entries with the
/// predictions.
FeatureTable impute_chained(const FeatureTable& table, const ChainedConfig& cfg,
                            const std::vector<std::size_t>& fit_rows = {});

}  // namespace wmg
