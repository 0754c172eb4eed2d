#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wmg/atlas_geometry.hpp"
#include "wmg/feature_table.hpp"
#include "wmg/rng.hpp"

namespace wmg {

enum class MaskMode { random, geometry };
enum class MaskPolarity { near, far };

std::string to_string(MaskMode mode);
std::string to_string(MaskPolarity polarity);
MaskMode parse_mask_mode(const std::string& text);
MaskPolarity parse_mask_polarity(const std::string& text);

struct MaskPolicyConfig {
  MaskMode mode = MaskMode::geometry;
  double observable_ratio = 0.8;
  MaskPolarity polarity = MaskPolarity::near;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Split of one subject's observed clusters into conditioning values and
/// self-supervised imputation targets. Index lists are ascending.
struct MaskPair {
  std::vector<std::size_t> cond;
  std::vector<std::size_t> target;
};

/// round(ratio * observed), clamped so both sets keep at least one entry.
std::size_t conditioning_quota(double observable_ratio, std::size_t observed);

MaskPair random_split(const FeatureTable& table, std::size_t row, const MaskPolicyConfig& cfg,
                      Rng& rng);

/// Conditioning set claimed round-robin by the row's actually-missing
/// clusters, each taking its nearest (or farthest) unclaimed observed
/// cluster per pass. Falls back to random_split when nothing is missing.
MaskPair geometry_split(const FeatureTable& table, std::size_t row, const DistanceMatrix& dist,
                        const MaskPolicyConfig& cfg, Rng& rng);

/// Dispatches on cfg.mode. `dist` may be null for random mode.
MaskPair build_mask_pair(const FeatureTable& table, std::size_t row,
                         const DistanceMatrix* dist, const MaskPolicyConfig& cfg, Rng& rng);

/// Per-row masks over the whole table, each row using its own stream
/// (cfg.seed, "mask", row) so rows can be built in any order.
std::vector<MaskPair> build_mask_pairs(const FeatureTable& table, const DistanceMatrix* dist,
                                       const MaskPolicyConfig& cfg);

}  // namespace wmg
