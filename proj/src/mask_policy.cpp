#include "wmg/mask_policy.hpp"

#include <algorithm>
#include <cmath>

#include "wmg/error.hpp"
#include "wmg/parallel.hpp"

namespace wmg {

std::string to_string(MaskMode mode) { return mode == MaskMode::random ? "random" : "geometry"; }

std::string to_string(MaskPolarity polarity) {
  return polarity == MaskPolarity::near ? "near" : "far";
}

MaskMode parse_mask_mode(const std::string& text) {
  if (text == "random") return MaskMode::random;
  if (text == "geometry") return MaskMode::geometry;
  throw ConfigError("unknown mask mode '" + text + "' (expected random|geometry)");
}

MaskPolarity parse_mask_polarity(const std::string& text) {
  if (text == "near") return MaskPolarity::near;
  if (text == "far") return MaskPolarity::far;
  throw ConfigError("unknown mask polarity '" + text + "' (expected near|far)");
}

void MaskPolicyConfig::validate() const {
  if (!(observable_ratio > 0.0 && observable_ratio < 1.0))
    throw ConfigError("observable_ratio must lie strictly between 0 and 1");
}

std::size_t conditioning_quota(double observable_ratio, std::size_t observed) {
  if (observed < 2) throw PolicyError("need at least 2 observed entries to split a row");
  auto quota =
      static_cast<std::size_t>(std::round(observable_ratio * static_cast<double>(observed)));
  return std::clamp<std::size_t>(quota, 1, observed - 1);
}

namespace {

void split_row(const FeatureTable& table, std::size_t row, std::vector<std::size_t>& observed,
               std::vector<std::size_t>& missing) {
  if (row >= static_cast<std::size_t>(table.rows())) throw ArgumentError("row index out of range");
  const auto r = static_cast<Eigen::Index>(row);
  for (Eigen::Index j = 0; j < table.cols(); ++j)
    (table.is_present(r, j) ? observed : missing).push_back(static_cast<std::size_t>(j));
}

MaskPair from_flags(const std::vector<std::size_t>& observed, const std::vector<char>& in_cond) {
  MaskPair out;
  for (const auto c : observed) (in_cond[c] != 0 ? out.cond : out.target).push_back(c);
  return out;
}

}  // namespace

MaskPair random_split(const FeatureTable& table, std::size_t row, const MaskPolicyConfig& cfg,
                      Rng& rng) {
  cfg.validate();
  std::vector<std::size_t> observed, missing;
  split_row(table, row, observed, missing);
  if (observed.size() < 2)
    throw PolicyError("row " + std::to_string(row) + " has fewer than 2 observed entries");
  const std::size_t quota = conditioning_quota(cfg.observable_ratio, observed.size());

  std::vector<std::size_t> order = observed;
  rng.partial_shuffle(order, quota);
  std::vector<char> in_cond(static_cast<std::size_t>(table.cols()), 0);
  for (std::size_t i = 0; i < quota; ++i) in_cond[order[i]] = 1;
  return from_flags(observed, in_cond);
}

MaskPair geometry_split(const FeatureTable& table, std::size_t row, const DistanceMatrix& dist,
                        const MaskPolicyConfig& cfg, Rng& rng) {
  cfg.validate();
  if (dist.size() != static_cast<std::size_t>(table.cols()))
    throw ArgumentError("distance matrix does not cover the table's clusters");
  std::vector<std::size_t> observed, missing;
  split_row(table, row, observed, missing);
  if (observed.size() < 2)
    throw PolicyError("row " + std::to_string(row) + " has fewer than 2 observed entries");
  if (missing.empty()) return random_split(table, row, cfg, rng);

  const std::size_t quota = conditioning_quota(cfg.observable_ratio, observed.size());
  const RankOrder order =
      cfg.polarity == MaskPolarity::near ? RankOrder::nearest_first : RankOrder::farthest_first;

  std::vector<std::vector<std::size_t>> ranked;
  ranked.reserve(missing.size());
  for (const auto m : missing) ranked.push_back(rank_by_distance(dist, {m}, observed, order));
  std::vector<std::size_t> cursor(missing.size(), 0);

  std::vector<char> in_cond(static_cast<std::size_t>(table.cols()), 0);
  std::size_t claimed = 0;
  while (claimed < quota) {
    for (std::size_t k = 0; k < missing.size() && claimed < quota; ++k) {
      auto& pos = cursor[k];
      while (pos < ranked[k].size() && in_cond[ranked[k][pos]] != 0) ++pos;
      if (pos == ranked[k].size()) continue;
      in_cond[ranked[k][pos]] = 1;
      ++claimed;
    }
  }
  return from_flags(observed, in_cond);
}

MaskPair build_mask_pair(const FeatureTable& table, std::size_t row, const DistanceMatrix* dist,
                         const MaskPolicyConfig& cfg, Rng& rng) {
  if (cfg.mode == MaskMode::random) return random_split(table, row, cfg, rng);
  if (dist == nullptr) throw ArgumentError("geometry mask mode needs a distance matrix");
  return geometry_split(table, row, *dist, cfg, rng);
}

std::vector<MaskPair> build_mask_pairs(const FeatureTable& table, const DistanceMatrix* dist,
                                       const MaskPolicyConfig& cfg) {
  std::vector<MaskPair> out(static_cast<std::size_t>(table.rows()));
  parallel_for(out.size(), [&](std::size_t r) {
    auto rng = Rng::stream(cfg.seed, "mask", r);
    out[r] = build_mask_pair(table, r, dist, cfg, rng);
  });
  return out;
}

}  // namespace wmg
