#pragma once

#include <cstdint>
#include <vector>

#include "wmg/atlas_geometry.hpp"
#include "wmg/feature_table.hpp"

namespace wmg {

/// Synthetic stand-in for a tractography feature dataset.
struct SynthConfig {
  int n_subjects = 500;
  int n_clusters = 60;
  int streamlines_per_cluster = 10;
  int points_per_streamline = 15;
  double spatial_scale = 100.0;     // cube side, mm
  double value_smoothness = 25.0;   // correlation length, mm
  double noise_std = 0.09;
  double noise_nugget = 0.1;        // share of noise variance without spatial correlation
  int n_fragile_clusters = 6;
  double fragile_missing_rate = 0.7;
  double background_missing_rate = 0.01;
  int label_sparsity = 6;
  double label_strength = 4.0;      // logistic slope on the label score
  std::uint64_t seed = 0;

  void validate() const;
};

/// Cluster centroids uniform in the cube; each cluster is a bundle of gently
/// bent quadratic arcs sharing a random orientation, jittered per streamline.
Atlas gen_atlas(const SynthConfig& cfg);

/// Mean point of every cluster, in atlas order.
std::vector<Point3> cluster_centroids(const Atlas& atlas);

struct SyntheticFeatures {
  FeatureTable truth;  // fully observed
  LabelSet labels;
  std::vector<std::size_t> label_clusters;
};

/// v[s][c] = clamp01(0.5 + a_s f(centroid_c) + eta_sc): f is a shared
/// Gaussian-kernel mixture field (unit spread across clusters), a_s ~
/// N(0.15, 0.05^2), and eta_s is a per-subject Gaussian field with marginal
/// std noise_std whose correlation decays with centroid distance (length
/// value_smoothness) plus a nugget share. Labels are Bernoulli draws from a
/// logistic of the standardized mean of label_sparsity random clusters.
SyntheticFeatures gen_features(const Atlas& atlas, const SynthConfig& cfg);

/// Clusters that fail often, chosen from the seed.
std::vector<std::size_t> fragile_clusters(const SynthConfig& cfg, std::size_t n_clusters);

/// Fragile entries go missing with fragile_missing_rate, all others with
/// background_missing_rate, independently.
FeatureTable inject_structured_missing(const FeatureTable& truth, const SynthConfig& cfg);

struct SyntheticDataset {
  Atlas atlas;
  FeatureTable truth;
  FeatureTable corrupted;
  LabelSet labels;
  std::vector<std::size_t> fragile;
};

SyntheticDataset generate_dataset(const SynthConfig& cfg);

}  // namespace wmg
