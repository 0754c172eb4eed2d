#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "wmg/atlas_geometry.hpp"
#include "wmg/denoiser.hpp"
#include "wmg/feature_table.hpp"
#include "wmg/mask_policy.hpp"
#include "wmg/noise_schedule.hpp"

namespace wmg {

struct ScheduleConfig {
  int steps = kDefaultSteps;
  double beta_start = kDefaultBetaStart;
  double beta_end = kDefaultBetaEnd;
  ScheduleKind kind = ScheduleKind::quadratic;

  NoiseSchedule build() const { return build_schedule(steps, beta_start, beta_end, kind); }
  bool operator==(const ScheduleConfig&) const = default;
};

struct TrainConfig {
  int epochs = 100;
  int batch_size = 16;
  double learning_rate = 0.0005;
  std::uint64_t seed = 0;
  bool standardize = true;

  void validate() const;
};

struct TrainingMeta {
  int epochs = 0;
  double final_loss = 0.0;  // NaN when no step was taken
  std::uint64_t seed = 0;
  int batch_size = 0;
  double learning_rate = 0.0;
  std::string mask_mode;
  std::string mask_polarity;
  double observable_ratio = 0.0;

  bool operator==(const TrainingMeta&) const;
};

/// Self-describing trained model: architecture, schedule, standardization
/// constants, weights and training metadata.
struct Checkpoint {
  static constexpr int kFormatVersion = 1;

  int format_version = kFormatVersion;
  DenoiserConfig denoiser;
  ScheduleConfig schedule;
  std::vector<std::string> cluster_ids;
  bool standardize = true;
  std::vector<float> norm_mean;   // per cluster
  std::vector<float> norm_scale;  // per cluster
  std::vector<float> params;
  TrainingMeta training;

  bool operator==(const Checkpoint&) const;
};

/// Per-cluster mean/std over observed entries, rounded to float. Clusters
/// with zero variance keep scale 1; clusters with no observations use the
/// global mean.
void fit_standardization(const FeatureTable& table, std::vector<float>& mean,
                         std::vector<float>& scale);

/// One self-supervised example: conditioning values, noisy targets and the
/// noise that produced them, all in standardized units (length C each).
struct TrainingExample {
  std::vector<double> cond_values;
  std::vector<double> cond_mask;
  std::vector<double> noisy;
  std::vector<double> target_mask;
  std::vector<double> eps;
  int step = 1;
};

/// Builds the mask pair for `row` (policy), draws t uniformly on [1, T] and
/// Gaussian noise, and noises the true target values. `standardized` holds
/// the row's values in model units.
TrainingExample make_training_example(const FeatureTable& standardized, std::size_t row,
                                      const DistanceMatrix* dist, const MaskPolicyConfig& policy,
                                      const NoiseSchedule& schedule, Rng& rng);

template <class T>
struct StepResult {
  double loss = 0.0;
  std::size_t targets = 0;
  std::vector<T> grad;
};

/// Masked MSE between predicted and true noise over all target entries of
/// the batch, plus its gradient w.r.t. every parameter. The batch is
/// evaluated in fixed micro-batches reduced in order, so the result does not
/// depend on the worker count.
template <class T>
StepResult<T> training_step(const DenoiserConfig& cfg, std::span<const T> params,
                            const std::vector<TrainingExample>& batch);

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<double> epoch_loss;  // mean step loss per epoch
};

using EpochCallback = std::function<void(int epoch, double mean_loss)>;

/// Adam (0.9, 0.999, 1e-8) over epochs x ceil(N / batch_size) steps.
/// `dcfg.cluster_count` is taken from the table. `dist` is required in
/// geometry mode.
TrainResult train(const FeatureTable& table, const MaskPolicyConfig& policy,
                  const DistanceMatrix* dist, DenoiserConfig dcfg, const TrainConfig& tcfg,
                  const ScheduleConfig& schedule = {}, const EpochCallback& on_epoch = {});

/// Ancestral sampling over a batch. x holds x_T at target entries on entry
/// and x_0 on return; entries with target_mask == 0 are never touched.
/// `eps_fn(x, t)` returns the predicted noise for the whole batch. rngs has
/// one stream per batch row; the z draws consume each stream in cluster
/// order at every step t > 1.
using EpsPredictor = std::function<Eigen::MatrixXd(const Eigen::MatrixXd& x, int t)>;
void reverse_diffusion(const NoiseSchedule& schedule, Eigen::MatrixXd& x,
                       const Eigen::MatrixXd& target_mask, const EpsPredictor& eps_fn,
                       std::vector<Rng>& rngs);

/// Fills every missing entry with the per-entry median over n_samples
/// reverse-diffusion draws conditioned on the row's observed entries.
/// Observed entries are copied unchanged.
FeatureTable impute(const Checkpoint& ckpt, const FeatureTable& table, int n_samples,
                    std::uint64_t seed);

constexpr int kDefaultImputeSamples = 10;

}  // namespace wmg
