#include "wmg/diffusion_imputer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "wmg/log.hpp"
#include "wmg/parallel.hpp"

namespace wmg {

namespace {

// Fixed row grouping for gradient evaluation and sampling. Results depend on
// these sizes, never on the worker count.
constexpr std::size_t kMicroBatch = 4;
constexpr std::size_t kSampleChunk = 32;

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

bool same_double(double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); }

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 0) throw ArgumentError("epochs must be non-negative");
  if (batch_size <= 0) throw ArgumentError("batch_size must be positive");
  if (!(learning_rate > 0.0)) throw ArgumentError("learning_rate must be positive");
}

bool TrainingMeta::operator==(const TrainingMeta& o) const {
  return epochs == o.epochs && same_double(final_loss, o.final_loss) && seed == o.seed &&
         batch_size == o.batch_size && learning_rate == o.learning_rate &&
         mask_mode == o.mask_mode && mask_polarity == o.mask_polarity &&
         observable_ratio == o.observable_ratio;
}

bool Checkpoint::operator==(const Checkpoint& o) const {
  return format_version == o.format_version && denoiser == o.denoiser &&
         schedule == o.schedule && cluster_ids == o.cluster_ids &&
         standardize == o.standardize && norm_mean == o.norm_mean &&
         norm_scale == o.norm_scale && params == o.params && training == o.training;
}

void fit_standardization(const FeatureTable& table, std::vector<float>& mean,
                         std::vector<float>& scale) {
  const auto c = static_cast<std::size_t>(table.cols());
  mean.assign(c, 0.0f);
  scale.assign(c, 1.0f);
  double global_sum = 0.0;
  std::size_t global_n = 0;
  for (Eigen::Index i = 0; i < table.rows(); ++i)
    for (Eigen::Index j = 0; j < table.cols(); ++j)
      if (table.is_present(i, j)) {
        global_sum += table.value(i, j);
        ++global_n;
      }
  const double global_mean = global_n > 0 ? global_sum / static_cast<double>(global_n) : 0.0;

  for (Eigen::Index j = 0; j < table.cols(); ++j) {
    double sum = 0.0;
    std::size_t n = 0;
    for (Eigen::Index i = 0; i < table.rows(); ++i)
      if (table.is_present(i, j)) {
        sum += table.value(i, j);
        ++n;
      }
    if (n == 0) {
      mean[static_cast<std::size_t>(j)] = static_cast<float>(global_mean);
      continue;
    }
    const double mu = sum / static_cast<double>(n);
    double ss = 0.0;
    for (Eigen::Index i = 0; i < table.rows(); ++i)
      if (table.is_present(i, j)) ss += (table.value(i, j) - mu) * (table.value(i, j) - mu);
    const double sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
    mean[static_cast<std::size_t>(j)] = static_cast<float>(mu);
    scale[static_cast<std::size_t>(j)] = sd > 0.0 ? static_cast<float>(sd) : 1.0f;
  }
}

namespace {

FeatureTable standardize_table(const FeatureTable& table, const std::vector<float>& mean,
                               const std::vector<float>& scale) {
  FeatureTable out = table;
  for (Eigen::Index i = 0; i < table.rows(); ++i)
    for (Eigen::Index j = 0; j < table.cols(); ++j)
      if (table.is_present(i, j)) {
        const auto k = static_cast<std::size_t>(j);
        out.set_value(i, j, (table.value(i, j) - mean[k]) / scale[k]);
      }
  return out;
}

}  // namespace

TrainingExample make_training_example(const FeatureTable& standardized, std::size_t row,
                                      const DistanceMatrix* dist, const MaskPolicyConfig& policy,
                                      const NoiseSchedule& schedule, Rng& rng) {
  const MaskPair masks = build_mask_pair(standardized, row, dist, policy, rng);
  const auto c = static_cast<std::size_t>(standardized.cols());
  const auto r = static_cast<Eigen::Index>(row);
  TrainingExample ex;
  ex.cond_values.assign(c, 0.0);
  ex.cond_mask.assign(c, 0.0);
  ex.noisy.assign(c, 0.0);
  ex.target_mask.assign(c, 0.0);
  ex.eps.assign(c, 0.0);
  ex.step = 1 + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(schedule.steps())));
  for (const auto j : masks.cond) {
    ex.cond_values[j] = standardized.value(r, static_cast<Eigen::Index>(j));
    ex.cond_mask[j] = 1.0;
  }
  const double a = std::sqrt(schedule.alpha_bar(ex.step));
  const double b = std::sqrt(1.0 - schedule.alpha_bar(ex.step));
  for (const auto j : masks.target) {
    ex.eps[j] = rng.normal();
    ex.noisy[j] = a * standardized.value(r, static_cast<Eigen::Index>(j)) + b * ex.eps[j];
    ex.target_mask[j] = 1.0;
  }
  return ex;
}

template <class T>
StepResult<T> training_step(const DenoiserConfig& cfg, std::span<const T> params,
                            const std::vector<TrainingExample>& batch) {
  using Mat = typename Denoiser<T>::Mat;
  const ParameterLayout layout(cfg);
  if (params.size() != layout.total_size())
    throw ArgumentError("parameter vector does not match the denoiser layout");
  const auto c = static_cast<Eigen::Index>(cfg.cluster_count);

  std::size_t n_targets = 0;
  for (const auto& ex : batch) {
    if (static_cast<Eigen::Index>(ex.eps.size()) != c)
      throw ArgumentError("training example length does not match the cluster count");
    for (const double m : ex.target_mask) n_targets += m != 0.0 ? 1 : 0;
  }
  if (n_targets == 0) throw ArgumentError("training batch has no target entries");
  const T norm = T(1) / static_cast<T>(n_targets);

  const std::size_t n_micro = (batch.size() + kMicroBatch - 1) / kMicroBatch;
  std::vector<double> sq_sums(n_micro, 0.0);
  std::vector<std::vector<T>> grads(n_micro);
  parallel_for(n_micro, [&](std::size_t mb) {
    const std::size_t lo = mb * kMicroBatch;
    const std::size_t hi = std::min(batch.size(), lo + kMicroBatch);
    const auto rows = static_cast<Eigen::Index>(hi - lo);
    typename Denoiser<T>::Input in{Mat(rows, c), Mat(rows, c), Mat(rows, c), {}};
    Mat eps(rows, c), tmask(rows, c);
    for (std::size_t k = lo; k < hi; ++k) {
      const auto r = static_cast<Eigen::Index>(k - lo);
      const auto& ex = batch[k];
      for (Eigen::Index j = 0; j < c; ++j) {
        const auto jj = static_cast<std::size_t>(j);
        in.cond_values(r, j) = static_cast<T>(ex.cond_values[jj]);
        in.cond_mask(r, j) = static_cast<T>(ex.cond_mask[jj]);
        in.noisy(r, j) = static_cast<T>(ex.noisy[jj]);
        eps(r, j) = static_cast<T>(ex.eps[jj]);
        tmask(r, j) = static_cast<T>(ex.target_mask[jj]);
      }
      in.steps.push_back(ex.step);
    }
    Denoiser<T> net(cfg);
    const Mat out = net.forward(params, in);
    const Mat resid = (out - eps).cwiseProduct(tmask);
    double sq = 0.0;
    for (Eigen::Index i = 0; i < resid.size(); ++i)
      sq += static_cast<double>(resid(i)) * static_cast<double>(resid(i));
    sq_sums[mb] = sq;
    grads[mb].assign(layout.total_size(), T(0));
    net.backward(params, (T(2) * norm) * resid, grads[mb]);
  });

  StepResult<T> result;
  result.targets = n_targets;
  result.grad.assign(layout.total_size(), T(0));
  double total = 0.0;
  for (std::size_t mb = 0; mb < n_micro; ++mb) {
    total += sq_sums[mb];
    for (std::size_t i = 0; i < result.grad.size(); ++i) result.grad[i] += grads[mb][i];
  }
  result.loss = total / static_cast<double>(n_targets);
  if (!std::isfinite(result.loss))
    throw NumericError("non-finite training loss (" + std::to_string(result.loss) + ") over " +
                       std::to_string(batch.size()) + " rows and " + std::to_string(n_targets) +
                       " targets");
  return result;
}

template StepResult<float> training_step<float>(const DenoiserConfig&, std::span<const float>,
                                                const std::vector<TrainingExample>&);
template StepResult<double> training_step<double>(const DenoiserConfig&, std::span<const double>,
                                                  const std::vector<TrainingExample>&);

TrainResult train(const FeatureTable& table, const MaskPolicyConfig& policy,
                  const DistanceMatrix* dist, DenoiserConfig dcfg, const TrainConfig& tcfg,
                  const ScheduleConfig& schedule_cfg, const EpochCallback& on_epoch) {
  tcfg.validate();
  policy.validate();
  dcfg.cluster_count = static_cast<int>(table.cols());
  dcfg.validate();
  if (policy.mode == MaskMode::geometry) {
    if (dist == nullptr) throw ArgumentError("geometry mask mode needs a distance matrix");
    if (dist->size() != static_cast<std::size_t>(table.cols()))
      throw ArgumentError("distance matrix does not cover the table's clusters");
  }
  const NoiseSchedule schedule = schedule_cfg.build();

  std::vector<std::size_t> rows;
  for (Eigen::Index i = 0; i < table.rows(); ++i)
    if (table.observed_in_row(i) >= 2) rows.push_back(static_cast<std::size_t>(i));
  if (rows.size() < static_cast<std::size_t>(table.rows()))
    log::warn("skipping ", static_cast<std::size_t>(table.rows()) - rows.size(),
              " training rows with fewer than 2 observed entries");
  if (rows.size() < static_cast<std::size_t>(tcfg.batch_size))
    throw ArgumentError("training needs at least batch_size (" + std::to_string(tcfg.batch_size) +
                        ") usable rows, found " + std::to_string(rows.size()));

  TrainResult result;
  Checkpoint& ckpt = result.checkpoint;
  ckpt.denoiser = dcfg;
  ckpt.schedule = schedule_cfg;
  ckpt.cluster_ids = table.cluster_ids();
  ckpt.standardize = tcfg.standardize;
  if (tcfg.standardize) {
    fit_standardization(table, ckpt.norm_mean, ckpt.norm_scale);
  } else {
    ckpt.norm_mean.assign(static_cast<std::size_t>(table.cols()), 0.0f);
    ckpt.norm_scale.assign(static_cast<std::size_t>(table.cols()), 1.0f);
  }
  ckpt.params = init_denoiser_params(dcfg, derive_seed(tcfg.seed, "init"));
  ckpt.training.seed = tcfg.seed;
  ckpt.training.batch_size = tcfg.batch_size;
  ckpt.training.learning_rate = tcfg.learning_rate;
  ckpt.training.mask_mode = to_string(policy.mode);
  ckpt.training.mask_polarity = to_string(policy.polarity);
  ckpt.training.observable_ratio = policy.observable_ratio;
  ckpt.training.final_loss = std::numeric_limits<double>::quiet_NaN();

  const FeatureTable model_units = standardize_table(table, ckpt.norm_mean, ckpt.norm_scale);

  std::vector<double> m(ckpt.params.size(), 0.0), v(ckpt.params.size(), 0.0);
  const std::size_t batch_size = static_cast<std::size_t>(tcfg.batch_size);
  const std::size_t steps_per_epoch = (rows.size() + batch_size - 1) / batch_size;
  std::uint64_t global_step = 0;
  for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
    std::vector<std::size_t> order = rows;
    auto shuffle_rng = Rng::stream(tcfg.seed, "epoch-order", static_cast<std::uint64_t>(epoch));
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t s = 0; s < steps_per_epoch; ++s) {
      const std::size_t lo = s * batch_size;
      const std::size_t hi = std::min(order.size(), lo + batch_size);
      std::vector<TrainingExample> batch(hi - lo);
      parallel_for(batch.size(), [&](std::size_t k) {
        auto rng = Rng::stream(tcfg.seed, "train-example", global_step * batch_size + k);
        batch[k] = make_training_example(model_units, order[lo + k], dist, policy, schedule,
                                         rng);
      });
      const auto step = training_step<float>(dcfg, ckpt.params, batch);
      ++global_step;
      const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(global_step));
      const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(global_step));
      for (std::size_t i = 0; i < ckpt.params.size(); ++i) {
        const double g = step.grad[i];
        m[i] = kAdamBeta1 * m[i] + (1.0 - kAdamBeta1) * g;
        v[i] = kAdamBeta2 * v[i] + (1.0 - kAdamBeta2) * g * g;
        const double update = tcfg.learning_rate * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + kAdamEps);
        ckpt.params[i] = static_cast<float>(ckpt.params[i] - update);
      }
      loss_sum += step.loss;
    }
    const double mean_loss = loss_sum / static_cast<double>(steps_per_epoch);
    result.epoch_loss.push_back(mean_loss);
    ckpt.training.epochs = epoch + 1;
    ckpt.training.final_loss = mean_loss;
    log::debug("epoch ", epoch + 1, "/", tcfg.epochs, " loss ", mean_loss);
    if (on_epoch) on_epoch(epoch + 1, mean_loss);
  }
  return result;
}

void reverse_diffusion(const NoiseSchedule& schedule, Eigen::MatrixXd& x,
                       const Eigen::MatrixXd& target_mask, const EpsPredictor& eps_fn,
                       std::vector<Rng>& rngs) {
  if (target_mask.rows() != x.rows() || target_mask.cols() != x.cols())
    throw ArgumentError("target mask shape does not match the sample batch");
  if (static_cast<Eigen::Index>(rngs.size()) != x.rows())
    throw ArgumentError("reverse_diffusion needs one random stream per batch row");
  for (int t = schedule.steps(); t >= 1; --t) {
    const Eigen::MatrixXd eps = eps_fn(x, t);
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      for (Eigen::Index j = 0; j < x.cols(); ++j) {
        if (target_mask(r, j) == 0.0) continue;
        const double z = t > 1 ? rngs[static_cast<std::size_t>(r)].normal() : 0.0;
        x(r, j) = reverse_step(x(r, j), eps(r, j), t, z, schedule);
      }
    }
  }
}

FeatureTable impute(const Checkpoint& ckpt, const FeatureTable& table, int n_samples,
                    std::uint64_t seed) {
  if (n_samples < 1) throw ArgumentError("n_samples must be at least 1");
  const auto c = static_cast<std::size_t>(ckpt.denoiser.cluster_count);
  if (static_cast<std::size_t>(table.cols()) != c)
    throw ArgumentError("table has " + std::to_string(table.cols()) +
                        " clusters, checkpoint expects " + std::to_string(c));
  if (!ckpt.cluster_ids.empty() && ckpt.cluster_ids != table.cluster_ids())
    throw ArgumentError("table cluster order does not match the checkpoint");
  const NoiseSchedule schedule = ckpt.schedule.build();

  std::vector<std::size_t> rows;
  std::size_t empty_rows = 0;
  for (Eigen::Index i = 0; i < table.rows(); ++i) {
    if (table.observed_in_row(i) == static_cast<std::size_t>(c)) continue;
    rows.push_back(static_cast<std::size_t>(i));
    if (table.observed_in_row(i) == 0) ++empty_rows;
  }
  if (empty_rows > 0)
    log::warn(empty_rows, " rows have no observed entries and are imputed unconditionally");

  FeatureTable out = table;
  if (rows.empty()) return out;

  const auto samples = static_cast<std::size_t>(n_samples);
  const std::size_t n_virtual = rows.size() * samples;
  // draws[v * c + j]: imputed value of virtual row v at cluster j.
  std::vector<double> draws(n_virtual * c, 0.0);
  const std::size_t n_chunks = (n_virtual + kSampleChunk - 1) / kSampleChunk;
  const std::span<const float> params(ckpt.params);

  parallel_for(n_chunks, [&](std::size_t chunk) {
    const std::size_t lo = chunk * kSampleChunk;
    const std::size_t hi = std::min(n_virtual, lo + kSampleChunk);
    const auto b = static_cast<Eigen::Index>(hi - lo);
    const auto cc = static_cast<Eigen::Index>(c);
    Eigen::MatrixXd cond = Eigen::MatrixXd::Zero(b, cc);
    Eigen::MatrixXd cond_mask = Eigen::MatrixXd::Zero(b, cc);
    Eigen::MatrixXd target = Eigen::MatrixXd::Zero(b, cc);
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(b, cc);
    std::vector<Rng> rngs;
    rngs.reserve(static_cast<std::size_t>(b));
    for (std::size_t vr = lo; vr < hi; ++vr) {
      const auto r = static_cast<Eigen::Index>(vr - lo);
      const auto row = static_cast<Eigen::Index>(rows[vr / samples]);
      rngs.push_back(Rng::stream(seed, "impute", rows[vr / samples] * samples + vr % samples));
      for (Eigen::Index j = 0; j < cc; ++j) {
        const auto k = static_cast<std::size_t>(j);
        if (table.is_present(row, j)) {
          cond(r, j) = (table.value(row, j) - ckpt.norm_mean[k]) / ckpt.norm_scale[k];
          cond_mask(r, j) = 1.0;
        } else {
          target(r, j) = 1.0;
          x(r, j) = rngs.back().normal();
        }
      }
    }
    Denoiser<float> net(ckpt.denoiser);
    typename Denoiser<float>::Input in{cond.cast<float>(), cond_mask.cast<float>(),
                                       Denoiser<float>::Mat(b, cc), std::vector<int>(
                                           static_cast<std::size_t>(b), 1)};
    auto eps_fn = [&](const Eigen::MatrixXd& xt, int t) -> Eigen::MatrixXd {
      in.noisy = xt.cwiseProduct(target).cast<float>();
      std::fill(in.steps.begin(), in.steps.end(), t);
      return net.forward(params, in).cast<double>();
    };
    reverse_diffusion(schedule, x, target, eps_fn, rngs);
    for (std::size_t vr = lo; vr < hi; ++vr)
      for (std::size_t j = 0; j < c; ++j)
        draws[vr * c + j] = x(static_cast<Eigen::Index>(vr - lo), static_cast<Eigen::Index>(j));
  });

  std::vector<double> column(samples);
  for (std::size_t ri = 0; ri < rows.size(); ++ri) {
    const auto row = static_cast<Eigen::Index>(rows[ri]);
    for (std::size_t j = 0; j < c; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      if (table.is_present(row, jj)) continue;
      for (std::size_t s = 0; s < samples; ++s) column[s] = draws[(ri * samples + s) * c + j];
      std::sort(column.begin(), column.end());
      const double med = samples % 2 == 1
                             ? column[samples / 2]
                             : 0.5 * (column[samples / 2 - 1] + column[samples / 2]);
      out.set_value(row, jj, med * ckpt.norm_scale[j] + ckpt.norm_mean[j]);
    }
  }
  return out;
}

}  // namespace wmg
