#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "wmg/checkpoint.hpp"
#include "wmg/diffusion_imputer.hpp"
#include "wmg/error.hpp"
#include "wmg/parallel.hpp"
#include "wmg/rng.hpp"

using namespace wmg;
namespace fs = std::filesystem;

namespace {

DenoiserConfig small_config(int clusters) {
  DenoiserConfig cfg;
  cfg.cluster_count = clusters;
  cfg.channels = 8;
  cfg.heads = 2;
  cfg.layers = 2;
  cfg.embed_dim = 16;
  cfg.cluster_embed_dim = 4;
  return cfg;
}

// Rank-one plus noise table with a few missing entries per row.
FeatureTable correlated_table(std::size_t rows, std::size_t cols, std::uint64_t seed,
                              double missing = 0.15) {
  Rng rng(seed);
  std::vector<std::string> s, c;
  for (std::size_t i = 0; i < rows; ++i) s.push_back("s" + std::to_string(i));
  for (std::size_t j = 0; j < cols; ++j) c.push_back("c" + std::to_string(j));
  Eigen::VectorXd load(static_cast<Eigen::Index>(cols));
  for (auto& v : load) v = rng.uniform(0.5, 1.5);
  Eigen::MatrixXd v(rows, cols);
  BoolMatrix p(rows, cols);
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    const double f = rng.normal();
    for (Eigen::Index j = 0; j < v.cols(); ++j) {
      v(i, j) = 0.5 + 0.1 * f * load(j) + 0.02 * rng.normal();
      p(i, j) = rng.uniform() >= missing;
    }
    if (p.row(i).count() < 2) p(i, 0) = p(i, 1) = true;
  }
  return FeatureTable(s, c, v, p);
}

DistanceMatrix line_distances(std::size_t c) {
  DistanceMatrix d;
  for (std::size_t j = 0; j < c; ++j) d.cluster_ids.push_back("c" + std::to_string(j));
  d.d = Eigen::MatrixXd::Zero(c, c);
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t j = 0; j < c; ++j) d.d(i, j) = std::abs(double(i) - double(j));
  return d;
}

std::vector<TrainingExample> random_batch(const DenoiserConfig& cfg, std::size_t n, std::uint64_t seed) {
  const auto table = correlated_table(n, static_cast<std::size_t>(cfg.cluster_count), seed, 0.2);
  const auto schedule = build_schedule();
  MaskPolicyConfig policy;
  policy.mode = MaskMode::random;
  Rng rng(seed);
  std::vector<TrainingExample> batch;
  for (std::size_t r = 0; r < n; ++r)
    batch.push_back(make_training_example(table, r, nullptr, policy, schedule, rng));
  return batch;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

fs::path temp_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("wmg_test_ckpt_" + name);
  fs::remove_all(d);
  return d;
}

}  // namespace

TEST_CASE("training example respects the mask split") {
  const auto table = correlated_table(5, 10, 1);
  const auto schedule = build_schedule();
  MaskPolicyConfig policy;
  policy.mode = MaskMode::random;
  Rng rng(1);
  for (std::size_t r = 0; r < 5; ++r) {
    const auto ex = make_training_example(table, r, nullptr, policy, schedule, rng);
    CHECK(ex.step >= 1);
    CHECK(ex.step <= 150);
    for (std::size_t j = 0; j < 10; ++j) {
      CHECK(ex.cond_mask[j] * ex.target_mask[j] == 0.0);
      if (!table.is_present(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)))
        CHECK(ex.cond_mask[j] + ex.target_mask[j] == 0.0);
      if (ex.cond_mask[j] == 0.0) CHECK(ex.cond_values[j] == 0.0);
      if (ex.target_mask[j] == 0.0) {
        CHECK(ex.noisy[j] == 0.0);
        CHECK(ex.eps[j] == 0.0);
      } else {
        const double x0 = table.value(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j));
        CHECK(ex.noisy[j] == doctest::Approx(std::sqrt(schedule.alpha_bar(ex.step)) * x0 +
                                             std::sqrt(1 - schedule.alpha_bar(ex.step)) * ex.eps[j]));
      }
    }
  }
}

TEST_CASE("loss is zero when the prediction equals the noise") {
  const auto cfg = small_config(6);
  auto p = init_denoiser_params(cfg, 2);  // zero head: constant output head_b2
  const ParameterLayout layout(cfg);
  p[layout.info(layout.head_b2).offset] = 0.75f;
  auto batch = random_batch(cfg, 5, 3);
  for (auto& ex : batch)
    for (std::size_t j = 0; j < ex.eps.size(); ++j)
      if (ex.target_mask[j] != 0.0) ex.eps[j] = 0.75;
  const auto res = training_step<float>(cfg, p, batch);
  CHECK(res.loss == 0.0);
  CHECK(res.targets > 0);
}

TEST_CASE("zero head loss equals mean squared noise; loss non-negative") {
  const auto cfg = small_config(6);
  const auto p = init_denoiser_params(cfg, 2);
  const auto batch = random_batch(cfg, 9, 4);
  double sq = 0;
  std::size_t n = 0;
  for (const auto& ex : batch)
    for (std::size_t j = 0; j < ex.eps.size(); ++j)
      if (ex.target_mask[j] != 0.0) {
        sq += ex.eps[j] * ex.eps[j];
        ++n;
      }
  const std::vector<double> pd(p.begin(), p.end());
  const auto res = training_step<double>(cfg, pd, batch);
  CHECK(res.targets == n);
  CHECK(res.loss == doctest::Approx(sq / static_cast<double>(n)).epsilon(1e-12));

  Rng rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> q(pd.size());
    for (auto& v : q) v = rng.uniform(-0.5, 0.5);
    CHECK(training_step<double>(cfg, q, batch).loss >= 0.0);
  }
}

TEST_CASE("training step gradient matches central differences") {
  auto cfg = small_config(6);
  cfg.layers = 1;
  const auto batch = random_batch(cfg, 6, 8);  // spans two micro-batches
  Rng rng(21);
  std::vector<double> p(ParameterLayout(cfg).total_size());
  for (auto& v : p) v = rng.uniform(-0.5, 0.5);
  const auto res = training_step<double>(cfg, p, batch);
  double worst = 0;
  for (int probe = 0; probe < 200; ++probe) {
    const std::size_t i = rng.uniform_index(p.size());
    const double h = 1e-4;
    auto plus = p, minus = p;
    plus[i] += h;
    minus[i] -= h;
    const double fd = (training_step<double>(cfg, plus, batch).loss -
                       training_step<double>(cfg, minus, batch).loss) / (2 * h);
    const double rel = std::abs(fd - res.grad[i]) / std::max({std::abs(fd), std::abs(res.grad[i]), 1e-6});
    worst = std::max(worst, rel);
  }
  CHECK(worst <= 1e-3);
}

TEST_CASE("training step errors") {
  const auto cfg = small_config(6);
  const auto p = init_denoiser_params(cfg, 1);
  auto batch = random_batch(cfg, 3, 1);
  for (auto& ex : batch) std::fill(ex.target_mask.begin(), ex.target_mask.end(), 0.0);
  CHECK_THROWS_AS(training_step<float>(cfg, p, batch), ArgumentError);

  auto bad = random_batch(cfg, 3, 1);
  bad[0].noisy[0] = std::numeric_limits<double>::quiet_NaN();
  bad[0].target_mask[0] = 1.0;
  CHECK_THROWS_AS(training_step<float>(cfg, p, bad), NumericError);
  const std::vector<float> short_p(10, 0.0f);
  CHECK_THROWS_AS(training_step<float>(cfg, short_p, random_batch(cfg, 3, 1)), ArgumentError);
}

TEST_CASE("standardization constants") {
  const FeatureTable t(
      {"a", "b", "c"}, {"x", "y", "z"},
      (Eigen::MatrixXd(3, 3) << 1, 5, 0, 3, 5, 0, 0, 5, 0).finished(),
      (BoolMatrix(3, 3) << true, true, false, true, true, false, false, true, false).finished());
  std::vector<float> mean, scale;
  fit_standardization(t, mean, scale);
  CHECK(mean[0] == 2.0f);
  CHECK(scale[0] == static_cast<float>(std::sqrt(2.0)));  // sample std of {1, 3}
  CHECK(mean[1] == 5.0f);
  CHECK(scale[1] == 1.0f);  // zero variance passes through
  CHECK(scale[2] == 1.0f);  // no observations
  CHECK(mean[2] == static_cast<float>((1.0 + 3 + 5 + 5 + 5) / 5));
}

TEST_CASE("training reduces loss on a small table") {
  const auto table = correlated_table(50, 8, 3);
  MaskPolicyConfig policy;
  policy.mode = MaskMode::random;
  TrainConfig tc;
  tc.epochs = 20;
  tc.batch_size = 10;
  tc.learning_rate = 3e-3;
  const auto res = train(table, policy, nullptr, small_config(8), tc);
  REQUIRE(res.epoch_loss.size() == 20);
  const double early = res.epoch_loss.front();
  const double late = (res.epoch_loss[17] + res.epoch_loss[18] + res.epoch_loss[19]) / 3;
  CHECK(late < early);
  CHECK(res.checkpoint.training.epochs == 20);
  CHECK(res.checkpoint.training.final_loss == res.epoch_loss.back());
}

TEST_CASE("training is deterministic and independent of the worker count") {
  const auto table = correlated_table(40, 8, 4);
  const auto dist = line_distances(8);
  MaskPolicyConfig policy;
  TrainConfig tc;
  tc.epochs = 3;
  tc.batch_size = 8;
  tc.seed = 17;
  set_thread_limit(1);
  const auto a = train(table, policy, &dist, small_config(8), tc);
  const auto b = train(table, policy, &dist, small_config(8), tc);
  set_thread_limit(3);
  const auto c = train(table, policy, &dist, small_config(8), tc);
  set_thread_limit(0);
  CHECK(a.checkpoint == b.checkpoint);
  CHECK(a.checkpoint.params == c.checkpoint.params);
  CHECK(a.epoch_loss == c.epoch_loss);
  tc.seed = 18;
  CHECK(train(table, policy, &dist, small_config(8), tc).checkpoint.params != a.checkpoint.params);
}

TEST_CASE("zero epochs keeps the initialization") {
  const auto table = correlated_table(20, 6, 5);
  MaskPolicyConfig policy;
  policy.mode = MaskMode::random;
  TrainConfig tc;
  tc.epochs = 0;
  tc.batch_size = 4;
  const auto res = train(table, policy, nullptr, small_config(6), tc);
  CHECK(res.epoch_loss.empty());
  CHECK(std::isnan(res.checkpoint.training.final_loss));
  CHECK(res.checkpoint.params ==
        init_denoiser_params(res.checkpoint.denoiser, derive_seed(tc.seed, "init")));
}

TEST_CASE("training argument errors") {
  const auto table = correlated_table(5, 6, 5);
  MaskPolicyConfig policy;
  TrainConfig tc;
  tc.batch_size = 16;
  CHECK_THROWS_AS(train(table, policy, nullptr, small_config(6), tc), ArgumentError);
  tc.batch_size = 2;
  CHECK_THROWS(train(table, policy, nullptr, small_config(6), tc));  // geometry without distances
  tc.learning_rate = 0;
  CHECK_THROWS(tc.validate());
}

TEST_CASE("imputation contract") {
  const auto table = correlated_table(30, 8, 6);
  MaskPolicyConfig policy;
  policy.mode = MaskMode::random;
  TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 10;
  const auto ckpt = train(table, policy, nullptr, small_config(8), tc).checkpoint;

  auto sparse = table;
  sparse.set_missing(3, 2);
  for (Eigen::Index j = 0; j < 8; ++j) sparse.set_missing(4, j);  // fully missing row
  const auto out = impute(ckpt, sparse, 3, 9);
  CHECK(out.missing_count() == 0);
  CHECK(out.subject_ids() == sparse.subject_ids());
  for (Eigen::Index i = 0; i < sparse.rows(); ++i)
    for (Eigen::Index j = 0; j < sparse.cols(); ++j) {
      CHECK(std::isfinite(out.value(i, j)));
      if (sparse.is_present(i, j))
        CHECK(std::bit_cast<std::uint64_t>(out.value(i, j)) ==
              std::bit_cast<std::uint64_t>(sparse.value(i, j)));
    }
  CHECK(impute(ckpt, sparse, 3, 9).same_as(out));
  set_thread_limit(1);
  CHECK(impute(ckpt, sparse, 3, 9).same_as(out));
  set_thread_limit(0);
  CHECK_FALSE(impute(ckpt, sparse, 3, 10).same_as(out));

  const auto full = FeatureTable::fully_observed(table.subject_ids(), table.cluster_ids(), table.values().unaryExpr([](double v) { return std::isnan(v) ? 0.5 : v; }));
  CHECK(impute(ckpt, full, 2, 1).same_as(full));

  const auto wrong = correlated_table(4, 7, 1);
  CHECK_THROWS_AS(impute(ckpt, wrong, 2, 1), ArgumentError);
  CHECK_THROWS_AS(impute(ckpt, sparse, 0, 1), ArgumentError);
}

TEST_CASE("checkpoint save-load-save is byte identical") {
  const auto table = correlated_table(20, 6, 7);
  MaskPolicyConfig policy;
  policy.mode = MaskMode::random;
  TrainConfig tc;
  tc.epochs = 1;
  tc.batch_size = 5;
  const auto ckpt = train(table, policy, nullptr, small_config(6), tc).checkpoint;
  const auto d1 = temp_dir("a"), d2 = temp_dir("b");
  save_checkpoint(ckpt, d1);
  const auto back = load_checkpoint(d1);
  CHECK(back == ckpt);
  save_checkpoint(back, d2);
  CHECK(slurp(d1 / "manifest") == slurp(d2 / "manifest"));
  CHECK(slurp(d1 / "weights.bin") == slurp(d2 / "weights.bin"));
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST_CASE("checkpoint load errors") {
  const auto table = correlated_table(20, 6, 8);
  MaskPolicyConfig policy;
  policy.mode = MaskMode::random;
  TrainConfig tc;
  tc.epochs = 0;
  tc.batch_size = 5;
  const auto ckpt = train(table, policy, nullptr, small_config(6), tc).checkpoint;
  const auto dir = temp_dir("err");
  save_checkpoint(ckpt, dir);
  const std::string manifest = slurp(dir / "manifest");
  const std::string weights = slurp(dir / "weights.bin");
  auto write = [&](const std::string& name, const std::string& text) {
    std::ofstream(dir / name, std::ios::binary) << text;
  };

  write("weights.bin", weights.substr(0, weights.size() / 2));
  CHECK_THROWS_AS(load_checkpoint(dir), IoError);
  write("weights.bin", weights);

  auto replace = [&](const std::string& from, const std::string& to) {
    std::string m = manifest;
    const auto pos = m.find(from);
    REQUIRE(pos != std::string::npos);
    m.replace(pos, from.size(), to);
    write("manifest", m);
  };
  replace("\"format_version\": 1", "\"format_version\": 7");
  CHECK_THROWS_AS(load_checkpoint(dir), VersionError);
  replace("\"channels\": 8", "\"channels\": \"eight\"");
  try {
    load_checkpoint(dir);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("channels") != std::string::npos);
  }
  write("manifest", "{ not json");
  CHECK_THROWS_AS(load_checkpoint(dir), ValidationError);
  fs::remove(dir / "manifest");
  CHECK_THROWS_AS(load_checkpoint(dir), IoError);
  fs::remove_all(dir);
}
