#include "doctest.h"

#include <cmath>
#include <limits>

#include "wmg/baselines.hpp"
#include "wmg/error.hpp"
#include "wmg/evaluation.hpp"
#include "wmg/rng.hpp"
#include "wmg/synthetic.hpp"

using namespace wmg;

namespace {

const double kNaN = std::numeric_limits<double>::quiet_NaN();

FeatureTable make_table(const Eigen::MatrixXd& v) {
  std::vector<std::string> s, c;
  for (Eigen::Index i = 0; i < v.rows(); ++i) s.push_back("s" + std::to_string(i));
  for (Eigen::Index j = 0; j < v.cols(); ++j) c.push_back("c" + std::to_string(j));
  BoolMatrix p = v.array().isNaN() == false;
  return FeatureTable(s, c, v, p);
}

void check_observed_untouched(const FeatureTable& in, const FeatureTable& out) {
  REQUIRE(out.missing_count() == 0);
  for (Eigen::Index i = 0; i < in.rows(); ++i)
    for (Eigen::Index j = 0; j < in.cols(); ++j)
      if (in.is_present(i, j)) CHECK(out.value(i, j) == in.value(i, j));
}

FeatureTable random_table(std::uint64_t seed, double missing) {
  Rng rng(seed);
  Eigen::MatrixXd v(30, 5);
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    const double f = rng.normal();
    for (Eigen::Index j = 0; j < v.cols(); ++j)
      v(i, j) = rng.uniform() < missing ? kNaN : f * (j + 1) + rng.normal();
  }
  for (Eigen::Index j = 0; j < v.cols(); ++j) v(j, j) = 1.0;
  return make_table(v);
}

}  // namespace

TEST_CASE("constant imputers") {
  const auto t = make_table((Eigen::MatrixXd(5, 2) << 1, 1, 3, 2, kNaN, 3, 7, 4, kNaN, kNaN).finished());
  // column 0 uses rows 0..2 only
  const auto mean = impute_constant(t, BaselineKind::mean, {0, 1, 2});
  CHECK(mean.value(2, 0) == 2.0);
  CHECK(mean.value(4, 0) == 2.0);
  const auto zero = impute_constant(t, BaselineKind::zero);
  CHECK(zero.value(2, 0) == 0.0);
  CHECK(zero.value(4, 1) == 0.0);
  const auto med = impute_constant(t, BaselineKind::median);
  CHECK(med.value(4, 1) == 2.5);
  CHECK(med.value(2, 0) == 3.0);
  for (const auto* out : {&mean, &zero, &med}) check_observed_untouched(t, *out);
}

TEST_CASE("column without training observations falls back to the global statistic") {
  const auto t = make_table((Eigen::MatrixXd(3, 2) << 1, kNaN, 3, kNaN, 5, 8).finished());
  const auto out = impute_constant(t, BaselineKind::mean, {0, 1});
  CHECK(out.value(0, 1) == 2.0);  // mean of observed training entries, all columns
  CHECK(impute_constant(t, BaselineKind::mean).value(0, 1) == 8.0);
}

TEST_CASE("baselines are idempotent on complete tables") {
  const auto t = random_table(1, 0.0);
  for (auto kind : {BaselineKind::mean, BaselineKind::median, BaselineKind::zero})
    CHECK(impute_constant(t, kind).same_as(t));
  CHECK(impute_chained(t, {}).same_as(t));
}

TEST_CASE("chained never modifies observed entries and is deterministic") {
  const auto t = random_table(2, 0.2);
  ChainedConfig cfg;
  cfg.seed = 4;
  const auto a = impute_chained(t, cfg);
  check_observed_untouched(t, a);
  CHECK(impute_chained(t, cfg).same_as(a));
}

TEST_CASE("chained recovers an exact linear relation") {
  Eigen::MatrixXd v(6, 2);
  v << 1, 2, 2, 4, 3, 6, 4, 8, 5, kNaN, 6, 12;
  const auto t = make_table(v);
  ChainedConfig cfg;
  cfg.sweeps = 2;
  cfg.ridge = 1e-8;
  const auto out = impute_chained(t, cfg);
  CHECK(std::abs(out.value(4, 1) - 10.0) < 1e-6);
}

TEST_CASE("chained with ridge 0 on a singular system reports a numeric error") {
  Eigen::MatrixXd v(5, 3);
  v << 1, 2, 1, 2, 4, 2, 3, 6, 3, 4, 8, kNaN, 5, 10, 5;  // columns 0 and 1 collinear
  ChainedConfig cfg;
  cfg.ridge = 0.0;
  try {
    impute_chained(make_table(v), cfg);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("ridge") != std::string::npos);
  }
  cfg.ridge = 1e-3;
  CHECK_NOTHROW(impute_chained(make_table(v), cfg));
}

TEST_CASE("chained argument checks") {
  const auto t = random_table(3, 0.2);
  ChainedConfig cfg;
  cfg.sweeps = 0;
  CHECK_THROWS_AS(impute_chained(t, cfg), ArgumentError);
  cfg.sweeps = 1;
  cfg.ridge = -1;
  CHECK_THROWS_AS(impute_chained(t, cfg), ArgumentError);
  const auto one = make_table((Eigen::MatrixXd(2, 1) << 1, kNaN).finished());
  CHECK_THROWS_AS(impute_chained(one, {}), ArgumentError);
}

TEST_CASE("more chained sweeps do not increase error on average") {
  SynthConfig sc;
  sc.n_subjects = 200;
  sc.n_clusters = 20;
  double err1 = 0, err10 = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    sc.seed = seed;
    const auto atlas = gen_atlas(sc);
    const auto truth = gen_features(atlas, sc).truth;
    const auto drop = inject_synthetic_missing(truth, 0.2, seed);
    ChainedConfig cfg;
    cfg.seed = seed;
    cfg.sweeps = 1;
    err1 += rmse(impute_chained(drop.table, cfg), truth, drop.dropped);
    cfg.sweeps = 10;
    err10 += rmse(impute_chained(drop.table, cfg), truth, drop.dropped);
  }
  MESSAGE("mean rmse sweeps=1 ", err1 / 5, " sweeps=10 ", err10 / 5);
  CHECK(err10 <= err1);
}

TEST_CASE("mean imputation minimizes squared error among constants") {
  const auto t = random_table(5, 0.0);
  auto holed = t;
  for (Eigen::Index i = 0; i < 10; ++i) holed.set_missing(i, 2);
  const std::vector<std::size_t> fit = {10, 11, 12, 13, 14, 15, 16, 17, 18, 19};
  const double m = impute_constant(holed, BaselineKind::mean, fit).value(0, 2);
  auto sse = [&](double c) {
    double s = 0;
    for (auto r : fit) s += std::pow(holed.value(static_cast<Eigen::Index>(r), 2) - c, 2);
    return s;
  };
  for (int k = -50; k <= 50; ++k) CHECK(sse(m) <= sse(m + 0.05 * k));
}
