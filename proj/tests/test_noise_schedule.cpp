#include "doctest.h"

#include <cmath>
#include <vector>

#include "wmg/diffusion_imputer.hpp"
#include "wmg/error.hpp"
#include "wmg/noise_schedule.hpp"
#include "wmg/rng.hpp"

using namespace wmg;

TEST_CASE("default endpoints are exact") {
  const auto s = build_schedule();
  CHECK(s.steps() == 150);
  CHECK(s.beta(1) == 0.0001);
  CHECK(s.beta(150) == 0.5);
  CHECK(s.alpha_bar(150) < 1e-4);
  CHECK(s.alpha_bar_prev(1) == 1.0);
}

TEST_CASE("quadratic midpoint against long double evaluation") {
  const auto s = build_schedule();
  for (int t : {2, 75, 149}) {
    const long double a = std::sqrt(0.0001L), b = std::sqrt(0.5L);
    const long double root = a + (static_cast<long double>(t - 1) / 149.0L) * (b - a);
    CHECK(std::abs(static_cast<long double>(s.beta(t)) - root * root) <= 1e-15L);
  }
  long double prod = 1.0L;
  for (int t = 1; t <= 150; ++t) {
    const long double a = std::sqrt(0.0001L), b = std::sqrt(0.5L);
    const long double root = a + (static_cast<long double>(t - 1) / 149.0L) * (b - a);
    prod *= 1.0L - root * root;
    CHECK(std::abs(static_cast<long double>(s.alpha_bar(t)) - prod) <= 1e-14L * prod + 1e-300L);
  }
}

TEST_CASE("schedule monotonicity and derived constants") {
  for (auto kind : {ScheduleKind::quadratic, ScheduleKind::linear}) {
    const auto s = build_schedule(40, 0.001, 0.3, kind);
    CHECK(s.betas().size() == 40);
    CHECK(s.alpha_bars().size() == 40);
    for (int t = 1; t <= 40; ++t) {
      CHECK(s.alpha(t) == 1.0 - s.beta(t));
      CHECK(s.beta(t) > 0.0);
      CHECK(s.beta(t) < 1.0);
      CHECK(s.posterior_variance(t) >= 0.0);
      CHECK(s.posterior_variance(t) <= s.beta(t));
      if (t > 1) {
        CHECK(s.beta(t) > s.beta(t - 1));
        CHECK(s.alpha_bar(t) < s.alpha_bar(t - 1));
      }
    }
    CHECK(s.posterior_variance(1) == 0.0);
  }
  const auto lin = build_schedule(5, 0.1, 0.5, ScheduleKind::linear);
  CHECK(lin.beta(3) == doctest::Approx(0.3).epsilon(1e-15));
}

TEST_CASE("schedule argument errors") {
  CHECK_THROWS_AS(build_schedule(150, 0.5, 0.0001), ArgumentError);
  CHECK_THROWS_AS(build_schedule(1, 0.0001, 0.5), ArgumentError);
  CHECK_THROWS_AS(build_schedule(10, 0.0, 0.5), ArgumentError);
  CHECK_THROWS_AS(build_schedule(10, 0.1, 1.0), ArgumentError);
  CHECK_THROWS_AS(build_schedule().beta(0), std::exception);
  CHECK(parse_schedule_kind("linear") == ScheduleKind::linear);
  CHECK_THROWS_AS(parse_schedule_kind("cosine"), ConfigError);
}

TEST_CASE("forward noise closed form") {
  const auto s = build_schedule();
  const std::vector<double> x0{0.3, -1.2, 2.0};
  const std::vector<double> zero(3, 0.0);
  const auto xt = forward_noise(x0, 40, zero, s);
  for (int i = 0; i < 3; ++i) CHECK(xt[i] == std::sqrt(s.alpha_bar(40)) * x0[i]);
  const std::vector<double> eps{1.0, 0.5, -0.25};
  const auto xe = forward_noise(x0, 7, eps, s);
  for (int i = 0; i < 3; ++i)
    CHECK(xe[i] == doctest::Approx(std::sqrt(s.alpha_bar(7)) * x0[i] +
                                   std::sqrt(1 - s.alpha_bar(7)) * eps[i]).epsilon(1e-15));
  CHECK_THROWS_AS(forward_noise(x0, 3, std::vector<double>(2, 0.0), s), ArgumentError);
  CHECK_THROWS(forward_noise(x0, 0, eps, s));
}

TEST_CASE("forward noise variance matches 1 - abar (Monte Carlo)") {
  const auto s = build_schedule();
  Rng rng(7);
  for (int t : {1, 10, 60, 150}) {
    const int n = 100000;
    double sum = 0, sq = 0;
    const std::vector<double> x0{0.7};
    for (int i = 0; i < n; ++i) {
      const std::vector<double> e{rng.normal()};
      const double d = forward_noise(x0, t, e, s)[0] - std::sqrt(s.alpha_bar(t)) * 0.7;
      sum += d;
      sq += d * d;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    CHECK(std::abs(var / (1 - s.alpha_bar(t)) - 1.0) < 0.02);
  }
}

TEST_CASE("two-stage noising matches single shot (Monte Carlo)") {
  const auto s = build_schedule();
  Rng rng(9);
  const int t1 = 20, t2 = 50;
  const double ratio = s.alpha_bar(t2) / s.alpha_bar(t1);
  const double x0 = 1.3;
  const int n = 100000;
  double m1 = 0, v1 = 0, m2 = 0, v2 = 0;
  for (int i = 0; i < n; ++i) {
    const double direct = std::sqrt(s.alpha_bar(t2)) * x0 + std::sqrt(1 - s.alpha_bar(t2)) * rng.normal();
    const double mid = std::sqrt(s.alpha_bar(t1)) * x0 + std::sqrt(1 - s.alpha_bar(t1)) * rng.normal();
    const double two = std::sqrt(ratio) * mid + std::sqrt(1 - ratio) * rng.normal();
    m1 += direct;
    v1 += direct * direct;
    m2 += two;
    v2 += two * two;
  }
  m1 /= n;
  m2 /= n;
  v1 = v1 / n - m1 * m1;
  v2 = v2 / n - m2 * m2;
  const double expect_mean = std::sqrt(s.alpha_bar(t2)) * x0;
  CHECK(std::abs(m1 - expect_mean) < 0.02 * std::abs(expect_mean) + 0.01);
  CHECK(std::abs(m2 - expect_mean) < 0.02 * std::abs(expect_mean) + 0.01);
  CHECK(std::abs(v2 / v1 - 1.0) < 0.02);
}

TEST_CASE("reverse step with exact noise and sigma 0 gives the posterior mean") {
  const auto s = build_schedule();
  Rng rng(11);
  double worst = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const int t = 1 + static_cast<int>(rng.uniform_index(150));
    const double x0 = rng.normal();
    const double eps = rng.normal();
    const double xt = std::sqrt(s.alpha_bar(t)) * x0 + std::sqrt(1 - s.alpha_bar(t)) * eps;
    const double ab = s.alpha_bar(t), abp = s.alpha_bar_prev(t), b = s.beta(t);
    const double mu = std::sqrt(abp) * b / (1 - ab) * x0 + std::sqrt(1 - b) * (1 - abp) / (1 - ab) * xt;
    const double got = reverse_step(xt, eps, t, rng.normal(), s, 0.0);
    worst = std::max(worst, std::abs(got - mu));
  }
  CHECK(worst <= 1e-6);
}

TEST_CASE("reverse step adds sigma z") {
  const auto s = build_schedule();
  const double base = reverse_step(0.4, 0.1, 30, 0.0, s);
  CHECK(reverse_step(0.4, 0.1, 30, 1.0, s) - base ==
        doctest::Approx(std::sqrt(s.posterior_variance(30))).epsilon(1e-12));
  CHECK(reverse_step(0.4, 0.1, 1, 5.0, s) == reverse_step(0.4, 0.1, 1, 0.0, s));
}

TEST_CASE("oracle denoiser reconstructs x0 through the full reverse chain") {
  const auto s = build_schedule();
  Rng init(3);
  const Eigen::Index rows = 8, cols = 6;
  Eigen::MatrixXd x0(rows, cols), mask(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) {
      x0(i, j) = init.normal();
      mask(i, j) = init.uniform() < 0.5 ? 1.0 : 0.0;
    }
  // noise implied by the known x0 at the current state
  const EpsPredictor oracle = [&](const Eigen::MatrixXd& x, int t) {
    return Eigen::MatrixXd((x - std::sqrt(s.alpha_bar(t)) * x0) / std::sqrt(1 - s.alpha_bar(t)));
  };
  Eigen::MatrixXd x(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) x(i, j) = mask(i, j) > 0 ? init.normal() : x0(i, j);
  std::vector<Rng> rngs;
  for (Eigen::Index i = 0; i < rows; ++i) rngs.push_back(Rng::stream(5, "reverse", static_cast<std::uint64_t>(i)));
  const Eigen::MatrixXd untouched = x;
  reverse_diffusion(s, x, mask, oracle, rngs);
  double worst = 0;
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) {
      if (mask(i, j) > 0) worst = std::max(worst, std::abs(x(i, j) - x0(i, j)));
      else CHECK(x(i, j) == untouched(i, j));
    }
  CHECK(worst < 1e-4);
}
