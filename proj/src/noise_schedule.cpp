#include "wmg/noise_schedule.hpp"

#include <cmath>

#include "wmg/error.hpp"

namespace wmg {

std::string to_string(ScheduleKind kind) {
  return kind == ScheduleKind::quadratic ? "quadratic" : "linear";
}

ScheduleKind parse_schedule_kind(const std::string& text) {
  if (text == "quadratic") return ScheduleKind::quadratic;
  if (text == "linear") return ScheduleKind::linear;
  throw ConfigError("unknown schedule kind '" + text + "' (expected quadratic|linear)");
}

std::size_t NoiseSchedule::index(int t) const {
  if (t < 1 || t > steps())
    throw ArgumentError("diffusion step " + std::to_string(t) + " outside [1, " +
                        std::to_string(steps()) + "]");
  return static_cast<std::size_t>(t - 1);
}

double NoiseSchedule::posterior_variance(int t) const {
  return (1.0 - alpha_bar_prev(t)) / (1.0 - alpha_bar(t)) * beta(t);
}

NoiseSchedule build_schedule(int steps, double beta_start, double beta_end, ScheduleKind kind) {
  if (steps < 2) throw ArgumentError("schedule needs at least 2 steps");
  if (!(beta_start > 0.0 && beta_start < beta_end && beta_end < 1.0))
    throw ArgumentError("schedule needs 0 < beta_start < beta_end < 1");

  NoiseSchedule s;
  s.beta_start_ = beta_start;
  s.beta_end_ = beta_end;
  s.kind_ = kind;
  const auto n = static_cast<std::size_t>(steps);
  s.beta_.resize(n);
  s.alpha_.resize(n);
  s.alpha_bar_.resize(n);
  const double lo = std::sqrt(beta_start);
  const double hi = std::sqrt(beta_end);
  for (std::size_t i = 0; i < n; ++i) {
    const double frac = static_cast<double>(i) / static_cast<double>(n - 1);
    if (kind == ScheduleKind::quadratic) {
      const double root = lo + frac * (hi - lo);
      s.beta_[i] = root * root;
    } else {
      s.beta_[i] = beta_start + frac * (beta_end - beta_start);
    }
  }
  s.beta_.front() = beta_start;
  s.beta_.back() = beta_end;
  double prod = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    s.alpha_[i] = 1.0 - s.beta_[i];
    prod *= s.alpha_[i];
    s.alpha_bar_[i] = prod;
  }
  return s;
}

std::vector<double> forward_noise(std::span<const double> x0, int t, std::span<const double> eps,
                                  const NoiseSchedule& schedule) {
  if (x0.size() != eps.size()) throw ArgumentError("forward_noise: x0 and eps differ in length");
  const double a = std::sqrt(schedule.alpha_bar(t));
  const double b = std::sqrt(1.0 - schedule.alpha_bar(t));
  std::vector<double> out(x0.size());
  for (std::size_t i = 0; i < x0.size(); ++i) out[i] = a * x0[i] + b * eps[i];
  return out;
}

double reverse_step(double x_t, double eps_hat, int t, double z, const NoiseSchedule& schedule,
                    double sigma_scale) {
  const double coef = schedule.beta(t) / std::sqrt(1.0 - schedule.alpha_bar(t));
  const double mean = (x_t - coef * eps_hat) / std::sqrt(schedule.alpha(t));
  if (t == 1) return mean;
  return mean + sigma_scale * std::sqrt(schedule.posterior_variance(t)) * z;
}

}  // namespace wmg
