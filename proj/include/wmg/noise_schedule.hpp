#pragma once

#include <span>
#include <string>
#include <vector>

namespace wmg {

enum class ScheduleKind { quadratic, linear };

std::string to_string(ScheduleKind kind);
ScheduleKind parse_schedule_kind(const std::string& text);

/// Discrete diffusion constants. Steps are 1-based: t = 1..steps.
class NoiseSchedule {
 public:
  NoiseSchedule() = default;

  int steps() const { return static_cast<int>(beta_.size()); }
  double beta_start() const { return beta_start_; }
  double beta_end() const { return beta_end_; }
  ScheduleKind kind() const { return kind_; }

  double beta(int t) const { return beta_.at(index(t)); }
  double alpha(int t) const { return alpha_.at(index(t)); }
  double alpha_bar(int t) const { return alpha_bar_.at(index(t)); }
  /// alpha_bar(t - 1), with alpha_bar(0) = 1.
  double alpha_bar_prev(int t) const { return t == 1 ? 1.0 : alpha_bar(t - 1); }
  /// Posterior variance beta_tilde(t) = (1 - abar(t-1)) / (1 - abar(t)) * beta(t).
  double posterior_variance(int t) const;

  const std::vector<double>& betas() const { return beta_; }
  const std::vector<double>& alpha_bars() const { return alpha_bar_; }

  friend NoiseSchedule build_schedule(int, double, double, ScheduleKind);

 private:
  std::size_t index(int t) const;

  double beta_start_ = 0.0;
  double beta_end_ = 0.0;
  ScheduleKind kind_ = ScheduleKind::quadratic;
  std::vector<double> beta_, alpha_, alpha_bar_;
};

constexpr int kDefaultSteps = 150;
constexpr double kDefaultBetaStart = 0.0001;
constexpr double kDefaultBetaEnd = 0.5;

/// quadratic: beta_t = (sqrt(b1) + (t-1)/(T-1) * (sqrt(bT) - sqrt(b1)))^2.
/// linear: beta_t = b1 + (t-1)/(T-1) * (bT - b1).
/// Endpoints are stored exactly as given.
NoiseSchedule build_schedule(int steps = kDefaultSteps, double beta_start = kDefaultBetaStart,
                             double beta_end = kDefaultBetaEnd,
                             ScheduleKind kind = ScheduleKind::quadratic);

/// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps.
std::vector<double> forward_noise(std::span<const double> x0, int t, std::span<const double> eps,
                                  const NoiseSchedule& schedule);

/// One ancestral step: x_{t-1} = (x_t - beta_t / sqrt(1 - abar_t) * eps_hat) / sqrt(alpha_t)
///                               + sigma_t * z, sigma_t^2 = beta_tilde_t.
/// Pass sigma_scale = 0 to take the mean only. z is ignored at t = 1.
double reverse_step(double x_t, double eps_hat, int t, double z, const NoiseSchedule& schedule,
                    double sigma_scale = 1.0);

}  // namespace wmg
