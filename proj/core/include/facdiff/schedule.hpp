#pragma once

#include <string_view>
#include <vector>

namespace facdiff {

/// Discretized variance-preserving schedule on t = 0..T (t = 0 is data time).
///
/// b_t rises linearly from b_min (t = 1) to b_max (t = T); each step keeps
/// a_t = 1 - b_t / T of the signal power, abar_t = prod_{s<=t} a_s,
/// alpha_t = sqrt(abar_t), beta_t = sqrt(1 - abar_t), and
/// omega_t^2 = alpha_t^2 sigma0^2 + beta_t^2 is the width of every mixture
/// component of the time-t marginal.
class DiffusionSchedule {
 public:
  DiffusionSchedule(int steps, double b_min, double b_max, double sigma0);

  int steps() const noexcept { return steps_; }
  double b_min() const noexcept { return b_min_; }
  double b_max() const noexcept { return b_max_; }
  double sigma0() const noexcept { return sigma0_; }

  double alpha(int t) const { return alpha_.at(static_cast<std::size_t>(t)); }
  double beta(int t) const { return beta_.at(static_cast<std::size_t>(t)); }
  double omega(int t) const { return omega_.at(static_cast<std::size_t>(t)); }
  double omega2(int t) const { return omega(t) * omega(t); }
  /// Per-step signal retention a_t for t >= 1 (a_0 = 1).
  double step_retention(int t) const { return a_.at(static_cast<std::size_t>(t)); }
  double abar(int t) const { return abar_.at(static_cast<std::size_t>(t)); }

  const std::vector<double>& alphas() const noexcept { return alpha_; }
  const std::vector<double>& betas() const noexcept { return beta_; }
  const std::vector<double>& omegas() const noexcept { return omega_; }

 private:
  int steps_;
  double b_min_, b_max_, sigma0_;
  std::vector<double> a_, abar_, alpha_, beta_, omega_;
};

/// Throws std::invalid_argument for T < 2, b_min <= 0, b_min > b_max,
/// sigma0 < 0, or any a_t <= 0.
DiffusionSchedule build_schedule(int steps, double b_min = 0.1, double b_max = 20.0,
                                 double sigma0 = 0.0);

enum class GuidanceKind { constant, linear, snr, sigma };

std::string_view to_string(GuidanceKind kind);
GuidanceKind guidance_kind_from_string(std::string_view name);

struct GuidanceSchedule {
  GuidanceKind kind = GuidanceKind::constant;
  double eta = 1.0;  // inverse guidance strength
  double eta_min = 0.1;
  double eta_max = 1.0;
};

struct GuidanceScale {
  double value = 0.0;
  bool clamped = false;  // snr kind hit the alpha floor
};

/// Multiplier applied to the raw energy gradient at step t (1 <= t <= T).
GuidanceScale guidance_scale(const GuidanceSchedule& sched, const DiffusionSchedule& diff, int t);

}  // namespace facdiff
