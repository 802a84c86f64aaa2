#include "facdiff/schedule.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace facdiff {

DiffusionSchedule::DiffusionSchedule(int steps, double b_min, double b_max, double sigma0)
    : steps_(steps), b_min_(b_min), b_max_(b_max), sigma0_(sigma0) {
  if (steps < 2) throw std::invalid_argument("schedule: T must be >= 2");
  if (!(b_min > 0.0) || !(b_min <= b_max)) {
    throw std::invalid_argument("schedule: need 0 < b_min <= b_max");
  }
  if (!(sigma0 >= 0.0)) throw std::invalid_argument("schedule: sigma0 must be >= 0");

  const auto n = static_cast<std::size_t>(steps) + 1;
  a_.assign(n, 1.0);
  abar_.assign(n, 1.0);
  alpha_.assign(n, 1.0);
  beta_.assign(n, 0.0);
  omega_.assign(n, sigma0);
  const double T = steps;
  for (int t = 1; t <= steps; ++t) {
    const double b = b_min + (t - 1) / (T - 1) * (b_max - b_min);
    const double a = 1.0 - b / T;
    if (!(a > 0.0)) {
      throw std::invalid_argument("schedule: step retention a_t <= 0 at t=" + std::to_string(t));
    }
    const auto i = static_cast<std::size_t>(t);
    a_[i] = a;
    abar_[i] = abar_[i - 1] * a;
    alpha_[i] = std::sqrt(abar_[i]);
    beta_[i] = std::sqrt(1.0 - abar_[i]);
    omega_[i] = std::sqrt(abar_[i] * sigma0 * sigma0 + (1.0 - abar_[i]));
  }
}

DiffusionSchedule build_schedule(int steps, double b_min, double b_max, double sigma0) {
  return DiffusionSchedule(steps, b_min, b_max, sigma0);
}

std::string_view to_string(GuidanceKind kind) {
  switch (kind) {
    case GuidanceKind::constant: return "constant";
    case GuidanceKind::linear: return "linear";
    case GuidanceKind::snr: return "snr";
    case GuidanceKind::sigma: return "sigma";
  }
  return "constant";
}

GuidanceKind guidance_kind_from_string(std::string_view name) {
  if (name == "constant") return GuidanceKind::constant;
  if (name == "linear") return GuidanceKind::linear;
  if (name == "snr") return GuidanceKind::snr;
  if (name == "sigma") return GuidanceKind::sigma;
  throw std::invalid_argument("unknown guidance schedule: " + std::string(name));
}

GuidanceScale guidance_scale(const GuidanceSchedule& sched, const DiffusionSchedule& diff, int t) {
  if (t < 1 || t > diff.steps()) throw std::out_of_range("guidance_scale: t outside 1..T");
  if (!(sched.eta > 0.0)) throw std::invalid_argument("guidance_scale: eta must be positive");
  const double inv_eta = 1.0 / sched.eta;
  switch (sched.kind) {
    case GuidanceKind::constant:
      return {inv_eta, false};
    case GuidanceKind::sigma:
      return {diff.beta(t) * inv_eta, false};
    case GuidanceKind::snr: {
      constexpr double kAlphaFloor = 1e-12;
      const double a = diff.alpha(t);
      const bool clamped = a < kAlphaFloor;
      return {diff.beta(t) / (clamped ? kAlphaFloor : a) * inv_eta, clamped};
    }
    case GuidanceKind::linear: {
      // eta_min at t = T, eta_max at t = 1
      const double frac = static_cast<double>(diff.steps() - t) / (diff.steps() - 1);
      return {(sched.eta_min + frac * (sched.eta_max - sched.eta_min)) * inv_eta, false};
    }
  }
  return {inv_eta, false};
}

}  // namespace facdiff
