#include "facdiff/score.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace facdiff {

AnalyticPrior::AnalyticPrior(std::shared_ptr<const Codebook> codebook, Space space, double temp)
    : codebook_(std::move(codebook)), space_(space), temp_(temp) {
  if (!(temp_ > 0.0)) throw std::invalid_argument("prior: softmax_temp must be positive");
  center_sq_norm_ = space_ == Space::vector ? codebook_->column_norm() * codebook_->column_norm()
                                            : 1.0;
}

AnalyticPrior AnalyticPrior::vector_space(const Codebook& codebook, double softmax_temp) {
  return {std::make_shared<const Codebook>(codebook), Space::vector, softmax_temp};
}

AnalyticPrior AnalyticPrior::latent_space(const Codebook& codebook, double softmax_temp) {
  return {std::make_shared<const Codebook>(codebook), Space::latent, softmax_temp};
}

Eigen::Index AnalyticPrior::state_dim() const noexcept {
  return space_ == Space::vector ? codebook_->dim() : codebook_->size();
}

Vec AnalyticPrior::center_mean() const {
  if (space_ == Space::latent) return Vec::Constant(components(), 1.0 / components());
  return codebook_->scaled().rowwise().mean();
}

Vec AnalyticPrior::center(Eigen::Index c) const {
  if (space_ == Space::latent) return Vec::Unit(components(), c);
  return codebook_->scaled().col(c);
}

Vec AnalyticPrior::centers_transpose_times(const Vec& x) const {
  if (space_ == Space::latent) return x;
  return gemv_t(codebook_->scaled(), x);
}

Vec AnalyticPrior::centers_times(const Vec& w) const {
  if (space_ == Space::latent) return w;
  return gemv_sparse(codebook_->scaled(), w);
}

Vec AnalyticPrior::decode(const Vec& state) const {
  if (space_ == Space::vector) return state;
  return gemv(codebook_->scaled(), state);
}

CleanupResult AnalyticPrior::readout(const Vec& state) const {
  if (space_ == Space::vector) return cleanup(*codebook_, state);
  const double norm = state.norm();
  if (norm == 0.0 || !std::isfinite(norm)) return {0, 0.0, true};
  const int idx = argmax_index(state);
  return {idx, state[idx] / norm, false};
}

MixtureEval evaluate(const AnalyticPrior& prior, const Vec& state, int t,
                     const DiffusionSchedule& schedule) {
  if (state.size() != prior.state_dim()) throw std::invalid_argument("prior: state dimension mismatch");
  if (t < 0 || t > schedule.steps()) throw std::out_of_range("prior: t outside 0..T");
  MixtureEval ev;
  ev.t = t;
  ev.alpha = schedule.alpha(t);
  ev.beta2 = schedule.beta(t) * schedule.beta(t);
  ev.omega2 = schedule.omega2(t);
  ev.sigma0_sq = schedule.sigma0() * schedule.sigma0();
  if (!(ev.omega2 > 0.0)) {
    throw std::domain_error("prior: omega_t = 0, the mixture is a sum of Dirac deltas");
  }
  ev.logit_scale = prior.softmax_temp() * ev.alpha / ev.omega2;

  const double offset = prior.softmax_temp() * ev.alpha * ev.alpha *
                        prior.center_sq_norm() / (2.0 * ev.omega2);
  Vec logits = ev.logit_scale * prior.centers_transpose_times(state);
  logits.array() -= offset;
  const double peak = logits.maxCoeff();
  ev.gamma = (logits.array() - peak).exp();
  const double total = ev.gamma.sum();
  ev.gamma /= total;
  ev.log_sum_exp = peak + std::log(total);
  ev.weighted_center = prior.centers_times(ev.gamma);
  return ev;
}

double log_density(const AnalyticPrior& prior, const Vec& state, int t,
                   const DiffusionSchedule& schedule) {
  const MixtureEval ev = evaluate(prior, state, t, schedule);
  const double dim = static_cast<double>(state.size());
  const double n = static_cast<double>(prior.components());
  return -0.5 * dim * std::log(2.0 * std::numbers::pi * ev.omega2) -
         state.squaredNorm() / (2.0 * ev.omega2) + ev.log_sum_exp / prior.softmax_temp() -
         std::log(n);
}

Vec responsibilities(const AnalyticPrior& prior, const Vec& state, int t,
                     const DiffusionSchedule& schedule) {
  return evaluate(prior, state, t, schedule).gamma;
}

Vec score(const MixtureEval& ev, const Vec& state) {
  return (ev.alpha * ev.weighted_center - state) / ev.omega2;
}

Vec score(const AnalyticPrior& prior, const Vec& state, int t, const DiffusionSchedule& schedule) {
  return score(evaluate(prior, state, t, schedule), state);
}

Vec tweedie(const MixtureEval& ev, const Vec& state) {
  return (ev.beta2 / ev.omega2) * ev.weighted_center +
         (ev.alpha * ev.sigma0_sq / ev.omega2) * state;
}

Vec tweedie(const AnalyticPrior& prior, const Vec& state, int t,
            const DiffusionSchedule& schedule) {
  return tweedie(evaluate(prior, state, t, schedule), state);
}

Vec tweedie_from_score(const MixtureEval& ev, const Vec& state) {
  if (ev.alpha == 0.0) throw std::domain_error("tweedie_from_score: alpha_t = 0");
  return (state + ev.beta2 * score(ev, state)) / ev.alpha;
}

Vec tweedie_vjp(const AnalyticPrior& prior, const MixtureEval& ev, const Vec& v) {
  if (v.size() != prior.state_dim()) throw std::invalid_argument("tweedie_vjp: dimension mismatch");
  // Softmax Jacobian term, restricted to the support of gamma.
  const Eigen::Index n = ev.gamma.size();
  Vec proj = Vec::Zero(n);
  Eigen::Index support = 0;
  for (Eigen::Index c = 0; c < n; ++c) support += ev.gamma[c] != 0.0;
  if (prior.space() == Space::latent) {
    proj = v;
  } else if (4 * support > n) {
    proj = prior.codebook().scaled().transpose() * v;
  } else {
    for (Eigen::Index c = 0; c < n; ++c) {
      if (ev.gamma[c] != 0.0) proj[c] = prior.codebook().scaled().col(c).dot(v);
    }
  }
  if (prior.space() == Space::vector) {
    flops::add(2ull * static_cast<std::uint64_t>(prior.state_dim() * support));
  }
  const double mean = ev.gamma.dot(proj);
  Vec w = ev.gamma.array() * (proj.array() - mean);
  Vec out = (ev.beta2 / ev.omega2) * ev.logit_scale * prior.centers_times(w);
  out += (ev.alpha * ev.sigma0_sq / ev.omega2) * v;
  return out;
}

Vec tweedie_vjp(const AnalyticPrior& prior, const Vec& state, int t,
                const DiffusionSchedule& schedule, const Vec& v) {
  return tweedie_vjp(prior, evaluate(prior, state, t, schedule), v);
}

}  // namespace facdiff
