#include "diffusion/schedule.hpp"

#include <cmath>

namespace cinelab {

NoiseSchedule::NoiseSchedule(int t, double beta_start, double beta_end) : t_train(t) {
  if (t < 1) throw NnError("NoiseSchedule: T must be positive");
  beta.resize(t);
  alpha.resize(t);
  alpha_bar.resize(t);
  double prod = 1.0;
  for (int i = 0; i < t; ++i) {
    beta[i] = t == 1 ? beta_start : beta_start + (beta_end - beta_start) * i / (t - 1);
    alpha[i] = 1.0 - beta[i];
    prod *= alpha[i];
    alpha_bar[i] = prod;
  }
}

double NoiseSchedule::alpha_bar_at(int t) const {
  if (t < 0 || t > t_train) throw NnError("alpha_bar_at: timestep out of range");
  return t == 0 ? 1.0 : alpha_bar[t - 1];
}

Mat q_sample(const NoiseSchedule& ns, const Mat& x0, int t, const Mat& eps) {
  if (t < 1 || t > ns.t_train) throw NnError("q_sample: timestep out of range");
  if (x0.rows() != eps.rows() || x0.cols() != eps.cols())
    throw NnError("q_sample: shape mismatch");
  const double ab = ns.alpha_bar_at(t);
  return static_cast<float>(std::sqrt(ab)) * x0 +
         static_cast<float>(std::sqrt(1.0 - ab)) * eps;
}

Mat cfg_epsilon(const Mat& eps_cond, const Mat& eps_uncond, double w) {
  if (eps_cond.rows() != eps_uncond.rows() || eps_cond.cols() != eps_uncond.cols())
    throw NnError("cfg_epsilon: shape mismatch");
  return eps_uncond + static_cast<float>(w) * (eps_cond - eps_uncond);
}

}  // namespace cinelab
