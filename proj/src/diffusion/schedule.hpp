#pragma once

#include <vector>

#include "nn/tensor.hpp"

namespace cinelab {

// Linear beta schedule with precomputed alpha products. Timesteps are 1-based
// in the public API (t in [1, T]); index t-1 internally.
struct NoiseSchedule {
  int t_train;
  std::vector<double> beta, alpha, alpha_bar;

  explicit NoiseSchedule(int t = 200, double beta_start = 1e-4, double beta_end = 0.02);

  double alpha_bar_at(int t) const;  // t in [0, T]; alpha_bar_at(0) = 1
};

// Forward process: x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps.
Mat q_sample(const NoiseSchedule& ns, const Mat& x0, int t, const Mat& eps);

// Classifier-free guidance combination.
Mat cfg_epsilon(const Mat& eps_cond, const Mat& eps_uncond, double w);

}  // namespace cinelab
