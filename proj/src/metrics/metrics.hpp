#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "clip/model.hpp"
#include "data/labels.hpp"
#include "motion/oracle.hpp"

namespace cinelab {

struct MetricReport {
  std::string name;
  double value = 0;
  int count = 0;
  std::string config_hash;
  json per_item = json::array();

  json to_json() const;
};

// Mean cosine similarity between each clip's video embedding and its prompt's
// text embedding under the given encoder.
MetricReport clipsim(const std::vector<VideoClip>& clips,
                     const std::vector<std::string>& prompts, ClipModel& model);

// Frechet distance between the Gaussians fitted to two embedding sets
// (rows = samples). Covariances are regularized by +1e-6 I; the matrix square
// root uses a symmetric eigendecomposition with negative eigenvalues clamped.
double ffd(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

// Fraction of the requested movements that the pixel oracle detects in the
// clip: |requested ∩ classified| / |requested|.
double motion_adherence(const VideoClip& clip, const std::vector<Movement>& requested,
                        const OracleThresholds& thresholds = {});

}  // namespace cinelab
