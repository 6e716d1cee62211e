#pragma once

#include <cstdint>
#include <vector>

#include "data/labels.hpp"

namespace cinelab {

// Per-frame camera state in background-pixel coordinates. The parallax
// exponent rho controls how much faster the foreground layer scales than the
// background (1 for zoom, 1.5 for dolly), which is what makes the two
// distinguishable to a pixel-level observer.
struct CameraTrajectory {
  std::vector<double> cx, cy;       // window center, background px
  std::vector<double> z;            // zoom factor, > 0
  std::vector<double> roll_deg;     // camera roll
  std::vector<double> focus;        // rack-focus parameter in [0,1]
  double rho = 1.0;                 // parallax exponent
  std::vector<Movement> movements;  // requested set, generator order
  bool tracking = false;            // object co-moves with the camera

  int frames() const { return static_cast<int>(cx.size()); }
};

// Builds a trajectory satisfying the kinematic invariants of every requested
// movement simultaneously. Throws LabelError on incompatible sets
// (e.g. {still, panning right}).
CameraTrajectory make_trajectory(const std::vector<Movement>& movements, int T,
                                 std::uint64_t rng_seed, double start_cx = 128.0,
                                 double start_cy = 128.0);

}  // namespace cinelab
