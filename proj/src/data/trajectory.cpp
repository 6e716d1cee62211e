#include "data/trajectory.hpp"

#include <cmath>
#include <string>

#include "core/rng.hpp"

namespace cinelab {

namespace {

std::string set_name(const std::vector<Movement>& set) {
  std::string s;
  for (const auto& m : set) {
    if (!s.empty()) s += " + ";
    s += movement_name(m);
  }
  return s;
}

}  // namespace

CameraTrajectory make_trajectory(const std::vector<Movement>& movements, int T,
                                 std::uint64_t rng_seed, double start_cx, double start_cy) {
  if (T < 1) throw LabelError("trajectory needs at least one frame");
  if (!movements_compatible(movements))
    throw LabelError("category conflict: incompatible movement set {" + set_name(movements) + "}");

  Rng rng(rng_seed);
  CameraTrajectory traj;
  traj.movements = movements;
  traj.cx.assign(T, start_cx);
  traj.cy.assign(T, start_cy);
  traj.z.assign(T, 1.0);
  traj.roll_deg.assign(T, 0.0);
  // Default focus favors the foreground (sigma_fg = 0.5 px) so small sprites
  // stay color-keyable, while keeping visible background texture.
  traj.focus.assign(T, 0.75);

  double dx = 0.0, dy = 0.0, dlogz = 0.0;
  bool rack = false, rack_up = false;

  // In dolly composites the subject must stay on screen long enough for its
  // parallax to be measured, so translation slows down.
  bool has_dolly = false;
  for (Movement m : movements)
    has_dolly = has_dolly || m == Movement::kDollyIn || m == Movement::kDollyOut;
  const double t_lo = has_dolly ? 0.6 : 1.0, t_hi = has_dolly ? 1.0 : 3.0;

  for (Movement m : movements) {
    switch (m) {
      case Movement::kStill:
        break;
      case Movement::kPanLeft:
        dx = -rng.uniform(t_lo, t_hi);
        break;
      case Movement::kPanRight:
        dx = rng.uniform(t_lo, t_hi);
        break;
      case Movement::kTiltUp:
        dy = -rng.uniform(t_lo, t_hi);  // image y grows downward
        break;
      case Movement::kTiltDown:
        dy = rng.uniform(t_lo, t_hi);
        break;
      case Movement::kZoomIn:
        dlogz = rng.uniform(0.02, 0.05);
        traj.rho = 1.0;
        break;
      case Movement::kZoomOut:
        dlogz = -rng.uniform(0.02, 0.05);
        traj.rho = 1.0;
        break;
      case Movement::kDollyIn:
        // upper half of the allowed rate band keeps the parallax signal
        // (center/border scale gap) above the oracle's dolly threshold
        dlogz = rng.uniform(0.035, 0.05);
        traj.rho = 1.5;
        break;
      case Movement::kDollyOut:
        dlogz = -rng.uniform(0.035, 0.05);
        traj.rho = 1.5;
        break;
      case Movement::kTracking:
        dx = (rng.bernoulli(0.5) ? 1.0 : -1.0) * rng.uniform(1.5, 3.0);
        traj.tracking = true;
        break;
      case Movement::kRackFocus:
        rack = true;
        rack_up = rng.bernoulli(0.5);
        break;
    }
  }

  for (int t = 0; t < T; ++t) {
    traj.cx[t] = start_cx + dx * t;
    traj.cy[t] = start_cy + dy * t;
    traj.z[t] = std::exp(dlogz * t);
    if (rack && T > 1) {
      double f = static_cast<double>(t) / (T - 1);
      traj.focus[t] = rack_up ? f : 1.0 - f;
    }
  }
  return traj;
}

}  // namespace cinelab
