#include "data/labels.hpp"

#include <algorithm>
#include <cmath>

namespace cinelab {

namespace {

const std::array<std::string, kNumFramings> kFramingNames = {
    "close up shot", "medium shot", "full shot", "long shot"};
const std::array<std::string, kNumAngles> kAngleNames = {
    "low angle", "eye level", "high angle", "bird angle", "dutch angle"};
const std::array<std::string, kNumMovements> kMovementNames = {
    "panning left", "panning right", "tilt up",  "tilt down",  "zoom in", "zoom out",
    "dolly in",     "dolly out",     "tracking shot", "rack focus", "still"};

// Axis occupancy for combination rules: 0 = horizontal, 1 = vertical, 2 = scale.
int movement_axis(Movement m) {
  switch (m) {
    case Movement::kPanLeft:
    case Movement::kPanRight:
      return 0;
    case Movement::kTiltUp:
    case Movement::kTiltDown:
      return 1;
    case Movement::kZoomIn:
    case Movement::kZoomOut:
    case Movement::kDollyIn:
    case Movement::kDollyOut:
      return 2;
    default:
      return -1;  // exclusive movements
  }
}

}  // namespace

const std::string& framing_name(Framing f) { return kFramingNames[static_cast<int>(f)]; }
const std::string& angle_name(Angle a) { return kAngleNames[static_cast<int>(a)]; }
const std::string& movement_name(Movement m) { return kMovementNames[static_cast<int>(m)]; }

Framing parse_framing(const std::string& s) {
  for (int i = 0; i < kNumFramings; ++i)
    if (kFramingNames[i] == s) return static_cast<Framing>(i);
  throw LabelError("unknown framing: " + s);
}

Angle parse_angle(const std::string& s) {
  for (int i = 0; i < kNumAngles; ++i)
    if (kAngleNames[i] == s) return static_cast<Angle>(i);
  throw LabelError("unknown angle: " + s);
}

Movement parse_movement(const std::string& s) {
  for (int i = 0; i < kNumMovements; ++i)
    if (kMovementNames[i] == s) return static_cast<Movement>(i);
  throw LabelError("unknown movement: " + s);
}

const std::array<Framing, kNumFramings>& all_framings() {
  static const std::array<Framing, kNumFramings> a = {Framing::kCloseUp, Framing::kMedium,
                                                      Framing::kFull, Framing::kLong};
  return a;
}

const std::array<Angle, kNumAngles>& all_angles() {
  static const std::array<Angle, kNumAngles> a = {Angle::kLow, Angle::kEye, Angle::kHigh,
                                                  Angle::kBird, Angle::kDutch};
  return a;
}

const std::array<Movement, kNumMovements>& all_movements() {
  static const std::array<Movement, kNumMovements> a = {
      Movement::kPanLeft, Movement::kPanRight, Movement::kTiltUp,    Movement::kTiltDown,
      Movement::kZoomIn,  Movement::kZoomOut,  Movement::kDollyIn,   Movement::kDollyOut,
      Movement::kTracking, Movement::kRackFocus, Movement::kStill};
  return a;
}

const FramingBand& framing_band(Framing f) {
  // gen_* keeps the generator away from band edges: defocus shrinks the
  // measurable silhouette by a pixel or two, and zoom drift must not cross a
  // band boundary within a clip.
  static const std::array<FramingBand, kNumFramings> bands = {{
      {0.75, 0.90, 0.79, 0.86},  // close up
      {0.40, 0.60, 0.46, 0.56},  // medium
      {0.25, 0.40, 0.30, 0.37},  // full
      {0.05, 0.15, 0.09, 0.14},  // long
  }};
  return bands[static_cast<int>(f)];
}

std::optional<Framing> framing_from_height_frac(double frac) {
  if (frac >= 0.75) return Framing::kCloseUp;
  if (frac >= 0.40 && frac < 0.60) return Framing::kMedium;
  if (frac >= 0.25 && frac < 0.40) return Framing::kFull;
  if (frac <= 0.15) return Framing::kLong;
  return std::nullopt;  // guard gap
}

std::optional<Angle> angle_from_horizon(std::optional<double> horizon_frac, double roll_deg) {
  if (std::abs(roll_deg) >= 10.0) return Angle::kDutch;
  if (!horizon_frac.has_value()) return Angle::kBird;
  double h = *horizon_frac;
  if (h >= 0.65) return Angle::kLow;
  if (h >= 0.35) return Angle::kEye;
  if (h >= 0.15) return Angle::kHigh;
  return std::nullopt;  // below every band
}

bool movements_compatible(const std::vector<Movement>& set) {
  if (set.empty()) return false;
  if (set.size() == 1) return true;
  if (set.size() > 3) return false;
  bool axis_used[3] = {false, false, false};
  for (Movement m : set) {
    int axis = movement_axis(m);
    if (axis < 0) return false;  // still / rack focus / tracking do not combine
    if (axis_used[axis]) return false;
    axis_used[axis] = true;
  }
  return true;
}

}  // namespace cinelab
