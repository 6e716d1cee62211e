#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cinelab {

struct LabelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// The 20-category cinematic taxonomy: 4 framings, 5 angles, 11 movements.

enum class Framing { kCloseUp, kMedium, kFull, kLong };
enum class Angle { kLow, kEye, kHigh, kBird, kDutch };
enum class Movement {
  kPanLeft,
  kPanRight,
  kTiltUp,
  kTiltDown,
  kZoomIn,
  kZoomOut,
  kDollyIn,
  kDollyOut,
  kTracking,
  kRackFocus,
  kStill,
};

inline constexpr int kNumFramings = 4;
inline constexpr int kNumAngles = 5;
inline constexpr int kNumMovements = 11;

const std::string& framing_name(Framing f);
const std::string& angle_name(Angle a);
const std::string& movement_name(Movement m);

Framing parse_framing(const std::string& s);
Angle parse_angle(const std::string& s);
Movement parse_movement(const std::string& s);

const std::array<Framing, kNumFramings>& all_framings();
const std::array<Angle, kNumAngles>& all_angles();
const std::array<Movement, kNumMovements>& all_movements();

// Framing bands on object bounding-box height fraction (non-overlapping with
// guard gaps): close-up >= 0.75, medium [0.40, 0.60), full [0.25, 0.40),
// long <= 0.15.
struct FramingBand {
  double lo, hi;      // declared band edges
  double gen_lo, gen_hi;  // tighter range the generator draws from
};
const FramingBand& framing_band(Framing f);
std::optional<Framing> framing_from_height_frac(double frac);

// Angle encoding: horizon row fraction low >= 0.65, eye [0.35, 0.65),
// high [0.15, 0.35); bird = no horizon; dutch = |roll| in [15, 30] degrees.
std::optional<Angle> angle_from_horizon(std::optional<double> horizon_frac, double roll_deg);

// Movement compatibility: pan/tilt/zoom/dolly axes combine (one per axis);
// rack focus, still and tracking are exclusive.
bool movements_compatible(const std::vector<Movement>& set);

}  // namespace cinelab
