#pragma once

#include <stdexcept>

#include "core/image.hpp"
#include "data/scene.hpp"
#include "data/trajectory.hpp"

namespace cinelab {

struct RenderError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Deterministic background texture: sky/ground split at the horizon plus
// multi-octave value noise, all derived from spec.seed.
// frame_h sets where the horizon lands: at horizon_frac of a frame_h-pixel
// window centered on the background.
Image3F make_background(const SceneSpec& spec, int frame_h = 64);

// 2.5-D renderer. Frame t samples the background within the rotated, scaled
// window centered at (cx_t, cy_t), then composites the object sprite with
// parallax: the foreground layer translates at twice the camera rate and
// scales as z^rho. Defocus: sigma_bg = 2*f_t on the background,
// sigma_fg = 2*(1-f_t) on the sprite.
// Throws RenderError when the viewport would leave the background.
VideoClip render_clip(const SceneSpec& spec, const CameraTrajectory& traj, int H, int W);

}  // namespace cinelab
