#include "data/render.hpp"

#include <algorithm>
#include <cmath>

#include "core/rng.hpp"

namespace cinelab {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr float kSigmaMax = 2.0f;   // defocus blur at the far end of the focus range
constexpr double kParallax = 2.0;   // foreground/background depth ratio

// Hash-based lattice value in [-1, 1], pure function of (seed, octave, ix, iy).
float lattice(std::uint64_t seed, int octave, int ix, int iy) {
  std::uint64_t x = seed;
  x ^= 0x9e3779b97f4a7c15ull * (static_cast<std::uint64_t>(octave) + 1);
  x ^= 0xc2b2ae3d27d4eb4full * (static_cast<std::uint64_t>(static_cast<std::uint32_t>(ix)) + 1);
  x ^= 0x165667b19e3779f9ull * (static_cast<std::uint64_t>(static_cast<std::uint32_t>(iy)) + 1);
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  x ^= x >> 31;
  return static_cast<float>(x >> 11) * 0x1.0p-52f - 1.0f;
}

float smoothstep(float t) { return t * t * (3.f - 2.f * t); }

float value_noise(std::uint64_t seed, int octave, float x, float y, float cell) {
  float fx = x / cell, fy = y / cell;
  int ix = static_cast<int>(std::floor(fx)), iy = static_cast<int>(std::floor(fy));
  float tx = smoothstep(fx - ix), ty = smoothstep(fy - iy);
  float v00 = lattice(seed, octave, ix, iy), v10 = lattice(seed, octave, ix + 1, iy);
  float v01 = lattice(seed, octave, ix, iy + 1), v11 = lattice(seed, octave, ix + 1, iy + 1);
  float a = v00 * (1 - tx) + v10 * tx;
  float b = v01 * (1 - tx) + v11 * tx;
  return a * (1 - ty) + b * ty;
}

struct Mat2 {
  double a, b, c, d;  // row-major
};

Mat2 rot(double deg) {
  double r = deg * kPi / 180.0;
  double cs = std::cos(r), sn = std::sin(r);
  return {cs, -sn, sn, cs};
}

}  // namespace

Image3F make_background(const SceneSpec& spec, int frame_h) {
  const auto& scene = scene_words()[spec.scene_word];
  const int B = spec.bg_size;
  Image3F bg(B, B);

  // Horizon row in background coordinates; the camera starts at the center.
  bool has_horizon = spec.horizon_frac.has_value();
  double y_h = 0.0;
  if (has_horizon) y_h = B / 2.0 + (*spec.horizon_frac - 0.5) * frame_h;

  static const float cells[4] = {32.f, 16.f, 8.f, 4.f};
  static const float amps[4] = {26.f, 17.f, 11.f, 7.f};

  // The lattice is sampled in rotated coordinates: axis-aligned cell boundaries
  // would otherwise form faint horizontal lines that mimic a horizon.
  const float ca = std::cos(0.3f), sa = std::sin(0.3f);
  for (int y = 0; y < B; ++y) {
    for (int x = 0; x < B; ++x) {
      float rx = ca * x - sa * y, ry = sa * x + ca * y;
      float n = 0.f;
      for (int o = 0; o < 4; ++o) n += amps[o] * value_noise(spec.seed, o, rx, ry, cells[o]);
      float sky_w = 0.f;
      if (has_horizon) sky_w = std::clamp(static_cast<float>(y_h - y) + 0.5f, 0.f, 1.f);
      float base[3] = {
          sky_w * scene.sky.r + (1 - sky_w) * scene.ground.r,
          sky_w * scene.sky.g + (1 - sky_w) * scene.ground.g,
          sky_w * scene.sky.b + (1 - sky_w) * scene.ground.b,
      };
      for (int c = 0; c < 3; ++c) bg.at(y, x, c) = std::clamp(base[c] + n, 0.f, 255.f);
    }
  }
  return bg;
}

namespace {

// Coverage of the sprite at local coordinates (half-height = 1), 2x2 supersampled.
bool inside_shape(Shape shape, double lx, double ly) {
  switch (shape) {
    case Shape::kEllipse: {
      double ex = lx / 0.7;
      return ex * ex + ly * ly <= 1.0;
    }
    case Shape::kRectangle:
      return std::abs(lx) <= 0.75 && std::abs(ly) <= 1.0;
    case Shape::kTriangle:
      // apex up (ly = -1), base down (ly = +1)
      return ly >= -1.0 && ly <= 1.0 && std::abs(lx) <= 0.85 * (ly + 1.0) / 2.0;
  }
  return false;
}

}  // namespace

VideoClip render_clip(const SceneSpec& spec, const CameraTrajectory& traj, int H, int W) {
  const int T = traj.frames();
  if (T < 1) throw RenderError("empty trajectory");
  const int B = spec.bg_size;

  // Pre-check: every frame's (rotated, zoomed, blur-padded) window must stay
  // inside the background.
  const double margin = 1.0 + 3.0 * kSigmaMax;
  for (int t = 0; t < T; ++t) {
    Mat2 m = rot(traj.roll_deg[t]);
    double hw = (W - 1) / 2.0, hh = (H - 1) / 2.0;
    for (int sy = -1; sy <= 1; sy += 2)
      for (int sx = -1; sx <= 1; sx += 2) {
        double dx = sx * hw, dy = sy * hh;
        double px = traj.cx[t] + (m.a * dx + m.b * dy) / traj.z[t];
        double py = traj.cy[t] + (m.c * dx + m.d * dy) / traj.z[t];
        if (px < margin || px > B - 1 - margin || py < margin || py > B - 1 - margin)
          throw RenderError("viewport leaves background at frame " + std::to_string(t));
      }
  }

  Image3F bg = make_background(spec, H);
  VideoClip clip(T, H, W);

  const auto obj_rgb = sprite_palette()[spec.object_color].color;
  // Foreground layer state: world anchor and the twice-speed virtual camera.
  const double ox0 = traj.cx[0] + spec.obj_start_u;
  const double oy0 = traj.cy[0] + spec.obj_start_v;

  Image3F bg_blurred;
  float last_sigma = -1.f;

  for (int t = 0; t < T; ++t) {
    float sigma_bg = kSigmaMax * static_cast<float>(traj.focus[t]);
    float sigma_fg = kSigmaMax * static_cast<float>(1.0 - traj.focus[t]);
    if (sigma_bg != last_sigma) {
      bg_blurred = gaussian_blur(bg, sigma_bg);
      last_sigma = sigma_bg;
    }

    Image3F frame(H, W);
    Mat2 m = rot(traj.roll_deg[t]);
    const double hw = (W - 1) / 2.0, hh = (H - 1) / 2.0;
    for (int v = 0; v < H; ++v)
      for (int u = 0; u < W; ++u) {
        double dx = u - hw, dy = v - hh;
        double px = traj.cx[t] + (m.a * dx + m.b * dy) / traj.z[t];
        double py = traj.cy[t] + (m.c * dx + m.d * dy) / traj.z[t];
        float rgb[3];
        sample_bilinear3(bg_blurred, static_cast<float>(px), static_cast<float>(py), rgb);
        for (int c = 0; c < 3; ++c) frame.at(v, u, c) = rgb[c];
      }

    // Object sprite in screen space.
    double camx = traj.cx[0] + kParallax * (traj.cx[t] - traj.cx[0]);
    double camy = traj.cy[0] + kParallax * (traj.cy[t] - traj.cy[0]);
    double obx = ox0, oby = oy0;
    if (traj.tracking) {
      obx += kParallax * (traj.cx[t] - traj.cx[0]);
      oby += kParallax * (traj.cy[t] - traj.cy[0]);
    }
    double zfg = std::pow(traj.z[t], traj.rho);
    double wx = obx - camx, wy = oby - camy;
    // world -> screen uses the inverse window rotation
    double sx = hw + zfg * (m.a * wx + m.c * wy);
    double sy = hh + zfg * (m.b * wx + m.d * wy);
    double half_h = 0.5 * spec.object_size_frac * H * zfg;

    ImageF alpha(H, W);
    Image3F sprite(H, W);
    int x0 = std::max(0, static_cast<int>(std::floor(sx - 2 * half_h)) - 2);
    int x1 = std::min(W - 1, static_cast<int>(std::ceil(sx + 2 * half_h)) + 2);
    int y0 = std::max(0, static_cast<int>(std::floor(sy - 2 * half_h)) - 2);
    int y1 = std::min(H - 1, static_cast<int>(std::ceil(sy + 2 * half_h)) + 2);
    for (int v = y0; v <= y1; ++v)
      for (int u = x0; u <= x1; ++u) {
        int hits = 0;
        for (int ssy = 0; ssy < 2; ++ssy)
          for (int ssx = 0; ssx < 2; ++ssx) {
            double pxs = u - 0.25 + 0.5 * ssx - sx;
            double pys = v - 0.25 + 0.5 * ssy - sy;
            // screen -> local undoes the screen rotation
            double lx = (m.a * pxs + m.c * pys) / half_h;
            double ly = (m.b * pxs + m.d * pys) / half_h;
            if (inside_shape(spec.object_shape, lx, ly)) ++hits;
          }
        float a = hits / 4.f;
        alpha.at(v, u) = a;
        // Brightness texture in object-local coordinates: it translates and
        // scales with the foreground layer, giving the motion estimator
        // gradients inside the sprite, and leaves the hue keyable.
        double cx_l = (m.a * (u - sx) + m.c * (v - sy)) / half_h;
        double cy_l = (m.b * (u - sx) + m.d * (v - sy)) / half_h;
        float n = 0.6f * value_noise(spec.seed ^ 0x5eedf00dull, 5, static_cast<float>(cx_l * 3),
                                     static_cast<float>(cy_l * 3), 1.f) +
                  0.4f * value_noise(spec.seed ^ 0x5eedf00dull, 6, static_cast<float>(cx_l * 7),
                                     static_cast<float>(cy_l * 7), 1.f);
        float shade = 0.8f + 0.2f * n;
        sprite.at(v, u, 0) = a * obj_rgb.r * shade;
        sprite.at(v, u, 1) = a * obj_rgb.g * shade;
        sprite.at(v, u, 2) = a * obj_rgb.b * shade;
      }
    if (sigma_fg > 0.f) {
      alpha = gaussian_blur(alpha, sigma_fg);
      sprite = gaussian_blur(sprite, sigma_fg);
    }
    for (int v = 0; v < H; ++v)
      for (int u = 0; u < W; ++u) {
        float a = alpha.at(v, u);
        for (int c = 0; c < 3; ++c)
          frame.at(v, u, c) = frame.at(v, u, c) * (1 - a) + sprite.at(v, u, c);
      }

    clip.set_frame(t, to_u8(frame));
  }
  return clip;
}

}  // namespace cinelab
