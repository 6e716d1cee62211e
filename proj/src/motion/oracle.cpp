#include "motion/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <stdexcept>

#include "data/scene.hpp"

namespace cinelab {

namespace {

constexpr double kPi = 3.14159265358979323846;

// out_mask (optional) receives per-pixel membership of the winning component.
std::optional<ObjectTrackPoint> key_object(const Image8& f,
                                           std::vector<std::uint8_t>* out_mask = nullptr) {
  const auto& palette = sprite_palette();
  const int n = f.h * f.w;
  std::vector<std::int8_t> label(n, -1);

  for (int y = 0; y < f.h; ++y)
    for (int x = 0; x < f.w; ++x) {
      double r = f.at(y, x, 0), g = f.at(y, x, 1), b = f.at(y, x, 2);
      double sat = std::max({r, g, b}) - std::min({r, g, b});
      if (sat < 90.0) continue;  // background tints are muted by construction
      double norm = std::sqrt(r * r + g * g + b * b);
      if (norm < 1.0) continue;
      int best = -1;
      double best_dot = 0.95;  // hue-direction gate
      for (std::size_t k = 0; k < palette.size(); ++k) {
        double pr = palette[k].color.r, pg = palette[k].color.g, pb = palette[k].color.b;
        double pn = std::sqrt(pr * pr + pg * pg + pb * pb);
        double dot = (r * pr + g * pg + b * pb) / (norm * pn);
        if (dot > best_dot) {
          best_dot = dot;
          best = static_cast<int>(k);
        }
      }
      if (best >= 0) label[y * f.w + x] = static_cast<std::int8_t>(best);
    }

  // Largest 4-connected component over all palette labels.
  std::vector<int> comp(n, -1);
  int best_size = 0, best_id = -1;
  std::vector<int> best_pixels;
  int next_id = 0;
  for (int start = 0; start < n; ++start) {
    if (label[start] < 0 || comp[start] >= 0) continue;
    std::deque<int> queue = {start};
    comp[start] = next_id;
    std::vector<int> pixels;
    while (!queue.empty()) {
      int p = queue.front();
      queue.pop_front();
      pixels.push_back(p);
      int y = p / f.w, x = p % f.w;
      const int dy[4] = {-1, 1, 0, 0}, dx[4] = {0, 0, -1, 1};
      for (int k = 0; k < 4; ++k) {
        int ny = y + dy[k], nx = x + dx[k];
        if (ny < 0 || ny >= f.h || nx < 0 || nx >= f.w) continue;
        int q = ny * f.w + nx;
        if (comp[q] < 0 && label[q] == label[p]) {
          comp[q] = next_id;
          queue.push_back(q);
        }
      }
    }
    if (static_cast<int>(pixels.size()) > best_size) {
      best_size = static_cast<int>(pixels.size());
      best_id = next_id;
      best_pixels = std::move(pixels);
    }
    ++next_id;
  }
  (void)best_id;
  // Long-shot sprites occupy only tens of pixels; the keying itself is
  // specific enough that a small area floor suffices.
  if (best_size < std::max(6, n / 400)) return std::nullopt;

  ObjectTrackPoint pt;
  pt.x0 = f.w;
  pt.y0 = f.h;
  pt.x1 = 0;
  pt.y1 = 0;
  double sx = 0, sy = 0;
  for (int p : best_pixels) {
    int y = p / f.w, x = p % f.w;
    sx += x;
    sy += y;
    pt.x0 = std::min(pt.x0, x);
    pt.x1 = std::max(pt.x1, x);
    pt.y0 = std::min(pt.y0, y);
    pt.y1 = std::max(pt.y1, y);
  }
  pt.cx = sx / best_size;
  pt.cy = sy / best_size;
  pt.box_w = pt.x1 - pt.x0 + 1;
  pt.box_h = pt.y1 - pt.y0 + 1;
  pt.area = best_size;
  if (out_mask) {
    out_mask->assign(n, 0);
    for (int p : best_pixels) (*out_mask)[p] = 1;
  }
  return pt;
}

// Laplacian variance over interior pixels accepted by `keep`.
template <typename Pred>
double laplacian_variance_if(const ImageF& img, Pred keep) {
  double sum = 0, sum2 = 0;
  int count = 0;
  for (int y = 1; y < img.h - 1; ++y)
    for (int x = 1; x < img.w - 1; ++x) {
      if (!keep(y, x)) continue;
      double v = img.at(y, x + 1) + img.at(y, x - 1) + img.at(y + 1, x) + img.at(y - 1, x) -
                 4.0 * img.at(y, x);
      sum += v;
      sum2 += v * v;
      ++count;
    }
  if (count < 4) return 0.0;
  double mean = sum / count;
  return sum2 / count - mean * mean;
}

struct HorizonFit {
  bool present = false;
  double row_frac = 0.5;
  double roll_deg = 0.0;
};

HorizonFit fit_horizon(const ImageF& gray, const std::optional<ObjectTrackPoint>& obj) {
  HorizonFit fit;
  const int h = gray.h, w = gray.w;
  if (h < 8 || w < 8) return fit;

  std::vector<double> col_row(w, -1), col_strength(w, 0);
  std::vector<bool> col_bg(w, true);
  if (obj)
    for (int x = std::max(0, obj->x0 - 2); x <= std::min(w - 1, obj->x1 + 2); ++x) col_bg[x] = false;

  double total_grad = 0;
  int total_count = 0;
  for (int x = 0; x < w; ++x) {
    double best = -1;
    int best_y = -1;
    for (int y = 2; y < h - 2; ++y) {
      double g = std::abs(gray.at(y + 1, x) - gray.at(y - 1, x)) * 0.5;
      total_grad += g;
      ++total_count;
      if (col_bg[x] && g > best) {
        best = g;
        best_y = y;
      }
    }
    col_row[x] = best_y;
    col_strength[x] = best;
  }
  double mean_grad = total_count ? total_grad / total_count : 0.0;

  std::vector<int> bg_cols;
  for (int x = 0; x < w; ++x)
    if (col_bg[x] && col_row[x] >= 0) bg_cols.push_back(x);
  // A wide subject can occlude most columns; a handful on each side still
  // pins down the line.
  if (static_cast<int>(bg_cols.size()) < std::max(8, w / 8)) return fit;

  // Two-pass least-squares line fit with 3 px outlier rejection.
  auto fit_line = [&](const std::vector<int>& cols, double& slope, double& intercept) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int x : cols) {
      sx += x;
      sy += col_row[x];
      sxx += static_cast<double>(x) * x;
      sxy += x * col_row[x];
    }
    double n = static_cast<double>(cols.size());
    double denom = n * sxx - sx * sx;
    slope = denom != 0 ? (n * sxy - sx * sy) / denom : 0.0;
    intercept = (sy - slope * sx) / n;
  };

  double slope = 0, intercept = 0;
  fit_line(bg_cols, slope, intercept);
  std::vector<int> inliers;
  for (int x : bg_cols)
    if (std::abs(col_row[x] - (slope * x + intercept)) <= 3.0) inliers.push_back(x);
  if (inliers.size() < bg_cols.size() * 6 / 10) return fit;
  fit_line(inliers, slope, intercept);

  double strength = 0;
  for (int x : inliers) strength += col_strength[x];
  strength /= static_cast<double>(inliers.size());
  if (strength < 2.0 * mean_grad) return fit;

  fit.present = true;
  fit.row_frac = (slope * ((w - 1) / 2.0) + intercept) / (h - 1);
  fit.roll_deg = -std::atan(slope) * 180.0 / kPi;
  return fit;
}

// Spearman rank correlation against time.
double spearman_vs_time(const std::vector<double>& v) {
  const int n = static_cast<int>(v.size());
  if (n < 3) return 0.0;
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return v[a] < v[b]; });
  std::vector<double> rank(n);
  for (int r = 0; r < n; ++r) rank[idx[r]] = r;
  double mean = (n - 1) / 2.0;
  double num = 0, da = 0, db = 0;
  for (int i = 0; i < n; ++i) {
    num += (i - mean) * (rank[i] - mean);
    da += (i - mean) * (i - mean);
    db += (rank[i] - mean) * (rank[i] - mean);
  }
  if (da == 0 || db == 0) return 0.0;
  return num / std::sqrt(da * db);
}

}  // namespace

MotionReport analyze_clip(const VideoClip& clip) {
  if (clip.t < 2) throw std::invalid_argument("analyze_clip needs at least 2 frames");
  MotionReport rep;
  rep.frames = clip.t;
  rep.frame_h = clip.h;
  rep.frame_w = clip.w;

  std::vector<ImageF> gray;
  gray.reserve(clip.t);
  std::vector<Image8> rgb;
  rgb.reserve(clip.t);
  for (int t = 0; t < clip.t; ++t) {
    rgb.push_back(clip.frame(t));
    gray.push_back(to_luma(rgb.back()));
  }

  const int h = clip.h, w = clip.w;

  // Per-frame object keys; the foreground moves at its own (parallax) rate, so
  // it is masked out of every global-motion fit.
  std::vector<std::optional<ObjectTrackPoint>> keys(clip.t);
  std::vector<std::vector<std::uint8_t>> obj_mask(clip.t);
  for (int t = 0; t < clip.t; ++t) keys[t] = key_object(rgb[t], &obj_mask[t]);

  const int dilate = 8;  // covers defocus blur (3 sigma <= 6 px) plus supersampling
  auto mask_without_object = [&](int t) -> std::optional<ImageF> {
    if (!keys[t] && !keys[t + 1]) return std::nullopt;
    ImageF m(h, w);
    for (auto& v : m.px) v = 1.f;
    for (int i : {t, t + 1}) {
      if (!keys[i]) continue;
      const auto& pt = *keys[i];
      for (int y = std::max(0, pt.y0 - dilate); y <= std::min(h - 1, pt.y1 + dilate); ++y)
        for (int x = std::max(0, pt.x0 - dilate); x <= std::min(w - 1, pt.x1 + dilate); ++x)
          m.at(y, x) = 0.f;
    }
    return m;
  };

  double sum_dx = 0, sum_dy = 0, sum_dlogs = 0, sum_dtheta = 0;
  double gap_sum = 0;
  int gap_pairs = 0;
  for (int t = 0; t + 1 < clip.t; ++t) {
    auto mask = mask_without_object(t);
    SimilarityTransform tr =
        estimate_similarity(gray[t], gray[t + 1], mask ? &*mask : nullptr);
    if (!tr.converged) ++rep.nonconverged;
    rep.pairwise.push_back(tr);
    sum_dx += tr.tx;
    sum_dy += tr.ty;
    sum_dlogs += std::log(tr.s);
    sum_dtheta += tr.theta_deg;

    // Parallax signal: the subject's own scale rate versus the background's.
    // Only pairs with an unclamped (not frame-edge-touching) box of medium
    // size or larger carry a trustworthy box-height rate.
    if (keys[t] && keys[t + 1]) {
      auto unclamped = [&](const ObjectTrackPoint& p) {
        return p.x0 > 0 && p.y0 > 0 && p.x1 < w - 1 && p.y1 < h - 1;
      };
      if (unclamped(*keys[t]) && unclamped(*keys[t + 1]) && keys[t]->box_h >= 0.40 * h) {
        // sqrt(component area) quantizes far less than the box height
        gap_sum += 0.5 * std::log(static_cast<double>(keys[t + 1]->area) / keys[t]->area) -
                   std::log(tr.s);
        ++gap_pairs;
      }
    }
  }
  const double pairs = clip.t - 1;
  rep.mean_dx = sum_dx / pairs;
  rep.mean_dy = sum_dy / pairs;
  rep.mean_dlogs = sum_dlogs / pairs;
  rep.mean_dtheta = sum_dtheta / pairs;
  rep.fg_bg_scale_gap = gap_pairs >= 3 ? gap_sum / gap_pairs : 0.0;

  // Full object track only when every frame keyed; the frame-0 key survives
  // later exits and anchors framing.
  if (std::all_of(keys.begin(), keys.end(), [](const auto& k) { return k.has_value(); })) {
    std::vector<ObjectTrackPoint> track;
    for (const auto& k : keys) track.push_back(*k);
    rep.object_track = std::move(track);
  }

  for (int t = 0; t < clip.t; ++t) {
    if (keys[t]) {
      const auto& m = obj_mask[t];
      // object sharpness over the eroded keyed component; its boundary mixes
      // with background and would track the wrong blur
      auto interior = [&](int y, int x) {
        return m[y * w + x] && m[y * w + x - 1] && m[y * w + x + 1] && m[(y - 1) * w + x] &&
               m[(y + 1) * w + x];
      };
      rep.sharpness_object.push_back(laplacian_variance_if(gray[t], interior));
      const auto& pt = *keys[t];
      auto outside = [&](int y, int x) {
        return y < pt.y0 - 6 || y > pt.y1 + 6 || x < pt.x0 - 6 || x > pt.x1 + 6;
      };
      rep.sharpness_background.push_back(laplacian_variance_if(gray[t], outside));
    } else {
      rep.sharpness_object.push_back(0.0);
      rep.sharpness_background.push_back(
          laplacian_variance_if(gray[t], [](int, int) { return true; }));
    }
  }

  // Frame choice for the static measurements (framing box, horizon): frame 0,
  // except when the geometry is static (rack focus / still), where the
  // sharpest view of each layer is the most reliable one.
  bool geometry_static = std::abs(rep.mean_dx) < 0.1 && std::abs(rep.mean_dy) < 0.1 &&
                         std::abs(rep.mean_dlogs) < 0.0025 && std::abs(rep.mean_dtheta) < 0.2;
  int fr_frame = 0, hz_frame = 0;
  if (geometry_static) {
    for (int t = 1; t < clip.t; ++t) {
      if (keys[t] && rep.sharpness_object[t] > rep.sharpness_object[fr_frame]) fr_frame = t;
      if (rep.sharpness_background[t] > rep.sharpness_background[hz_frame]) hz_frame = t;
    }
    if (!keys[fr_frame]) fr_frame = 0;
  }
  rep.first_key = keys[fr_frame];

  HorizonFit fit = fit_horizon(gray[hz_frame], keys[hz_frame]);
  if (fit.present) {
    rep.horizon_row_frac = fit.row_frac;
    rep.roll_deg = fit.roll_deg;
  }

  // Under camera roll the axis-aligned box overstates the subject size, so the
  // framing extents are re-measured along the (fitted) rolled axes.
  if (rep.first_key && fit.present && std::abs(fit.roll_deg) > 2.0) {
    const double r = fit.roll_deg * kPi / 180.0;
    const double ux = -std::sin(r), uy = std::cos(r);  // subject-up in image coords
    double lo_h = 1e9, hi_h = -1e9, lo_w = 1e9, hi_w = -1e9;
    const auto& m = obj_mask[fr_frame];
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        if (!m[y * w + x]) continue;
        double ph = ux * x + uy * y;
        double pw = uy * x - ux * y;
        lo_h = std::min(lo_h, ph);
        hi_h = std::max(hi_h, ph);
        lo_w = std::min(lo_w, pw);
        hi_w = std::max(hi_w, pw);
      }
    rep.first_key->box_h = hi_h - lo_h + 1;
    rep.first_key->box_w = hi_w - lo_w + 1;
  }
  return rep;
}

Classification classify_clip(const MotionReport& report, const OracleThresholds& th) {
  if (report.frames < 2 || report.pairwise.empty())
    throw std::invalid_argument("classify_clip: incomplete report");
  Classification out;

  const double dx = report.mean_dx, dy = report.mean_dy, ds = report.mean_dlogs;
  const double gap = report.fg_bg_scale_gap;

  // Per-axis movement rules; several may fire at once.
  if (dx <= -th.tau_t) out.movements.insert(Movement::kPanRight);
  if (dx >= th.tau_t) out.movements.insert(Movement::kPanLeft);
  if (dy >= th.tau_t) out.movements.insert(Movement::kTiltUp);
  if (dy <= -th.tau_t) out.movements.insert(Movement::kTiltDown);
  if (ds >= th.tau_s)
    out.movements.insert(gap >= th.tau_d ? Movement::kDollyIn : Movement::kZoomIn);
  if (ds <= -th.tau_s)
    out.movements.insert(gap <= -th.tau_d ? Movement::kDollyOut : Movement::kZoomOut);

  // Tracking: the global field translates but the subject holds its screen
  // position. It then explains the translation, so pan/tilt labels drop.
  if (report.object_track && std::abs(ds) < th.tau_s &&
      std::abs(dx) + std::abs(dy) >= th.tau_t) {
    const auto& tr = *report.object_track;
    double disp = std::hypot(tr.back().cx - tr.front().cx, tr.back().cy - tr.front().cy);
    if (disp < th.tau_t * (report.frames - 1)) {
      out.movements.insert(Movement::kTracking);
      out.movements.erase(Movement::kPanLeft);
      out.movements.erase(Movement::kPanRight);
      out.movements.erase(Movement::kTiltUp);
      out.movements.erase(Movement::kTiltDown);
    }
  }

  // Rack focus: static geometry with the background sharpness sweeping
  // monotonically through a wide range. A still clip repeats the same frame,
  // so its sharpness series is flat.
  if (out.movements.empty() && !report.sharpness_background.empty()) {
    double rho_bg = spearman_vs_time(report.sharpness_background);
    auto [lo, hi] = std::minmax_element(report.sharpness_background.begin(),
                                        report.sharpness_background.end());
    if (std::abs(rho_bg) >= 0.6 && *lo > 0 && *hi / *lo >= 1.5)
      out.movements.insert(Movement::kRackFocus);
  }

  if (out.movements.empty()) out.movements.insert(Movement::kStill);

  // Framing from the first-frame object box height fraction.
  if (report.first_key && report.frame_h > 0)
    out.framing = framing_from_height_frac(report.first_key->box_h / report.frame_h);

  // Angle from horizon placement and roll (dutch before bird).
  out.angle = angle_from_horizon(report.horizon_row_frac, report.roll_deg);
  return out;
}

}  // namespace cinelab
