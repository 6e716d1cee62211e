#pragma once

#include <optional>
#include <set>
#include <vector>

#include "core/image.hpp"
#include "data/labels.hpp"
#include "motion/lk.hpp"

namespace cinelab {

struct ObjectTrackPoint {
  double cx = 0, cy = 0;        // centroid, px
  double box_h = 0, box_w = 0;  // bounding box, px
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  int area = 0;  // keyed component pixel count
};

// Everything the classifier needs, measured from pixels alone.
struct MotionReport {
  int frames = 0;
  int frame_h = 0, frame_w = 0;
  std::vector<SimilarityTransform> pairwise;  // length T-1
  double mean_dx = 0, mean_dy = 0;            // content px/frame
  double mean_dlogs = 0;                      // per frame
  double mean_dtheta = 0;                     // deg/frame
  // Dolly signal: subject log-scale rate minus background log-scale rate
  // (0 when no usable subject box).
  double fg_bg_scale_gap = 0;
  std::vector<double> sharpness_object;       // Laplacian variance per frame
  std::vector<double> sharpness_background;
  std::optional<std::vector<ObjectTrackPoint>> object_track;  // all frames keyed
  std::optional<ObjectTrackPoint> first_key;  // frame-0 key, survives exits
  std::optional<double> horizon_row_frac;
  double roll_deg = 0;
  int nonconverged = 0;
};

struct OracleThresholds {
  double tau_t = 0.3;    // px/frame, translation
  double tau_s = 0.005;  // per frame, log-scale
  double tau_d = 0.01;   // center/border gap, dolly vs zoom
  double tau_roll = 10.0;  // deg, dutch angle
};

struct Classification {
  std::optional<Framing> framing;
  std::optional<Angle> angle;
  std::set<Movement> movements;
};

MotionReport analyze_clip(const VideoClip& clip);
Classification classify_clip(const MotionReport& report, const OracleThresholds& thresholds = {});

}  // namespace cinelab
