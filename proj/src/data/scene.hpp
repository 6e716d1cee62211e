#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "data/labels.hpp"

namespace cinelab {

struct Rgb {
  std::uint8_t r, g, b;
};

enum class Shape { kEllipse, kRectangle, kTriangle };

// Fixed saturated sprite palette. One object per clip, drawn in a palette
// color, lets the motion oracle track it by color keying alone.
struct PaletteEntry {
  std::string word;
  Rgb color;
};
const std::vector<PaletteEntry>& sprite_palette();  // 8 entries

// Caption scene vocabulary. Every scene word is visually grounded: it picks
// the sky/ground tints of the rendered background.
struct SceneWord {
  std::string word;
  Rgb sky, ground;
};
const std::vector<SceneWord>& scene_words();  // 8 entries

const std::vector<std::string>& shape_words();  // per Shape
const std::vector<std::string>& shape_verbs();  // fixed verb per shape

struct SceneSpec {
  std::uint64_t seed = 0;   // identical seed => bit-identical background texture
  int bg_size = 256;
  Shape object_shape = Shape::kEllipse;
  int object_color = 0;        // index into sprite_palette()
  double object_size_frac = 0.3;  // of frame height, in [0.05, 0.9]
  std::optional<double> horizon_frac;  // absent => bird view
  double roll_deg = 0.0;
  int scene_word = 0;          // index into scene_words()
  double obj_start_u = 0.0;    // initial on-screen offset from frame center, px
  double obj_start_v = 0.0;
};

// "A red ellipse drifts over hills."
std::string scene_caption(const SceneSpec& spec);

// Closed caption vocabulary (template + palette + shapes + verbs + scenes +
// cinematic label words). The aligner's tokenizer is built over this list.
std::vector<std::string> caption_vocabulary();

}  // namespace cinelab
