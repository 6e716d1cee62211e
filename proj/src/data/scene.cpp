#include "data/scene.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

namespace cinelab {

const std::vector<PaletteEntry>& sprite_palette() {
  static const std::vector<PaletteEntry> p = {
      {"red", {230, 30, 30}},    {"green", {30, 210, 40}},  {"blue", {40, 60, 235}},
      {"yellow", {235, 220, 30}}, {"magenta", {225, 35, 215}}, {"cyan", {35, 220, 220}},
      {"orange", {240, 130, 20}}, {"purple", {130, 35, 220}},
  };
  return p;
}

const std::vector<SceneWord>& scene_words() {
  // Muted sky/ground tints, kept far from the sprite palette so color keying
  // never latches onto the background. Sky is always brighter than ground.
  static const std::vector<SceneWord> s = {
      {"hills", {170, 190, 205}, {95, 120, 80}},
      {"desert", {190, 185, 165}, {150, 130, 90}},
      {"snowfields", {205, 210, 220}, {160, 160, 165}},
      {"sea", {165, 180, 200}, {70, 95, 120}},
      {"sunset", {205, 160, 120}, {100, 80, 70}},
      {"night", {75, 80, 100}, {45, 50, 55}},
      {"meadows", {180, 200, 195}, {110, 140, 85}},
      {"canyons", {195, 175, 160}, {130, 90, 70}},
  };
  return s;
}

const std::vector<std::string>& shape_words() {
  static const std::vector<std::string> s = {"ellipse", "block", "triangle"};
  return s;
}

const std::vector<std::string>& shape_verbs() {
  static const std::vector<std::string> s = {"drifts", "slides", "glides"};
  return s;
}

std::string scene_caption(const SceneSpec& spec) {
  int shape = static_cast<int>(spec.object_shape);
  std::ostringstream os;
  os << "A " << sprite_palette()[spec.object_color].word << " " << shape_words()[shape] << " "
     << shape_verbs()[shape] << " over " << scene_words()[spec.scene_word].word << ".";
  return os.str();
}

std::vector<std::string> caption_vocabulary() {
  std::set<std::string> words;
  auto add_phrase = [&words](const std::string& phrase) {
    std::string cur;
    for (char c : phrase) {
      if (std::isalpha(static_cast<unsigned char>(c))) {
        cur += static_cast<char>(std::tolower(c));
      } else if (!cur.empty()) {
        words.insert(cur);
        cur.clear();
      }
    }
    if (!cur.empty()) words.insert(cur);
  };
  add_phrase("a over the shot type is");
  for (const auto& p : sprite_palette()) add_phrase(p.word);
  for (const auto& s : scene_words()) add_phrase(s.word);
  for (const auto& s : shape_words()) add_phrase(s);
  for (const auto& v : shape_verbs()) add_phrase(v);
  for (auto f : all_framings()) add_phrase(framing_name(f));
  for (auto a : all_angles()) add_phrase(angle_name(a));
  for (auto m : all_movements()) add_phrase(movement_name(m));
  return {words.begin(), words.end()};
}

}  // namespace cinelab
