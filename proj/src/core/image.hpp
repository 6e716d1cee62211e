#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace cinelab {

struct ImageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Interleaved RGB, 8 bits per channel, row-major.
struct Image8 {
  int h = 0, w = 0;
  std::vector<std::uint8_t> px;  // size h*w*3

  Image8() = default;
  Image8(int height, int width) : h(height), w(width), px(static_cast<size_t>(height) * width * 3, 0) {}

  std::uint8_t& at(int y, int x, int c) { return px[(static_cast<size_t>(y) * w + x) * 3 + c]; }
  std::uint8_t at(int y, int x, int c) const { return px[(static_cast<size_t>(y) * w + x) * 3 + c]; }
};

// Single-channel float image.
struct ImageF {
  int h = 0, w = 0;
  std::vector<float> px;

  ImageF() = default;
  ImageF(int height, int width) : h(height), w(width), px(static_cast<size_t>(height) * width, 0.f) {}

  float& at(int y, int x) { return px[static_cast<size_t>(y) * w + x]; }
  float at(int y, int x) const { return px[static_cast<size_t>(y) * w + x]; }
};

// 3-channel float image (values nominally in [0,255] unless stated otherwise).
struct Image3F {
  int h = 0, w = 0;
  std::vector<float> px;

  Image3F() = default;
  Image3F(int height, int width) : h(height), w(width), px(static_cast<size_t>(height) * width * 3, 0.f) {}

  float& at(int y, int x, int c) { return px[(static_cast<size_t>(y) * w + x) * 3 + c]; }
  float at(int y, int x, int c) const { return px[(static_cast<size_t>(y) * w + x) * 3 + c]; }
};

// T frames of equal size; the universal video currency.
struct VideoClip {
  int t = 0, h = 0, w = 0;
  std::vector<std::uint8_t> frames;  // t*h*w*3

  VideoClip() = default;
  VideoClip(int nframes, int height, int width)
      : t(nframes), h(height), w(width),
        frames(static_cast<size_t>(nframes) * height * width * 3, 0) {}

  Image8 frame(int i) const;
  void set_frame(int i, const Image8& f);
};

// Luma per ITU-R BT.601: 0.299 R + 0.587 G + 0.114 B.
ImageF to_luma(const Image8& img);

Image3F to_float(const Image8& img);
Image8 to_u8(const Image3F& img);  // clamps to [0,255], rounds half up

// Bilinear sample with clamped borders; (x,y) in pixel coordinates.
float sample_bilinear(const ImageF& img, float x, float y);
void sample_bilinear3(const Image3F& img, float x, float y, float out[3]);

// Separable Gaussian blur, reflect-101 boundary. sigma <= 0 is a copy.
ImageF gaussian_blur(const ImageF& img, float sigma);
Image3F gaussian_blur(const Image3F& img, float sigma);

// Area-average resize (integer shrink factors handled exactly); bilinear otherwise.
Image8 resize(const Image8& img, int out_h, int out_w);

Image8 mirror_horizontal(const Image8& img);
VideoClip mirror_horizontal(const VideoClip& clip);

// PNG I/O (RGB8). Writes with pinned settings so bytes are reproducible.
void write_png(const std::string& path, const Image8& img);
Image8 read_png(const std::string& path);

}  // namespace cinelab
