#include "core/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

namespace cinelab {

Image8 VideoClip::frame(int i) const {
  if (i < 0 || i >= t) throw ImageError("frame index out of range");
  Image8 f(h, w);
  const size_t n = static_cast<size_t>(h) * w * 3;
  std::copy_n(frames.begin() + static_cast<size_t>(i) * n, n, f.px.begin());
  return f;
}

void VideoClip::set_frame(int i, const Image8& f) {
  if (i < 0 || i >= t) throw ImageError("frame index out of range");
  if (f.h != h || f.w != w) throw ImageError("frame shape mismatch");
  const size_t n = static_cast<size_t>(h) * w * 3;
  std::copy_n(f.px.begin(), n, frames.begin() + static_cast<size_t>(i) * n);
}

ImageF to_luma(const Image8& img) {
  ImageF out(img.h, img.w);
  const std::uint8_t* p = img.px.data();
  for (size_t i = 0; i < out.px.size(); ++i, p += 3) {
    out.px[i] = 0.299f * p[0] + 0.587f * p[1] + 0.114f * p[2];
  }
  return out;
}

Image3F to_float(const Image8& img) {
  Image3F out(img.h, img.w);
  for (size_t i = 0; i < img.px.size(); ++i) out.px[i] = static_cast<float>(img.px[i]);
  return out;
}

Image8 to_u8(const Image3F& img) {
  Image8 out(img.h, img.w);
  for (size_t i = 0; i < img.px.size(); ++i) {
    float v = std::floor(img.px[i] + 0.5f);
    out.px[i] = static_cast<std::uint8_t>(std::clamp(v, 0.f, 255.f));
  }
  return out;
}

float sample_bilinear(const ImageF& img, float x, float y) {
  x = std::clamp(x, 0.f, static_cast<float>(img.w - 1));
  y = std::clamp(y, 0.f, static_cast<float>(img.h - 1));
  int x0 = static_cast<int>(x), y0 = static_cast<int>(y);
  int x1 = std::min(x0 + 1, img.w - 1), y1 = std::min(y0 + 1, img.h - 1);
  float fx = x - x0, fy = y - y0;
  float a = img.at(y0, x0) * (1 - fx) + img.at(y0, x1) * fx;
  float b = img.at(y1, x0) * (1 - fx) + img.at(y1, x1) * fx;
  return a * (1 - fy) + b * fy;
}

void sample_bilinear3(const Image3F& img, float x, float y, float out[3]) {
  x = std::clamp(x, 0.f, static_cast<float>(img.w - 1));
  y = std::clamp(y, 0.f, static_cast<float>(img.h - 1));
  int x0 = static_cast<int>(x), y0 = static_cast<int>(y);
  int x1 = std::min(x0 + 1, img.w - 1), y1 = std::min(y0 + 1, img.h - 1);
  float fx = x - x0, fy = y - y0;
  for (int c = 0; c < 3; ++c) {
    float a = img.at(y0, x0, c) * (1 - fx) + img.at(y0, x1, c) * fx;
    float b = img.at(y1, x0, c) * (1 - fx) + img.at(y1, x1, c) * fx;
    out[c] = a * (1 - fy) + b * fy;
  }
}

namespace {

std::vector<float> gauss_kernel(float sigma) {
  int radius = std::max(1, static_cast<int>(std::ceil(3.f * sigma)));
  std::vector<float> k(2 * radius + 1);
  float sum = 0.f;
  for (int i = -radius; i <= radius; ++i) {
    float v = std::exp(-0.5f * i * i / (sigma * sigma));
    k[i + radius] = v;
    sum += v;
  }
  for (float& v : k) v /= sum;
  return k;
}

inline int reflect101(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * (n - 1) - i;
  }
  return i;
}

}  // namespace

ImageF gaussian_blur(const ImageF& img, float sigma) {
  if (sigma <= 0.f) return img;
  auto k = gauss_kernel(sigma);
  int r = (static_cast<int>(k.size()) - 1) / 2;
  ImageF tmp(img.h, img.w), out(img.h, img.w);
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x) {
      float acc = 0.f;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * img.at(y, reflect101(x + i, img.w));
      tmp.at(y, x) = acc;
    }
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x) {
      float acc = 0.f;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * tmp.at(reflect101(y + i, img.h), x);
      out.at(y, x) = acc;
    }
  return out;
}

Image3F gaussian_blur(const Image3F& img, float sigma) {
  if (sigma <= 0.f) return img;
  auto k = gauss_kernel(sigma);
  int r = (static_cast<int>(k.size()) - 1) / 2;
  Image3F tmp(img.h, img.w), out(img.h, img.w);
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x)
      for (int c = 0; c < 3; ++c) {
        float acc = 0.f;
        for (int i = -r; i <= r; ++i) acc += k[i + r] * img.at(y, reflect101(x + i, img.w), c);
        tmp.at(y, x, c) = acc;
      }
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x)
      for (int c = 0; c < 3; ++c) {
        float acc = 0.f;
        for (int i = -r; i <= r; ++i) acc += k[i + r] * tmp.at(reflect101(y + i, img.h), x, c);
        out.at(y, x, c) = acc;
      }
  return out;
}

Image8 resize(const Image8& img, int out_h, int out_w) {
  if (out_h <= 0 || out_w <= 0) throw ImageError("resize: non-positive target size");
  if (out_h == img.h && out_w == img.w) return img;
  Image8 out(out_h, out_w);
  if (img.h % out_h == 0 && img.w % out_w == 0) {
    int fy = img.h / out_h, fx = img.w / out_w;
    for (int y = 0; y < out_h; ++y)
      for (int x = 0; x < out_w; ++x)
        for (int c = 0; c < 3; ++c) {
          int acc = 0;
          for (int dy = 0; dy < fy; ++dy)
            for (int dx = 0; dx < fx; ++dx) acc += img.at(y * fy + dy, x * fx + dx, c);
          out.at(y, x, c) = static_cast<std::uint8_t>((acc + fy * fx / 2) / (fy * fx));
        }
    return out;
  }
  Image3F f = to_float(img);
  for (int y = 0; y < out_h; ++y)
    for (int x = 0; x < out_w; ++x) {
      float sx = (x + 0.5f) * img.w / out_w - 0.5f;
      float sy = (y + 0.5f) * img.h / out_h - 0.5f;
      float v[3];
      sample_bilinear3(f, sx, sy, v);
      for (int c = 0; c < 3; ++c)
        out.at(y, x, c) = static_cast<std::uint8_t>(std::clamp(std::floor(v[c] + 0.5f), 0.f, 255.f));
    }
  return out;
}

Image8 mirror_horizontal(const Image8& img) {
  Image8 out(img.h, img.w);
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x)
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y, img.w - 1 - x, c);
  return out;
}

VideoClip mirror_horizontal(const VideoClip& clip) {
  VideoClip out(clip.t, clip.h, clip.w);
  for (int i = 0; i < clip.t; ++i) out.set_frame(i, mirror_horizontal(clip.frame(i)));
  return out;
}

void write_png(const std::string& path, const Image8& img) {
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!fp) throw ImageError("cannot open for writing: " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw ImageError("png write failed: " + path);
  }
  png_init_io(png, fp.get());
  png_set_compression_level(png, 6);
  png_set_filter(png, 0, PNG_FILTER_NONE);  // pinned for byte-reproducible output
  png_set_IHDR(png, info, img.w, img.h, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_bytep> rows(img.h);
  for (int y = 0; y < img.h; ++y)
    rows[y] = const_cast<png_bytep>(img.px.data() + static_cast<size_t>(y) * img.w * 3);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Image8 read_png(const std::string& path) {
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "rb"), &std::fclose);
  if (!fp) throw ImageError("cannot open for reading: " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ImageError("png read failed: " + path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  png_set_expand(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_gray_to_rgb(png);
  png_read_update_info(png, info);
  int h = png_get_image_height(png, info);
  int w = png_get_image_width(png, info);
  Image8 img(h, w);
  std::vector<png_bytep> rows(h);
  for (int y = 0; y < h; ++y)
    rows[y] = img.px.data() + static_cast<size_t>(y) * w * 3;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

}  // namespace cinelab
