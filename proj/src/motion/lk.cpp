#include "motion/lk.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace cinelab {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Warp {
  // x' = M (x - c) + c + t, with M = s R(theta)
  double m00 = 1, m01 = 0, m10 = 0, m11 = 1;
  double tx = 0, ty = 0;

  static Warp from_params(double tx, double ty, double log_s, double theta) {
    double s = std::exp(log_s), cs = std::cos(theta), sn = std::sin(theta);
    return {s * cs, -s * sn, s * sn, s * cs, tx, ty};
  }

  Warp compose(const Warp& o) const {  // this after o
    Warp r;
    r.m00 = m00 * o.m00 + m01 * o.m10;
    r.m01 = m00 * o.m01 + m01 * o.m11;
    r.m10 = m10 * o.m00 + m11 * o.m10;
    r.m11 = m10 * o.m01 + m11 * o.m11;
    r.tx = m00 * o.tx + m01 * o.ty + tx;
    r.ty = m10 * o.tx + m11 * o.ty + ty;
    return r;
  }

  Warp inverse() const {
    double det = m00 * m11 - m01 * m10;
    Warp r;
    r.m00 = m11 / det;
    r.m01 = -m01 / det;
    r.m10 = -m10 / det;
    r.m11 = m00 / det;
    r.tx = -(r.m00 * tx + r.m01 * ty);
    r.ty = -(r.m10 * tx + r.m11 * ty);
    return r;
  }

  double scale() const { return std::sqrt(m00 * m11 - m01 * m10); }
  double theta() const { return std::atan2(m10, m00); }
};

ImageF downsample2(const ImageF& img) {
  ImageF blurred = gaussian_blur(img, 1.0f);
  int h = img.h / 2, w = img.w / 2;
  ImageF out(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out.at(y, x) = blurred.at(2 * y, 2 * x);
  return out;
}

ImageF downsample2_avg(const ImageF& img) {
  int h = img.h / 2, w = img.w / 2;
  ImageF out(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      out.at(y, x) = 0.25f * (img.at(2 * y, 2 * x) + img.at(2 * y, 2 * x + 1) +
                              img.at(2 * y + 1, 2 * x) + img.at(2 * y + 1, 2 * x + 1));
  return out;
}

// One pyramid level of inverse-compositional refinement. p holds the current
// warp; returns false when the normal equations are degenerate.
bool refine_level(const ImageF& tmpl, const ImageF& target, const ImageF* weight, Warp& warp,
                  int max_iters, double tol, bool& converged) {
  const int h = tmpl.h, w = tmpl.w;
  const double cx = (w - 1) / 2.0, cy = (h - 1) / 2.0;

  // Steepest-descent images and Hessian depend only on the template.
  std::vector<double> sd(static_cast<size_t>(h) * w * 4, 0.0);
  Eigen::Matrix4d hess = Eigen::Matrix4d::Zero();
  for (int y = 1; y < h - 1; ++y)
    for (int x = 1; x < w - 1; ++x) {
      double wgt = weight ? weight->at(y, x) : 1.0;
      if (wgt <= 0.0) continue;
      double ix = 0.5 * (tmpl.at(y, x + 1) - tmpl.at(y, x - 1));
      double iy = 0.5 * (tmpl.at(y + 1, x) - tmpl.at(y - 1, x));
      double rx = x - cx, ry = y - cy;
      double* row = &sd[(static_cast<size_t>(y) * w + x) * 4];
      row[0] = ix;
      row[1] = iy;
      row[2] = ix * rx + iy * ry;        // d/d log s
      row[3] = -ix * ry + iy * rx;       // d/d theta
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) hess(i, j) += wgt * row[i] * row[j];
    }
  Eigen::FullPivLU<Eigen::Matrix4d> lu(hess);
  if (!lu.isInvertible()) return false;

  converged = false;
  for (int iter = 0; iter < max_iters; ++iter) {
    Eigen::Vector4d g = Eigen::Vector4d::Zero();
    double valid = 0;
    for (int y = 1; y < h - 1; ++y)
      for (int x = 1; x < w - 1; ++x) {
        double wgt = weight ? weight->at(y, x) : 1.0;
        if (wgt <= 0.0) continue;
        double rx = x - cx, ry = y - cy;
        double qx = warp.m00 * rx + warp.m01 * ry + cx + warp.tx;
        double qy = warp.m10 * rx + warp.m11 * ry + cy + warp.ty;
        if (qx < 0 || qx > w - 1 || qy < 0 || qy > h - 1) continue;
        double e = sample_bilinear(target, static_cast<float>(qx), static_cast<float>(qy)) -
                   tmpl.at(y, x);
        const double* row = &sd[(static_cast<size_t>(y) * w + x) * 4];
        for (int i = 0; i < 4; ++i) g(i) += wgt * row[i] * e;
        valid += 1;
      }
    if (valid < 16) return false;
    Eigen::Vector4d dp = lu.solve(g);
    Warp delta = Warp::from_params(dp(0), dp(1), dp(2), dp(3));
    warp = warp.compose(delta.inverse());
    double step = std::max({std::abs(dp(0)), std::abs(dp(1)), std::abs(dp(2)), std::abs(dp(3))});
    if (step < tol) {
      converged = true;
      break;
    }
  }
  return true;
}

}  // namespace

SimilarityTransform SimilarityTransform::compose(const SimilarityTransform& other) const {
  Warp a = Warp::from_params(tx, ty, std::log(s), theta_deg * kPi / 180.0);
  Warp b = Warp::from_params(other.tx, other.ty, std::log(other.s), other.theta_deg * kPi / 180.0);
  Warp c = a.compose(b);
  return {c.tx, c.ty, c.scale(), c.theta() * 180.0 / kPi, converged && other.converged};
}

SimilarityTransform SimilarityTransform::inverse() const {
  Warp a = Warp::from_params(tx, ty, std::log(s), theta_deg * kPi / 180.0).inverse();
  return {a.tx, a.ty, a.scale(), a.theta() * 180.0 / kPi, converged};
}

double SimilarityTransform::deviation() const {
  return std::max({std::abs(tx), std::abs(ty), std::abs(std::log(s)),
                   std::abs(theta_deg * kPi / 180.0)});
}

SimilarityTransform estimate_similarity(const ImageF& a, const ImageF& b, const ImageF* weight,
                                        int levels, int max_iters, double tol) {
  if (a.h != b.h || a.w != b.w) throw ImageError("estimate_similarity: shape mismatch");
  int min_side = std::min(a.h, a.w);
  while (levels > 1 && (min_side >> (levels - 1)) < 8) --levels;

  std::vector<ImageF> pyr_a = {a}, pyr_b = {b};
  std::vector<ImageF> pyr_w;
  if (weight) pyr_w.push_back(*weight);
  for (int l = 1; l < levels; ++l) {
    pyr_a.push_back(downsample2(pyr_a.back()));
    pyr_b.push_back(downsample2(pyr_b.back()));
    if (weight) pyr_w.push_back(downsample2_avg(pyr_w.back()));
  }

  Warp warp;
  bool converged = false;
  bool any_ok = false;
  for (int l = levels - 1; l >= 0; --l) {
    bool level_converged = false;
    bool ok = refine_level(pyr_a[l], pyr_b[l], weight ? &pyr_w[l] : nullptr, warp, max_iters, tol,
                           level_converged);
    any_ok = any_ok || ok;
    converged = ok && level_converged;
    if (l > 0) {
      warp.tx *= 2.0;
      warp.ty *= 2.0;
    }
  }

  SimilarityTransform out;
  out.tx = warp.tx;
  out.ty = warp.ty;
  out.s = warp.scale();
  out.theta_deg = warp.theta() * 180.0 / kPi;
  out.converged = any_ok && converged;
  return out;
}

SimilarityTransform estimate_pairwise(const Image8& a, const Image8& b) {
  if (a.h != b.h || a.w != b.w) throw ImageError("estimate_pairwise: shape mismatch");
  return estimate_similarity(to_luma(a), to_luma(b));
}

}  // namespace cinelab
