#pragma once

#include "core/image.hpp"

namespace cinelab {

// Content-motion convention, fixed here and referenced by every label rule:
// the transform maps a content point at x in frame a to its location in
// frame b, about the image center. Positive tx = content moved right,
// positive ty = content moved down, s > 1 = content grew.
struct SimilarityTransform {
  double tx = 0.0, ty = 0.0;
  double s = 1.0;
  double theta_deg = 0.0;
  bool converged = true;

  static SimilarityTransform identity() { return {}; }

  SimilarityTransform compose(const SimilarityTransform& other) const;  // this after other
  SimilarityTransform inverse() const;

  // max(|tx|, |ty|, |log s|, |theta_rad|) distance from identity
  double deviation() const;
};

// Inverse-compositional least-squares alignment on a Gaussian pyramid.
// weight (optional, same size as a) downweights or masks pixels; used for the
// border-ring estimate. levels are clamped so the coarsest stays >= 8 px.
SimilarityTransform estimate_similarity(const ImageF& a, const ImageF& b,
                                        const ImageF* weight = nullptr, int levels = 3,
                                        int max_iters = 50, double tol = 1e-4);

// RGB front end: luma conversion then estimate_similarity.
SimilarityTransform estimate_pairwise(const Image8& a, const Image8& b);

}  // namespace cinelab
