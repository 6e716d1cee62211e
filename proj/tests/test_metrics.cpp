#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "data/dataset.hpp"
#include "metrics/metrics.hpp"

using namespace cinelab;

namespace {

bool near(double a, double b, double tol) { return std::abs(a - b) <= tol; }

VideoClip category_clip(const std::string& category, std::uint64_t seed) {
  GenConfig gc;
  Rng rng(seed);
  return generate_labeled_clip(parse_category(category), gc, rng).clip;
}

}  // namespace

TEST_CASE("ffd identical sets are near zero") {
  Rng rng(1);
  Eigen::MatrixXd a(40, 5);
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) a(i, j) = rng.normal();
  CHECK(ffd(a, a) <= 1e-4);
}

TEST_CASE("ffd matches the 1-D Gaussian closed form") {
  // Construct samples with exact moments: mean 0 var 1 vs mean 1 var 1.
  // Frechet distance = (mu_a - mu_b)^2 + (sigma_a - sigma_b)^2 = 1.
  const int n = 10;
  Eigen::MatrixXd a(2 * n, 1), b(2 * n, 1);
  for (int i = 0; i < n; ++i) {
    a(i, 0) = 1.0;
    a(n + i, 0) = -1.0;
  }
  // Sample variance of +-1 (mean 0) is 2n/(2n-1); rescale to exactly 1.
  a *= std::sqrt(static_cast<double>(2 * n - 1) / (2 * n));
  b = a.array() + 1.0;
  CHECK(near(ffd(a, b), 1.0, 1e-6 + 4e-6));  // covariance regularization slack
}

TEST_CASE("ffd zero-covariance case reduces to the squared mean shift") {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(5, 3);
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(5, 3);
  b.col(0).array() = 2.0;
  b.col(2).array() = -1.0;
  CHECK(near(ffd(a, b), 5.0, 1e-9));
}

TEST_CASE("ffd symmetry, non-negativity, mean-shift monotonicity") {
  Rng rng(2);
  Eigen::MatrixXd a(30, 4), b(30, 4);
  for (int i = 0; i < 30; ++i)
    for (int j = 0; j < 4; ++j) {
      a(i, j) = rng.normal();
      b(i, j) = 0.5 * rng.normal();
    }
  CHECK(near(ffd(a, b), ffd(b, a), 1e-6));
  CHECK(ffd(a, b) >= 0.0);

  double prev = ffd(a, b);
  for (double shift : {0.5, 1.0, 2.0, 4.0}) {
    Eigen::MatrixXd bs = b;
    bs.col(0).array() += shift;
    double d = ffd(a, bs);
    CHECK(d > prev);
    prev = d;
  }

  Eigen::MatrixXd tiny(1, 4);
  CHECK_THROWS_AS(ffd(tiny, b), NnError);
  Eigen::MatrixXd wrong(30, 3);
  CHECK_THROWS_AS(ffd(a, wrong), NnError);
}

TEST_CASE("clipsim averages per-pair cosine scores") {
  ClipConfig cfg;
  cfg.d_model = 32;
  cfg.l_t = 1;
  cfg.l_v = 1;
  cfg.heads = 2;
  cfg.patch = 8;
  cfg.image = 16;
  cfg.n_frames = 2;
  ClipModel model(cfg, 7);

  VideoClip c1 = category_clip("panning right", 1);
  VideoClip c2 = category_clip("zoom in", 2);
  std::vector<VideoClip> clips = {c1, c2};
  std::vector<std::string> prompts = {"panning right shot", "the camera zooms in"};
  MetricReport r = clipsim(clips, prompts, model);
  CHECK(r.count == 2);
  CHECK(std::isfinite(r.value));
  CHECK(r.value >= -1.0);
  CHECK(r.value <= 1.0);
  const double s0 = r.per_item[0]["score"].get<double>();
  const double s1 = r.per_item[1]["score"].get<double>();
  CHECK(near(r.value, (s0 + s1) / 2.0, 1e-12));

  // Permutation equivariance of the mean.
  std::vector<VideoClip> rev = {c2, c1};
  std::vector<std::string> rp = {prompts[1], prompts[0]};
  MetricReport r2 = clipsim(rev, rp, model);
  CHECK(near(r2.value, r.value, 1e-12));

  CHECK_THROWS_AS(clipsim({}, {}, model), NnError);
  CHECK_THROWS_AS(clipsim(clips, {prompts[0]}, model), NnError);
}

TEST_CASE("motion adherence against generator ground truth") {
  VideoClip still = category_clip("still", 3);
  CHECK(motion_adherence(still, {Movement::kPanRight}) == 0.0);

  VideoClip pan = category_clip("panning right", 4);
  CHECK(motion_adherence(pan, {Movement::kPanRight}) == 1.0);

  VideoClip combo = category_clip("zoom in+panning right", 5);
  double frac = motion_adherence(combo, {Movement::kZoomIn, Movement::kPanRight});
  CHECK(frac == 1.0);
  // Partial credit takes values in {0, 1/2, 1} for two requested movements.
  double partial = motion_adherence(pan, {Movement::kPanRight, Movement::kZoomIn});
  CHECK(partial == 0.5);

  CHECK_THROWS_AS(motion_adherence(pan, {}), NnError);
}
