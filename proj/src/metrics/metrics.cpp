#include "metrics/metrics.hpp"

#include <cmath>

namespace cinelab {

json MetricReport::to_json() const {
  return {{"metric", name},
          {"value", value},
          {"count", count},
          {"config_hash", config_hash},
          {"per_item", per_item}};
}

MetricReport clipsim(const std::vector<VideoClip>& clips,
                     const std::vector<std::string>& prompts, ClipModel& model) {
  if (clips.empty() || clips.size() != prompts.size())
    throw NnError("clipsim: clips/prompts length mismatch");
  MetricReport report;
  report.name = "clipsim";
  report.count = static_cast<int>(clips.size());
  double sum = 0;
  for (size_t i = 0; i < clips.size(); ++i) {
    const double s = cosine_sim(model.embed_video(clips[i]), model.embed_text(prompts[i]));
    report.per_item.push_back({{"prompt", prompts[i]}, {"score", s}});
    sum += s;
  }
  report.value = sum / static_cast<double>(clips.size());
  return report;
}

namespace {

// Symmetric PSD square root with negative eigenvalues clamped to zero.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

Eigen::MatrixXd covariance(const Eigen::MatrixXd& x) {
  Eigen::RowVectorXd mu = x.colwise().mean();
  Eigen::MatrixXd centered = x.rowwise() - mu;
  return centered.transpose() * centered / static_cast<double>(x.rows() - 1);
}

}  // namespace

double ffd(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() < 2 || b.rows() < 2) throw NnError("ffd: need at least 2 samples per side");
  if (a.cols() != b.cols()) throw NnError("ffd: dimension mismatch");
  const long d = a.cols();
  const Eigen::MatrixXd reg = 1e-6 * Eigen::MatrixXd::Identity(d, d);

  Eigen::RowVectorXd mu_a = a.colwise().mean(), mu_b = b.colwise().mean();
  Eigen::MatrixXd sa = covariance(a) + reg, sb = covariance(b) + reg;

  Eigen::MatrixXd sa_half = psd_sqrt(sa);
  Eigen::MatrixXd cross = psd_sqrt(sa_half * sb * sa_half);

  const double mean_term = (mu_a - mu_b).squaredNorm();
  const double trace_term = sa.trace() + sb.trace() - 2.0 * cross.trace();
  return mean_term + std::max(trace_term, 0.0);
}

double motion_adherence(const VideoClip& clip, const std::vector<Movement>& requested,
                        const OracleThresholds& thresholds) {
  if (requested.empty()) throw NnError("motion_adherence: empty requested set");
  Classification c = classify_clip(analyze_clip(clip), thresholds);
  int hit = 0;
  for (Movement m : requested)
    if (c.movements.count(m)) ++hit;
  return static_cast<double>(hit) / static_cast<double>(requested.size());
}

}  // namespace cinelab
