#include "pgar/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace pgar {

namespace {

constexpr double kEps = 2.2204e-16;

void check_pair(const Map2d& pred, const Map2d& gt) {
  if (pred.rows() != gt.rows() || pred.cols() != gt.cols()) {
    throw InputError("prediction " + std::to_string(pred.rows()) + "x" + std::to_string(pred.cols()) +
                     " and ground truth " + std::to_string(gt.rows()) + "x" + std::to_string(gt.cols()) +
                     " differ in size");
  }
  if (pred.size() == 0) throw InputError("empty saliency map");
}

// Largest k in 0..255 with v >= k / 255.
int threshold_bin(double v) {
  int k = std::clamp(int(std::floor(v * 255.0)), 0, 255);
  while (k < 255 && v >= double(k + 1) / 255.0) ++k;
  while (k > 0 && v < double(k) / 255.0) --k;
  return k;
}

// Object-level similarity of the values selected by `mask`.
double object_similarity(const Map2d& values, const Map2d& mask) {
  const double n = mask.sum();
  if (n <= 0) return 0.0;
  const double mean = (values * mask).sum() / n;
  double sd = 0.0;
  if (n > 1) sd = std::sqrt((((values - mean) * mask).square()).sum() / (n - 1));
  return 2.0 * mean / (mean * mean + 1.0 + sd + kEps);
}

double region_ssim(const Map2d& pred, const Map2d& gt) {
  const double n = double(pred.size());
  const double x = pred.mean();
  const double y = gt.mean();
  const double sx = (pred - x).square().sum() / (n - 1 + kEps);
  const double sy = (gt - y).square().sum() / (n - 1 + kEps);
  const double sxy = ((pred - x) * (gt - y)).sum() / (n - 1 + kEps);
  const double a = 4 * x * y * sxy;
  const double b = (x * x + y * y) * (sx + sy);
  if (a != 0) return a / (b + kEps);
  if (b == 0) return 1.0;
  return 0.0;
}

double s_object(const Map2d& pred, const Map2d& gt) {
  const double u = gt.mean();
  const Map2d bg = 1.0 - gt;
  return u * object_similarity(pred, gt) + (1 - u) * object_similarity(1.0 - pred, bg);
}

double s_region(const Map2d& pred, const Map2d& gt) {
  const Index h = gt.rows();
  const Index w = gt.cols();
  const double total = gt.sum();
  // Split point (x, y): the ground-truth centroid, rounded, counted as the
  // size of the left/top parts.
  Index x = 0, y = 0;
  if (total == 0) {
    x = Index(std::round(double(w) / 2));
    y = Index(std::round(double(h) / 2));
  } else {
    const Eigen::ArrayXd cols = Eigen::ArrayXd::LinSpaced(w, 1, double(w));
    const Eigen::ArrayXd rows = Eigen::ArrayXd::LinSpaced(h, 1, double(h));
    x = Index(std::round((gt.colwise().sum().transpose() * cols).sum() / total));
    y = Index(std::round((gt.rowwise().sum() * rows).sum() / total));
  }
  const double area = double(h * w);
  const std::array<std::array<Index, 4>, 4> parts{{
      {0, 0, y, x},          // top-left: row0, col0, rows, cols
      {0, x, y, w - x},      // top-right
      {y, 0, h - y, x},      // bottom-left
      {y, x, h - y, w - x},  // bottom-right
  }};
  double score = 0.0;
  for (const auto& p : parts) {
    if (p[2] <= 0 || p[3] <= 0) continue;
    const double weight = double(p[2] * p[3]) / area;
    score += weight * region_ssim(pred.block(p[0], p[1], p[2], p[3]), gt.block(p[0], p[1], p[2], p[3]));
  }
  return score;
}

}  // namespace

double mae(const Map2d& pred, const Map2d& gt) {
  check_pair(pred, gt);
  return (pred - gt).abs().mean();
}

std::optional<PrCurve> precision_recall_curve(const Map2d& pred, const Map2d& gt) {
  check_pair(pred, gt);
  std::array<double, kThresholds> pos{}, neg{};
  for (Index i = 0; i < pred.size(); ++i) {
    const int k = threshold_bin(pred.data()[i]);
    if (gt.data()[i] > 0.5) {
      pos[std::size_t(k)] += 1;
    } else {
      neg[std::size_t(k)] += 1;
    }
  }
  double positives = 0;
  for (double p : pos) positives += p;
  if (positives == 0) return std::nullopt;

  PrCurve curve;
  double tp = 0, fp = 0;
  for (int k = kThresholds - 1; k >= 0; --k) {
    tp += pos[std::size_t(k)];
    fp += neg[std::size_t(k)];
    curve.precision[std::size_t(k)] = tp + fp > 0 ? tp / (tp + fp) : 1.0;
    curve.recall[std::size_t(k)] = tp / positives;
  }
  return curve;
}

double f_measure(double precision, double recall, double beta2) {
  const double den = beta2 * precision + recall;
  return den > 0 ? (1 + beta2) * precision * recall / den : 0.0;
}

double max_f_measure(const PrCurve& curve, double beta2) {
  double best = 0.0;
  for (int k = 0; k < kThresholds; ++k) {
    best = std::max(best, f_measure(curve.precision[std::size_t(k)], curve.recall[std::size_t(k)], beta2));
  }
  return best;
}

double max_f_measure(const Map2d& pred, const Map2d& gt, double beta2) {
  const auto curve = precision_recall_curve(pred, gt);
  if (!curve) throw InputError("max_f_measure: ground truth has no positive pixel");
  return max_f_measure(*curve, beta2);
}

double s_measure(const Map2d& pred, const Map2d& gt, double alpha) {
  check_pair(pred, gt);
  const double y = gt.mean();
  double q = 0.0;
  if (y == 0) {
    q = 1.0 - pred.mean();
  } else if (y == 1) {
    q = pred.mean();
  } else {
    q = alpha * s_object(pred, gt) + (1 - alpha) * s_region(pred, gt);
  }
  return std::clamp(q, 0.0, 1.0);
}

double enhanced_alignment(const Map2d& binary, const Map2d& gt) {
  check_pair(binary, gt);
  const double positives = gt.sum();
  Map2d enhanced;
  if (positives == 0) {
    enhanced = 1.0 - binary;
  } else if (positives == double(gt.size())) {
    enhanced = binary;
  } else {
    const Map2d a = binary - binary.mean();
    const Map2d b = gt - gt.mean();
    const Map2d align = 2.0 * a * b / (a.square() + b.square());
    enhanced = (align + 1.0).square() / 4.0;
  }
  return std::clamp(enhanced.mean(), 0.0, 1.0);
}

double e_measure(const Map2d& pred, const Map2d& gt, EMeasureVariant variant) {
  check_pair(pred, gt);
  if (variant == EMeasureVariant::adaptive) {
    const double th = std::min(2.0 * pred.mean(), 1.0);
    return enhanced_alignment((pred >= th).cast<double>(), gt);
  }
  double best = 0.0;
  for (int k = 0; k < kThresholds; ++k) {
    best = std::max(best, enhanced_alignment((pred >= double(k) / 255.0).cast<double>(), gt));
  }
  return best;
}

SampleResult evaluate_sample(const Map2d& pred, const Map2d& gt, const EvalConfig& cfg, std::string id) {
  SampleResult r;
  r.id = std::move(id);
  r.mae = mae(pred, gt);
  r.s_measure = s_measure(pred, gt);
  r.e_measure = e_measure(pred, gt, cfg.e_measure);
  r.pr = precision_recall_curve(pred, gt);
  return r;
}

EvalResult aggregate(const std::vector<SampleResult>& results, double beta2) {
  if (results.empty()) throw InputError("aggregate: no samples");
  EvalResult out;
  out.samples = int(results.size());
  std::array<double, kThresholds> p{}, r{};
  int included = 0;
  for (const auto& s : results) {
    out.mae += s.mae;
    out.s_measure += s.s_measure;
    out.e_measure += s.e_measure;
    if (!s.pr) continue;
    ++included;
    for (int k = 0; k < kThresholds; ++k) {
      p[std::size_t(k)] += s.pr->precision[std::size_t(k)];
      r[std::size_t(k)] += s.pr->recall[std::size_t(k)];
    }
  }
  if (included == 0) throw InputError("aggregate: every sample has an all-negative ground truth");
  out.excluded = out.samples - included;
  const double n = double(out.samples);
  out.mae /= n;
  out.s_measure /= n;
  out.e_measure /= n;
  for (int k = 0; k < kThresholds; ++k) {
    out.pr_curve.precision[std::size_t(k)] = p[std::size_t(k)] / included;
    out.pr_curve.recall[std::size_t(k)] = r[std::size_t(k)] / included;
  }
  out.max_f = max_f_measure(out.pr_curve, beta2);
  return out;
}

}  // namespace pgar
