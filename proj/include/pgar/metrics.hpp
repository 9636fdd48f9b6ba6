#ifndef PGAR_METRICS_HPP
#define PGAR_METRICS_HPP

#include "pgar/config.hpp"

#include <Eigen/Dense>

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace pgar {

/// Saliency maps and masks are (height x width) arrays; predictions lie in
/// [0, 1] and ground truth in {0, 1}.
using Map2d = Eigen::ArrayXXd;

inline constexpr int kThresholds = 256;
inline constexpr double kDefaultBeta2 = 0.3;
inline constexpr double kDefaultAlpha = 0.5;

struct PrCurve {
  std::array<double, kThresholds> precision{};
  std::array<double, kThresholds> recall{};
};

double mae(const Map2d& pred, const Map2d& gt);

/// Thresholds t = k / 255, k = 0..255, binarizing pred >= t. Precision of an
/// empty positive set is 1. Returns nullopt when gt has no positive pixel.
std::optional<PrCurve> precision_recall_curve(const Map2d& pred, const Map2d& gt);

/// F = (1 + b2) P R / (b2 P + R), 0 when both vanish.
double f_measure(double precision, double recall, double beta2 = kDefaultBeta2);

/// Maximum F over a curve.
double max_f_measure(const PrCurve& curve, double beta2 = kDefaultBeta2);

/// Throws InputError when gt has no positive pixel.
double max_f_measure(const Map2d& pred, const Map2d& gt, double beta2 = kDefaultBeta2);

/// Structure measure: alpha * object term + (1 - alpha) * region term,
/// clamped to [0, 1].
double s_measure(const Map2d& pred, const Map2d& gt, double alpha = kDefaultAlpha);

/// Enhanced alignment score of a binary foreground map against gt.
double enhanced_alignment(const Map2d& binary, const Map2d& gt);

/// Adaptive variant binarizes pred at min(2 * mean, 1); max variant takes
/// the best score over the 256 thresholds.
double e_measure(const Map2d& pred, const Map2d& gt, EMeasureVariant variant = EMeasureVariant::adaptive);

struct SampleResult {
  std::string id;
  double mae = 0;
  double s_measure = 0;
  double e_measure = 0;
  std::optional<PrCurve> pr;  // absent for all-negative gt
};

SampleResult evaluate_sample(const Map2d& pred, const Map2d& gt, const EvalConfig& cfg = {}, std::string id = "");

struct EvalResult {
  double max_f = 0;
  double s_measure = 0;
  double e_measure = 0;
  double mae = 0;
  PrCurve pr_curve;
  int samples = 0;
  int excluded = 0;  // samples left out of the PR average
};

/// MAE/S/E averaged over samples; precision and recall averaged per
/// threshold, max-F taken on the averaged curve.
EvalResult aggregate(const std::vector<SampleResult>& results, double beta2 = kDefaultBeta2);

}  // namespace pgar

#endif  // PGAR_METRICS_HPP
