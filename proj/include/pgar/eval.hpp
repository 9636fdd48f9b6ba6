#ifndef PGAR_EVAL_HPP
#define PGAR_EVAL_HPP

#include "pgar/config.hpp"
#include "pgar/data.hpp"
#include "pgar/metrics.hpp"
#include "pgar/network.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace pgar {

/// Saliency in (0, 1) at network resolution for one prepared sample.
Map2d predict_saliency(const Model<float>& model, const Sample& sample);

/// Bilinear resize of a saliency map (half-pixel centers).
Map2d resize_map(const Map2d& map, int height, int width);

/// round(255 * p), clamped to [0, 255].
Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> to_8bit(const Map2d& map);

/// Writes an 8-bit grayscale PNG.
void write_map(const std::string& path, const Map2d& map);

struct EvalOptions {
  EvalConfig metrics;
  DepthNorm depth_norm = DepthNorm::bitdepth;
  std::string maps_dir;  // empty = do not save maps
};

struct DatasetReport {
  std::string name;
  EvalResult result;
  std::vector<SampleResult> samples;
};

/// Runs the model over every manifest entry in id order. Each map is brought
/// back to the ground truth's original resolution and quantized to 8 bits
/// before scoring, so the scores describe the saved maps.
DatasetReport evaluate_dataset(const Model<float>& model, const DatasetManifest& manifest, const EvalOptions& options,
                               const std::string& name);

/// Scores already prepared samples at network resolution.
DatasetReport evaluate_samples(const Model<float>& model, const std::vector<Sample>& samples, const EvalConfig& cfg,
                               const std::string& name);

/// Attached to every report: scores come from whatever checkpoint and data
/// were supplied and are not the published benchmark results.
inline constexpr const char* kReproducibilityNote =
    "These scores come from the supplied checkpoint and data. They are not a reproduction of the published "
    "benchmark results, which depend on pretrained weights and benchmark datasets not bundled here.";

/// Machine-readable report: per dataset the four scores, the 256-point PR
/// curve and per-sample scores.
nlohmann::json report_json(const std::vector<DatasetReport>& reports, const nlohmann::json& meta = {});

/// One block per dataset with rows E_xi, S_alpha, F_beta, M.
std::string report_table(const std::vector<DatasetReport>& reports, const std::string& method = "PGAR");

/// Single-pair inference. Writes a map at the RGB image's original size.
void infer_to_file(const Model<float>& model, const std::string& rgb_path, const std::string& depth_path,
                   const std::string& out_path, DepthNorm norm = DepthNorm::bitdepth);

}  // namespace pgar

#endif  // PGAR_EVAL_HPP
