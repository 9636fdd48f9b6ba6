#ifndef PGAR_DATA_HPP
#define PGAR_DATA_HPP

#include "pgar/config.hpp"
#include "pgar/tensor.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace pgar {

struct ManifestEntry {
  std::string id;
  std::string rgb_path;
  std::string depth_path;  // empty for RGB-only datasets
  std::string gt_path;
};

struct DatasetManifest {
  std::string root;
  std::string split;
  std::vector<ManifestEntry> entries;  // sorted by id
};

/// A prepared sample. Arrays are 1 x C x H x W: rgb in [0, 1], depth in
/// [0, 1], gt in {0, 1}.
struct Sample {
  std::string id;
  Tensor<float> rgb;
  Tensor<float> depth;
  Tensor<float> gt;
  int original_height = 0;
  int original_width = 0;
};

/// Scans `<root>/RGB`, `<root>/depth`, `<root>/GT` and matches files by
/// basename. Every unmatched id is named in the error.
DatasetManifest load_dataset(const std::string& root, const std::string& split = "train", bool require_depth = true);

/// One line per sample: id, rgb, depth, gt (tab separated).
void write_manifest(const std::string& path, const DatasetManifest& manifest);
DatasetManifest read_manifest(const std::string& path);

/// Decodes and resizes one triple: bilinear for rgb/depth, nearest for gt.
Sample prepare_sample(const ManifestEntry& entry, int target_size = 352, DepthNorm norm = DepthNorm::bitdepth);

/// Decodes a single RGB image (and optional depth) for inference.
Sample prepare_inputs(const std::string& rgb_path, const std::string& depth_path, int target_size,
                      DepthNorm norm = DepthNorm::bitdepth);

/// Flip (horizontal, before rotation) then rotate counter-clockwise by
/// quarter_turns * 90 degrees, applied identically to rgb, depth and gt.
Sample apply_transform(const Sample& s, bool flip, int quarter_turns);

/// Random flip with probability 1/2 followed by one of four rotations.
Sample augment(const Sample& s, std::mt19937_64& rng);

/// ImageNet statistics used to standardize backbone input.
inline constexpr float kRgbMean[3] = {0.485f, 0.456f, 0.406f};
inline constexpr float kRgbStd[3] = {0.229f, 0.224f, 0.225f};

struct Batch {
  std::vector<std::string> ids;
  Tensor<float> rgb;  // standardized
  Tensor<float> depth;
  Tensor<float> gt;
};

Batch make_batch(const std::vector<Sample>& samples);

/// Writes a synthetic RGB-D dataset (one object per image, depth nearer on
/// the object) for smoke tests and demos. 16-bit depth when `depth16`.
void write_synthetic_dataset(const std::string& root, int count, int size, std::uint64_t seed, bool depth16 = false);

/// In-memory version of the synthetic generator, already prepared.
std::vector<Sample> synthetic_samples(int count, int size, std::uint64_t seed);

}  // namespace pgar

#endif  // PGAR_DATA_HPP
