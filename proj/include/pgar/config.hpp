#ifndef PGAR_CONFIG_HPP
#define PGAR_CONFIG_HPP

#include "pgar/network.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace pgar {

enum class DepthNorm { bitdepth, minmax };
enum class EMeasureVariant { adaptive, max };

struct TrainConfig {
  int batch_size = 10;
  int epochs = 30;
  double lr = 1e-4;
  int lr_drop_epoch = 25;
  double lr_drop_factor = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> loss_weights;  // empty = all ones
  bool freeze_backbone = false;
  bool augment = true;

  std::vector<std::string> problems() const;
};

struct DataConfig {
  std::string root;  // empty = take from PGAR_DATA_ROOT or the CLI
  DepthNorm depth_norm = DepthNorm::bitdepth;
};

struct EvalConfig {
  EMeasureVariant e_measure = EMeasureVariant::adaptive;
  double beta2 = 0.3;
};

/// Everything a run needs. Every key has a default equal to the published
/// setting where one exists.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  DataConfig data;
  EvalConfig eval;
  std::optional<std::string> backbone_weights;

  std::vector<std::string> problems() const;
  /// Throws ConfigError listing every problem, one per line.
  void validate() const;
};

/// Parses a sectioned key-value file ([model], [train], [data], [eval]).
/// Unknown sections or keys and malformed values are all reported together.
RunConfig load_run_config(const std::string& path);

/// Applies one "section.key=value" override.
void apply_override(RunConfig& cfg, const std::string& assignment);

/// Renders the config in the same format load_run_config reads.
std::string render_run_config(const RunConfig& cfg);

nlohmann::json to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const nlohmann::json& j);

/// Keys whose values differ between two model configs.
std::vector<std::string> diverging_keys(const ModelConfig& a, const ModelConfig& b);

}  // namespace pgar

#endif  // PGAR_CONFIG_HPP
