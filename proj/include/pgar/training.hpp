#ifndef PGAR_TRAINING_HPP
#define PGAR_TRAINING_HPP

#include "pgar/config.hpp"
#include "pgar/data.hpp"
#include "pgar/network.hpp"

#include <json.hpp>

#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace pgar {

struct LossReport {
  std::vector<std::string> names;  // s_init, deepest stage ... s1
  std::vector<double> losses;
  double total = 0;
  std::int64_t step = 0;
  int epoch = 0;
  double lr = 0;

  nlohmann::json to_json() const;
};

/// Names of the supervised outputs in supervision order.
inline std::vector<std::string> output_names(std::size_t stages) {
  std::vector<std::string> out{"s_init"};
  for (std::size_t i = stages; i >= 1; --i) out.push_back("s" + std::to_string(i));
  return out;
}

/// Mean binary cross-entropy of one logit map against gt at gt resolution,
/// in the stable form max(x, 0) - x z + log(1 + exp(-|x|)). `dlogits`
/// receives the gradient w.r.t. the (pre-upsampling) logits when non-null.
template <typename Scalar>
double bce_with_logits(const Tensor<Scalar>& logits, const Tensor<Scalar>& gt, Tensor<Scalar>* dlogits = nullptr) {
  const Tensor<Scalar> up = resize_bilinear(logits, gt.h(), gt.w());
  const auto& x = up.array();
  const auto& z = gt.array();
  const double n = double(up.size());
  const auto per_pixel = x.max(Scalar(0)) - x * z + (Scalar(1) + (-x.abs()).exp()).log();
  const double loss = double(per_pixel.sum()) / n;
  if (dlogits) {
    Tensor<Scalar> g(up.shape());
    g.array() = (x.unaryExpr([](Scalar v) { return sigmoid(v); }) - z) / Scalar(n);
    *dlogits = resize_bilinear_backward(g, logits.h(), logits.w());
  }
  return loss;
}

template <typename Scalar>
void check_binary(const Tensor<Scalar>& gt) {
  if (!((gt.array() == Scalar(0)) || (gt.array() == Scalar(1))).all()) {
    throw InputError("ground truth must be binary");
  }
}

/// Deep supervision over every output: s_init and each stage prediction,
/// each upsampled to gt resolution. `weights` empty means all ones.
template <typename Scalar>
LossReport deep_supervision_loss(const PredictionSet<Scalar>& preds, const Tensor<Scalar>& gt,
                                 const std::vector<double>& weights = {}, PredictionGrad<Scalar>* grad = nullptr) {
  check_binary(gt);
  const auto outputs = preds.outputs();
  if (!weights.empty() && weights.size() != outputs.size()) {
    throw ConfigError("expected " + std::to_string(outputs.size()) + " loss weights, got " +
                      std::to_string(weights.size()));
  }
  LossReport r;
  r.names = output_names(preds.stages.size());
  if (grad) {
    grad->stages.assign(preds.stages.size(), {});
  }
  for (std::size_t k = 0; k < outputs.size(); ++k) {
    const double w = weights.empty() ? 1.0 : weights[k];
    Tensor<Scalar> d;
    const double loss = bce_with_logits(outputs[k]->data, gt, grad ? &d : nullptr);
    r.losses.push_back(loss);
    r.total += w * loss;
    if (grad) {
      if (w != 1.0) d.array() *= Scalar(w);
      if (k == 0) {
        grad->s_init = std::move(d);
      } else {
        grad->stages[preds.stages.size() - k] = std::move(d);
      }
    }
  }
  return r;
}

/// Step schedule: lr before lr_drop_epoch, lr * lr_drop_factor afterwards.
double lr_schedule(int epoch, const TrainConfig& cfg);

/// Adaptive-moment optimizer state, one slot per named parameter.
struct AdamState {
  std::int64_t step = 0;
  std::vector<Eigen::ArrayXf> m;
  std::vector<Eigen::ArrayXf> v;
};

/// forward -> loss -> backward -> one Adam update. Throws Error naming the
/// head when a loss is not finite (parameters are left untouched).
LossReport train_step(Model<float>& model, const Batch& batch, AdamState& state, const TrainConfig& cfg, double lr);

/// Batch composition for one epoch: a permutation keyed on (seed, epoch),
/// cut into batches with the short tail kept.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t samples, int batch_size, std::uint64_t seed, int epoch);

/// Deterministic augmentation stream for one sample slot of one epoch.
std::mt19937_64 augmentation_rng(std::uint64_t seed, int epoch, std::size_t position);

struct TrainCallbacks {
  std::function<void(const LossReport&)> on_step;
  std::function<void(int epoch, const Model<float>&, const AdamState&)> on_epoch_end;
};

/// Produces the prepared sample at a manifest position.
using SampleSource = std::function<Sample(std::size_t)>;

/// Runs epochs [start_epoch, cfg.epochs) over `count` samples fetched on
/// demand from `source`.
void train_loop(Model<float>& model, std::size_t count, const SampleSource& source, const TrainConfig& cfg,
                AdamState& state, const TrainCallbacks& callbacks = {}, int start_epoch = 0);

/// Same, over samples that are already prepared.
void train_loop(Model<float>& model, const std::vector<Sample>& samples, const TrainConfig& cfg, AdamState& state,
                const TrainCallbacks& callbacks = {}, int start_epoch = 0);

/// Checkpoint = {format_version, config snapshot, epoch, step, parameters,
/// optimizer moments}.
struct Checkpoint {
  static constexpr int kFormatVersion = 1;

  RunConfig config;
  Model<float> model;
  AdamState optimizer;
  int epoch = -1;  // last completed epoch
};

void save_checkpoint(const std::string& path, const RunConfig& cfg, const Model<float>& model, const AdamState& state,
                     int epoch);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace pgar

#endif  // PGAR_TRAINING_HPP
