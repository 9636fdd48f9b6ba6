#include "pgar/training.hpp"

#include "pgar/model_io.hpp"

#include <algorithm>
#include <numeric>

namespace pgar {

nlohmann::json LossReport::to_json() const {
  nlohmann::json j;
  j["step"] = step;
  j["epoch"] = epoch;
  j["lr"] = lr;
  nlohmann::json per = nlohmann::json::object();
  for (std::size_t i = 0; i < names.size(); ++i) per[names[i]] = losses[i];
  j["losses"] = per;
  j["total"] = total;
  return j;
}

double lr_schedule(int epoch, const TrainConfig& cfg) {
  if (epoch < 0 || epoch >= cfg.epochs) {
    throw ConfigError("epoch " + std::to_string(epoch) + " outside [0, " + std::to_string(cfg.epochs) + ")");
  }
  return epoch < cfg.lr_drop_epoch ? cfg.lr : cfg.lr * cfg.lr_drop_factor;
}

LossReport train_step(Model<float>& model, const Batch& batch, AdamState& state, const TrainConfig& cfg, double lr) {
  ForwardTrace<float> trace;
  const auto preds = forward(model, batch.rgb, batch.depth, &trace);
  PredictionGrad<float> dpreds;
  LossReport report = deep_supervision_loss(preds, batch.gt, cfg.loss_weights, &dpreds);
  for (std::size_t k = 0; k < report.losses.size(); ++k) {
    if (!std::isfinite(report.losses[k])) {
      throw Error("non-finite loss " + std::to_string(report.losses[k]) + " at output head " + report.names[k] +
                  " (step " + std::to_string(state.step + 1) + ")");
    }
  }

  Model<float> grad = model.zeros_like();
  backward(model, trace, dpreds, grad, cfg.freeze_backbone);

  auto params = parameters(model);
  auto grads = parameters(grad);
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.push_back(Eigen::ArrayXf::Zero(p.size));
      state.v.push_back(Eigen::ArrayXf::Zero(p.size));
    }
  }
  if (state.m.size() != params.size()) throw Error("optimizer state does not match the model");
  ++state.step;
  const double t = double(state.step);
  const float c1 = float(1.0 - std::pow(cfg.beta1, t));
  const float c2 = float(1.0 - std::pow(cfg.beta2, t));
  const float b1 = float(cfg.beta1);
  const float b2 = float(cfg.beta2);
  const float eps = float(cfg.eps);
  const float wd = float(cfg.weight_decay);
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (cfg.freeze_backbone && params[i].name.rfind("backbone.", 0) == 0) continue;
    auto p = params[i].array();
    Eigen::ArrayXf g = grads[i].array();
    if (wd != 0.0f) g += wd * p;
    state.m[i] = b1 * state.m[i] + (1 - b1) * g;
    state.v[i] = b2 * state.v[i] + (1 - b2) * g.square();
    p -= float(lr) * (state.m[i] / c1) / ((state.v[i] / c2).sqrt() + eps);
  }
  report.step = state.step;
  report.lr = lr;
  return report;
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t samples, int batch_size, std::uint64_t seed, int epoch) {
  std::vector<std::size_t> order(samples);
  std::iota(order.begin(), order.end(), 0);
  std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(epoch), 0x5eedu};
  std::mt19937_64 rng(seq);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < samples; i += std::size_t(batch_size)) {
    out.emplace_back(order.begin() + std::ptrdiff_t(i),
                     order.begin() + std::ptrdiff_t(std::min(samples, i + std::size_t(batch_size))));
  }
  return out;
}

std::mt19937_64 augmentation_rng(std::uint64_t seed, int epoch, std::size_t position) {
  std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(epoch), std::uint32_t(position),
                    0xa06u};
  return std::mt19937_64(seq);
}

void train_loop(Model<float>& model, std::size_t count, const SampleSource& source, const TrainConfig& cfg,
                AdamState& state, const TrainCallbacks& callbacks, int start_epoch) {
  const auto problems = cfg.problems();
  if (!problems.empty()) throw ConfigError(problems.front());
  if (count == 0) throw InputError("no training samples");
  for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    const double lr = lr_schedule(epoch, cfg);
    std::size_t position = 0;
    for (const auto& idx : epoch_batches(count, cfg.batch_size, cfg.seed, epoch)) {
      std::vector<Sample> chosen;
      for (std::size_t i : idx) {
        if (cfg.augment) {
          auto rng = augmentation_rng(cfg.seed, epoch, position);
          chosen.push_back(augment(source(i), rng));
        } else {
          chosen.push_back(source(i));
        }
        ++position;
      }
      LossReport r = train_step(model, make_batch(chosen), state, cfg, lr);
      r.epoch = epoch;
      if (callbacks.on_step) callbacks.on_step(r);
    }
    if (callbacks.on_epoch_end) callbacks.on_epoch_end(epoch, model, state);
  }
}

void train_loop(Model<float>& model, const std::vector<Sample>& samples, const TrainConfig& cfg, AdamState& state,
                const TrainCallbacks& callbacks, int start_epoch) {
  train_loop(model, samples.size(), [&](std::size_t i) { return samples[i]; }, cfg, state, callbacks, start_epoch);
}

void save_checkpoint(const std::string& path, const RunConfig& cfg, const Model<float>& model, const AdamState& state,
                     int epoch) {
  Archive a;
  a.meta["kind"] = "checkpoint";
  a.meta["format_version"] = Checkpoint::kFormatVersion;
  a.meta["config"] = to_json(cfg);
  a.meta["epoch"] = epoch;
  a.meta["adam_step"] = state.step;
  a.tensors = export_parameters(model, "model.");
  if (!state.m.empty()) {
    auto& mm = const_cast<Model<float>&>(model);
    const auto params = parameters(mm);
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto& m = state.m[i];
      const auto& v = state.v[i];
      a.tensors.push_back({"adam.m." + params[i].name, {std::int64_t(m.size())}, {m.data(), m.data() + m.size()}});
      a.tensors.push_back({"adam.v." + params[i].name, {std::int64_t(v.size())}, {v.data(), v.data() + v.size()}});
    }
  }
  write_archive(path, a);
}

Checkpoint load_checkpoint(const std::string& path) {
  const Archive a = read_archive(path);
  if (a.meta.value("kind", "") != "checkpoint") throw LoadError(path + " is not a checkpoint");
  const int version = a.meta.value("format_version", 0);
  if (version != Checkpoint::kFormatVersion) {
    throw LoadError(path + ": unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint c;
  c.config = run_config_from_json(a.meta.at("config"));
  c.epoch = a.meta.value("epoch", -1);
  c.model = make_model<float>(c.config.model);
  import_parameters(c.model, a, "model.");
  c.optimizer.step = a.meta.value("adam_step", std::int64_t(0));
  const auto params = parameters(c.model);
  if (a.find("adam.m." + params.front().name)) {
    for (const auto& p : params) {
      const NamedTensor* m = a.find("adam.m." + p.name);
      const NamedTensor* v = a.find("adam.v." + p.name);
      if (!m || !v || std::int64_t(m->values.size()) != p.size || std::int64_t(v->values.size()) != p.size) {
        throw LoadError(path + ": optimizer state for " + p.name + " is missing or mis-shaped");
      }
      c.optimizer.m.push_back(Eigen::Map<const Eigen::ArrayXf>(m->values.data(), p.size));
      c.optimizer.v.push_back(Eigen::Map<const Eigen::ArrayXf>(v->values.data(), p.size));
    }
  }
  return c;
}

}  // namespace pgar
