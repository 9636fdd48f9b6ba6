#ifndef PGAR_MODEL_IO_HPP
#define PGAR_MODEL_IO_HPP

#include "pgar/archive.hpp"
#include "pgar/network.hpp"

#include <string>
#include <vector>

namespace pgar {

/// Every parameter of `m` as float32 named tensors, prefixed with `prefix`.
template <typename Scalar>
std::vector<NamedTensor> export_parameters(const Model<Scalar>& m, const std::string& prefix = "") {
  std::vector<NamedTensor> out;
  auto& mm = const_cast<Model<Scalar>&>(m);
  for (const auto& p : parameters(mm)) {
    NamedTensor t{prefix + p.name, p.shape, {}};
    t.values.resize(std::size_t(p.size));
    for (Index i = 0; i < p.size; ++i) t.values[std::size_t(i)] = float(p.data[i]);
    out.push_back(std::move(t));
  }
  return out;
}

/// Copies every parameter whose name starts with `filter` from the archive.
/// All missing or mis-shaped keys are collected and reported in one LoadError.
template <typename Scalar>
void import_parameters(Model<Scalar>& m, const Archive& archive, const std::string& prefix = "",
                       const std::string& filter = "") {
  std::vector<std::string> bad;
  auto params = parameters(m);
  for (auto& p : params) {
    if (p.name.rfind(filter, 0) != 0) continue;
    const NamedTensor* t = archive.find(prefix + p.name);
    if (!t) {
      bad.push_back(prefix + p.name + " (missing)");
      continue;
    }
    if (t->shape != p.shape || std::int64_t(t->values.size()) != p.size) {
      std::string got;
      for (auto d : t->shape) got += (got.empty() ? "" : "x") + std::to_string(d);
      std::string want;
      for (auto d : p.shape) want += (want.empty() ? "" : "x") + std::to_string(d);
      bad.push_back(prefix + p.name + " (shape " + got + ", expected " + want + ")");
    }
  }
  if (!bad.empty()) {
    std::string msg = "parameter load failed for " + std::to_string(bad.size()) + " tensor(s):";
    for (const auto& b : bad) msg += "\n  " + b;
    throw LoadError(msg);
  }
  for (auto& p : params) {
    if (p.name.rfind(filter, 0) != 0) continue;
    const NamedTensor* t = archive.find(prefix + p.name);
    for (Index i = 0; i < p.size; ++i) p.data[i] = Scalar(t->values[std::size_t(i)]);
  }
}

/// Loads `backbone.*` tensors from a named-tensor weights file.
template <typename Scalar>
void load_backbone_weights(Model<Scalar>& m, const std::string& path) {
  import_parameters(m, read_archive(path), "", "backbone.");
}

/// Seeded random initialization, then the backbone from `weights` if given.
template <typename Scalar>
Model<Scalar> init_model(const ModelConfig& cfg, std::uint64_t seed, const std::optional<std::string>& weights) {
  Model<Scalar> m = init_model<Scalar>(cfg, seed);
  if (weights) load_backbone_weights(m, *weights);
  return m;
}

}  // namespace pgar

#endif  // PGAR_MODEL_IO_HPP
