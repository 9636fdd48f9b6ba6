#ifndef PGAR_STREAMS_HPP
#define PGAR_STREAMS_HPP

#include "pgar/init.hpp"
#include "pgar/ops.hpp"

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace pgar {

// VGG16 convolutional trunk: five blocks of 3x3 convolutions, each followed by
// 2x2 max pooling. The last activation of each block is a side-output tap.
inline constexpr std::array<int, 5> kVggBlockChannels{64, 128, 256, 512, 512};
inline constexpr std::array<int, 5> kVggBlockDepth{2, 2, 3, 3, 3};
inline constexpr std::array<int, 5> kReducedChannels{16, 32, 64, 64, 64};
inline constexpr int kDepthChannels = 64;
inline constexpr int kDepthLayers = 4;

enum class BackboneVariant { full, tiny };

struct BackboneConfig {
  BackboneVariant variant = BackboneVariant::full;
  double channel_scale = 1.0;
  std::optional<std::string> pretrained_weights;

  static BackboneConfig full() { return {}; }
  static BackboneConfig tiny() { return {BackboneVariant::tiny, 0.125, std::nullopt}; }

  /// Per-block channel widths after scaling.
  std::array<int, 5> block_channels() const {
    std::array<int, 5> out{};
    for (std::size_t b = 0; b < out.size(); ++b) {
      out[b] = std::max(1, int(std::lround(kVggBlockChannels[b] * channel_scale)));
    }
    return out;
  }
  int pooled_channels() const { return block_channels()[4]; }
};

/// Canonical layer names conv{block}_{index}, e.g. conv3_3.
inline std::vector<std::string> vgg_layer_names() {
  std::vector<std::string> names;
  for (std::size_t b = 0; b < kVggBlockDepth.size(); ++b) {
    for (int i = 1; i <= kVggBlockDepth[b]; ++i) {
      names.push_back("conv" + std::to_string(b + 1) + "_" + std::to_string(i));
    }
  }
  return names;
}

template <typename Scalar>
struct Backbone {
  std::vector<Conv2d<Scalar>> convs;  // 13 layers in forward order

  static Backbone make(const BackboneConfig& cfg, int input_channels = 3) {
    Backbone bb;
    const auto widths = cfg.block_channels();
    int in = input_channels;
    for (std::size_t b = 0; b < widths.size(); ++b) {
      for (int i = 0; i < kVggBlockDepth[b]; ++i) {
        bb.convs.emplace_back(in, widths[b], 3, 1, 1);
        in = widths[b];
      }
    }
    return bb;
  }
};

template <typename Scalar>
struct BackboneTrace {
  std::vector<Tensor<Scalar>> inputs;   // per conv
  std::vector<Tensor<Scalar>> outputs;  // per conv, post-ReLU
};

template <typename Scalar>
struct RgbFeatures {
  std::array<FeatureMap<Scalar>, 5> taps;
  FeatureMap<Scalar> pooled;  // pool5, scale 1/32
};

namespace detail {

inline void check_divisible(Index h, Index w) {
  if (h <= 0 || w <= 0 || h % 32 != 0 || w % 32 != 0) {
    throw InputError("input size " + std::to_string(h) + "x" + std::to_string(w) +
                     " is not divisible by 32");
  }
}

}  // namespace detail

/// Runs the VGG16 trunk, returning the five block taps and the pooled feature
/// after the last block. `trace` receives what backward needs.
template <typename Scalar>
RgbFeatures<Scalar> extract_rgb_features(const FeatureMap<Scalar>& image, const Backbone<Scalar>& bb,
                                         BackboneTrace<Scalar>* trace = nullptr) {
  detail::check_divisible(image.data.h(), image.data.w());
  if (image.scale.denominator != 1) throw InputError("extract_rgb_features: image must be at scale 1");
  if (bb.convs.size() != 13) throw ConfigError("backbone must hold 13 convolutions");
  if (image.data.c() != bb.convs.front().in_channels) {
    throw ConfigError("backbone expects " + std::to_string(bb.convs.front().in_channels) +
                      " input channels, image has " + std::to_string(image.data.c()));
  }
  if (trace) {
    trace->inputs.clear();
    trace->outputs.clear();
  }
  RgbFeatures<Scalar> out;
  Tensor<Scalar> x = image.data;
  std::size_t layer = 0;
  int den = 1;
  for (std::size_t b = 0; b < kVggBlockDepth.size(); ++b) {
    for (int i = 0; i < kVggBlockDepth[b]; ++i, ++layer) {
      Tensor<Scalar> y = conv2d(bb.convs[layer], x);
      relu_inplace(y);
      if (trace) trace->inputs.push_back(std::move(x));
      x = std::move(y);
      if (trace) trace->outputs.push_back(x);
    }
    out.taps[b] = {x, Scale{den}};
    x = max_pool2(x);
    den *= 2;
  }
  out.pooled = {std::move(x), Scale{den}};
  return out;
}

/// Backpropagates tap and pooled-feature gradients through the trunk. Empty
/// tensors mean "no gradient". Returns the image gradient when requested.
template <typename Scalar>
Tensor<Scalar> backbone_backward(const Backbone<Scalar>& bb, const BackboneTrace<Scalar>& trace,
                                 const std::array<Tensor<Scalar>, 5>& dtaps, const Tensor<Scalar>& dpooled,
                                 Backbone<Scalar>* grad, bool need_input_grad = false) {
  // Find the deepest block that receives any gradient.
  int deepest = -1;
  if (!dpooled.empty()) deepest = 4;
  for (int b = 4; b >= 0 && deepest < 0; --b) {
    if (!dtaps[b].empty()) deepest = b;
  }
  if (deepest < 0) return {};

  std::vector<std::size_t> block_end(5);
  std::size_t acc = 0;
  for (std::size_t b = 0; b < 5; ++b) {
    acc += kVggBlockDepth[b];
    block_end[b] = acc;
  }

  Tensor<Scalar> g;  // gradient w.r.t. the pooled output of block b
  for (int b = deepest; b >= 0; --b) {
    const Tensor<Scalar>& tap = trace.outputs[block_end[b] - 1];
    Tensor<Scalar> gtap;
    if (b == 4) {
      gtap = dpooled.empty() ? Tensor<Scalar>(tap.shape()) : max_pool2_backward(tap, dpooled);
    } else {
      gtap = g.empty() ? Tensor<Scalar>(tap.shape()) : max_pool2_backward(tap, g);
    }
    if (!dtaps[b].empty()) gtap.array() += dtaps[b].array();
    for (int i = kVggBlockDepth[b] - 1; i >= 0; --i) {
      const std::size_t layer = block_end[b] - kVggBlockDepth[b] + i;
      relu_backward_inplace(trace.outputs[layer], gtap);
      const bool first = layer == 0;
      gtap = conv2d_backward(bb.convs[layer], trace.inputs[layer], gtap, grad ? &grad->convs[layer] : nullptr,
                             !first || need_input_grad);
    }
    g = std::move(gtap);
  }
  return need_input_grad ? g : Tensor<Scalar>{};
}

/// 1x1 linear projection of a tap. `warnings` receives a note when the target
/// is wider than the source.
template <typename Scalar>
FeatureMap<Scalar> reduce_channels(const FeatureMap<Scalar>& tap, int stage_target_channels,
                                   const Conv2d<Scalar>& reducer, std::vector<std::string>* warnings = nullptr) {
  if (reducer.kernel != 1 || reducer.out_channels != stage_target_channels ||
      reducer.in_channels != tap.data.c()) {
    throw ConfigError("reducer shape " + std::to_string(reducer.in_channels) + "->" +
                      std::to_string(reducer.out_channels) + " does not map " + std::to_string(tap.data.c()) +
                      " channels to " + std::to_string(stage_target_channels));
  }
  if (warnings && stage_target_channels > tap.data.c()) {
    warnings->push_back("reducer widens " + std::to_string(tap.data.c()) + " -> " +
                        std::to_string(stage_target_channels) + " channels");
  }
  return {conv2d(reducer, tap.data), tap.scale};
}

/// Lightweight depth stream: four 3x3 stride-2 convolutions with ReLU.
template <typename Scalar>
struct DepthStream {
  std::array<Conv2d<Scalar>, kDepthLayers> convs;

  static DepthStream make() {
    DepthStream ds;
    int in = 1;
    for (auto& c : ds.convs) {
      c = Conv2d<Scalar>(in, kDepthChannels, 3, 2, 1);
      in = kDepthChannels;
    }
    return ds;
  }

  Index parameter_count() const {
    Index total = 0;
    for (const auto& c : convs) total += c.parameter_count();
    return total;
  }
};

template <typename Scalar>
struct DepthTrace {
  std::array<Tensor<Scalar>, kDepthLayers> inputs;
  std::array<Tensor<Scalar>, kDepthLayers> outputs;
};

template <typename Scalar>
void check_depth_range(const Tensor<Scalar>& depth) {
  if (depth.size() > 0 && (depth.array().minCoeff() < Scalar(0) || depth.array().maxCoeff() > Scalar(1) ||
                           !depth.all_finite())) {
    throw InputError("depth values must lie in [0, 1]");
  }
}

/// All four depth layers at scales 1/2, 1/4, 1/8, 1/16.
template <typename Scalar>
std::array<FeatureMap<Scalar>, kDepthLayers> depth_stream_forward(const FeatureMap<Scalar>& depth,
                                                                   const DepthStream<Scalar>& ds,
                                                                   DepthTrace<Scalar>* trace = nullptr) {
  if (depth.data.c() != 1) throw InputError("depth input must have one channel");
  detail::check_divisible(depth.data.h(), depth.data.w());
  check_depth_range(depth.data);
  std::array<FeatureMap<Scalar>, kDepthLayers> out;
  Tensor<Scalar> x = depth.data;
  int den = 1;
  for (int l = 0; l < kDepthLayers; ++l) {
    Tensor<Scalar> y = conv2d(ds.convs[l], x);
    relu_inplace(y);
    den *= 2;
    if (trace) {
      trace->inputs[l] = std::move(x);
      trace->outputs[l] = y;
    }
    out[l] = {y, Scale{den}};
    x = std::move(y);
  }
  return out;
}

/// The last three depth layers (scales 1/4, 1/8, 1/16).
template <typename Scalar>
std::array<FeatureMap<Scalar>, 3> extract_depth_features(const FeatureMap<Scalar>& depth,
                                                          const DepthStream<Scalar>& ds,
                                                          DepthTrace<Scalar>* trace = nullptr) {
  auto all = depth_stream_forward(depth, ds, trace);
  return {all[1], all[2], all[3]};
}

/// `dlayers[l]` is the gradient w.r.t. depth layer l (empty = none).
template <typename Scalar>
void depth_stream_backward(const DepthStream<Scalar>& ds, const DepthTrace<Scalar>& trace,
                           const std::array<Tensor<Scalar>, kDepthLayers>& dlayers, DepthStream<Scalar>* grad) {
  int deepest = -1;
  for (int l = kDepthLayers - 1; l >= 0 && deepest < 0; --l) {
    if (!dlayers[l].empty()) deepest = l;
  }
  Tensor<Scalar> g;
  for (int l = deepest; l >= 0; --l) {
    Tensor<Scalar> gl = g.empty() ? Tensor<Scalar>(trace.outputs[l].shape()) : std::move(g);
    if (!dlayers[l].empty()) gl.array() += dlayers[l].array();
    relu_backward_inplace(trace.outputs[l], gl);
    g = conv2d_backward(ds.convs[l], trace.inputs[l], gl, grad ? &grad->convs[l] : nullptr, l > 0);
  }
}

enum class Source { rgb, depth, fused };

inline std::string to_string(Source s) {
  switch (s) {
    case Source::rgb:
      return "rgb";
    case Source::depth:
      return "depth";
    case Source::fused:
      return "fused";
  }
  return "?";
}

template <typename Scalar>
struct SideFeature {
  int stage = 0;  // 1 = shallowest
  Source source = Source::rgb;
  int tap = 0;  // index into the RGB taps or the depth features it came from
  FeatureMap<Scalar> feature;
};

template <typename Scalar>
struct SideFeatureSet {
  std::vector<SideFeature<Scalar>> entries;  // ordered by stage, shallow first

  const SideFeature<Scalar>& stage(int i) const { return entries.at(std::size_t(i - 1)); }
};

/// Interleaves reduced RGB taps with depth features for alternate refinement.
/// Each depth feature is placed just deeper than the RGB tap of the same scale;
/// stages are then numbered from the shallow end. With no depth features this
/// yields the five-stage RGB-only set.
template <typename Scalar>
SideFeatureSet<Scalar> assemble_side_features(const std::array<FeatureMap<Scalar>, 5>& rgb_taps,
                                              const std::vector<FeatureMap<Scalar>>& depth_feats,
                                              const std::vector<Conv2d<Scalar>>& reducers) {
  if (reducers.size() != rgb_taps.size()) throw ConfigError("expected one reducer per RGB tap");
  std::vector<int> depth_at_tap(rgb_taps.size(), -1);
  for (std::size_t d = 0; d < depth_feats.size(); ++d) {
    int match = -1;
    for (std::size_t t = 0; t < rgb_taps.size(); ++t) {
      if (rgb_taps[t].scale == depth_feats[d].scale) match = int(t);
    }
    if (match < 0) {
      throw AssemblyError("depth feature " + std::to_string(d) + " at scale " + depth_feats[d].scale.str() +
                          " has no RGB neighbour of the same scale");
    }
    const auto& rgb = rgb_taps[std::size_t(match)].data;
    const auto& dep = depth_feats[d].data;
    if (rgb.h() != dep.h() || rgb.w() != dep.w() || rgb.n() != dep.n()) {
      throw AssemblyError("depth feature " + std::to_string(d) + " is " + dep.shape().str() +
                          " but its RGB neighbour is " + rgb.shape().str());
    }
    if (depth_at_tap[std::size_t(match)] >= 0) {
      throw AssemblyError("two depth features share scale " + depth_feats[d].scale.str());
    }
    depth_at_tap[std::size_t(match)] = int(d);
  }

  SideFeatureSet<Scalar> set;
  for (std::size_t t = 0; t < rgb_taps.size(); ++t) {
    const int target = reducers[t].out_channels;
    set.entries.push_back({0, Source::rgb, int(t), reduce_channels(rgb_taps[t], target, reducers[t])});
    if (depth_at_tap[t] >= 0) {
      set.entries.push_back({0, Source::depth, depth_at_tap[t], depth_feats[std::size_t(depth_at_tap[t])]});
    }
  }
  for (std::size_t i = 0; i < set.entries.size(); ++i) set.entries[i].stage = int(i + 1);
  return set;
}

}  // namespace pgar

#endif  // PGAR_STREAMS_HPP
