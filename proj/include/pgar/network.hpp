#ifndef PGAR_NETWORK_HPP
#define PGAR_NETWORK_HPP

#include "pgar/gr.hpp"
#include "pgar/init.hpp"
#include "pgar/msr.hpp"
#include "pgar/streams.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace pgar {

enum class MsrMode { recurrent, stacked };
enum class DepthBackbone { light, vgg };

inline const std::array<std::string, 5>& tap_names() {
  static const std::array<std::string, 5> names{"conv1_2", "conv2_2", "conv3_3", "conv4_3", "conv5_3"};
  return names;
}

/// Structural configuration of the network. Defaults are the published model.
struct ModelConfig {
  BackboneConfig backbone = BackboneConfig::full();
  int input_size = 352;
  int n1 = 5;
  int n2 = kGrBlocksPerStage;
  int guidance_style = kDefaultGuidanceStyle;
  int msr_inner_width = 64;
  MsrMode msr_mode = MsrMode::recurrent;
  bool rgb_only = false;
  bool concat_fusion = false;
  int depth_taps = 3;
  DepthBackbone depth_backbone = DepthBackbone::light;

  /// Every violated constraint, one message each.
  std::vector<std::string> problems() const {
    std::vector<std::string> out;
    if (input_size <= 0 || input_size % 32 != 0) {
      out.push_back("input_size must be a positive multiple of 32 (got " + std::to_string(input_size) + ")");
    }
    if (n1 < 1) out.push_back("n1 must be >= 1 (got " + std::to_string(n1) + ")");
    if (n2 != kGrBlocksPerStage) {
      out.push_back("n2 must be 3; guidance styles define exactly three GR blocks (got " + std::to_string(n2) + ")");
    }
    if (guidance_style < 1 || guidance_style > kGuidanceStyles) {
      out.push_back("guidance_style must be in the legal range 1-8 (got " + std::to_string(guidance_style) + ")");
    }
    if (msr_inner_width < 1) out.push_back("msr_inner_width must be >= 1");
    if (depth_taps < 1 || depth_taps > 4) {
      out.push_back("depth_taps must be in 1-4 (got " + std::to_string(depth_taps) + ")");
    }
    if (backbone.channel_scale <= 0) out.push_back("backbone channel_scale must be positive");
    if (rgb_only && concat_fusion) out.push_back("rgb_only and concat_fusion are incompatible");
    if (rgb_only && depth_taps != 3) out.push_back("depth_taps has no effect with rgb_only");
    if (rgb_only && depth_backbone == DepthBackbone::vgg) out.push_back("depth_backbone=full requires a depth stream");
    if (concat_fusion && depth_taps != 3) out.push_back("concat_fusion supports only depth_taps=3");
    return out;
  }

  void validate() const {
    const auto p = problems();
    if (p.empty()) return;
    std::string msg = "invalid model configuration:";
    for (const auto& s : p) msg += "\n  " + s;
    throw ConfigError(msg);
  }

  MsrConfig msr() const {
    MsrConfig m;
    m.n1 = msr_mode == MsrMode::stacked ? kStackedMsrBlocks : n1;
    m.inner_width = msr_inner_width;
    m.input_channels = backbone.pooled_channels();
    return m;
  }
};

/// Static description of one refinement stage.
struct StageSpec {
  int index = 0;  // 1 = shallowest
  Source source = Source::rgb;
  int rgb_tap = -1;      // 0..4 when the stage reads an RGB tap
  int depth_index = -1;  // index into the model's depth feature list
  int channels = 0;
  int scale = 1;  // denominator
};

namespace detail {

// Depth candidates, shallow first: light stream layers 0..3, or VGG taps
// conv2_2..conv5_3. Each entry is {candidate id, scale denominator}.
inline std::vector<std::pair<int, int>> depth_candidates(const ModelConfig& cfg) {
  std::vector<std::pair<int, int>> all;
  for (int l = 0; l < 4; ++l) {
    all.emplace_back(cfg.depth_backbone == DepthBackbone::light ? l : l + 1, 2 << l);
  }
  return {all.end() - cfg.depth_taps, all.end()};
}

}  // namespace detail

/// Stage layout, shallow first. Depth stages sit just deeper than the RGB
/// stage of the same scale; with concat fusion the pair becomes one stage.
inline std::vector<StageSpec> build_topology(const ModelConfig& cfg) {
  std::vector<int> depth_at_scale(64, -1);
  if (!cfg.rgb_only) {
    const auto cands = detail::depth_candidates(cfg);
    for (std::size_t d = 0; d < cands.size(); ++d) depth_at_scale[std::size_t(cands[d].second)] = int(d);
  }
  std::vector<StageSpec> out;
  for (int t = 0; t < 5; ++t) {
    const int scale = 1 << t;
    const int d = depth_at_scale[std::size_t(scale)];
    if (cfg.concat_fusion && d >= 0) {
      out.push_back({0, Source::fused, t, d, kReducedChannels[std::size_t(t)], scale});
      continue;
    }
    out.push_back({0, Source::rgb, t, -1, kReducedChannels[std::size_t(t)], scale});
    if (d >= 0) out.push_back({0, Source::depth, -1, d, kDepthChannels, scale});
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i].index = int(i + 1);
  return out;
}

template <typename Scalar>
struct Model {
  ModelConfig config;
  std::vector<StageSpec> topology;
  GuidanceSchedule schedule;

  Backbone<Scalar> backbone;
  std::vector<Conv2d<Scalar>> reducers;  // one per RGB tap
  DepthStream<Scalar> depth;             // light depth stream
  Backbone<Scalar> depth_backbone;       // VGG depth stream (ablation)
  std::vector<Conv2d<Scalar>> depth_reducers;
  std::vector<Conv2d<Scalar>> fusion;  // per fused stage, shallow first
  MsrParams<Scalar> msr;
  std::vector<StageParams<Scalar>> stages;  // shallow first

  /// Same structure, every parameter zero. Used as a gradient accumulator.
  Model zeros_like() const {
    Model z = *this;
    for_each_conv(z, [](const std::string&, Conv2d<Scalar>& c) { c = c.zeros_like(); });
    return z;
  }

  bool uses_light_depth() const { return !config.rgb_only && config.depth_backbone == DepthBackbone::light; }
  bool uses_vgg_depth() const { return !config.rgb_only && config.depth_backbone == DepthBackbone::vgg; }
};

/// Visits every convolution with its hierarchical name, in a fixed order.
template <typename M, typename F>
void for_each_conv(M& m, F&& f) {
  const auto names = vgg_layer_names();
  for (std::size_t i = 0; i < m.backbone.convs.size(); ++i) f("backbone." + names[i], m.backbone.convs[i]);
  for (std::size_t i = 0; i < m.reducers.size(); ++i) f("reducer." + tap_names()[i], m.reducers[i]);
  if (m.uses_light_depth()) {
    for (std::size_t i = 0; i < m.depth.convs.size(); ++i) f("depth.conv" + std::to_string(i + 1), m.depth.convs[i]);
  }
  if (m.uses_vgg_depth()) {
    for (std::size_t i = 0; i < m.depth_backbone.convs.size(); ++i) {
      f("depth_backbone." + names[i], m.depth_backbone.convs[i]);
    }
    const auto cands = detail::depth_candidates(m.config);
    for (std::size_t i = 0; i < m.depth_reducers.size(); ++i) {
      f("depth_reducer." + tap_names()[std::size_t(cands[i].first)], m.depth_reducers[i]);
    }
  }
  {
    std::size_t k = 0;
    for (const auto& s : m.topology) {
      if (s.source == Source::fused) f("fusion." + tap_names()[std::size_t(s.rgb_tap)], m.fusion[k++]);
    }
  }
  for (std::size_t b = 0; b < m.msr.branches.size(); ++b) {
    const std::string branch = "msr.branch" + std::to_string(b + 1);
    auto& sets = m.msr.branches[b];
    for (std::size_t t = 0; t < sets.size(); ++t) {
      const std::string p = sets.size() == 1 ? branch : branch + ".block" + std::to_string(t + 1);
      f(p + ".reduce", sets[t].reduce);
      f(p + ".dilated", sets[t].dilated);
      f(p + ".expand", sets[t].expand);
    }
  }
  f("msr.head", m.msr.head);
  for (std::size_t i = 0; i < m.stages.size(); ++i) {
    const std::string stage = "stage" + std::to_string(i + 1);
    for (std::size_t r = 0; r < m.stages[i].blocks.size(); ++r) {
      const std::string p = stage + ".gr" + std::to_string(r + 1);
      f(p + ".theta1", m.stages[i].blocks[r].theta1);
      f(p + ".theta2", m.stages[i].blocks[r].theta2);
    }
  }
}

/// Flat view of one parameter tensor.
template <typename Scalar>
struct ParamRef {
  std::string name;
  Scalar* data = nullptr;
  Index size = 0;
  std::vector<std::int64_t> shape;

  Eigen::Map<Eigen::Array<Scalar, Eigen::Dynamic, 1>> array() const { return {data, size}; }
};

template <typename Scalar>
std::vector<ParamRef<Scalar>> parameters(Model<Scalar>& m) {
  std::vector<ParamRef<Scalar>> out;
  for_each_conv(m, [&](const std::string& name, Conv2d<Scalar>& c) {
    out.push_back({name + ".weight", c.weight.data(), c.weight.size(),
                   {c.out_channels, c.in_channels, c.kernel, c.kernel}});
    out.push_back({name + ".bias", c.bias.data(), c.bias.size(), {c.out_channels}});
  });
  return out;
}

/// Builds a zero-parameter model of the configured shape.
template <typename Scalar>
Model<Scalar> make_model(const ModelConfig& cfg) {
  cfg.validate();
  Model<Scalar> m;
  m.config = cfg;
  m.topology = build_topology(cfg);
  std::vector<int> widths;
  for (const auto& s : m.topology) widths.push_back(s.channels);
  m.schedule = build_schedule(cfg.guidance_style, widths);

  m.backbone = Backbone<Scalar>::make(cfg.backbone, 3);
  const auto bw = cfg.backbone.block_channels();
  for (std::size_t t = 0; t < 5; ++t) m.reducers.emplace_back(bw[t], kReducedChannels[t], 1);
  if (m.uses_light_depth()) m.depth = DepthStream<Scalar>::make();
  if (m.uses_vgg_depth()) {
    m.depth_backbone = Backbone<Scalar>::make(cfg.backbone, 3);
    for (const auto& [id, scale] : detail::depth_candidates(cfg)) {
      m.depth_reducers.emplace_back(bw[std::size_t(id)], kDepthChannels, 1);
    }
  }
  for (const auto& s : m.topology) {
    if (s.source == Source::fused) m.fusion.emplace_back(s.channels + kDepthChannels, s.channels, 1);
  }
  m.msr = MsrParams<Scalar>::make(cfg.msr(), cfg.msr_mode == MsrMode::stacked ? kStackedMsrBlocks : 1);
  for (std::size_t i = 0; i < m.topology.size(); ++i) {
    m.stages.push_back(StageParams<Scalar>::make(m.topology[i].channels, m.schedule.rows[i]));
  }
  return m;
}

/// Prediction maps (logits). `stages[i - 1]` is stage i's refined map.
template <typename Scalar>
struct PredictionSet {
  FeatureMap<Scalar> s_init;
  std::vector<FeatureMap<Scalar>> stages;

  const FeatureMap<Scalar>& s(int i) const { return stages.at(std::size_t(i - 1)); }
  std::size_t count() const { return stages.size() + 1; }
  /// All outputs in supervision order: s_init, then deepest stage to stage 1.
  std::vector<const FeatureMap<Scalar>*> outputs() const {
    std::vector<const FeatureMap<Scalar>*> out{&s_init};
    for (auto it = stages.rbegin(); it != stages.rend(); ++it) out.push_back(&*it);
    return out;
  }
};

/// Guidance for stage i: the next-deeper prediction, upsampled to F_i when the
/// stage sits at a finer scale (i = 1, 2, 4, 6, 8), passed through otherwise.
template <typename Scalar>
Tensor<Scalar> resolve_guidance_input(const Tensor<Scalar>& s_next, const Tensor<Scalar>& f_i, int i) {
  if (i < 1 || i > 8) throw TopologyError("stage index " + std::to_string(i) + " is outside 1-8");
  const bool upsample = i == 1 || i == 2 || i == 4 || i == 6 || i == 8;
  if (upsample) return resize_bilinear(s_next, f_i.h(), f_i.w());
  if (s_next.h() != f_i.h() || s_next.w() != f_i.w()) {
    throw TopologyError("stage " + std::to_string(i) + " expects guidance at " + std::to_string(f_i.h()) + "x" +
                        std::to_string(f_i.w()) + ", got " + std::to_string(s_next.h()) + "x" +
                        std::to_string(s_next.w()));
  }
  return s_next;
}

/// Same-or-finer rule used for any topology: upsample when the stage is at a
/// finer scale, reject a coarser one.
template <typename Scalar>
Tensor<Scalar> match_guidance(const Tensor<Scalar>& s_next, const Tensor<Scalar>& f) {
  if (s_next.h() == f.h() && s_next.w() == f.w()) return s_next;
  if (s_next.h() > f.h() || s_next.w() > f.w()) {
    throw TopologyError("guidance " + s_next.shape().str() + " is coarser-than-feature violated for " +
                        f.shape().str());
  }
  return resize_bilinear(s_next, f.h(), f.w());
}

template <typename Scalar>
struct ForwardTrace {
  BackboneTrace<Scalar> rgb;
  RgbFeatures<Scalar> rgb_features;
  DepthTrace<Scalar> depth;
  BackboneTrace<Scalar> depth_vgg;
  RgbFeatures<Scalar> depth_vgg_features;
  std::vector<FeatureMap<Scalar>> depth_features;  // per depth candidate used
  std::vector<Tensor<Scalar>> fusion_inputs;        // per stage; empty unless fused
  std::vector<FeatureMap<Scalar>> stage_features;   // F_i, shallow first
  MsrTrace<Scalar> msr;
  std::vector<StageTrace<Scalar>> stages;
  std::vector<Tensor<Scalar>> guidance;  // S^0_i, shallow first
};

/// Per-stage feature F_i for the model's topology.
template <typename Scalar>
std::vector<FeatureMap<Scalar>> stage_features(const Model<Scalar>& m, const RgbFeatures<Scalar>& rgb,
                                               const std::vector<FeatureMap<Scalar>>& depth_features,
                                               std::vector<Tensor<Scalar>>* fusion_inputs = nullptr) {
  std::vector<FeatureMap<Scalar>> out;
  if (fusion_inputs) fusion_inputs->assign(m.topology.size(), {});
  std::size_t fused = 0;
  for (std::size_t i = 0; i < m.topology.size(); ++i) {
    const auto& s = m.topology[i];
    switch (s.source) {
      case Source::rgb:
        out.push_back(reduce_channels(rgb.taps[std::size_t(s.rgb_tap)], s.channels, m.reducers[std::size_t(s.rgb_tap)]));
        break;
      case Source::depth:
        out.push_back(depth_features.at(std::size_t(s.depth_index)));
        break;
      case Source::fused: {
        auto reduced =
            reduce_channels(rgb.taps[std::size_t(s.rgb_tap)], s.channels, m.reducers[std::size_t(s.rgb_tap)]);
        Tensor<Scalar> cat = concat_channels(reduced.data, depth_features.at(std::size_t(s.depth_index)).data);
        out.push_back({conv2d(m.fusion[fused++], cat), reduced.scale});
        if (fusion_inputs) (*fusion_inputs)[i] = std::move(cat);
        break;
      }
    }
  }
  return out;
}

/// Full forward pass: streams, MSR initial prediction, then stages from the
/// deepest to the shallowest. Only prediction maps cross stage boundaries.
template <typename Scalar>
PredictionSet<Scalar> forward(const Model<Scalar>& m, const Tensor<Scalar>& rgb, const Tensor<Scalar>& depth,
                              ForwardTrace<Scalar>* trace = nullptr) {
  if (rgb.c() != 3) throw InputError("rgb input must have 3 channels");
  if (!m.config.rgb_only) {
    if (depth.empty()) throw InputError("depth input is required for an RGB-D model");
    if (depth.c() != 1 || depth.n() != rgb.n() || depth.h() != rgb.h() || depth.w() != rgb.w()) {
      throw InputError("depth " + depth.shape().str() + " does not match rgb " + rgb.shape().str());
    }
    check_depth_range(depth);
  }

  RgbFeatures<Scalar> rgb_feats = extract_rgb_features<Scalar>({rgb, Scale{1}}, m.backbone, trace ? &trace->rgb : nullptr);

  std::vector<FeatureMap<Scalar>> depth_feats;
  if (m.uses_light_depth()) {
    auto layers = depth_stream_forward<Scalar>({depth, Scale{1}}, m.depth, trace ? &trace->depth : nullptr);
    for (const auto& [id, scale] : detail::depth_candidates(m.config)) depth_feats.push_back(layers[std::size_t(id)]);
  } else if (m.uses_vgg_depth()) {
    Tensor<Scalar> rep(depth.n(), 3, depth.h(), depth.w());
    for (Index n = 0; n < depth.n(); ++n) {
      for (Index c = 0; c < 3; ++c) rep.plane(n, c) = depth.plane(n, 0);
    }
    auto vf = extract_rgb_features<Scalar>({rep, Scale{1}}, m.depth_backbone, trace ? &trace->depth_vgg : nullptr);
    const auto cands = detail::depth_candidates(m.config);
    for (std::size_t d = 0; d < cands.size(); ++d) {
      depth_feats.push_back(
          reduce_channels(vf.taps[std::size_t(cands[d].first)], kDepthChannels, m.depth_reducers[d]));
    }
    if (trace) trace->depth_vgg_features = std::move(vf);
  }

  auto feats = stage_features(m, rgb_feats, depth_feats, trace ? &trace->fusion_inputs : nullptr);

  PredictionSet<Scalar> preds;
  preds.s_init = m.config.msr_mode == MsrMode::stacked
                     ? build_stacked_msr(rgb_feats.pooled, m.msr, m.config.msr(), trace ? &trace->msr : nullptr)
                     : msr_forward(rgb_feats.pooled, m.msr, m.config.msr(), trace ? &trace->msr : nullptr);
  preds.stages.resize(m.topology.size());
  if (trace) {
    trace->stages.assign(m.topology.size(), {});
    trace->guidance.assign(m.topology.size(), {});
  }
  const Tensor<Scalar>* prev = &preds.s_init.data;
  for (int i = int(m.topology.size()); i >= 1; --i) {
    const auto idx = std::size_t(i - 1);
    const auto& f = feats[idx];
    Tensor<Scalar> guidance = match_guidance(*prev, f.data);
    Tensor<Scalar> out = stage_refine(f.data, guidance, m.stages[idx], m.schedule.rows[idx],
                                      trace ? &trace->stages[idx] : nullptr);
    preds.stages[idx] = {std::move(out), f.scale};
    if (trace) trace->guidance[idx] = std::move(guidance);
    prev = &preds.stages[idx].data;
  }

  if (trace) {
    trace->rgb_features = std::move(rgb_feats);
    trace->depth_features = std::move(depth_feats);
    trace->stage_features = std::move(feats);
  }
  return preds;
}

/// Gradients of a scalar loss w.r.t. every output of `forward`; empty tensors
/// mean zero.
template <typename Scalar>
struct PredictionGrad {
  Tensor<Scalar> s_init;
  std::vector<Tensor<Scalar>> stages;  // shallow first
};

/// Backpropagates through the whole network, accumulating into `grad`
/// (a zeros_like model). With `freeze_backbone` the RGB trunk is skipped.
template <typename Scalar>
void backward(const Model<Scalar>& m, const ForwardTrace<Scalar>& trace, const PredictionGrad<Scalar>& dpreds,
              Model<Scalar>& grad, bool freeze_backbone = false) {
  const std::size_t k = m.topology.size();
  std::vector<Tensor<Scalar>> dfeat(k);
  Tensor<Scalar> carry;  // gradient flowing into the previous (deeper) output
  for (std::size_t idx = 0; idx < k; ++idx) {
    Tensor<Scalar> dout = idx < dpreds.stages.size() && !dpreds.stages[idx].empty()
                              ? dpreds.stages[idx]
                              : Tensor<Scalar>(trace.guidance[idx].shape());
    if (!carry.empty()) dout.array() += carry.array();
    auto g = stage_refine_backward(m.stages[idx], trace.stages[idx], m.schedule.rows[idx], dout, &grad.stages[idx]);
    dfeat[idx] = std::move(g.df);
    // The guidance came from the next-deeper output (whose size equals that
    // stage's own guidance input) or from s_init; undo any resize.
    const Tensor<Scalar>& deeper = idx + 1 < k ? trace.guidance[idx + 1] : trace.msr.fused;
    carry = resize_bilinear_backward(g.ds, deeper.h(), deeper.w());
  }
  Tensor<Scalar> ds_init = carry;
  if (!dpreds.s_init.empty()) ds_init.array() += dpreds.s_init.array();
  Tensor<Scalar> dpooled = msr_backward(m.msr, trace.msr, ds_init, &grad.msr);

  // Route stage-feature gradients back to their sources.
  std::array<Tensor<Scalar>, 5> dtaps;
  std::vector<Tensor<Scalar>> ddepth(trace.depth_features.size());
  auto add_to = [](Tensor<Scalar>& acc, Tensor<Scalar>&& v) {
    if (acc.empty()) {
      acc = std::move(v);
    } else {
      acc.array() += v.array();
    }
  };
  std::size_t fused = 0;
  for (std::size_t idx = 0; idx < k; ++idx) {
    const auto& s = m.topology[idx];
    switch (s.source) {
      case Source::rgb: {
        const auto t = std::size_t(s.rgb_tap);
        add_to(dtaps[t], conv2d_backward(m.reducers[t], trace.rgb_features.taps[t].data, dfeat[idx], &grad.reducers[t]));
        break;
      }
      case Source::depth:
        add_to(ddepth[std::size_t(s.depth_index)], std::move(dfeat[idx]));
        break;
      case Source::fused: {
        const auto t = std::size_t(s.rgb_tap);
        Tensor<Scalar> dcat =
            conv2d_backward(m.fusion[fused], trace.fusion_inputs[idx], dfeat[idx], &grad.fusion[fused]);
        ++fused;
        Tensor<Scalar> dred = slice_channels(dcat, 0, s.channels);
        add_to(ddepth[std::size_t(s.depth_index)], slice_channels(dcat, s.channels, kDepthChannels));
        add_to(dtaps[t], conv2d_backward(m.reducers[t], trace.rgb_features.taps[t].data, dred, &grad.reducers[t]));
        break;
      }
    }
  }

  if (m.uses_light_depth()) {
    std::array<Tensor<Scalar>, kDepthLayers> dlayers;
    const auto cands = detail::depth_candidates(m.config);
    for (std::size_t d = 0; d < cands.size(); ++d) dlayers[std::size_t(cands[d].first)] = std::move(ddepth[d]);
    depth_stream_backward(m.depth, trace.depth, dlayers, &grad.depth);
  } else if (m.uses_vgg_depth()) {
    std::array<Tensor<Scalar>, 5> dvtaps;
    const auto cands = detail::depth_candidates(m.config);
    for (std::size_t d = 0; d < cands.size(); ++d) {
      if (ddepth[d].empty()) continue;
      const auto t = std::size_t(cands[d].first);
      dvtaps[t] = conv2d_backward(m.depth_reducers[d], trace.depth_vgg_features.taps[t].data, ddepth[d],
                                  &grad.depth_reducers[d]);
    }
    backbone_backward(m.depth_backbone, trace.depth_vgg, dvtaps, Tensor<Scalar>{}, &grad.depth_backbone);
  }

  if (!freeze_backbone) backbone_backward(m.backbone, trace.rgb, dtaps, dpooled, &grad.backbone);
}

/// Final saliency map in (0, 1).
template <typename Scalar>
FeatureMap<Scalar> final_saliency(const PredictionSet<Scalar>& preds) {
  if (preds.stages.empty()) throw InputError("prediction set is empty");
  return {sigmoid(preds.s(1).data), preds.s(1).scale};
}

struct ParameterReport {
  std::vector<std::pair<std::string, Index>> groups;  // coarse groups
  std::vector<std::pair<std::string, Index>> stages;  // per refinement stage
  Index total = 0;

  /// fp32 size with 2^20-byte megabytes.
  double megabytes() const { return double(total) * 4.0 / double(1 << 20); }
  /// fp32 size with 10^6-byte megabytes.
  double megabytes_decimal() const { return double(total) * 4.0 / 1e6; }
  Index group(const std::string& name) const {
    for (const auto& [n, v] : groups) {
      if (n == name) return v;
    }
    return 0;
  }
};

template <typename Scalar>
ParameterReport count_parameters(const Model<Scalar>& m) {
  std::map<std::string, Index> by_group;
  std::vector<std::string> order;
  for_each_conv(m, [&](const std::string& name, const Conv2d<Scalar>& c) {
    std::string group = name.substr(0, name.find('.'));
    if (group.rfind("stage", 0) == 0) group = "stages";
    if (group == "reducer") group = "reducers";
    if (group == "depth_reducer") group = "depth_reducers";
    if (!by_group.count(group)) order.push_back(group);
    by_group[group] += c.parameter_count();
  });
  ParameterReport r;
  for (const auto& g : order) {
    r.groups.emplace_back(g, by_group[g]);
    r.total += by_group[g];
  }
  for (std::size_t i = 0; i < m.stages.size(); ++i) {
    r.stages.emplace_back("stage" + std::to_string(i + 1), m.stages[i].parameter_count());
  }
  return r;
}

/// Random initialization of every parameter from `seed`.
template <typename Scalar>
Model<Scalar> init_model(const ModelConfig& cfg, std::uint64_t seed) {
  Model<Scalar> m = make_model<Scalar>(cfg);
  std::mt19937_64 rng(seed);
  for_each_conv(m, [&](const std::string&, Conv2d<Scalar>& c) { init_fan_in_uniform(c, rng); });
  return m;
}

}  // namespace pgar

#endif  // PGAR_NETWORK_HPP
