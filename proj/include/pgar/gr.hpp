#ifndef PGAR_GR_HPP
#define PGAR_GR_HPP

#include "pgar/ops.hpp"

#include <array>
#include <string>
#include <vector>

namespace pgar {

inline constexpr int kGuidanceStyles = 8;
inline constexpr int kDefaultGuidanceStyle = 6;
inline constexpr int kGrBlocksPerStage = 3;

/// Group widths for every stage, shallow stage first: rows[i][r] is the
/// channel count c of each split group in GR block r of stage i + 1.
struct GuidanceSchedule {
  int style_id = kDefaultGuidanceStyle;
  std::vector<std::vector<int>> rows;

  const std::vector<int>& stage(int i) const { return rows.at(std::size_t(i - 1)); }
  bool progressive() const { return style_id >= 5; }
};

namespace detail {

// 0 stands for "the stage's own channel count" (a single group).
inline const std::array<std::array<int, kGrBlocksPerStage>, kGuidanceStyles>& guidance_table() {
  static const std::array<std::array<int, kGrBlocksPerStage>, kGuidanceStyles> table{{
      {0, 0, 0},
      {8, 8, 8},
      {4, 4, 4},
      {1, 1, 1},
      {0, 8, 4},
      {0, 8, 1},
      {0, 4, 1},
      {8, 4, 1},
  }};
  return table;
}

}  // namespace detail

/// Expands a guidance style to every stage. `stage_channels[i]` is the
/// feature width of stage i + 1.
inline GuidanceSchedule build_schedule(int style_id, const std::vector<int>& stage_channels) {
  if (style_id < 1 || style_id > kGuidanceStyles) {
    throw ConfigError("guidance_style " + std::to_string(style_id) + " is outside the legal range 1-8");
  }
  GuidanceSchedule s;
  s.style_id = style_id;
  const auto& spec = detail::guidance_table()[std::size_t(style_id - 1)];
  for (std::size_t i = 0; i < stage_channels.size(); ++i) {
    const int channels = stage_channels[i];
    std::vector<int> row;
    for (int c : spec) {
      const int width = c == 0 ? channels : c;
      if (width <= 0 || channels % width != 0) {
        throw ScheduleError("group width " + std::to_string(width) + " does not divide " +
                            std::to_string(channels) + " channels at stage " + std::to_string(i + 1));
      }
      row.push_back(width);
    }
    s.rows.push_back(std::move(row));
  }
  return s;
}

inline GuidanceSchedule build_schedule(int style_id) {
  return build_schedule(style_id, {16, 32, 64, 64, 64, 64, 64, 64});
}

/// Interleaves the guidance map after every contiguous group of `c` feature
/// channels: [F^1, S, F^2, S, ..., F^g, S].
template <typename Scalar>
Tensor<Scalar> split_and_concatenate(const Tensor<Scalar>& f, const Tensor<Scalar>& s, int c) {
  if (c <= 0 || f.c() % c != 0) {
    throw ScheduleError("group width " + std::to_string(c) + " does not divide " + std::to_string(f.c()) +
                        " channels");
  }
  if (s.c() != 1 || s.n() != f.n() || s.h() != f.h() || s.w() != f.w()) {
    throw InputError("split_and_concatenate: guidance " + s.shape().str() + " does not match feature " +
                     f.shape().str());
  }
  const Index groups = f.c() / c;
  const Index plane = f.h() * f.w();
  Tensor<Scalar> out(f.n(), f.c() + groups, f.h(), f.w());
  for (Index n = 0; n < f.n(); ++n) {
    Scalar* dst = out.plane_ptr(n, 0);
    for (Index g = 0; g < groups; ++g) {
      dst = std::copy_n(f.plane_ptr(n, g * c), c * plane, dst);
      dst = std::copy_n(s.plane_ptr(n, 0), plane, dst);
    }
  }
  return out;
}

/// Adjoint of split_and_concatenate: accumulates into (dF, dS), summing the
/// g guidance copies. Empty outputs are allocated as zeros.
template <typename Scalar>
void split_and_concatenate_backward(const Tensor<Scalar>& dcat, int c, Tensor<Scalar>& df, Tensor<Scalar>& ds) {
  const Index groups = dcat.c() / (c + 1);
  const Index plane = dcat.h() * dcat.w();
  if (df.empty()) df = Tensor<Scalar>(dcat.n(), groups * c, dcat.h(), dcat.w());
  if (ds.empty()) ds = Tensor<Scalar>(dcat.n(), 1, dcat.h(), dcat.w());
  for (Index n = 0; n < dcat.n(); ++n) {
    const Scalar* src = dcat.plane_ptr(n, 0);
    auto gs = Eigen::Map<Eigen::Array<Scalar, Eigen::Dynamic, 1>>(ds.plane_ptr(n, 0), plane);
    for (Index g = 0; g < groups; ++g) {
      auto gf = Eigen::Map<Eigen::Array<Scalar, Eigen::Dynamic, 1>>(df.plane_ptr(n, g * c), c * plane);
      gf += Eigen::Map<const Eigen::Array<Scalar, Eigen::Dynamic, 1>>(src, c * plane);
      src += c * plane;
      gs += Eigen::Map<const Eigen::Array<Scalar, Eigen::Dynamic, 1>>(src, plane);
      src += plane;
    }
  }
}

/// theta1: full 3x3 convolution over the concatenated (C + C/c) channels back
/// to C; theta2: 3x3 convolution from C channels to a single residual map.
template <typename Scalar>
struct GrBlockParams {
  Conv2d<Scalar> theta1;
  Conv2d<Scalar> theta2;

  static GrBlockParams make(int channels, int group_width) {
    return {Conv2d<Scalar>(channels + channels / group_width, channels, 3, 1, 1), Conv2d<Scalar>(channels, 1, 3, 1, 1)};
  }
  Index parameter_count() const { return theta1.parameter_count() + theta2.parameter_count(); }
};

template <typename Scalar>
struct StageParams {
  std::vector<GrBlockParams<Scalar>> blocks;

  static StageParams make(int channels, const std::vector<int>& schedule_row) {
    StageParams p;
    for (int c : schedule_row) p.blocks.push_back(GrBlockParams<Scalar>::make(channels, c));
    return p;
  }
  Index parameter_count() const {
    Index total = 0;
    for (const auto& b : blocks) total += b.parameter_count();
    return total;
  }
};

template <typename Scalar>
struct GrOutput {
  Tensor<Scalar> feature;     // refined feature
  Tensor<Scalar> prediction;  // refined logits
};

template <typename Scalar>
struct GrTrace {
  Tensor<Scalar> f, s, fcat, fhat;
};

/// Dual residual learning:
///   feature    = relu(F + conv(SC(F, S, c); theta1))
///   prediction = S + conv(feature; theta2)
template <typename Scalar>
GrOutput<Scalar> gr_block_forward(const Tensor<Scalar>& f, const Tensor<Scalar>& s, const GrBlockParams<Scalar>& p,
                                  int c, GrTrace<Scalar>* trace = nullptr) {
  if (p.theta1.in_channels != f.c() + f.c() / std::max(c, 1) || p.theta1.out_channels != f.c() ||
      p.theta2.in_channels != f.c() || p.theta2.out_channels != 1) {
    throw ConfigError("GR block parameters do not match C=" + std::to_string(f.c()) + ", c=" + std::to_string(c));
  }
  Tensor<Scalar> fcat = split_and_concatenate(f, s, c);
  Tensor<Scalar> fhat = conv2d(p.theta1, fcat);
  fhat.array() += f.array();
  relu_inplace(fhat);
  Tensor<Scalar> shat = conv2d(p.theta2, fhat);
  shat.array() += s.array();
  if (trace) *trace = {f, s, std::move(fcat), fhat};
  return {std::move(fhat), std::move(shat)};
}

template <typename Scalar>
struct GrGrad {
  Tensor<Scalar> df, ds;
};

/// `dfeature` may be empty (feature output unused downstream).
template <typename Scalar>
GrGrad<Scalar> gr_block_backward(const GrBlockParams<Scalar>& p, const GrTrace<Scalar>& t, int c,
                                 const Tensor<Scalar>& dfeature, const Tensor<Scalar>& dprediction,
                                 GrBlockParams<Scalar>* grad) {
  Tensor<Scalar> dfhat = conv2d_backward(p.theta2, t.fhat, dprediction, grad ? &grad->theta2 : nullptr);
  if (!dfeature.empty()) dfhat.array() += dfeature.array();
  relu_backward_inplace(t.fhat, dfhat);
  Tensor<Scalar> dcat = conv2d_backward(p.theta1, t.fcat, dfhat, grad ? &grad->theta1 : nullptr);
  GrGrad<Scalar> out{std::move(dfhat), dprediction};
  split_and_concatenate_backward(dcat, c, out.df, out.ds);
  return out;
}

template <typename Scalar>
struct StageTrace {
  std::vector<GrTrace<Scalar>> blocks;
};

/// Chains the stage's GR blocks, threading (feature, prediction); only the
/// last prediction leaves the stage.
template <typename Scalar>
Tensor<Scalar> stage_refine(const Tensor<Scalar>& f, const Tensor<Scalar>& s_in, const StageParams<Scalar>& params,
                            const std::vector<int>& schedule_row, StageTrace<Scalar>* trace = nullptr) {
  if (schedule_row.size() != params.blocks.size()) {
    throw ScheduleError("schedule row has " + std::to_string(schedule_row.size()) + " entries for " +
                        std::to_string(params.blocks.size()) + " GR blocks");
  }
  if (s_in.h() != f.h() || s_in.w() != f.w()) {
    throw InputError("stage_refine: guidance " + s_in.shape().str() + " does not match feature " + f.shape().str());
  }
  if (trace) trace->blocks.assign(params.blocks.size(), {});
  Tensor<Scalar> feature = f;
  Tensor<Scalar> prediction = s_in;
  for (std::size_t r = 0; r < params.blocks.size(); ++r) {
    auto out = gr_block_forward(feature, prediction, params.blocks[r], schedule_row[r],
                                trace ? &trace->blocks[r] : nullptr);
    feature = std::move(out.feature);
    prediction = std::move(out.prediction);
  }
  return prediction;
}

/// Returns (dF, dS_in) for a gradient on the stage output.
template <typename Scalar>
GrGrad<Scalar> stage_refine_backward(const StageParams<Scalar>& params, const StageTrace<Scalar>& trace,
                                     const std::vector<int>& schedule_row, const Tensor<Scalar>& dout,
                                     StageParams<Scalar>* grad) {
  Tensor<Scalar> dfeature;  // the last block's feature has no consumer
  Tensor<Scalar> dprediction = dout;
  for (int r = int(params.blocks.size()) - 1; r >= 0; --r) {
    auto g = gr_block_backward(params.blocks[std::size_t(r)], trace.blocks[std::size_t(r)], schedule_row[std::size_t(r)],
                               dfeature, dprediction, grad ? &grad->blocks[std::size_t(r)] : nullptr);
    dfeature = std::move(g.df);
    dprediction = std::move(g.ds);
  }
  return {std::move(dfeature), std::move(dprediction)};
}

}  // namespace pgar

#endif  // PGAR_GR_HPP
