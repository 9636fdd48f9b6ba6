#ifndef PGAR_MSR_HPP
#define PGAR_MSR_HPP

#include "pgar/ops.hpp"

#include <vector>

namespace pgar {

struct MsrConfig {
  int n1 = 5;
  std::vector<int> dilations{1, 2, 3};
  int inner_width = 64;
  int input_channels = 512;

  void validate() const {
    if (n1 < 1) throw ConfigError("msr.n1 must be >= 1");
    if (dilations.empty()) throw ConfigError("msr needs at least one branch");
    for (std::size_t i = 0; i < dilations.size(); ++i) {
      if (dilations[i] < 1 || (i > 0 && dilations[i] <= dilations[i - 1])) {
        throw ConfigError("msr dilations must be strictly increasing positive integers");
      }
    }
    if (inner_width < 1 || input_channels < 1) throw ConfigError("msr widths must be positive");
  }
};

/// One bottleneck residual unit: 1x1 reduce, dilated 3x3, 1x1 expand.
template <typename Scalar>
struct MsrBranchParams {
  Conv2d<Scalar> reduce;
  Conv2d<Scalar> dilated;
  Conv2d<Scalar> expand;

  static MsrBranchParams make(int channels, int inner, int dilation) {
    return {Conv2d<Scalar>(channels, inner, 1), Conv2d<Scalar>(inner, inner, 3, 1, dilation, dilation),
            Conv2d<Scalar>(inner, channels, 1)};
  }
  Index parameter_count() const {
    return reduce.parameter_count() + dilated.parameter_count() + expand.parameter_count();
  }
  int dilation() const { return dilated.dilation; }
};

/// branches[b] holds one parameter set (recurrent, shared over iterations)
/// or one per stacked application.
template <typename Scalar>
struct MsrParams {
  std::vector<std::vector<MsrBranchParams<Scalar>>> branches;
  Conv2d<Scalar> head;

  static MsrParams make(const MsrConfig& cfg, int sets_per_branch = 1) {
    cfg.validate();
    MsrParams p;
    for (int d : cfg.dilations) {
      p.branches.emplace_back(std::size_t(sets_per_branch),
                              MsrBranchParams<Scalar>::make(cfg.input_channels, cfg.inner_width, d));
    }
    p.head = Conv2d<Scalar>(cfg.input_channels, 1, 3, 1, 1);
    return p;
  }

  Index parameter_count() const {
    Index total = head.parameter_count();
    for (const auto& b : branches) {
      for (const auto& s : b) total += s.parameter_count();
    }
    return total;
  }
};

template <typename Scalar>
struct MsrStepTrace {
  Tensor<Scalar> input, h1, h2, output;
};

/// out = relu(x + expand(relu(dilated(relu(reduce(x)))))).
template <typename Scalar>
Tensor<Scalar> msr_branch_step(const Tensor<Scalar>& x, const MsrBranchParams<Scalar>& p,
                               MsrStepTrace<Scalar>* trace = nullptr) {
  if (x.c() != p.reduce.in_channels) {
    throw ConfigError("msr_branch_step: input has " + std::to_string(x.c()) + " channels, expected " +
                      std::to_string(p.reduce.in_channels));
  }
  Tensor<Scalar> h1 = relu(conv2d(p.reduce, x));
  Tensor<Scalar> h2 = relu(conv2d(p.dilated, h1));
  Tensor<Scalar> out = conv2d(p.expand, h2);
  out.array() += x.array();
  relu_inplace(out);
  if (trace) *trace = {x, std::move(h1), std::move(h2), out};
  return out;
}

/// Returns the input gradient; parameter gradients accumulate into `grad`.
template <typename Scalar>
Tensor<Scalar> msr_branch_step_backward(const MsrBranchParams<Scalar>& p, const MsrStepTrace<Scalar>& t,
                                        Tensor<Scalar> dout, MsrBranchParams<Scalar>* grad) {
  relu_backward_inplace(t.output, dout);
  Tensor<Scalar> dh2 = conv2d_backward(p.expand, t.h2, dout, grad ? &grad->expand : nullptr);
  relu_backward_inplace(t.h2, dh2);
  Tensor<Scalar> dh1 = conv2d_backward(p.dilated, t.h1, dh2, grad ? &grad->dilated : nullptr);
  relu_backward_inplace(t.h1, dh1);
  Tensor<Scalar> dx = conv2d_backward(p.reduce, t.input, dh1, grad ? &grad->reduce : nullptr);
  dx.array() += dout.array();
  return dx;
}

template <typename Scalar>
struct MsrTrace {
  std::vector<std::vector<MsrStepTrace<Scalar>>> steps;  // [branch][iteration]
  Tensor<Scalar> fused;
};

namespace detail {

template <typename Scalar>
FeatureMap<Scalar> msr_apply(const FeatureMap<Scalar>& pooled, const MsrParams<Scalar>& params, int iterations,
                             MsrTrace<Scalar>* trace) {
  if (params.branches.empty()) throw ConfigError("msr has no branches");
  Tensor<Scalar> fused(pooled.data.n(), pooled.data.c(), pooled.data.h(), pooled.data.w());
  if (trace) {
    trace->steps.assign(params.branches.size(), {});
  }
  for (std::size_t b = 0; b < params.branches.size(); ++b) {
    const auto& sets = params.branches[b];
    Tensor<Scalar> x = pooled.data;
    for (int t = 0; t < iterations; ++t) {
      const auto& p = sets.size() == 1 ? sets[0] : sets[std::size_t(t)];
      if (trace) {
        trace->steps[b].emplace_back();
        x = msr_branch_step(x, p, &trace->steps[b].back());
      } else {
        x = msr_branch_step(x, p);
      }
    }
    fused.array() += x.array();
  }
  // Branch outputs are post-ReLU, so the sum is already nonnegative and the
  // head sees the activated feature.
  Tensor<Scalar> logits = conv2d(params.head, fused);
  if (trace) trace->fused = std::move(fused);
  return {std::move(logits), pooled.scale};
}

}  // namespace detail

/// Recurrent multi-scale residual initializer: each branch applies its own
/// shared-weight step n1 times; branch outputs are summed and projected to a
/// single-channel logit map.
template <typename Scalar>
FeatureMap<Scalar> msr_forward(const FeatureMap<Scalar>& pooled, const MsrParams<Scalar>& params,
                               const MsrConfig& cfg, MsrTrace<Scalar>* trace = nullptr) {
  if (pooled.data.c() != cfg.input_channels) {
    throw ConfigError("msr_forward: pooled feature has " + std::to_string(pooled.data.c()) +
                      " channels, config expects " + std::to_string(cfg.input_channels));
  }
  for (const auto& b : params.branches) {
    if (b.size() != 1) throw ConfigError("msr_forward expects one shared parameter set per branch");
  }
  return detail::msr_apply(pooled, params, cfg.n1, trace);
}

inline constexpr int kStackedMsrBlocks = 7;

/// Ablation variant: seven unshared residual units per branch applied in
/// sequence.
template <typename Scalar>
FeatureMap<Scalar> build_stacked_msr(const FeatureMap<Scalar>& pooled, const MsrParams<Scalar>& params,
                                     const MsrConfig& cfg, MsrTrace<Scalar>* trace = nullptr) {
  if (pooled.data.c() != cfg.input_channels) {
    throw ConfigError("build_stacked_msr: channel mismatch");
  }
  for (const auto& b : params.branches) {
    if (b.size() != std::size_t(kStackedMsrBlocks)) {
      throw ConfigError("stacked msr needs " + std::to_string(kStackedMsrBlocks) + " parameter sets per branch, got " +
                        std::to_string(b.size()));
    }
  }
  return detail::msr_apply(pooled, params, kStackedMsrBlocks, trace);
}

/// Returns the gradient w.r.t. the pooled input.
template <typename Scalar>
Tensor<Scalar> msr_backward(const MsrParams<Scalar>& params, const MsrTrace<Scalar>& trace,
                            const Tensor<Scalar>& dlogits, MsrParams<Scalar>* grad) {
  Tensor<Scalar> dfused = conv2d_backward(params.head, trace.fused, dlogits, grad ? &grad->head : nullptr);
  Tensor<Scalar> dpooled(trace.fused.shape());
  for (std::size_t b = 0; b < params.branches.size(); ++b) {
    const auto& sets = params.branches[b];
    Tensor<Scalar> g = dfused;
    for (int t = int(trace.steps[b].size()) - 1; t >= 0; --t) {
      const std::size_t idx = sets.size() == 1 ? 0 : std::size_t(t);
      g = msr_branch_step_backward(sets[idx], trace.steps[b][std::size_t(t)], std::move(g),
                                   grad ? &grad->branches[b][idx] : nullptr);
    }
    dpooled.array() += g.array();
  }
  return dpooled;
}

}  // namespace pgar

#endif  // PGAR_MSR_HPP
