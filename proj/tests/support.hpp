#ifndef PGAR_TESTS_SUPPORT_HPP
#define PGAR_TESTS_SUPPORT_HPP

#include "pgar/network.hpp"

#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace pgar::test {

template <typename Scalar>
Tensor<Scalar> random_tensor(Shape s, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor<Scalar> t(s);
  for (Index i = 0; i < t.size(); ++i) t.data()[i] = Scalar(u(rng));
  return t;
}

template <typename Scalar>
void randomize(Conv2d<Scalar>& c, std::mt19937_64& rng, double scale = 0.5) {
  std::uniform_real_distribution<double> u(-scale, scale);
  for (Index i = 0; i < c.weight.size(); ++i) c.weight.data()[i] = Scalar(u(rng));
  for (Index i = 0; i < c.bias.size(); ++i) c.bias.data()[i] = Scalar(u(rng));
}

/// sum(weights * t): a linear read-out whose gradient w.r.t. t is `weights`.
inline double dot(const Tensor<double>& t, const Tensor<double>& weights) {
  return (t.array() * weights.array()).sum();
}

/// Central differences of `loss` at every entry of [data, data + n) against
/// `analytic`, reported as ||a - n|| / max(||a||, ||n||).
inline double gradient_error(double* data, Index n, const double* analytic, const std::function<double()>& loss,
                             double h = 1e-5) {
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double keep = data[i];
    data[i] = keep + h;
    const double up = loss();
    data[i] = keep - h;
    const double down = loss();
    data[i] = keep;
    const double numeric = (up - down) / (2 * h);
    diff += (numeric - analytic[i]) * (numeric - analytic[i]);
    na += analytic[i] * analytic[i];
    nn += numeric * numeric;
  }
  const double denom = std::max(std::sqrt(std::max(na, nn)), 1e-12);
  return std::sqrt(diff) / denom;
}

/// A small RGB-D model for quick structural tests.
inline ModelConfig tiny_config(int input_size = 64) {
  ModelConfig cfg;
  cfg.backbone = BackboneConfig::tiny();
  cfg.input_size = input_size;
  return cfg;
}

}  // namespace pgar::test

#endif  // PGAR_TESTS_SUPPORT_HPP
