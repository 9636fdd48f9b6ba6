#ifndef PGAR_INIT_HPP
#define PGAR_INIT_HPP

#include "pgar/ops.hpp"

#include <cmath>
#include <random>

namespace pgar {

/// Fan-in uniform initialization: weights ~ U(-b, b) with b = sqrt(6 / fan_in),
/// biases zero. Draw order is row-major over the weight matrix so a given seed
/// always yields the same parameters.
template <typename Scalar, typename Rng>
void init_fan_in_uniform(Conv2d<Scalar>& conv, Rng& rng) {
  const double fan_in = double(conv.weight.cols());
  const double bound = std::sqrt(6.0 / fan_in);
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Index i = 0; i < conv.weight.size(); ++i) conv.weight.data()[i] = Scalar(dist(rng));
  conv.bias.setZero();
}

}  // namespace pgar

#endif  // PGAR_INIT_HPP
