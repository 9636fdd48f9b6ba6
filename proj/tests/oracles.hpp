#ifndef PGAR_TESTS_ORACLES_HPP
#define PGAR_TESTS_ORACLES_HPP

#include "pgar/metrics.hpp"
#include "pgar/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace pgar::test {

// Structure measure written from its definition with plain loops over a
// row-major grid. Shares no code with the library.
struct Grid {
  int h, w;
  std::vector<double> v;
  double at(int r, int c) const { return v[std::size_t(r * w + c)]; }
};

inline Grid grid(const Map2d& m) {
  Grid g{int(m.rows()), int(m.cols()), {}};
  for (int r = 0; r < g.h; ++r)
    for (int c = 0; c < g.w; ++c) g.v.push_back(m(r, c));
  return g;
}

constexpr double kMatlabEps = 2.2204e-16;

inline double object_score(const std::vector<double>& x) {
  if (x.empty()) return 0.0;
  double mean = 0;
  for (double v : x) mean += v;
  mean /= double(x.size());
  double var = 0;
  for (double v : x) var += (v - mean) * (v - mean);
  const double sd = x.size() > 1 ? std::sqrt(var / double(x.size() - 1)) : 0.0;
  return 2 * mean / (mean * mean + 1 + sd + kMatlabEps);
}

inline double ssim_block(const Grid& p, const Grid& g, int r0, int c0, int rows, int cols) {
  const double n = double(rows * cols);
  double mx = 0, my = 0;
  for (int r = r0; r < r0 + rows; ++r)
    for (int c = c0; c < c0 + cols; ++c) {
      mx += p.at(r, c);
      my += g.at(r, c);
    }
  mx /= n;
  my /= n;
  double sx = 0, sy = 0, sxy = 0;
  for (int r = r0; r < r0 + rows; ++r)
    for (int c = c0; c < c0 + cols; ++c) {
      sx += (p.at(r, c) - mx) * (p.at(r, c) - mx);
      sy += (g.at(r, c) - my) * (g.at(r, c) - my);
      sxy += (p.at(r, c) - mx) * (g.at(r, c) - my);
    }
  sx /= n - 1 + kMatlabEps;
  sy /= n - 1 + kMatlabEps;
  sxy /= n - 1 + kMatlabEps;
  const double a = 4 * mx * my * sxy;
  const double b = (mx * mx + my * my) * (sx + sy);
  if (a != 0) return a / (b + kMatlabEps);
  return b == 0 ? 1.0 : 0.0;
}

inline double reference_s_measure(const Map2d& pred_map, const Map2d& gt_map) {
  const Grid p = grid(pred_map), g = grid(gt_map);
  double fg = 0;
  for (double v : g.v) fg += v;
  const double area = double(g.h * g.w);
  const double u = fg / area;
  double pm = 0;
  for (double v : p.v) pm += v;
  pm /= area;
  if (u == 0) return std::max(0.0, 1 - pm);
  if (u == 1) return pm;

  std::vector<double> inside, outside;
  for (std::size_t i = 0; i < g.v.size(); ++i) {
    if (g.v[i] == 1) {
      inside.push_back(p.v[i]);
    } else {
      outside.push_back(1 - p.v[i]);
    }
  }
  const double object = u * object_score(inside) + (1 - u) * object_score(outside);

  double sx = 0, sy = 0;
  for (int r = 0; r < g.h; ++r)
    for (int c = 0; c < g.w; ++c) {
      sx += g.at(r, c) * (c + 1);
      sy += g.at(r, c) * (r + 1);
    }
  const int X = int(std::round(sx / fg)), Y = int(std::round(sy / fg));
  double region = 0;
  const int rows[4] = {Y, Y, g.h - Y, g.h - Y}, cols[4] = {X, g.w - X, X, g.w - X};
  const int r0[4] = {0, 0, Y, Y}, c0[4] = {0, X, 0, X};
  for (int k = 0; k < 4; ++k) {
    if (rows[k] == 0 || cols[k] == 0) continue;
    region += double(rows[k] * cols[k]) / area * ssim_block(p, g, r0[k], c0[k], rows[k], cols[k]);
  }
  return std::clamp(0.5 * object + 0.5 * region, 0.0, 1.0);
}

inline Map2d random_mask(int h, int w, std::mt19937_64& rng) {
  // A random rectangle plus speckle, so the mask is never degenerate.
  std::uniform_int_distribution<int> ry(0, h - 2), rx(0, w - 2);
  const int y0 = ry(rng), x0 = rx(rng);
  std::uniform_int_distribution<int> eh(1, h - y0), ew(1, w - x0);
  Map2d m = Map2d::Zero(h, w);
  m.block(y0, x0, eh(rng), ew(rng)) = 1;
  std::bernoulli_distribution speckle(0.05);
  for (Index i = 0; i < m.size(); ++i)
    if (speckle(rng)) m.data()[i] = 1 - m.data()[i];
  if (m.sum() == 0) m(0, 0) = 1;
  if (m.sum() == double(m.size())) m(0, 0) = 0;
  return m;
}

inline Map2d random_pred(int h, int w, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0, 1);
  Map2d p(h, w);
  for (Index i = 0; i < p.size(); ++i) p.data()[i] = u(rng);
  return p;
}

/// Split-and-concatenate written as the channel interleaving loop: groups of
/// c feature channels, each followed by one copy of the guidance map.
inline Tensor<double> naive_split_concat(const Tensor<double>& f, const Tensor<double>& s, int c) {
  const Index groups = f.c() / c;
  Tensor<double> out(f.n(), f.c() + groups, f.h(), f.w());
  for (Index n = 0; n < f.n(); ++n)
    for (Index g = 0; g < groups; ++g) {
      for (Index k = 0; k < c; ++k)
        for (Index y = 0; y < f.h(); ++y)
          for (Index x = 0; x < f.w(); ++x) out(n, g * (c + 1) + k, y, x) = f(n, g * c + k, y, x);
      for (Index y = 0; y < f.h(); ++y)
        for (Index x = 0; x < f.w(); ++x) out(n, g * (c + 1) + c, y, x) = s(n, 0, y, x);
    }
  return out;
}

}  // namespace pgar::test

#endif  // PGAR_TESTS_ORACLES_HPP
