#ifndef PGAR_OPS_HPP
#define PGAR_OPS_HPP

#include "pgar/tensor.hpp"

#include <cmath>
#include <string>

namespace pgar {

/// 2-D convolution layer with bias. The weight is stored as an
/// (out, in*k*k) row-major matrix, i.e. the usual (out, in, kh, kw) layout
/// flattened per output channel.
template <typename Scalar>
struct Conv2d {
  MatrixRM<Scalar> weight;
  Vector<Scalar> bias;
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 1;
  int stride = 1;
  int padding = 0;
  int dilation = 1;

  Conv2d() = default;
  Conv2d(int in, int out, int k, int stride_ = 1, int padding_ = 0, int dilation_ = 1)
      : weight(MatrixRM<Scalar>::Zero(out, Index(in) * k * k)),
        bias(Vector<Scalar>::Zero(out)),
        in_channels(in),
        out_channels(out),
        kernel(k),
        stride(stride_),
        padding(padding_),
        dilation(dilation_) {}

  Index output_extent(Index in) const { return (in + 2 * padding - dilation * (kernel - 1) - 1) / stride + 1; }
  Index parameter_count() const { return weight.size() + bias.size(); }
  bool pointwise() const { return kernel == 1 && stride == 1 && padding == 0; }

  Conv2d zeros_like() const {
    Conv2d z = *this;
    z.weight.setZero();
    z.bias.setZero();
    return z;
  }
};

namespace detail {

template <typename Scalar>
void im2col(const Conv2d<Scalar>& conv, const Scalar* in, Index h, Index w, Index oh, Index ow,
            MatrixRM<Scalar>& col) {
  const int k = conv.kernel;
  col.resize(Index(conv.in_channels) * k * k, oh * ow);
  for (Index ci = 0; ci < conv.in_channels; ++ci) {
    const Scalar* src = in + ci * h * w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        Scalar* dst = col.data() + ((ci * k + ky) * k + kx) * oh * ow;
        for (Index oy = 0; oy < oh; ++oy) {
          const Index iy = oy * conv.stride - conv.padding + Index(ky) * conv.dilation;
          Scalar* row = dst + oy * ow;
          if (iy < 0 || iy >= h) {
            std::fill_n(row, ow, Scalar(0));
            continue;
          }
          const Scalar* line = src + iy * w;
          for (Index ox = 0; ox < ow; ++ox) {
            const Index ix = ox * conv.stride - conv.padding + Index(kx) * conv.dilation;
            row[ox] = (ix >= 0 && ix < w) ? line[ix] : Scalar(0);
          }
        }
      }
    }
  }
}

template <typename Scalar>
void col2im(const Conv2d<Scalar>& conv, const MatrixRM<Scalar>& col, Index h, Index w, Index oh, Index ow,
            Scalar* out) {
  const int k = conv.kernel;
  for (Index ci = 0; ci < conv.in_channels; ++ci) {
    Scalar* dst = out + ci * h * w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const Scalar* src = col.data() + ((ci * k + ky) * k + kx) * oh * ow;
        for (Index oy = 0; oy < oh; ++oy) {
          const Index iy = oy * conv.stride - conv.padding + Index(ky) * conv.dilation;
          if (iy < 0 || iy >= h) continue;
          const Scalar* row = src + oy * ow;
          Scalar* line = dst + iy * w;
          for (Index ox = 0; ox < ow; ++ox) {
            const Index ix = ox * conv.stride - conv.padding + Index(kx) * conv.dilation;
            if (ix >= 0 && ix < w) line[ix] += row[ox];
          }
        }
      }
    }
  }
}

}  // namespace detail

template <typename Scalar>
Tensor<Scalar> conv2d(const Conv2d<Scalar>& conv, const Tensor<Scalar>& x) {
  if (x.c() != conv.in_channels) {
    throw ConfigError("conv2d: expected " + std::to_string(conv.in_channels) + " input channels, got " +
                      std::to_string(x.c()));
  }
  const Index oh = conv.output_extent(x.h());
  const Index ow = conv.output_extent(x.w());
  Tensor<Scalar> y(x.n(), conv.out_channels, oh, ow);
  MatrixRM<Scalar> col;
  for (Index n = 0; n < x.n(); ++n) {
    auto out = y.sample(n);
    if (conv.pointwise()) {
      out.noalias() = conv.weight * x.sample(n);
    } else {
      detail::im2col(conv, x.plane_ptr(n, 0), x.h(), x.w(), oh, ow, col);
      out.noalias() = conv.weight * col;
    }
    out.colwise() += conv.bias;
  }
  return y;
}

/// Accumulates parameter gradients into `grad` (when non-null) and returns
/// the input gradient (empty when `need_input_grad` is false).
template <typename Scalar>
Tensor<Scalar> conv2d_backward(const Conv2d<Scalar>& conv, const Tensor<Scalar>& x, const Tensor<Scalar>& dy,
                               Conv2d<Scalar>* grad, bool need_input_grad = true) {
  const Index oh = dy.h();
  const Index ow = dy.w();
  Tensor<Scalar> dx;
  if (need_input_grad) dx = Tensor<Scalar>(x.shape());
  MatrixRM<Scalar> col;
  MatrixRM<Scalar> dcol;
  for (Index n = 0; n < x.n(); ++n) {
    auto g = dy.sample(n);
    if (conv.pointwise()) {
      if (grad) {
        grad->weight.noalias() += g * x.sample(n).transpose();
        grad->bias += g.rowwise().sum();
      }
      if (need_input_grad) dx.sample(n).noalias() = conv.weight.transpose() * g;
      continue;
    }
    if (grad) {
      detail::im2col(conv, x.plane_ptr(n, 0), x.h(), x.w(), oh, ow, col);
      grad->weight.noalias() += g * col.transpose();
      grad->bias += g.rowwise().sum();
    }
    if (need_input_grad) {
      dcol.noalias() = conv.weight.transpose() * g;
      detail::col2im(conv, dcol, x.h(), x.w(), oh, ow, dx.plane_ptr(n, 0));
    }
  }
  return dx;
}

template <typename Scalar>
void relu_inplace(Tensor<Scalar>& x) {
  x.array() = x.array().max(Scalar(0));
}

template <typename Scalar>
Tensor<Scalar> relu(Tensor<Scalar> x) {
  relu_inplace(x);
  return x;
}

/// Masks `dy` by the support of a ReLU output `y`.
template <typename Scalar>
void relu_backward_inplace(const Tensor<Scalar>& y, Tensor<Scalar>& dy) {
  dy.array() = (y.array() > Scalar(0)).select(dy.array(), Scalar(0));
}

template <typename Scalar>
Tensor<Scalar> max_pool2(const Tensor<Scalar>& x) {
  Tensor<Scalar> y(x.n(), x.c(), x.h() / 2, x.w() / 2);
  for (Index n = 0; n < x.n(); ++n) {
    for (Index c = 0; c < x.c(); ++c) {
      auto in = x.plane(n, c);
      auto out = y.plane(n, c);
      for (Index oy = 0; oy < y.h(); ++oy) {
        for (Index ox = 0; ox < y.w(); ++ox) {
          out(oy, ox) = in.template block<2, 2>(2 * oy, 2 * ox).maxCoeff();
        }
      }
    }
  }
  return y;
}

template <typename Scalar>
Tensor<Scalar> max_pool2_backward(const Tensor<Scalar>& x, const Tensor<Scalar>& dy) {
  Tensor<Scalar> dx(x.shape());
  for (Index n = 0; n < x.n(); ++n) {
    for (Index c = 0; c < x.c(); ++c) {
      auto in = x.plane(n, c);
      auto g = dy.plane(n, c);
      auto out = dx.plane(n, c);
      for (Index oy = 0; oy < dy.h(); ++oy) {
        for (Index ox = 0; ox < dy.w(); ++ox) {
          Index r = 0, q = 0;
          in.template block<2, 2>(2 * oy, 2 * ox).maxCoeff(&r, &q);
          out(2 * oy + r, 2 * ox + q) += g(oy, ox);
        }
      }
    }
  }
  return dx;
}

/// Linear interpolation weights from `in` samples to `out` samples with
/// half-pixel centers (align_corners = false). Rows sum to one.
template <typename Scalar>
MatrixRM<Scalar> interpolation_matrix(Index out, Index in) {
  MatrixRM<Scalar> m = MatrixRM<Scalar>::Zero(out, in);
  const double ratio = double(in) / double(out);
  for (Index i = 0; i < out; ++i) {
    double src = (double(i) + 0.5) * ratio - 0.5;
    if (src < 0) src = 0;
    Index i0 = Index(std::floor(src));
    if (i0 > in - 1) i0 = in - 1;
    const Index i1 = std::min(i0 + 1, in - 1);
    const double frac = src - double(i0);
    m(i, i0) += Scalar(1.0 - frac);
    m(i, i1) += Scalar(frac);
  }
  return m;
}

template <typename Scalar>
Tensor<Scalar> resize_bilinear(const Tensor<Scalar>& x, Index oh, Index ow) {
  if (x.h() == oh && x.w() == ow) return x;
  const MatrixRM<Scalar> ry = interpolation_matrix<Scalar>(oh, x.h());
  const MatrixRM<Scalar> rx = interpolation_matrix<Scalar>(ow, x.w());
  Tensor<Scalar> y(x.n(), x.c(), oh, ow);
  MatrixRM<Scalar> tmp;
  for (Index n = 0; n < x.n(); ++n) {
    for (Index c = 0; c < x.c(); ++c) {
      tmp.noalias() = x.plane(n, c) * rx.transpose();
      y.plane(n, c).noalias() = ry * tmp;
    }
  }
  return y;
}

/// Adjoint of resize_bilinear: maps an output-space gradient back to the
/// (ih, iw) input grid.
template <typename Scalar>
Tensor<Scalar> resize_bilinear_backward(const Tensor<Scalar>& dy, Index ih, Index iw) {
  if (dy.h() == ih && dy.w() == iw) return dy;
  const MatrixRM<Scalar> ry = interpolation_matrix<Scalar>(dy.h(), ih);
  const MatrixRM<Scalar> rx = interpolation_matrix<Scalar>(dy.w(), iw);
  Tensor<Scalar> dx(dy.n(), dy.c(), ih, iw);
  MatrixRM<Scalar> tmp;
  for (Index n = 0; n < dy.n(); ++n) {
    for (Index c = 0; c < dy.c(); ++c) {
      tmp.noalias() = ry.transpose() * dy.plane(n, c);
      dx.plane(n, c).noalias() = tmp * rx;
    }
  }
  return dx;
}

template <typename Scalar>
Scalar sigmoid(Scalar v) {
  if (v >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-v));
  const Scalar e = std::exp(v);
  return e / (Scalar(1) + e);
}

template <typename Scalar>
Tensor<Scalar> sigmoid(Tensor<Scalar> x) {
  x.array() = x.array().unaryExpr([](Scalar v) { return sigmoid(v); });
  return x;
}

}  // namespace pgar

#endif  // PGAR_OPS_HPP
