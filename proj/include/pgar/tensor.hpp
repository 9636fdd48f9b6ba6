#ifndef PGAR_TENSOR_HPP
#define PGAR_TENSOR_HPP

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace pgar {

using Index = Eigen::Index;

// Error hierarchy. Every failure surfaced by the library derives from Error so
// the CLI can map it to a diagnostic and an exit code.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct InputError : Error {
  using Error::Error;
};
struct ScheduleError : Error {
  using Error::Error;
};
struct TopologyError : Error {
  using Error::Error;
};
struct AssemblyError : Error {
  using Error::Error;
};
struct LoadError : Error {
  using Error::Error;
};

template <typename Scalar>
using MatrixRM = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

struct Shape {
  Index n = 0, c = 0, h = 0, w = 0;

  Index size() const { return n * c * h * w; }
  friend bool operator==(const Shape&, const Shape&) = default;
  std::string str() const {
    return std::to_string(n) + "x" + std::to_string(c) + "x" + std::to_string(h) + "x" +
           std::to_string(w);
  }
};

/// Dense NCHW activation array. Storage is one contiguous Eigen array; each
/// (sample, channel) plane is row-major.
template <typename Scalar>
class Tensor {
 public:
  using Storage = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
  using PlaneMap = Eigen::Map<MatrixRM<Scalar>>;
  using ConstPlaneMap = Eigen::Map<const MatrixRM<Scalar>>;

  Tensor() = default;
  Tensor(Index n, Index c, Index h, Index w) : shape_{n, c, h, w}, data_(Storage::Zero(n * c * h * w)) {}
  explicit Tensor(Shape s) : Tensor(s.n, s.c, s.h, s.w) {}

  static Tensor constant(Shape s, Scalar v) {
    Tensor t(s);
    t.data_.setConstant(v);
    return t;
  }

  const Shape& shape() const { return shape_; }
  Index n() const { return shape_.n; }
  Index c() const { return shape_.c; }
  Index h() const { return shape_.h; }
  Index w() const { return shape_.w; }
  Index size() const { return shape_.size(); }
  bool empty() const { return size() == 0; }

  Storage& array() { return data_; }
  const Storage& array() const { return data_; }
  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }

  Scalar& operator()(Index n, Index c, Index y, Index x) { return data_[offset(n, c, y, x)]; }
  Scalar operator()(Index n, Index c, Index y, Index x) const { return data_[offset(n, c, y, x)]; }

  Scalar* plane_ptr(Index n, Index c) { return data() + (n * shape_.c + c) * shape_.h * shape_.w; }
  const Scalar* plane_ptr(Index n, Index c) const {
    return data() + (n * shape_.c + c) * shape_.h * shape_.w;
  }
  PlaneMap plane(Index n, Index c) { return PlaneMap(plane_ptr(n, c), shape_.h, shape_.w); }
  ConstPlaneMap plane(Index n, Index c) const { return ConstPlaneMap(plane_ptr(n, c), shape_.h, shape_.w); }

  // Sample n viewed as a (channels, h*w) matrix; the natural operand for 1x1
  // convolutions and im2col products.
  PlaneMap sample(Index n) { return PlaneMap(plane_ptr(n, 0), shape_.c, shape_.h * shape_.w); }
  ConstPlaneMap sample(Index n) const { return ConstPlaneMap(plane_ptr(n, 0), shape_.c, shape_.h * shape_.w); }

  template <typename Other>
  Tensor<Other> cast() const {
    Tensor<Other> out(shape_);
    out.array() = data_.template cast<Other>();
    return out;
  }

  bool all_finite() const { return data_.allFinite(); }

 private:
  Index offset(Index n, Index c, Index y, Index x) const {
    return ((n * shape_.c + c) * shape_.h + y) * shape_.w + x;
  }

  Shape shape_{};
  Storage data_;
};

/// Spatial resolution relative to the network input, always 1/2^k.
struct Scale {
  int denominator = 1;

  friend bool operator==(const Scale&, const Scale&) = default;
  std::string str() const { return denominator == 1 ? "1" : "1/" + std::to_string(denominator); }
};

template <typename Scalar>
struct FeatureMap {
  Tensor<Scalar> data;
  Scale scale;
};

/// Checks the exact-size invariant of a feature at `scale` for an input of
/// (input_h, input_w).
template <typename Scalar>
bool matches_scale(const FeatureMap<Scalar>& f, Index input_h, Index input_w) {
  return f.data.h() * f.scale.denominator == input_h && f.data.w() * f.scale.denominator == input_w;
}

/// Copies channels [first, first + count) of `src` into a new tensor.
template <typename Scalar>
Tensor<Scalar> slice_channels(const Tensor<Scalar>& src, Index first, Index count) {
  Tensor<Scalar> out(src.n(), count, src.h(), src.w());
  const Index plane = src.h() * src.w();
  for (Index n = 0; n < src.n(); ++n) {
    std::copy_n(src.plane_ptr(n, first), count * plane, out.plane_ptr(n, 0));
  }
  return out;
}

/// Channel-wise concatenation of same-sized tensors.
template <typename Scalar>
Tensor<Scalar> concat_channels(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (a.n() != b.n() || a.h() != b.h() || a.w() != b.w()) {
    throw InputError("concat_channels: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  }
  Tensor<Scalar> out(a.n(), a.c() + b.c(), a.h(), a.w());
  const Index plane = a.h() * a.w();
  for (Index n = 0; n < a.n(); ++n) {
    std::copy_n(a.plane_ptr(n, 0), a.c() * plane, out.plane_ptr(n, 0));
    std::copy_n(b.plane_ptr(n, 0), b.c() * plane, out.plane_ptr(n, a.c()));
  }
  return out;
}

}  // namespace pgar

#endif  // PGAR_TENSOR_HPP
