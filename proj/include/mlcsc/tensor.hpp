#pragma once

#include <Eigen/Core>

#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "mlcsc/common.hpp"

namespace mlcsc {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

inline Index shape_numel(const Shape& shape) {
  Index n = 1;
  for (Index e : shape) n *= e;
  return n;
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ")";
  return os.str();
}

inline bool same_shape(const Shape& a, const Shape& b) { return a == b; }

inline void require_shape(const Shape& got, const Shape& want, const char* what) {
  if (got != want)
    throw ShapeError(std::string(what) + ": expected shape " + shape_str(want) +
                     ", got " + shape_str(got));
}

/// Dense row-major tensor over a real scalar. Values are immutable in spirit:
/// every library operation takes tensors by const reference and returns fresh
/// ones, so sharing across threads is safe.
template <typename Scalar>
class Tensor {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Tensor() = default;

  explicit Tensor(Shape shape) : shape_(std::move(shape)) {
    validate_shape();
    data_ = Vector::Zero(shape_numel(shape_));
  }

  Tensor(Shape shape, Vector data) : shape_(std::move(shape)), data_(std::move(data)) {
    validate_shape();
    if (data_.size() != shape_numel(shape_))
      throw ShapeError("Tensor: data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_str(shape_));
  }

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

  static Tensor constant(Shape shape, Scalar value) {
    Tensor t(std::move(shape));
    t.data_.setConstant(value);
    return t;
  }

  static Tensor from_list(Shape shape, std::initializer_list<Scalar> values) {
    Vector v(static_cast<Index>(values.size()));
    Index i = 0;
    for (Scalar s : values) v[i++] = s;
    return Tensor(std::move(shape), std::move(v));
  }

  const Shape& shape() const { return shape_; }
  Index ndim() const { return static_cast<Index>(shape_.size()); }
  Index extent(Index d) const { return shape_[static_cast<std::size_t>(d)]; }
  Index size() const { return data_.size(); }

  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }
  Vector& flat() { return data_; }
  const Vector& flat() const { return data_; }

  Scalar& operator[](Index i) { return data_[i]; }
  Scalar operator[](Index i) const { return data_[i]; }

  Scalar& operator()(Index i) { return data_[i]; }
  Scalar operator()(Index i) const { return data_[i]; }
  Scalar& operator()(Index i, Index j) { return data_[i * extent(1) + j]; }
  Scalar operator()(Index i, Index j) const { return data_[i * extent(1) + j]; }
  Scalar& operator()(Index i, Index j, Index k) {
    return data_[(i * extent(1) + j) * extent(2) + k];
  }
  Scalar operator()(Index i, Index j, Index k) const {
    return data_[(i * extent(1) + j) * extent(2) + k];
  }
  Scalar& operator()(Index i, Index j, Index k, Index l) {
    return data_[((i * extent(1) + j) * extent(2) + k) * extent(3) + l];
  }
  Scalar operator()(Index i, Index j, Index k, Index l) const {
    return data_[((i * extent(1) + j) * extent(2) + k) * extent(3) + l];
  }

  bool all_finite() const { return data_.allFinite(); }

  Tensor reshaped(Shape shape) const {
    if (shape_numel(shape) != size())
      throw ShapeError("reshape: element count mismatch " + shape_str(shape_) +
                       " -> " + shape_str(shape));
    return Tensor(std::move(shape), data_);
  }

  Tensor& operator+=(const Tensor& o) {
    require_shape(o.shape_, shape_, "operator+=");
    data_ += o.data_;
    return *this;
  }
  Tensor& operator-=(const Tensor& o) {
    require_shape(o.shape_, shape_, "operator-=");
    data_ -= o.data_;
    return *this;
  }
  Tensor& operator*=(Scalar s) {
    data_ *= s;
    return *this;
  }

  friend Tensor operator+(Tensor a, const Tensor& b) { return a += b; }
  friend Tensor operator-(Tensor a, const Tensor& b) { return a -= b; }
  friend Tensor operator*(Scalar s, Tensor a) { return a *= s; }
  friend Tensor operator*(Tensor a, Scalar s) { return a *= s; }

 private:
  void validate_shape() const {
    if (shape_.empty()) throw ShapeError("Tensor: rank-0 shapes are not supported");
    for (Index e : shape_)
      if (e <= 0) throw ShapeError("Tensor: non-positive extent in " + shape_str(shape_));
  }

  Shape shape_;
  Vector data_;
};

template <typename Scalar>
Scalar dot(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  require_shape(b.shape(), a.shape(), "dot");
  return a.flat().dot(b.flat());
}

template <typename Scalar>
Scalar norm(const Tensor<Scalar>& a) {
  return a.flat().norm();
}

using TensorD = Tensor<double>;

}  // namespace mlcsc
