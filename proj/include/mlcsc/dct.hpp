#pragma once

#include <Eigen/Core>

#include <cmath>

#include "mlcsc/tensor.hpp"

namespace mlcsc {

/// Orthonormal 8x8 DCT-II matrix: row u, column n is a(u)·cos(π(2n+1)u/16)
/// with a(0)=√(1/8) and a(u>0)=1/2. Its inverse is its transpose.
template <typename Scalar>
const Eigen::Matrix<Scalar, 8, 8>& dct8_matrix() {
  static const Eigen::Matrix<Scalar, 8, 8> m = [] {
    Eigen::Matrix<Scalar, 8, 8> c;
    const double pi = 3.14159265358979323846;
    for (int u = 0; u < 8; ++u) {
      const double a = u == 0 ? std::sqrt(1.0 / 8.0) : 0.5;
      for (int n = 0; n < 8; ++n)
        c(u, n) = static_cast<Scalar>(a * std::cos(pi * (2 * n + 1) * u / 16.0));
    }
    return c;
  }();
  return m;
}

enum class TransformDir { forward, inverse };

/// 2-D orthonormal DCT-II of one 8x8 block (forward: C·B·Cᵀ, inverse: Cᵀ·B·C).
template <typename Scalar>
Eigen::Matrix<Scalar, 8, 8> dct8_block(const Eigen::Matrix<Scalar, 8, 8>& block,
                                       TransformDir dir) {
  const auto& c = dct8_matrix<Scalar>();
  if (dir == TransformDir::forward) return c * block * c.transpose();
  return c.transpose() * block * c;
}

/// Tensor-facing wrapper for a single 8x8 block.
template <typename Scalar>
Tensor<Scalar> dct8(const Tensor<Scalar>& block, TransformDir dir) {
  if (block.ndim() != 2 || block.extent(0) != 8 || block.extent(1) != 8)
    throw ShapeError("dct8: expected an 8x8 block, got " + shape_str(block.shape()));
  Eigen::Matrix<Scalar, 8, 8> b;
  for (Index i = 0; i < 8; ++i)
    for (Index j = 0; j < 8; ++j) b(i, j) = block(i, j);
  const Eigen::Matrix<Scalar, 8, 8> r = dct8_block(b, dir);
  Tensor<Scalar> out({8, 8});
  for (Index i = 0; i < 8; ++i)
    for (Index j = 0; j < 8; ++j) out(i, j) = r(i, j);
  return out;
}

namespace detail {

// In-place per-8x8-block DCT over a row-major H x W plane.
template <typename Scalar>
void blockwise_dct8(Scalar* plane, Index height, Index width, TransformDir dir) {
  Eigen::Matrix<Scalar, 8, 8> b;
  for (Index bi = 0; bi < height / 8; ++bi)
    for (Index bj = 0; bj < width / 8; ++bj) {
      for (Index i = 0; i < 8; ++i)
        for (Index j = 0; j < 8; ++j) b(i, j) = plane[(bi * 8 + i) * width + bj * 8 + j];
      const Eigen::Matrix<Scalar, 8, 8> r = dct8_block(b, dir);
      for (Index i = 0; i < 8; ++i)
        for (Index j = 0; j < 8; ++j) plane[(bi * 8 + i) * width + bj * 8 + j] = r(i, j);
    }
}

// 2x2 block average, (H,W) -> (H/2,W/2).
template <typename Scalar>
void downsample2x2(const Scalar* src, Index height, Index width, Scalar* dst) {
  for (Index i = 0; i < height / 2; ++i)
    for (Index j = 0; j < width / 2; ++j)
      dst[i * (width / 2) + j] =
          (src[(2 * i) * width + 2 * j] + src[(2 * i) * width + 2 * j + 1] +
           src[(2 * i + 1) * width + 2 * j] + src[(2 * i + 1) * width + 2 * j + 1]) /
          Scalar(4);
}

// Exact adjoint of downsample2x2: replicate each value over its 2x2 cell
// scaled by 1/4. (H/2,W/2) -> (H,W).
template <typename Scalar>
void upsample2x2_adjoint(const Scalar* src, Index height, Index width, Scalar* dst) {
  for (Index i = 0; i < height / 2; ++i)
    for (Index j = 0; j < width / 2; ++j) {
      const Scalar v = src[i * (width / 2) + j] / Scalar(4);
      dst[(2 * i) * width + 2 * j] = v;
      dst[(2 * i) * width + 2 * j + 1] = v;
      dst[(2 * i + 1) * width + 2 * j] = v;
      dst[(2 * i + 1) * width + 2 * j + 1] = v;
    }
}

// Plain replication upsample (decoder-style, not the adjoint).
template <typename Scalar>
void upsample2x2_replicate(const Scalar* src, Index height, Index width, Scalar* dst) {
  for (Index i = 0; i < height / 2; ++i)
    for (Index j = 0; j < width / 2; ++j) {
      const Scalar v = src[i * (width / 2) + j];
      dst[(2 * i) * width + 2 * j] = v;
      dst[(2 * i) * width + 2 * j + 1] = v;
      dst[(2 * i + 1) * width + 2 * j] = v;
      dst[(2 * i + 1) * width + 2 * j + 1] = v;
    }
}

}  // namespace detail
}  // namespace mlcsc
