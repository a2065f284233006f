#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>

#include "mlcsc/linop.hpp"
#include "mlcsc/tensor.hpp"

namespace mlcsc {

/// Per-quality-factor 8x8 quantization tables (baseline scaling rule).
struct QuantTable {
  std::array<int, 64> luminance;
  std::array<int, 64> chrominance;
  int quality_factor;
};

namespace detail {

inline const std::array<int, 64>& base_luminance_table() {
  static const std::array<int, 64> t = {
      16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
      14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
      18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
      49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};
  return t;
}

inline const std::array<int, 64>& base_chrominance_table() {
  static const std::array<int, 64> t = {
      17, 18, 24, 47, 99, 99, 99, 99, 18, 21, 26, 66, 99, 99, 99, 99,
      24, 26, 56, 99, 99, 99, 99, 99, 47, 66, 99, 99, 99, 99, 99, 99,
      99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99,
      99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99};
  return t;
}

inline std::array<int, 64> scale_table(const std::array<int, 64>& base, int quality) {
  const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
  std::array<int, 64> out;
  for (int i = 0; i < 64; ++i)
    out[i] = std::clamp((base[i] * scale + 50) / 100, 1, 255);
  return out;
}

}  // namespace detail

/// Baseline quantization tables for a quality factor in [1,100]:
/// scale = 5000/QF below 50, 200−2·QF at or above, entries clamped to [1,255].
inline QuantTable quant_table(int quality_factor) {
  if (quality_factor < 1 || quality_factor > 100)
    throw std::invalid_argument("quant_table: quality factor must be in [1,100]");
  return QuantTable{detail::scale_table(detail::base_luminance_table(), quality_factor),
                    detail::scale_table(detail::base_chrominance_table(), quality_factor),
                    quality_factor};
}

/// Full-range BT.601 RGB <-> YCbCr with centered chroma (no +0.5 offset), so
/// the transform is linear and gray inputs map to Cb=Cr=0. The inverse is the
/// exact matrix inverse of the forward coefficients.
template <typename Scalar>
const Eigen::Matrix<Scalar, 3, 3>& color_matrix(TransformDir dir) {
  static const Eigen::Matrix<Scalar, 3, 3> fwd = [] {
    Eigen::Matrix<Scalar, 3, 3> m;
    m << Scalar(0.299), Scalar(0.587), Scalar(0.114),
         Scalar(-0.168735892), Scalar(-0.331264108), Scalar(0.5),
         Scalar(0.5), Scalar(-0.418687589), Scalar(-0.081312411);
    return m;
  }();
  static const Eigen::Matrix<Scalar, 3, 3> inv = fwd.inverse().eval();
  return dir == TransformDir::forward ? fwd : inv;
}

template <typename Scalar>
Tensor<Scalar> color_transform(const Tensor<Scalar>& image, TransformDir dir) {
  if (image.ndim() != 3 || image.extent(0) != 3)
    throw ShapeError("color_transform: expected a (3,H,W) image, got " +
                     shape_str(image.shape()));
  const auto& m = color_matrix<Scalar>(dir);
  const Index plane = image.extent(1) * image.extent(2);
  Tensor<Scalar> out(image.shape());
  const Scalar* r = image.data();
  const Scalar* g = image.data() + plane;
  const Scalar* b = image.data() + 2 * plane;
  Scalar* o0 = out.data();
  Scalar* o1 = out.data() + plane;
  Scalar* o2 = out.data() + 2 * plane;
  for (Index i = 0; i < plane; ++i) {
    o0[i] = m(0, 0) * r[i] + m(0, 1) * g[i] + m(0, 2) * b[i];
    o1[i] = m(1, 0) * r[i] + m(1, 1) * g[i] + m(1, 2) * b[i];
    o2[i] = m(2, 0) * r[i] + m(2, 1) * g[i] + m(2, 2) * b[i];
  }
  return out;
}

enum class ResampleDir { down, up };

/// 2x2 block average (down) and its exact adjoint (up: replication scaled by
/// 1/4), acting on a single (H,W) plane.
template <typename Scalar>
Tensor<Scalar> chroma_resample(const Tensor<Scalar>& plane, ResampleDir dir) {
  if (plane.ndim() != 2)
    throw ShapeError("chroma_resample: expected a (H,W) plane, got " +
                     shape_str(plane.shape()));
  if (dir == ResampleDir::down) {
    const Index h = plane.extent(0), w = plane.extent(1);
    if (h % 2 != 0 || w % 2 != 0)
      throw ShapeError("chroma_resample: odd dims " + shape_str(plane.shape()));
    Tensor<Scalar> out({h / 2, w / 2});
    detail::downsample2x2(plane.data(), h, w, out.data());
    return out;
  }
  const Index h = plane.extent(0) * 2, w = plane.extent(1) * 2;
  Tensor<Scalar> out({h, w});
  detail::upsample2x2_adjoint(plane.data(), h, w, out.data());
  return out;
}

/// Which DCT coefficients of the true image survive quantization; 1 where the
/// quantized coefficient is nonzero. Stored in the flat [Y|Cb|Cr]
/// coefficient layout of the jpeg_pipeline operator.
template <typename Scalar>
struct ZeroingMask {
  Tensor<Scalar> coeff_mask;  // flat, length H·W + 2·(H/2)·(W/2)
  Index height = 0, width = 0;

  Index plane_offset(int channel) const {
    const Index hw = height * width, cw = (height / 2) * (width / 2);
    return channel == 0 ? 0 : hw + (channel - 1) * cw;
  }
  /// 8x8 mask block for channel c (0=Y,1=Cb,2=Cr) at block row/col (bi,bj).
  Eigen::Matrix<Scalar, 8, 8> block(int channel, Index bi, Index bj) const {
    const Index w = channel == 0 ? width : width / 2;
    const Scalar* p = coeff_mask.data() + plane_offset(channel);
    Eigen::Matrix<Scalar, 8, 8> m;
    for (Index i = 0; i < 8; ++i)
      for (Index j = 0; j < 8; ++j) m(i, j) = p[(bi * 8 + i) * w + bj * 8 + j];
    return m;
  }
};

namespace detail {

// Quantization decision for one plane, made in the level-shifted 8-bit JPEG
// domain (values*255−128 for luma; centered chroma*255 is already shifted):
// a coefficient survives iff round(coef/Q) != 0.
template <typename Scalar>
void plane_zeroing_mask(const Scalar* plane, Index h, Index w, bool is_luma,
                        const std::array<int, 64>& table, Scalar* mask_out) {
  std::vector<Scalar> shifted(static_cast<std::size_t>(h * w));
  for (Index i = 0; i < h * w; ++i)
    shifted[static_cast<std::size_t>(i)] =
        plane[i] * Scalar(255) - (is_luma ? Scalar(128) : Scalar(0));
  blockwise_dct8(shifted.data(), h, w, TransformDir::forward);
  for (Index bi = 0; bi < h / 8; ++bi)
    for (Index bj = 0; bj < w / 8; ++bj)
      for (Index i = 0; i < 8; ++i)
        for (Index j = 0; j < 8; ++j) {
          const Index p = (bi * 8 + i) * w + bj * 8 + j;
          const double q = std::round(static_cast<double>(shifted[static_cast<std::size_t>(p)]) /
                                      table[static_cast<std::size_t>(i * 8 + j)]);
          mask_out[p] = q != 0.0 ? Scalar(1) : Scalar(0);
        }
}

}  // namespace detail

/// Build the per-image linearized JPEG operator and its measurement.
/// The zeroing mask keeps exactly the coefficients of the true image that a
/// baseline encoder at this quality factor would not round to zero; the
/// returned measurement is y = M·color_transform(image).
template <typename Scalar>
std::pair<LinearOperator<Scalar>, Tensor<Scalar>> build_jpeg_operator(
    const Tensor<Scalar>& image, int quality_factor) {
  if (image.ndim() != 3 || image.extent(0) != 3)
    throw ShapeError("build_jpeg_operator: expected (3,H,W) image");
  const Index h = image.extent(1), w = image.extent(2);
  if (h % 16 != 0 || w % 16 != 0)
    throw ShapeError("build_jpeg_operator: dims must be divisible by 16, got " +
                     shape_str(image.shape()));
  const QuantTable qt = quant_table(quality_factor);
  const Tensor<Scalar> ycc = color_transform(image, TransformDir::forward);
  const Index h2 = h / 2, w2 = w / 2;

  Tensor<Scalar> mask({h * w + 2 * h2 * w2});
  detail::plane_zeroing_mask(ycc.data(), h, w, true, qt.luminance, mask.data());
  Tensor<Scalar> cb({h2, w2}), cr({h2, w2});
  detail::downsample2x2(ycc.data() + h * w, h, w, cb.data());
  detail::downsample2x2(ycc.data() + 2 * h * w, h, w, cr.data());
  detail::plane_zeroing_mask(cb.data(), h2, w2, false, qt.chrominance,
                             mask.data() + h * w);
  detail::plane_zeroing_mask(cr.data(), h2, w2, false, qt.chrominance,
                             mask.data() + h * w + h2 * w2);

  LinearOperator<Scalar> op =
      LinearOperator<Scalar>::jpeg_pipeline(h, w, std::move(mask), quality_factor);
  Tensor<Scalar> y = op.apply(ycc);
  return {std::move(op), std::move(y)};
}

/// Decoder-style inversion of the lossless pipeline steps: per-block inverse
/// DCT and chroma replication, producing a (3,H,W) YCbCr image from the flat
/// coefficient measurement. Zeroed coefficients stay zero.
template <typename Scalar>
Tensor<Scalar> jpeg_decompress(const LinearOperator<Scalar>& op, const Tensor<Scalar>& y) {
  if (op.kind() != OpKind::jpeg_pipeline)
    throw std::invalid_argument("jpeg_decompress: operator is not a jpeg pipeline");
  require_shape(y.shape(), op.out_shape(), "jpeg_decompress");
  const Index h = op.in_shape()[1], w = op.in_shape()[2], h2 = h / 2, w2 = w / 2;
  Tensor<Scalar> coeff = y;
  Scalar* c = coeff.data();
  detail::blockwise_dct8(c, h, w, TransformDir::inverse);
  detail::blockwise_dct8(c + h * w, h2, w2, TransformDir::inverse);
  detail::blockwise_dct8(c + h * w + h2 * w2, h2, w2, TransformDir::inverse);
  Tensor<Scalar> out({3, h, w});
  std::copy(c, c + h * w, out.data());
  detail::upsample2x2_replicate(c + h * w, h, w, out.data() + h * w);
  detail::upsample2x2_replicate(c + h * w + h2 * w2, h, w, out.data() + 2 * h * w);
  return out;
}

/// Projection of a predicted YCbCr image onto the measurement-consistent set
/// {z : M z = y}: ẑ + Mᵀ(MMᵀ)⁻¹(y − Mẑ). For the jpeg pipeline MMᵀ is
/// diagonal — 1 on kept luma coefficients, 1/4 on kept chroma coefficients —
/// so the correction is exact and cheap.
template <typename Scalar>
Tensor<Scalar> jpeg_data_consistency(const LinearOperator<Scalar>& op,
                                     const Tensor<Scalar>& zhat, const Tensor<Scalar>& y) {
  if (op.kind() != OpKind::jpeg_pipeline)
    throw std::invalid_argument("jpeg_data_consistency: operator is not a jpeg pipeline");
  Tensor<Scalar> r = op.apply(zhat);
  r.flat() = y.flat() - r.flat();
  const Index luma = op.in_shape()[1] * op.in_shape()[2];
  r.flat().tail(r.size() - luma) *= Scalar(4);  // (MMᵀ)⁻¹ on chroma rows
  Tensor<Scalar> out = op.adjoint(r);
  out += zhat;
  return out;
}

/// The zeroing mask of a built jpeg-pipeline operator, with block accessors.
template <typename Scalar>
ZeroingMask<Scalar> zeroing_mask_of(const LinearOperator<Scalar>& op) {
  if (op.kind() != OpKind::jpeg_pipeline)
    throw std::invalid_argument("zeroing_mask_of: operator is not a jpeg pipeline");
  return ZeroingMask<Scalar>{op.payload(), op.in_shape()[1], op.in_shape()[2]};
}

}  // namespace mlcsc
