#pragma once

#include <Eigen/Dense>

#include <memory>
#include <random>
#include <utility>
#include <vector>

#include "mlcsc/dct.hpp"
#include "mlcsc/tensor.hpp"

namespace mlcsc {

enum class OpKind {
  identity,
  diagonal_mask,
  blockwise_dense,
  composition,
  blend,
  jpeg_pipeline,
  camera_stack,
};

inline const char* op_kind_name(OpKind k) {
  switch (k) {
    case OpKind::identity: return "identity";
    case OpKind::diagonal_mask: return "diagonal-mask";
    case OpKind::blockwise_dense: return "blockwise-dense";
    case OpKind::composition: return "composition";
    case OpKind::blend: return "blend";
    case OpKind::jpeg_pipeline: return "jpeg-pipeline";
    case OpKind::camera_stack: return "camera-stack";
  }
  return "?";
}

/// Measurement operator M with a matching exact adjoint. Operators are
/// immutable after construction; apply/adjoint are pure and thread-safe.
template <typename Scalar>
class LinearOperator {
 public:
  using scalar_type = Scalar;
  using Ptr = std::shared_ptr<const LinearOperator>;

  static LinearOperator identity(Shape shape) {
    LinearOperator op(OpKind::identity, shape, shape);
    return op;
  }

  /// Elementwise multiply by a fixed tensor (diagonal operator).
  static LinearOperator diagonal_mask(Tensor<Scalar> mask) {
    Shape s = mask.shape();
    LinearOperator op(OpKind::diagonal_mask, s, s);
    op.payload_ = std::move(mask);
    return op;
  }

  /// Each non-overlapping edge x edge patch of the trailing two dims (one
  /// matrix per patch and per leading channel) is mapped by its own dense
  /// e²×e² matrix. `mats` has shape (n_patches, e², e²) in (channel, block
  /// row, block col) order.
  static LinearOperator blockwise_dense(Shape shape, Index block_edge, Tensor<Scalar> mats) {
    if (shape.size() != 2 && shape.size() != 3)
      throw ShapeError("blockwise_dense: shape must be (H,W) or (C,H,W)");
    const Index h = shape[shape.size() - 2], w = shape[shape.size() - 1];
    if (h % block_edge != 0 || w % block_edge != 0)
      throw ShapeError("blockwise_dense: spatial dims " + shape_str(shape) +
                       " not divisible by block edge " + std::to_string(block_edge));
    const Index channels = shape.size() == 3 ? shape[0] : 1;
    const Index n = channels * (h / block_edge) * (w / block_edge);
    const Index e2 = block_edge * block_edge;
    require_shape(mats.shape(), Shape{n, e2, e2}, "blockwise_dense: matrices");
    LinearOperator op(OpKind::blockwise_dense, shape, shape);
    op.payload_ = std::move(mats);
    op.block_edge_ = block_edge;
    return op;
  }

  /// outer ∘ inner.
  static LinearOperator composition(LinearOperator outer, LinearOperator inner) {
    require_shape(inner.out_shape(), outer.in_shape(), "composition");
    LinearOperator op(OpKind::composition, inner.in_shape(), outer.out_shape());
    op.children_.push_back(std::make_shared<const LinearOperator>(std::move(outer)));
    op.children_.push_back(std::make_shared<const LinearOperator>(std::move(inner)));
    return op;
  }

  /// (1−α)·a + α·b.
  static LinearOperator blend(LinearOperator a, LinearOperator b, Scalar alpha) {
    require_shape(b.in_shape(), a.in_shape(), "blend: input shapes");
    require_shape(b.out_shape(), a.out_shape(), "blend: output shapes");
    LinearOperator op(OpKind::blend, a.in_shape(), a.out_shape());
    op.children_.push_back(std::make_shared<const LinearOperator>(std::move(a)));
    op.children_.push_back(std::make_shared<const LinearOperator>(std::move(b)));
    op.alpha_ = alpha;
    return op;
  }

  /// Linearized JPEG forward model on a (3,H,W) YCbCr image: luma kept at
  /// full resolution, chroma 2x2-averaged, every plane transformed by
  /// per-8x8-block orthonormal DCT, then multiplied by a fixed 0/1
  /// coefficient mask. Output is the flat coefficient vector [Y|Cb|Cr].
  static LinearOperator jpeg_pipeline(Index height, Index width, Tensor<Scalar> coeff_mask,
                                      int quality) {
    if (height % 16 != 0 || width % 16 != 0)
      throw ShapeError("jpeg_pipeline: dims must be divisible by 16");
    const Index n = height * width + 2 * (height / 2) * (width / 2);
    require_shape(coeff_mask.shape(), Shape{n}, "jpeg_pipeline: mask");
    LinearOperator op(OpKind::jpeg_pipeline, Shape{3, height, width}, Shape{n});
    op.payload_ = std::move(coeff_mask);
    op.quality_ = quality;
    return op;
  }

  /// Block-diagonal stack of per-frame 2x3 projections; `cams` is (F,2,3).
  /// Maps a (3,F) trajectory to (2,F) observations framewise.
  static LinearOperator camera_stack(Tensor<Scalar> cams) {
    if (cams.ndim() != 3 || cams.extent(1) != 2 || cams.extent(2) != 3)
      throw ShapeError("camera_stack: cameras must be (F,2,3), got " +
                       shape_str(cams.shape()));
    const Index frames = cams.extent(0);
    LinearOperator op(OpKind::camera_stack, Shape{3, frames}, Shape{2, frames});
    op.payload_ = std::move(cams);
    return op;
  }

  OpKind kind() const { return kind_; }
  const Shape& in_shape() const { return in_; }
  const Shape& out_shape() const { return out_; }
  const Tensor<Scalar>& payload() const { return payload_; }
  Index block_edge() const { return block_edge_; }
  Scalar blend_alpha() const { return alpha_; }
  int jpeg_quality() const { return quality_; }
  const std::vector<Ptr>& children() const { return children_; }

  Tensor<Scalar> apply(const Tensor<Scalar>& x) const {
    require_shape(x.shape(), in_, "LinearOperator::apply");
    switch (kind_) {
      case OpKind::identity:
        return x;
      case OpKind::diagonal_mask: {
        Tensor<Scalar> out(out_);
        out.flat() = x.flat().cwiseProduct(payload_.flat());
        return out;
      }
      case OpKind::blockwise_dense:
        return apply_blockwise(x, false);
      case OpKind::composition:
        return children_[0]->apply(children_[1]->apply(x));
      case OpKind::blend: {
        Tensor<Scalar> a = children_[0]->apply(x);
        Tensor<Scalar> b = children_[1]->apply(x);
        Tensor<Scalar> out(out_);
        out.flat() = (Scalar(1) - alpha_) * a.flat() + alpha_ * b.flat();
        return out;
      }
      case OpKind::jpeg_pipeline:
        return apply_jpeg(x);
      case OpKind::camera_stack:
        return apply_cameras(x, false);
    }
    throw std::logic_error("unreachable");
  }

  Tensor<Scalar> adjoint(const Tensor<Scalar>& y) const {
    require_shape(y.shape(), out_, "LinearOperator::adjoint");
    switch (kind_) {
      case OpKind::identity:
        return y;
      case OpKind::diagonal_mask: {
        Tensor<Scalar> out(in_);
        out.flat() = y.flat().cwiseProduct(payload_.flat());
        return out;
      }
      case OpKind::blockwise_dense:
        return apply_blockwise(y, true);
      case OpKind::composition:
        return children_[1]->adjoint(children_[0]->adjoint(y));
      case OpKind::blend: {
        Tensor<Scalar> a = children_[0]->adjoint(y);
        Tensor<Scalar> b = children_[1]->adjoint(y);
        Tensor<Scalar> out(in_);
        out.flat() = (Scalar(1) - alpha_) * a.flat() + alpha_ * b.flat();
        return out;
      }
      case OpKind::jpeg_pipeline:
        return adjoint_jpeg(y);
      case OpKind::camera_stack:
        return apply_cameras(y, true);
    }
    throw std::logic_error("unreachable");
  }

 private:
  LinearOperator(OpKind kind, Shape in, Shape out)
      : kind_(kind), in_(std::move(in)), out_(std::move(out)) {}

  Tensor<Scalar> apply_blockwise(const Tensor<Scalar>& x, bool transpose) const {
    const Index e = block_edge_, e2 = e * e;
    const Index h = in_[in_.size() - 2], w = in_[in_.size() - 1];
    const Index channels = in_.size() == 3 ? in_[0] : 1;
    Tensor<Scalar> out(in_);
    using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Vec patch(e2), mapped(e2);
    Index m = 0;
    for (Index c = 0; c < channels; ++c) {
      const Scalar* src = x.data() + c * h * w;
      Scalar* dst = out.data() + c * h * w;
      for (Index bi = 0; bi < h / e; ++bi)
        for (Index bj = 0; bj < w / e; ++bj, ++m) {
          for (Index i = 0; i < e; ++i)
            for (Index j = 0; j < e; ++j)
              patch[i * e + j] = src[(bi * e + i) * w + bj * e + j];
          Eigen::Map<const Mat> mat(payload_.data() + m * e2 * e2, e2, e2);
          if (transpose)
            mapped.noalias() = mat.transpose() * patch;
          else
            mapped.noalias() = mat * patch;
          for (Index i = 0; i < e; ++i)
            for (Index j = 0; j < e; ++j)
              dst[(bi * e + i) * w + bj * e + j] = mapped[i * e + j];
        }
    }
    return out;
  }

  Tensor<Scalar> apply_jpeg(const Tensor<Scalar>& x) const {
    const Index h = in_[1], w = in_[2], h2 = h / 2, w2 = w / 2;
    Tensor<Scalar> out(out_);
    Scalar* y = out.data();
    // luma passthrough, chroma 2x2 average
    std::copy(x.data(), x.data() + h * w, y);
    detail::downsample2x2(x.data() + h * w, h, w, y + h * w);
    detail::downsample2x2(x.data() + 2 * h * w, h, w, y + h * w + h2 * w2);
    // per-block DCT on each plane
    detail::blockwise_dct8(y, h, w, TransformDir::forward);
    detail::blockwise_dct8(y + h * w, h2, w2, TransformDir::forward);
    detail::blockwise_dct8(y + h * w + h2 * w2, h2, w2, TransformDir::forward);
    out.flat() = out.flat().cwiseProduct(payload_.flat());
    return out;
  }

  Tensor<Scalar> adjoint_jpeg(const Tensor<Scalar>& y) const {
    const Index h = in_[1], w = in_[2], h2 = h / 2, w2 = w / 2;
    Tensor<Scalar> coeff(out_);
    coeff.flat() = y.flat().cwiseProduct(payload_.flat());
    Scalar* c = coeff.data();
    // adjoint of an orthonormal per-block transform is its inverse
    detail::blockwise_dct8(c, h, w, TransformDir::inverse);
    detail::blockwise_dct8(c + h * w, h2, w2, TransformDir::inverse);
    detail::blockwise_dct8(c + h * w + h2 * w2, h2, w2, TransformDir::inverse);
    Tensor<Scalar> out(in_);
    std::copy(c, c + h * w, out.data());
    detail::upsample2x2_adjoint(c + h * w, h, w, out.data() + h * w);
    detail::upsample2x2_adjoint(c + h * w + h2 * w2, h, w, out.data() + 2 * h * w);
    return out;
  }

  Tensor<Scalar> apply_cameras(const Tensor<Scalar>& x, bool transpose) const {
    const Index frames = payload_.extent(0);
    Tensor<Scalar> out(transpose ? in_ : out_);
    for (Index f = 0; f < frames; ++f) {
      if (!transpose) {
        for (Index r = 0; r < 2; ++r)
          out(r, f) = payload_(f, r, 0) * x(0, f) + payload_(f, r, 1) * x(1, f) +
                      payload_(f, r, 2) * x(2, f);
      } else {
        for (Index d = 0; d < 3; ++d)
          out(d, f) = payload_(f, 0, d) * x(0, f) + payload_(f, 1, d) * x(1, f);
      }
    }
    return out;
  }

  OpKind kind_;
  Shape in_, out_;
  Tensor<Scalar> payload_;
  Index block_edge_ = 0;
  int quality_ = 0;
  Scalar alpha_ = 0;
  std::vector<Ptr> children_;
};

template <typename Scalar>
Tensor<Scalar> apply(const LinearOperator<Scalar>& op, const Tensor<Scalar>& x) {
  return op.apply(x);
}

template <typename Scalar>
Tensor<Scalar> adjoint(const LinearOperator<Scalar>& op, const Tensor<Scalar>& y) {
  return op.adjoint(y);
}

template <typename Scalar>
LinearOperator<Scalar> compose(LinearOperator<Scalar> outer, LinearOperator<Scalar> inner) {
  return LinearOperator<Scalar>::composition(std::move(outer), std::move(inner));
}

/// Diagonal 0/1 operator dropping each entry independently with the given
/// probability. Deterministic for a fixed seed.
template <typename Scalar>
LinearOperator<Scalar> make_inpainting_mask(const Shape& shape, double drop_probability,
                                            std::uint64_t seed) {
  if (!(drop_probability >= 0.0 && drop_probability < 1.0))
    throw std::invalid_argument("make_inpainting_mask: drop probability must be in [0,1)");
  Tensor<Scalar> mask(shape);
  auto rng = make_rng(seed);
  std::bernoulli_distribution drop(drop_probability);
  for (Index i = 0; i < mask.size(); ++i) mask[i] = drop(rng) ? Scalar(0) : Scalar(1);
  return LinearOperator<Scalar>::diagonal_mask(std::move(mask));
}

/// Block-diagonal operator whose per-patch matrices have i.i.d. Gaussian
/// entries rescaled to unit spectral norm plus 0.1·I, which keeps every
/// patch transform well conditioned. One independent matrix per patch and
/// per channel; deterministic for a fixed seed.
template <typename Scalar>
LinearOperator<Scalar> make_block_transform(const Shape& shape, Index block_edge,
                                            std::uint64_t seed) {
  if (shape.size() != 2 && shape.size() != 3)
    throw ShapeError("make_block_transform: shape must be (H,W) or (C,H,W)");
  const Index h = shape[shape.size() - 2], w = shape[shape.size() - 1];
  if (block_edge < 1 || h % block_edge != 0 || w % block_edge != 0)
    throw ShapeError("make_block_transform: dims " + shape_str(shape) +
                     " not divisible by block edge " + std::to_string(block_edge));
  const Index channels = shape.size() == 3 ? shape[0] : 1;
  const Index n = channels * (h / block_edge) * (w / block_edge);
  const Index e2 = block_edge * block_edge;
  Tensor<Scalar> mats({n, e2, e2});
  auto rng = make_rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic>;
  for (Index m = 0; m < n; ++m) {
    Mat a(e2, e2);
    for (Index i = 0; i < e2; ++i)
      for (Index j = 0; j < e2; ++j) a(i, j) = gauss(rng);
    const double sn = a.jacobiSvd().singularValues()[0];
    a /= sn;
    a += 0.1 * Mat::Identity(e2, e2);
    for (Index i = 0; i < e2; ++i)
      for (Index j = 0; j < e2; ++j) mats(m, i, j) = static_cast<Scalar>(a(i, j));
  }
  return LinearOperator<Scalar>::blockwise_dense(shape, block_edge, std::move(mats));
}

/// Affine interpolation (1−α)·mask + α·block between two same-shape operators.
template <typename Scalar>
LinearOperator<Scalar> make_alpha_blend(LinearOperator<Scalar> mask_op,
                                        LinearOperator<Scalar> block_op, Scalar alpha) {
  if (!(alpha >= Scalar(0) && alpha <= Scalar(1)))
    throw std::invalid_argument("make_alpha_blend: alpha must be in [0,1]");
  return LinearOperator<Scalar>::blend(std::move(mask_op), std::move(block_op), alpha);
}

/// Power-iteration estimate of ‖op‖² (largest eigenvalue of opᵀop). Works for
/// any type exposing apply/adjoint/in_shape. Deterministic given the seed;
/// returns 0 for the zero operator.
template <typename Op, typename Scalar = typename Op::scalar_type>
double spectral_norm_sq(const Op& op, int iters, std::uint64_t seed) {
  if (iters < 1) throw std::invalid_argument("spectral_norm_sq: iters must be >= 1");
  Tensor<Scalar> v(op.in_shape());
  auto rng = make_rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (Index i = 0; i < v.size(); ++i) v[i] = static_cast<Scalar>(gauss(rng));
  v.flat() /= v.flat().norm();
  for (int it = 0; it < iters; ++it) {
    Tensor<Scalar> w = op.adjoint(op.apply(v));
    const Scalar nw = w.flat().norm();
    if (nw == Scalar(0)) return 0.0;
    w.flat() /= nw;
    v = std::move(w);
  }
  return static_cast<double>(op.apply(v).flat().squaredNorm());
}

}  // namespace mlcsc
