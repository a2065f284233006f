#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>

#include "mlcsc/tensor.hpp"

namespace mlcsc {

/// Multi-channel filter bank realizing one layer's convolutional synthesis
/// D·x and its adjoint Dᵀ·y. Filters are stored as (K_out, K_in, f) for
/// temporal signals or (K_out, K_in, fh, fw) for images; spatial extents must
/// be odd so that "same"-size zero-padded convolution is symmetric.
template <typename Scalar>
class ConvDictionary {
 public:
  ConvDictionary() = default;

  explicit ConvDictionary(Tensor<Scalar> filters) : filters_(std::move(filters)) {
    const Index nd = filters_.ndim();
    if (nd != 3 && nd != 4)
      throw ShapeError("ConvDictionary: filters must be rank 3 or 4, got " +
                       shape_str(filters_.shape()));
    for (Index d = 2; d < nd; ++d)
      if (filters_.extent(d) % 2 == 0)
        throw ShapeError("ConvDictionary: filter spatial extent must be odd, got " +
                         shape_str(filters_.shape()));
  }

  const Tensor<Scalar>& filters() const { return filters_; }
  Index out_channels() const { return filters_.extent(0); }
  Index in_channels() const { return filters_.extent(1); }
  bool is_1d() const { return filters_.ndim() == 3; }

  /// Shape a code tensor must have for a signal with the given spatial dims.
  Shape code_shape(const Shape& signal_shape) const {
    Shape s = signal_shape;
    s[0] = in_channels();
    return s;
  }
  Shape signal_shape(const Shape& code_shape) const {
    Shape s = code_shape;
    s[0] = out_channels();
    return s;
  }

 private:
  Tensor<Scalar> filters_;
};

namespace detail {

// axpy over the overlap of two length-n rows offset by `shift`:
// dst[i] += g * src[i + shift] for all valid i.
template <typename Scalar>
inline void shifted_axpy(Scalar* dst, const Scalar* src, Index n, Index shift, Scalar g) {
  const Index i0 = std::max<Index>(0, -shift);
  const Index i1 = std::min<Index>(n, n - shift);
  if (i1 <= i0) return;
  using V = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  Eigen::Map<V>(dst + i0, i1 - i0) +=
      g * Eigen::Map<const V>(src + i0 + shift, i1 - i0);
}

// sum_i a[i] * b[i + shift] over the valid overlap.
template <typename Scalar>
inline Scalar shifted_dot(const Scalar* a, const Scalar* b, Index n, Index shift) {
  const Index i0 = std::max<Index>(0, -shift);
  const Index i1 = std::min<Index>(n, n - shift);
  if (i1 <= i0) return Scalar(0);
  using V = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  return Eigen::Map<const V>(a + i0, i1 - i0)
      .dot(Eigen::Map<const V>(b + i0 + shift, i1 - i0));
}

template <typename Scalar>
void check_conv_input(const ConvDictionary<Scalar>& dict, const Tensor<Scalar>& t,
                      Index want_channels, const char* what) {
  const Index nd = dict.is_1d() ? 2 : 3;
  if (t.ndim() != nd)
    throw ShapeError(std::string(what) + ": expected rank " + std::to_string(nd) +
                     " tensor for " + (dict.is_1d() ? "1-D" : "2-D") +
                     " dictionary, got " + shape_str(t.shape()));
  if (t.extent(0) != want_channels)
    throw ShapeError(std::string(what) + ": expected " + std::to_string(want_channels) +
                     " channels, got " + shape_str(t.shape()));
}

}  // namespace detail

/// D·x: zero-padded, stride-1, "same"-size multi-channel convolution of the
/// code with the filter bank. Linear in the code.
template <typename Scalar>
Tensor<Scalar> conv_synthesis(const ConvDictionary<Scalar>& dict, const Tensor<Scalar>& code) {
  detail::check_conv_input(dict, code, dict.in_channels(), "conv_synthesis");
  const Tensor<Scalar>& f = dict.filters();
  Tensor<Scalar> out(dict.signal_shape(code.shape()));

  if (dict.is_1d()) {
    const Index L = code.extent(1), nf = f.extent(2), c = (nf - 1) / 2;
    for (Index o = 0; o < f.extent(0); ++o) {
      Scalar* dst = out.data() + o * L;
      for (Index k = 0; k < f.extent(1); ++k) {
        const Scalar* src = code.data() + k * L;
        for (Index t = 0; t < nf; ++t)
          detail::shifted_axpy(dst, src, L, c - t, f(o, k, t));
      }
    }
  } else {
    const Index H = code.extent(1), W = code.extent(2);
    const Index fh = f.extent(2), fw = f.extent(3);
    const Index ch = (fh - 1) / 2, cw = (fw - 1) / 2;
    for (Index o = 0; o < f.extent(0); ++o) {
      Scalar* dst = out.data() + o * H * W;
      for (Index k = 0; k < f.extent(1); ++k) {
        const Scalar* src = code.data() + k * H * W;
        for (Index di = 0; di < fh; ++di) {
          const Index si = ch - di;
          const Index i0 = std::max<Index>(0, -si), i1 = std::min<Index>(H, H - si);
          for (Index dj = 0; dj < fw; ++dj) {
            const Scalar g = f(o, k, di, dj);
            for (Index i = i0; i < i1; ++i)
              detail::shifted_axpy(dst + i * W, src + (i + si) * W, W, cw - dj, g);
          }
        }
      }
    }
  }
  return out;
}

/// Dᵀ·y: the exact adjoint of conv_synthesis, i.e. multi-channel correlation.
/// Satisfies ⟨conv_synthesis(D,x), y⟩ == ⟨x, conv_analysis(D,y)⟩.
template <typename Scalar>
Tensor<Scalar> conv_analysis(const ConvDictionary<Scalar>& dict, const Tensor<Scalar>& signal) {
  detail::check_conv_input(dict, signal, dict.out_channels(), "conv_analysis");
  const Tensor<Scalar>& f = dict.filters();
  Tensor<Scalar> out(dict.code_shape(signal.shape()));

  if (dict.is_1d()) {
    const Index L = signal.extent(1), nf = f.extent(2), c = (nf - 1) / 2;
    for (Index o = 0; o < f.extent(0); ++o) {
      const Scalar* src = signal.data() + o * L;
      for (Index k = 0; k < f.extent(1); ++k) {
        Scalar* dst = out.data() + k * L;
        for (Index t = 0; t < nf; ++t)
          detail::shifted_axpy(dst, src, L, t - c, f(o, k, t));
      }
    }
  } else {
    const Index H = signal.extent(1), W = signal.extent(2);
    const Index fh = f.extent(2), fw = f.extent(3);
    const Index ch = (fh - 1) / 2, cw = (fw - 1) / 2;
    for (Index o = 0; o < f.extent(0); ++o) {
      const Scalar* src = signal.data() + o * H * W;
      for (Index k = 0; k < f.extent(1); ++k) {
        Scalar* dst = out.data() + k * H * W;
        for (Index di = 0; di < fh; ++di) {
          const Index si = di - ch;
          const Index i0 = std::max<Index>(0, -si), i1 = std::min<Index>(H, H - si);
          for (Index dj = 0; dj < fw; ++dj) {
            const Scalar g = f(o, k, di, dj);
            for (Index i = i0; i < i1; ++i)
              detail::shifted_axpy(dst + i * W, src + (i + si) * W, W, dj - cw, g);
          }
        }
      }
    }
  }
  return out;
}

/// Gradient of ⟨conv_synthesis(D, code), cotangent⟩ with respect to the
/// filters; the filter-shaped correlation of cotangent with code. Because
/// synthesis and analysis are adjoint in the filters as well, this is also
/// the weight gradient of ⟨conv_analysis(D, cotangent), code⟩.
template <typename Scalar>
Tensor<Scalar> conv_weight_grad(const ConvDictionary<Scalar>& dict, const Tensor<Scalar>& code,
                                const Tensor<Scalar>& cotangent) {
  detail::check_conv_input(dict, code, dict.in_channels(), "conv_weight_grad(code)");
  detail::check_conv_input(dict, cotangent, dict.out_channels(), "conv_weight_grad(cotangent)");
  const Tensor<Scalar>& f = dict.filters();
  Tensor<Scalar> grad(f.shape());

  if (dict.is_1d()) {
    const Index L = code.extent(1), nf = f.extent(2), c = (nf - 1) / 2;
    for (Index o = 0; o < f.extent(0); ++o) {
      const Scalar* cot = cotangent.data() + o * L;
      for (Index k = 0; k < f.extent(1); ++k) {
        const Scalar* src = code.data() + k * L;
        for (Index t = 0; t < nf; ++t)
          grad(o, k, t) = detail::shifted_dot(cot, src, L, c - t);
      }
    }
  } else {
    const Index H = code.extent(1), W = code.extent(2);
    const Index fh = f.extent(2), fw = f.extent(3);
    const Index ch = (fh - 1) / 2, cw = (fw - 1) / 2;
    for (Index o = 0; o < f.extent(0); ++o) {
      const Scalar* cot = cotangent.data() + o * H * W;
      for (Index k = 0; k < f.extent(1); ++k) {
        const Scalar* src = code.data() + k * H * W;
        for (Index di = 0; di < fh; ++di) {
          const Index si = ch - di;
          const Index i0 = std::max<Index>(0, -si), i1 = std::min<Index>(H, H - si);
          for (Index dj = 0; dj < fw; ++dj) {
            Scalar acc = 0;
            for (Index i = i0; i < i1; ++i)
              acc += detail::shifted_dot(cot + i * W, src + (i + si) * W, W, cw - dj);
            grad(o, k, di, dj) = acc;
          }
        }
      }
    }
  }
  return grad;
}

/// Elementwise max(x, 0). Non-positive entries map to canonical +0.0 so that
/// algebraically equal computation paths stay bit-identical.
template <typename Scalar>
Tensor<Scalar> relu(const Tensor<Scalar>& x) {
  Tensor<Scalar> out(x.shape());
  const Scalar* src = x.data();
  Scalar* dst = out.data();
  for (Index i = 0; i < x.size(); ++i) dst[i] = src[i] > Scalar(0) ? src[i] : Scalar(0);
  return out;
}

/// Proximal operator of the weighted ℓ1 penalty under a non-negativity
/// constraint: elementwise max(x − b, 0). The threshold is either full-shape
/// or a per-channel vector of length x.shape()[0]; it must be non-negative.
template <typename Scalar>
Tensor<Scalar> soft_threshold_nonneg(const Tensor<Scalar>& x, const Tensor<Scalar>& b) {
  if (b.flat().minCoeff() < Scalar(0))
    throw std::invalid_argument("soft_threshold_nonneg: negative threshold");
  Tensor<Scalar> out(x.shape());
  const Scalar* src = x.data();
  Scalar* dst = out.data();
  if (same_shape(b.shape(), x.shape())) {
    for (Index i = 0; i < x.size(); ++i) {
      const Scalar v = src[i] - b[i];
      dst[i] = v > Scalar(0) ? v : Scalar(0);
    }
  } else if (b.ndim() == 1 && b.size() == x.extent(0)) {
    const Index per = x.size() / x.extent(0);
    for (Index ch = 0; ch < x.extent(0); ++ch) {
      const Scalar bc = b[ch];
      for (Index i = ch * per; i < (ch + 1) * per; ++i) {
        const Scalar v = src[i] - bc;
        dst[i] = v > Scalar(0) ? v : Scalar(0);
      }
    }
  } else {
    throw ShapeError("soft_threshold_nonneg: threshold shape " + shape_str(b.shape()) +
                     " is neither full " + shape_str(x.shape()) + " nor per-channel");
  }
  return out;
}

}  // namespace mlcsc
