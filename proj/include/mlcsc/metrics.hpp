#pragma once

#include <Eigen/Core>

#include <cmath>
#include <utility>

#include "mlcsc/tensor.hpp"

namespace mlcsc {

inline constexpr double kPsnrCap = 300.0;

/// Root-mean-square error and peak signal-to-noise ratio (dB). PSNR is
/// capped at 300 dB; identical inputs sit exactly at the cap.
template <typename Scalar>
std::pair<double, double> rmse_psnr(const Tensor<Scalar>& a, const Tensor<Scalar>& b,
                                    double peak = 1.0) {
  require_shape(b.shape(), a.shape(), "rmse_psnr");
  const double mse =
      static_cast<double>((a.flat() - b.flat()).squaredNorm()) / static_cast<double>(a.size());
  const double rmse = std::sqrt(mse);
  const double psnr = rmse == 0.0 ? kPsnrCap : std::min(kPsnrCap, 20.0 * std::log10(peak / rmse));
  return {rmse, psnr};
}

namespace detail {

// 11x11 Gaussian window, sigma 1.5, normalized to sum 1.
inline const Eigen::Matrix<double, 11, 11>& ssim_window() {
  static const Eigen::Matrix<double, 11, 11> w = [] {
    Eigen::Matrix<double, 11, 11> m;
    for (int i = 0; i < 11; ++i)
      for (int j = 0; j < 11; ++j) {
        const double di = i - 5, dj = j - 5;
        m(i, j) = std::exp(-(di * di + dj * dj) / (2.0 * 1.5 * 1.5));
      }
    m /= m.sum();
    return m;
  }();
  return w;
}

inline double ssim_plane(const double* a, const double* b, Index h, Index w) {
  const auto& win = ssim_window();
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;  // K1,K2 with dynamic range 1
  double total = 0;
  Index count = 0;
  for (Index i = 0; i + 11 <= h; ++i)
    for (Index j = 0; j + 11 <= w; ++j) {
      double mua = 0, mub = 0, saa = 0, sbb = 0, sab = 0;
      for (int u = 0; u < 11; ++u)
        for (int v = 0; v < 11; ++v) {
          const double g = win(u, v);
          const double x = a[(i + u) * w + j + v];
          const double y = b[(i + u) * w + j + v];
          mua += g * x;
          mub += g * y;
          saa += g * x * x;
          sbb += g * y * y;
          sab += g * x * y;
        }
      saa -= mua * mua;
      sbb -= mub * mub;
      sab -= mua * mub;
      total += ((2 * mua * mub + c1) * (2 * sab + c2)) /
               ((mua * mua + mub * mub + c1) * (saa + sbb + c2));
      ++count;
    }
  return total / static_cast<double>(count);
}

}  // namespace detail

/// Single-scale SSIM with the standard 11x11/σ=1.5 Gaussian window and
/// K1=0.01, K2=0.03 on a dynamic range of 1. Multi-channel inputs are scored
/// per channel and averaged. Spatial dims must be at least 11.
template <typename Scalar>
double ssim(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  require_shape(b.shape(), a.shape(), "ssim");
  if (a.ndim() != 2 && a.ndim() != 3)
    throw ShapeError("ssim: expected (H,W) or (C,H,W), got " + shape_str(a.shape()));
  const Index channels = a.ndim() == 3 ? a.extent(0) : 1;
  const Index h = a.extent(a.ndim() - 2), w = a.extent(a.ndim() - 1);
  if (h < 11 || w < 11)
    throw ShapeError("ssim: image smaller than the 11x11 window: " + shape_str(a.shape()));
  Tensor<double> ad({a.size()}), bd({b.size()});
  for (Index e = 0; e < a.size(); ++e) {
    ad[e] = static_cast<double>(a[e]);
    bd[e] = static_cast<double>(b[e]);
  }
  double total = 0;
  for (Index c = 0; c < channels; ++c)
    total += detail::ssim_plane(ad.data() + c * h * w, bd.data() + c * h * w, h, w);
  return total / static_cast<double>(channels);
}

/// Frobenius-relative reconstruction error ‖pred − truth‖_F / ‖truth‖_F,
/// scale-invariant as a cross-sequence comparison requires.
template <typename Scalar>
double nrmse(const Tensor<Scalar>& pred, const Tensor<Scalar>& truth) {
  require_shape(truth.shape(), pred.shape(), "nrmse");
  const double tn = static_cast<double>(truth.flat().norm());
  if (tn == 0.0) throw std::invalid_argument("nrmse: zero-norm truth");
  return static_cast<double>((pred.flat() - truth.flat()).norm()) / tn;
}

/// One row of experiment results; nrmse is meaningful in trajectory mode
/// only and reported as 0 elsewhere.
struct MetricReport {
  double rmse = 0;
  double psnr = 0;
  double ssim = 0;
  double nrmse = 0;
};

}  // namespace mlcsc
