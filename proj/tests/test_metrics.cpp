#include <random>

#include "doctest.h"
#include "mlcsc/metrics.hpp"
#include "oracles.hpp"

using namespace mlcsc;

namespace {

// independent SSIM reference: same constants, plain accumulations
double ssim_reference(const TensorD& a, const TensorD& b) {
  const Index h = a.extent(0), w = a.extent(1);
  std::vector<double> win(121);
  double wsum = 0;
  for (int i = 0; i < 11; ++i)
    for (int j = 0; j < 11; ++j) {
      const double d2 = (i - 5.0) * (i - 5.0) + (j - 5.0) * (j - 5.0);
      win[i * 11 + j] = std::exp(-d2 / 4.5);
      wsum += win[i * 11 + j];
    }
  for (auto& v : win) v /= wsum;
  double total = 0;
  int count = 0;
  for (Index i = 0; i + 11 <= h; ++i)
    for (Index j = 0; j + 11 <= w; ++j) {
      double mx = 0, my = 0;
      for (int u = 0; u < 11; ++u)
        for (int v = 0; v < 11; ++v) {
          mx += win[u * 11 + v] * a(i + u, j + v);
          my += win[u * 11 + v] * b(i + u, j + v);
        }
      double vx = 0, vy = 0, cxy = 0;
      for (int u = 0; u < 11; ++u)
        for (int v = 0; v < 11; ++v) {
          const double dx = a(i + u, j + v) - mx;
          const double dy = b(i + u, j + v) - my;
          vx += win[u * 11 + v] * dx * dx;
          vy += win[u * 11 + v] * dy * dy;
          cxy += win[u * 11 + v] * dx * dy;
        }
      const double c1 = 1e-4, c2 = 9e-4;
      total += ((2 * mx * my + c1) * (2 * cxy + c2)) /
               ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++count;
    }
  return total / count;
}

}  // namespace

TEST_CASE("rmse_psnr point values") {
  TensorD a = TensorD::from_list({2}, {0, 0});
  TensorD b = TensorD::from_list({2}, {3, 4});
  auto [rmse, psnr] = rmse_psnr(a, b);
  CHECK(rmse == doctest::Approx(std::sqrt(12.5)).epsilon(1e-12));

  auto [r0, p0] = rmse_psnr(b, b);
  CHECK(r0 == 0.0);
  CHECK(p0 == 300.0);

  TensorD x = TensorD::constant({10, 10}, 0.5);
  TensorD y = TensorD::constant({10, 10}, 0.6);
  auto [ro, po] = rmse_psnr(x, y);
  CHECK(ro == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(po == doctest::Approx(20.0).epsilon(1e-9));

  CHECK_THROWS_AS(rmse_psnr(a, TensorD({3})), ShapeError);
}

TEST_CASE("psnr strictly decreases as rmse grows") {
  TensorD base = TensorD::constant({8, 8}, 0.2);
  double prev_psnr = 1e9;
  for (double off : {0.01, 0.05, 0.1, 0.2, 0.4}) {
    TensorD shifted = TensorD::constant({8, 8}, 0.2 + off);
    auto [r, p] = rmse_psnr(base, shifted);
    CHECK(p < prev_psnr);
    prev_psnr = p;
  }
}

TEST_CASE("ssim: identity, reference agreement, contrast reversal, monotone noise") {
  auto rng = make_rng(7);
  TensorD img({16, 16});
  for (Index i = 0; i < 16; ++i)
    for (Index j = 0; j < 16; ++j) img(i, j) = 0.5 + 0.4 * std::sin(0.4 * i) * std::cos(0.3 * j);

  CHECK(ssim(img, img) == doctest::Approx(1.0).epsilon(1e-12));

  TensorD noisy = img;
  std::normal_distribution<double> gauss(0.0, 0.05);
  for (Index e = 0; e < noisy.size(); ++e) noisy[e] += gauss(rng);
  CHECK(ssim(img, noisy) == doctest::Approx(ssim_reference(img, noisy)).epsilon(1e-9));

  // binary-contrast fixture against its inversion
  TensorD bw({12, 12});
  for (Index i = 0; i < 12; ++i)
    for (Index j = 0; j < 12; ++j) bw(i, j) = ((i / 3 + j / 3) % 2) ? 1.0 : 0.0;
  TensorD inv(bw.shape());
  inv.flat() = 1.0 - bw.flat().array();
  const double s = ssim(bw, inv);
  CHECK(s == doctest::Approx(ssim_reference(bw, inv)).epsilon(1e-9));
  CHECK(s < 0.1);

  double prev = 1.0;
  for (double sigma : {0.02, 0.05, 0.1, 0.2, 0.4}) {
    TensorD degraded = img;
    std::normal_distribution<double> g2(0.0, sigma);
    for (Index e = 0; e < degraded.size(); ++e) degraded[e] += g2(rng);
    const double cur = ssim(img, degraded);
    CHECK(cur < prev);
    prev = cur;
  }

  CHECK_THROWS_AS(ssim(TensorD({8, 8}), TensorD({8, 8})), ShapeError);  // below window size
}

TEST_CASE("nrmse: zero, doubling, scale invariance, zero-norm rejection") {
  auto rng = make_rng(8);
  TensorD t = oracles::rand_tensor({3, 20}, rng);
  CHECK(nrmse(t, t) == 0.0);
  TensorD twice = 2.0 * t;
  CHECK(nrmse(twice, t) == doctest::Approx(1.0).epsilon(1e-12));
  TensorD pred = oracles::rand_tensor({3, 20}, rng);
  const double base = nrmse(pred, t);
  CHECK(nrmse(-3.5 * pred, -3.5 * t) == doctest::Approx(base).epsilon(1e-12));
  CHECK_THROWS_AS(nrmse(t, TensorD({3, 20})), std::invalid_argument);
}
