#include <Eigen/Dense>

#include "doctest.h"
#include "mlcsc/jpeg.hpp"
#include "oracles.hpp"

using namespace mlcsc;

namespace {

// smooth synthetic test image, natural-ish gradients plus an edge
TensorD fixture_image(Index h, Index w, std::uint64_t seed) {
  auto rng = make_rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double p0 = u(rng), p1 = u(rng), p2 = u(rng);
  TensorD img({3, h, w});
  for (Index c = 0; c < 3; ++c)
    for (Index i = 0; i < h; ++i)
      for (Index j = 0; j < w; ++j) {
        double v = 0.5 + 0.3 * std::sin(0.21 * i + p0 + 0.8 * c) * std::cos(0.17 * j + p1);
        if (j > w / 2) v += 0.18 * std::sin(0.9 * i + p2);
        img(c, i, j) = std::min(1.0, std::max(0.0, v));
      }
  return img;
}

}  // namespace

TEST_CASE("quant_table: baseline scaling values and monotonicity") {
  QuantTable q50 = quant_table(50);
  CHECK(q50.luminance[0] == 16);
  CHECK(q50.chrominance[0] == 17);
  QuantTable q100 = quant_table(100);
  for (int i = 0; i < 64; ++i) {
    CHECK(q100.luminance[i] == 1);
    CHECK(q100.chrominance[i] == 1);
  }
  // raising quality never increases any entry; entries stay in [1,255]
  QuantTable prev = quant_table(1);
  for (int qf = 2; qf <= 100; ++qf) {
    QuantTable cur = quant_table(qf);
    for (int i = 0; i < 64; ++i) {
      CHECK(cur.luminance[i] <= prev.luminance[i]);
      CHECK(cur.chrominance[i] <= prev.chrominance[i]);
      CHECK(cur.luminance[i] >= 1);
      CHECK(cur.luminance[i] <= 255);
    }
    prev = cur;
  }
  CHECK(quant_table(10).luminance[0] >= quant_table(90).luminance[0]);
  CHECK_THROWS_AS(quant_table(0), std::invalid_argument);
  CHECK_THROWS_AS(quant_table(101), std::invalid_argument);
}

TEST_CASE("color_transform: gray neutrality, round trip, matrix oracle") {
  TensorD gray = TensorD::constant({3, 4, 4}, 0.37);
  TensorD ycc = color_transform(gray, TransformDir::forward);
  for (Index i = 0; i < 16; ++i) {
    CHECK(std::abs(ycc[16 + i]) < 1e-14);  // Cb
    CHECK(std::abs(ycc[32 + i]) < 1e-14);  // Cr
  }

  auto rng = make_rng(91);
  TensorD img = oracles::rand_tensor({3, 6, 6}, rng);
  TensorD rt = color_transform(color_transform(img, TransformDir::forward),
                               TransformDir::inverse);
  CHECK((rt.flat() - img.flat()).cwiseAbs().maxCoeff() < 1e-10);

  // basis vectors against the 3x3 coefficient matrix
  Eigen::Matrix3d k;
  k << 0.299, 0.587, 0.114, -0.168735892, -0.331264108, 0.5, 0.5, -0.418687589, -0.081312411;
  for (int basis = 0; basis < 3; ++basis) {
    TensorD e({3, 1, 1});
    e[basis] = 1.0;
    TensorD out = color_transform(e, TransformDir::forward);
    for (int r = 0; r < 3; ++r) CHECK(out[r] == doctest::Approx(k(r, basis)).epsilon(1e-12));
  }
  CHECK_THROWS_AS(color_transform(TensorD({2, 4, 4}), TransformDir::forward), ShapeError);
}

TEST_CASE("chroma_resample: averages, adjoint, constants") {
  TensorD q = TensorD::from_list({2, 2}, {0, 4, 0, 4});
  TensorD down = chroma_resample(q, ResampleDir::down);
  CHECK(down.size() == 1);
  CHECK(down[0] == 2.0);

  TensorD c = TensorD::constant({6, 6}, 0.8);
  TensorD cd = chroma_resample(c, ResampleDir::down);
  CHECK((cd.flat().array() - 0.8).abs().maxCoeff() < 1e-15);
  TensorD cu = chroma_resample(cd, ResampleDir::up);
  CHECK((cu.flat().array() - 0.2).abs().maxCoeff() < 1e-15);  // adjoint scales by 1/4

  auto rng = make_rng(92);
  double worst = 0;
  for (int t = 0; t < 50; ++t) {
    TensorD x = oracles::rand_tensor({8, 10}, rng);
    TensorD y = oracles::rand_tensor({4, 5}, rng);
    const double lhs = dot(chroma_resample(x, ResampleDir::down), y);
    const double rhs = dot(x, chroma_resample(y, ResampleDir::up));
    worst = std::max(worst, std::abs(lhs - rhs) / (std::abs(lhs) + 1e-300));
  }
  CHECK(worst < 1e-12);
  CHECK_THROWS_AS(chroma_resample(TensorD({3, 4}), ResampleDir::down), ShapeError);
}

TEST_CASE("dct8: constant block, round trip, dense cosine oracle") {
  TensorD ones = TensorD::constant({8, 8}, 1.0);
  TensorD f = dct8(ones, TransformDir::forward);
  CHECK(f(0, 0) == doctest::Approx(8.0).epsilon(1e-12));
  for (Index i = 0; i < 8; ++i)
    for (Index j = 0; j < 8; ++j)
      if (i || j) CHECK(std::abs(f(i, j)) < 1e-12);

  auto rng = make_rng(93);
  TensorD block = oracles::rand_tensor({8, 8}, rng);
  TensorD rt = dct8(dct8(block, TransformDir::forward), TransformDir::inverse);
  CHECK((rt.flat() - block.flat()).cwiseAbs().maxCoeff() < 1e-10);
  // energy preserved
  CHECK(dct8(block, TransformDir::forward).flat().norm() ==
        doctest::Approx(block.flat().norm()).epsilon(1e-12));

  // explicit 64x64 orthonormal matrix from the cosine formula
  const double pi = 3.14159265358979323846;
  Eigen::MatrixXd big(64, 64);
  for (int u = 0; u < 8; ++u)
    for (int v = 0; v < 8; ++v)
      for (int n = 0; n < 8; ++n)
        for (int mm = 0; mm < 8; ++mm) {
          const double au = u == 0 ? std::sqrt(1.0 / 8.0) : 0.5;
          const double av = v == 0 ? std::sqrt(1.0 / 8.0) : 0.5;
          big(u * 8 + v, n * 8 + mm) = au * av * std::cos(pi * (2 * n + 1) * u / 16.0) *
                                       std::cos(pi * (2 * mm + 1) * v / 16.0);
        }
  Eigen::VectorXd want = big * block.flat();
  CHECK((dct8(block, TransformDir::forward).flat() - want).norm() < 1e-12 * want.norm());
  CHECK_THROWS_AS(dct8(TensorD({4, 4}), TransformDir::forward), ShapeError);
}

TEST_CASE("build_jpeg_operator: constant image keeps DC only") {
  TensorD img = TensorD::constant({3, 16, 16}, 0.8);
  auto [op, y] = build_jpeg_operator(img, 50);
  const ZeroingMask<double> zm = zeroing_mask_of(op);
  // all luma AC masked off
  for (Index bi = 0; bi < 2; ++bi)
    for (Index bj = 0; bj < 2; ++bj) {
      auto blk = zm.block(0, bi, bj);
      for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j)
          if (i || j) CHECK(blk(i, j) == 0.0);
    }
  // y nonzero only at luma DC positions
  Index nonzero = 0;
  for (Index e = 0; e < y.size(); ++e)
    if (y[e] != 0.0) ++nonzero;
  CHECK(nonzero == 4);  // one DC per 8x8 luma block
  for (Index bi = 0; bi < 2; ++bi)
    for (Index bj = 0; bj < 2; ++bj) {
      const double dc = y[(bi * 8) * 16 + bj * 8];
      CHECK(dc == doctest::Approx(8.0 * 0.8 * 0.299 + 8.0 * 0.8 * 0.587 + 8.0 * 0.8 * 0.114)
                      .epsilon(1e-10));
    }
}

TEST_CASE("build_jpeg_operator: all-surviving image reduces to DCT+downsample") {
  // build the image backwards from quantization-domain DCT coefficients that
  // all have magnitude >= 1, so nothing rounds to zero at QF=100
  auto rng = make_rng(6);
  std::uniform_real_distribution<double> u(1.0, 3.0);
  auto plane_from_coeffs = [&](Index h, Index w) {
    TensorD plane({h, w});
    for (Index bi = 0; bi < h / 8; ++bi)
      for (Index bj = 0; bj < w / 8; ++bj) {
        TensorD coef({8, 8});
        for (Index i = 0; i < 8; ++i)
          for (Index j = 0; j < 8; ++j) coef(i, j) = ((i + j) % 2 ? -1 : 1) * u(rng);
        TensorD px = dct8(coef, TransformDir::inverse);
        for (Index i = 0; i < 8; ++i)
          for (Index j = 0; j < 8; ++j) plane(bi * 8 + i, bj * 8 + j) = px(i, j);
      }
    return plane;
  };
  const Index h = 16, w = 16;
  TensorD ycc({3, h, w});
  TensorD luma_shifted = plane_from_coeffs(h, w);
  for (Index i = 0; i < h * w; ++i) ycc[i] = (luma_shifted[i] + 128.0) / 255.0;
  for (int ch = 1; ch <= 2; ++ch) {
    TensorD half = plane_from_coeffs(h / 2, w / 2);  // downsampled chroma, shifted domain
    for (Index i = 0; i < h; ++i)
      for (Index j = 0; j < w; ++j) ycc(ch, i, j) = half(i / 2, j / 2) / 255.0;
  }
  TensorD img = color_transform(ycc, TransformDir::inverse);

  auto [op, y] = build_jpeg_operator(img, 100);
  CHECK(op.payload().flat().minCoeff() == 1.0);
  // no zeroing: the luma part of decompress(apply(...)) recovers luma exactly
  TensorD ycc2 = color_transform(img, TransformDir::forward);
  TensorD dec = jpeg_decompress(op, y);
  Eigen::VectorXd luma_err = dec.flat().head(h * w) - ycc2.flat().head(h * w);
  CHECK(luma_err.cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("jpeg kept-coefficient count grows with quality") {
  TensorD img = fixture_image(32, 32, 4);
  auto [op10, y10] = build_jpeg_operator(img, 10);
  auto [op90, y90] = build_jpeg_operator(img, 90);
  CHECK(op90.payload().flat().sum() >= op10.payload().flat().sum());
}

TEST_CASE("jpeg operator adjoint identity at the quality grid") {
  for (int qf : {5, 10, 20, 50, 90}) {
    TensorD img = fixture_image(16, 16, 100 + qf);
    auto [op, y] = build_jpeg_operator(img, qf);
    CHECK(oracles::adjoint_defect(op, 100, 7 + qf) < 1e-10);
  }
}

TEST_CASE("zeroing mask is idempotent and measurement is consistent") {
  TensorD img = fixture_image(16, 16, 9);
  auto [op, y] = build_jpeg_operator(img, 20);
  const TensorD& mask = op.payload();
  // masking twice equals masking once
  CHECK((mask.flat().cwiseProduct(mask.flat()) - mask.flat()).norm() == 0.0);
  // y equals the operator applied to the color-transformed source
  TensorD ycc = color_transform(img, TransformDir::forward);
  CHECK((op.apply(ycc).flat() - y.flat()).norm() == 0.0);
  // zeroed coefficients of y are exactly zero
  for (Index e = 0; e < y.size(); ++e)
    if (mask[e] == 0.0) CHECK(y[e] == 0.0);
  CHECK_THROWS_AS(build_jpeg_operator(TensorD({3, 12, 12}), 20), ShapeError);
  CHECK_THROWS_AS(build_jpeg_operator(TensorD({3, 16, 16}), 0), std::invalid_argument);
}
