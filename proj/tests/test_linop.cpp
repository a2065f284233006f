#include <Eigen/Dense>

#include "doctest.h"
#include "mlcsc/linop.hpp"
#include "oracles.hpp"

using namespace mlcsc;

namespace {

using Op = LinearOperator<double>;

// dense operator defined directly by an Eigen matrix, for oracle tests
struct DenseOp {
  using scalar_type = double;
  Eigen::MatrixXd m;
  Shape in;
  const Shape& in_shape() const { return in; }
  TensorD apply(const TensorD& x) const {
    TensorD out({m.rows()});
    out.flat() = m * x.flat();
    return out;
  }
  TensorD adjoint(const TensorD& y) const {
    TensorD out({m.cols()});
    out.flat() = m.transpose() * y.flat();
    return out;
  }
};

}  // namespace

TEST_CASE("diagonal mask apply and adjoint") {
  Op mask = Op::diagonal_mask(TensorD::from_list({2}, {1, 0}));
  TensorD x = TensorD::from_list({2}, {4, 7});
  CHECK(mask.apply(x)[0] == 4.0);
  CHECK(mask.apply(x)[1] == 0.0);
  // diagonal is symmetric
  CHECK((mask.adjoint(x).flat() - mask.apply(x).flat()).norm() == 0.0);
  CHECK_THROWS_AS(mask.apply(TensorD({3})), ShapeError);
}

TEST_CASE("blockwise identity matrices give the identity operator") {
  const Index e = 4, e2 = 16;
  TensorD mats({4, e2, e2});
  for (Index m = 0; m < 4; ++m)
    for (Index i = 0; i < e2; ++i) mats(m, i, i) = 1.0;
  Op op = Op::blockwise_dense({8, 8}, e, std::move(mats));
  auto rng = make_rng(3);
  TensorD x = oracles::rand_tensor({8, 8}, rng);
  CHECK((op.apply(x).flat() - x.flat()).norm() == 0.0);
}

TEST_CASE("blockwise dense equals an independently assembled block-diagonal matrix") {
  auto rng = make_rng(5);
  Op op = make_block_transform<double>({4, 8}, 4, 99);
  // independent dense assembly from the payload, element by element
  const Index h = 4, w = 8, e = 4, e2 = 16;
  Eigen::MatrixXd big = Eigen::MatrixXd::Zero(h * w, h * w);
  const TensorD& mats = op.payload();
  Index m = 0;
  for (Index bi = 0; bi < h / e; ++bi)
    for (Index bj = 0; bj < w / e; ++bj, ++m)
      for (Index i = 0; i < e; ++i)
        for (Index j = 0; j < e; ++j)
          for (Index i2 = 0; i2 < e; ++i2)
            for (Index j2 = 0; j2 < e; ++j2)
              big((bi * e + i) * w + bj * e + j, (bi * e + i2) * w + bj * e + j2) =
                  mats(m, i * e + j, i2 * e + j2);
  TensorD x = oracles::rand_tensor({4, 8}, rng);
  Eigen::VectorXd want = big * x.flat();
  CHECK((op.apply(x).flat() - want).norm() < 1e-12 * want.norm());
  Eigen::VectorXd wantT = big.transpose() * x.flat();
  CHECK((op.adjoint(x).flat() - wantT).norm() < 1e-12 * wantT.norm());
}

TEST_CASE("every operator family passes the adjoint identity") {
  Op mask = make_inpainting_mask<double>({3, 8, 8}, 0.4, 11);
  Op block = make_block_transform<double>({3, 8, 8}, 4, 12);
  Op blend = make_alpha_blend(Op(mask), Op(block), 0.35);
  Op comp = compose(Op(block), Op(mask));
  CHECK(oracles::adjoint_defect(mask, 100, 1) < 1e-10);
  CHECK(oracles::adjoint_defect(block, 100, 2) < 1e-10);
  CHECK(oracles::adjoint_defect(blend, 100, 3) < 1e-10);
  CHECK(oracles::adjoint_defect(comp, 100, 4) < 1e-10);
}

TEST_CASE("composition: identity neutral element and adjoint reversal") {
  Op m = make_block_transform<double>({4, 4}, 4, 7);
  Op id = Op::identity({4, 4});
  auto rng = make_rng(8);
  TensorD x = oracles::rand_tensor({4, 4}, rng);
  CHECK((compose(Op(id), Op(m)).apply(x).flat() - m.apply(x).flat()).norm() == 0.0);
  CHECK((compose(Op(m), Op(id)).apply(x).flat() - m.apply(x).flat()).norm() == 0.0);

  // (A∘B)ᵀ == Bᵀ∘Aᵀ, checked numerically
  Op a = make_block_transform<double>({4, 4}, 2, 21);
  Op b = make_block_transform<double>({4, 4}, 4, 22);
  Op ab = compose(Op(a), Op(b));
  TensorD y = oracles::rand_tensor({4, 4}, rng);
  TensorD lhs = ab.adjoint(y);
  TensorD rhs = b.adjoint(a.adjoint(y));
  CHECK((lhs.flat() - rhs.flat()).norm() < 1e-13 * rhs.flat().norm());
}

TEST_CASE("three-deep composition matches the dense product oracle") {
  Op a = make_inpainting_mask<double>({2, 4}, 0.3, 31);
  Op b = make_block_transform<double>({2, 4}, 2, 32);
  Op c = make_inpainting_mask<double>({2, 4}, 0.2, 33);
  Op abc = compose(compose(Op(a), Op(b)), Op(c));
  auto da = oracles::assemble_dense([&](const TensorD& v) { return a.apply(v); }, {2, 4});
  auto db = oracles::assemble_dense([&](const TensorD& v) { return b.apply(v); }, {2, 4});
  auto dc = oracles::assemble_dense([&](const TensorD& v) { return c.apply(v); }, {2, 4});
  auto dabc = oracles::assemble_dense([&](const TensorD& v) { return abc.apply(v); }, {2, 4});
  CHECK((dabc - da * db * dc).norm() < 1e-13 * dabc.norm());
  CHECK_THROWS_AS(compose(Op::identity({3, 3}), Op::identity({2, 2})), ShapeError);
}

TEST_CASE("inpainting mask: degenerate, concentration, idempotence, seeding") {
  Op none = make_inpainting_mask<double>({10}, 0.0, 5);
  auto rng = make_rng(17);
  TensorD x = oracles::rand_tensor({10}, rng);
  CHECK((none.apply(x).flat() - x.flat()).norm() == 0.0);

  Op half = make_inpainting_mask<double>({10000}, 0.5, 123);
  const double zeros = 10000.0 - half.payload().flat().sum();
  CHECK(zeros / 10000.0 == doctest::Approx(0.5).epsilon(0.04));

  TensorD big = oracles::rand_tensor({10000}, rng);
  TensorD once = half.apply(big);
  TensorD twice = half.apply(once);
  CHECK((once.flat() - twice.flat()).norm() == 0.0);

  Op other_seed = make_inpainting_mask<double>({10000}, 0.5, 124);
  CHECK((other_seed.payload().flat() - half.payload().flat()).norm() > 0.0);

  CHECK_THROWS_AS(make_inpainting_mask<double>({4}, 1.0, 0), std::invalid_argument);
  CHECK_THROWS_AS(make_inpainting_mask<double>({4}, -0.1, 0), std::invalid_argument);
}

TEST_CASE("block transform: seeding and divisibility") {
  auto rng = make_rng(9);
  TensorD x = oracles::rand_tensor({8, 8}, rng);
  Op b1 = make_block_transform<double>({8, 8}, 4, 1);
  Op b2 = make_block_transform<double>({8, 8}, 4, 2);
  CHECK((b1.apply(x).flat() - b2.apply(x).flat()).norm() > 0.0);
  Op b1_again = make_block_transform<double>({8, 8}, 4, 1);
  CHECK((b1.apply(x).flat() - b1_again.apply(x).flat()).norm() == 0.0);
  CHECK_THROWS_AS(make_block_transform<double>({6, 6}, 4, 1), ShapeError);
}

TEST_CASE("alpha blend degeneracies and dense oracle at alpha=0.5") {
  Op mask = make_inpainting_mask<double>({2, 4, 4}, 0.4, 51);
  Op block = make_block_transform<double>({2, 4, 4}, 4, 52);
  auto rng = make_rng(53);
  TensorD x = oracles::rand_tensor({2, 4, 4}, rng);

  Op at0 = make_alpha_blend(Op(mask), Op(block), 0.0);
  Op at1 = make_alpha_blend(Op(mask), Op(block), 1.0);
  CHECK((at0.apply(x).flat() - mask.apply(x).flat()).norm() == 0.0);
  CHECK((at1.apply(x).flat() - block.apply(x).flat()).norm() == 0.0);

  Op mid = make_alpha_blend(Op(mask), Op(block), 0.5);
  auto dm = oracles::assemble_dense([&](const TensorD& v) { return mask.apply(v); }, {2, 4, 4});
  auto db = oracles::assemble_dense([&](const TensorD& v) { return block.apply(v); }, {2, 4, 4});
  Eigen::VectorXd want = (0.5 * dm + 0.5 * db) * x.flat();
  CHECK((mid.apply(x).flat() - want).norm() < 1e-12 * want.norm());

  CHECK_THROWS_AS(make_alpha_blend(Op(mask), Op(block), 1.5), std::invalid_argument);
}

TEST_CASE("blend is affine in alpha") {
  Op mask = make_inpainting_mask<double>({3, 4, 4}, 0.25, 61);
  Op block = make_block_transform<double>({3, 4, 4}, 2, 62);
  auto rng = make_rng(63);
  TensorD x = oracles::rand_tensor({3, 4, 4}, rng);
  TensorD y0 = make_alpha_blend(Op(mask), Op(block), 0.0).apply(x);
  TensorD y1 = make_alpha_blend(Op(mask), Op(block), 1.0).apply(x);
  for (double alpha : {0.2, 0.35, 0.75}) {
    TensorD ya = make_alpha_blend(Op(mask), Op(block), alpha).apply(x);
    Eigen::VectorXd want = (1 - alpha) * y0.flat() + alpha * y1.flat();
    CHECK((ya.flat() - want).norm() <= 1e-12 * (want.norm() + 1.0));
  }
}

TEST_CASE("spectral_norm_sq: identity, diagonal, dense eigen oracle") {
  Op id = Op::identity({4});
  CHECK(spectral_norm_sq(id, 50, 1) == doctest::Approx(1.0).epsilon(1e-8));

  Op diag = Op::diagonal_mask(TensorD::from_list({2}, {3, 1}));
  CHECK(spectral_norm_sq(diag, 200, 2) == doctest::Approx(9.0).epsilon(1e-6));

  auto rng = make_rng(77);
  Eigen::MatrixXd a(6, 6);
  std::normal_distribution<double> gauss;
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) a(i, j) = gauss(rng);
  DenseOp op{a, {6}};
  const double estimate = spectral_norm_sq(op, 500, 3);
  // oracle: 10k power iterations on the explicitly assembled AᵀA
  Eigen::MatrixXd ata = a.transpose() * a;
  Eigen::VectorXd v = Eigen::VectorXd::Ones(6).normalized();
  for (int k = 0; k < 10000; ++k) v = (ata * v).normalized();
  const double oracle = v.dot(ata * v);
  CHECK(estimate == doctest::Approx(oracle).epsilon(1e-8));

  Op zero = Op::diagonal_mask(TensorD({5}));
  CHECK(spectral_norm_sq(zero, 10, 4) == 0.0);
}
