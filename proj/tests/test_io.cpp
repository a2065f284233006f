#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "mlcsc/io.hpp"
#include "mlcsc/jpeg.hpp"
#include "mlcsc/trajectory.hpp"
#include "oracles.hpp"

using namespace mlcsc;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("mlcsc_io_test_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("MLCT tensor round trip is bit-identical") {
  TempDir tmp;
  auto rng = make_rng(1);
  TensorD t = oracles::rand_tensor({3, 5, 7}, rng);
  const fs::path p = tmp.path / "t.mlct";
  io::write_tensor(p, t);
  TensorD back = io::read_tensor(p);
  CHECK(back.shape() == t.shape());
  CHECK(std::memcmp(back.data(), t.data(), sizeof(double) * t.size()) == 0);
}

TEST_CASE("MLCT malformed inputs are distinct format errors") {
  TempDir tmp;
  auto rng = make_rng(2);
  TensorD t = oracles::rand_tensor({4, 4}, rng);
  std::vector<char> bytes = io::encode_tensor(t);

  // truncated payload
  CHECK_THROWS_WITH_AS(io::decode_tensor(bytes.data(), bytes.size() - 8),
                       doctest::Contains("payload"), FormatError);
  // bad magic
  std::vector<char> bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_WITH_AS(io::decode_tensor(bad.data(), bad.size()), doctest::Contains("magic"),
                       FormatError);
  // ndim 0 marks a container
  std::vector<char> cont = bytes;
  cont[4] = cont[5] = cont[6] = cont[7] = 0;
  CHECK_THROWS_AS(io::decode_tensor(cont.data(), cont.size()), FormatError);
}

TEST_CASE("PPM/PGM round trips and rejections") {
  TempDir tmp;
  // 8-bit-representable values survive exactly through the /255 mapping
  TensorD img({3, 4, 6});
  auto rng = make_rng(3);
  std::uniform_int_distribution<int> byte(0, 255);
  for (Index e = 0; e < img.size(); ++e) img[e] = byte(rng) / 255.0;
  const fs::path p = tmp.path / "img.ppm";
  io::write_ppm(p, img);
  TensorD back = io::read_ppm(p);
  CHECK((back.flat() - img.flat()).cwiseAbs().maxCoeff() == 0.0);

  TensorD gray({5, 5});
  for (Index e = 0; e < gray.size(); ++e) gray[e] = byte(rng) / 255.0;
  const fs::path pg = tmp.path / "img.pgm";
  io::write_pgm(pg, gray);
  CHECK((io::read_pgm(pg).flat() - gray.flat()).cwiseAbs().maxCoeff() == 0.0);

  // maxval other than 255 is rejected
  {
    std::ofstream out(tmp.path / "bad.pgm", std::ios::binary);
    out << "P5\n2 2\n65535\n";
    out.write("\0\0\0\0\0\0\0\0", 8);
  }
  CHECK_THROWS_WITH_AS(io::read_pgm(tmp.path / "bad.pgm"), doctest::Contains("maxval"),
                       FormatError);

  // truncated pixel payload
  {
    std::ofstream out(tmp.path / "short.ppm", std::ios::binary);
    out << "P6\n4 4\n255\n";
    out.write("\1\2\3", 3);
  }
  CHECK_THROWS_WITH_AS(io::read_ppm(tmp.path / "short.ppm"), doctest::Contains("truncated"),
                       FormatError);
}

TEST_CASE("operator serialization round trips every kind") {
  TempDir tmp;
  auto rng = make_rng(4);
  using Op = LinearOperator<double>;

  std::vector<Op> ops;
  ops.push_back(Op::identity({3, 8, 8}));
  ops.push_back(make_inpainting_mask<double>({3, 8, 8}, 0.3, 41));
  ops.push_back(make_block_transform<double>({3, 8, 8}, 4, 42));
  ops.push_back(make_alpha_blend(Op(ops[1]), Op(ops[2]), 0.4));
  ops.push_back(compose(Op(ops[2]), Op(ops[1])));
  {
    TensorD img({3, 16, 16});
    for (Index e = 0; e < img.size(); ++e) img[e] = 0.5 + 0.4 * std::sin(0.3 * e);
    auto [jop, y] = build_jpeg_operator(img, 20);
    ops.push_back(std::move(jop));
  }
  ops.push_back(build_traj_operator(
      make_orbit_cameras<double>(20, 3.14159, 30.0, Eigen::Vector3d::Zero())));

  int idx = 0;
  for (const Op& op : ops) {
    const fs::path p = tmp.path / ("op" + std::to_string(idx++) + ".mlco");
    io::write_operator(p, op);
    Op back = io::read_operator(p);
    CHECK(back.kind() == op.kind());
    CHECK(back.in_shape() == op.in_shape());
    CHECK(back.out_shape() == op.out_shape());
    TensorD x = oracles::rand_tensor(op.in_shape(), rng);
    TensorD want = op.apply(x);
    TensorD got = back.apply(x);
    CHECK(std::memcmp(want.data(), got.data(), sizeof(double) * want.size()) == 0);
    TensorD yv = oracles::rand_tensor(op.out_shape(), rng);
    CHECK((back.adjoint(yv).flat() - op.adjoint(yv).flat()).norm() == 0.0);
  }

  // reading an operator file as a tensor fails loudly, and vice versa
  io::write_operator(tmp.path / "op.mlco", ops[1]);
  CHECK_THROWS_AS(io::read_tensor(tmp.path / "op.mlco"), FormatError);
  io::write_tensor(tmp.path / "t.mlct", TensorD({2, 2}));
  CHECK_THROWS_AS(io::read_operator(tmp.path / "t.mlct"), FormatError);
}

TEST_CASE("model checkpoint round trip") {
  TempDir tmp;
  auto rng = make_rng(5);
  ModelParams<double> p;
  p.dicts.emplace_back(oracles::rand_tensor({1, 4, 5}, rng));
  p.dicts.emplace_back(oracles::rand_tensor({4, 3, 3}, rng));
  p.biases.push_back(Eigen::VectorXd::Constant(4, 0.01));
  p.biases.push_back(Eigen::VectorXd::Constant(3, 0.005));
  p.step_sizes = {1.7320508075688772, 2.23606797749979};
  p.extrapolation = {0.0, 0.3333333333333333};
  p.layer_weights = {1.0, 0.5};
  p.sweeps = 7;

  io::save_model(tmp.path / "model", p);
  ModelParams<double> back = io::load_model(tmp.path / "model");
  CHECK(back.num_layers() == 2);
  CHECK(back.sweeps == 7);
  for (int i = 0; i < 2; ++i) {
    CHECK(back.step_sizes[i] == p.step_sizes[i]);
    CHECK(back.extrapolation[i] == p.extrapolation[i]);
    CHECK(back.layer_weights[i] == p.layer_weights[i]);
    CHECK((back.dicts[i].filters().flat() - p.dicts[i].filters().flat()).norm() == 0.0);
    CHECK((back.biases[i] - p.biases[i]).norm() == 0.0);
  }
}

TEST_CASE("format_double round trips exactly") {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, 12345.6789, -2.2250738585072014e-308}) {
    CHECK(io::parse_double(io::format_double(v)) == v);
  }
}
