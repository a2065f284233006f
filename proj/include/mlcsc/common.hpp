#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace mlcsc {

/// Shape/precondition violations on tensor and operator arguments.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed files: bad magic bytes, truncated payloads, unsupported headers.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values where finite ones are required (divergence, bad data).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// splitmix64 step; used to derive independent stream seeds from one master
/// seed so that sub-tasks (grid points, per-example operators) stay
/// reproducible regardless of evaluation order.
inline std::uint64_t split_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::mt19937_64 make_rng(std::uint64_t seed) { return std::mt19937_64(seed); }

/// Scalar used by the CLI and experiment drivers. Double is the default and
/// the only precision verification runs accept; float is available behind
/// the MLCSC_SINGLE_PRECISION build switch for large training runs.
#ifdef MLCSC_SINGLE_PRECISION
using real_t = float;
#else
using real_t = double;
#endif

}  // namespace mlcsc
