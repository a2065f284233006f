#pragma once

#include <Eigen/Dense>

#include <cmath>

#include "mlcsc/conv.hpp"
#include "mlcsc/linop.hpp"
#include "mlcsc/tensor.hpp"

namespace mlcsc {

/// Per-frame 2x3 orthographic projections with orthonormal rows, plus the
/// world point the rotation axis passes through. Observations and
/// trajectories are expressed relative to that center, which keeps the
/// measurement purely linear.
template <typename Scalar>
struct CameraSequence {
  Tensor<Scalar> matrices;  // (F, 2, 3)
  Eigen::Matrix<Scalar, 3, 1> center = Eigen::Matrix<Scalar, 3, 1>::Zero();
  Scalar fps = Scalar(30);

  Index frames() const { return matrices.extent(0); }
};

/// Orthographic camera orbiting the vertical (+y) axis through `center` at
/// `rate_rad_per_s`. Frame f uses a right-handed rotation by θ = f·rate/fps,
/// so θ=0 projects (x,y,z)->(x,y) and θ=π/2 maps +z to +x, i.e. projects
/// (x,y,z)->(z,y).
template <typename Scalar>
CameraSequence<Scalar> make_orbit_cameras(Index frames, Scalar rate_rad_per_s,
                                          Scalar fps,
                                          const Eigen::Matrix<Scalar, 3, 1>& center) {
  if (frames < 1) throw std::invalid_argument("make_orbit_cameras: frames must be >= 1");
  if (!(fps > Scalar(0))) throw std::invalid_argument("make_orbit_cameras: fps must be > 0");
  Tensor<Scalar> mats({frames, 2, 3});
  for (Index f = 0; f < frames; ++f) {
    const Scalar theta = Scalar(f) * rate_rad_per_s / fps;
    const Scalar c = std::cos(theta), s = std::sin(theta);
    // rows of P·R_y(θ) with P dropping the third coordinate
    mats(f, 0, 0) = c;
    mats(f, 0, 1) = Scalar(0);
    mats(f, 0, 2) = s;
    mats(f, 1, 0) = Scalar(0);
    mats(f, 1, 1) = Scalar(1);
    mats(f, 1, 2) = Scalar(0);
  }
  return CameraSequence<Scalar>{std::move(mats), center, fps};
}

/// Block-diagonal measurement stacking the per-frame projections: maps a
/// (3,F) center-relative trajectory to (2,F) observations framewise.
template <typename Scalar>
LinearOperator<Scalar> build_traj_operator(const CameraSequence<Scalar>& cams) {
  return LinearOperator<Scalar>::camera_stack(cams.matrices);
}

/// Mᵀy: back-projects 2D observations framewise with the camera transposes,
/// producing the (3,F) temporal signal fed to truncated (feed-forward)
/// inference.
template <typename Scalar>
Tensor<Scalar> backproject_input(const CameraSequence<Scalar>& cams, const Tensor<Scalar>& y) {
  require_shape(y.shape(), Shape{2, cams.frames()}, "backproject_input");
  return build_traj_operator(cams).adjoint(y);
}

/// Planted ground truth z = D·x for trajectory oracles; convolutions run in
/// time, the 3 output channels are the spatial coordinates.
template <typename Scalar>
Tensor<Scalar> synth_trajectories(const ConvDictionary<Scalar>& dict, const Tensor<Scalar>& codes) {
  if (!dict.is_1d())
    throw ShapeError("synth_trajectories: dictionary must hold temporal (1-D) filters");
  if (dict.out_channels() != 3)
    throw ShapeError("synth_trajectories: dictionary must synthesize 3 channels");
  return conv_synthesis(dict, codes);
}

}  // namespace mlcsc
