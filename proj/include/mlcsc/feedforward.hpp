#pragma once

#include "mlcsc/solver.hpp"

namespace mlcsc {

/// The layered ReLU network that one truncated sweep of the solver collapses
/// to: cᵢ = ReLU((αᵢ·Dᵢᵀc_{i−1} − bᵢ)/Lᵢ) with c₀ = Mᵀy. Written as a plain
/// forward cascade, independent of the sweep machinery; with T = 1 the two
/// agree bit for bit.
template <typename Scalar>
SolverState<Scalar> feed_forward(const ModelParams<Scalar>& params, const Tensor<Scalar>& y) {
  params.validate();
  SolverState<Scalar> state = zero_state(params, y.shape());
  Tensor<Scalar> c = params.measurement ? params.measurement->adjoint(y) : y;
  for (int i = 0; i < params.num_layers(); ++i) {
    const std::size_t li = static_cast<std::size_t>(i);
    Tensor<Scalar> u = conv_analysis(params.dicts[li], c);
    u *= params.layer_weights[li];
    const Index channels = u.extent(0);
    const Index per = u.size() / channels;
    const Scalar step = state.step_scale * params.step_sizes[li];
    Tensor<Scalar> x(u.shape());
    for (Index ch = 0; ch < channels; ++ch) {
      const Scalar b = params.biases[li][ch];
      for (Index e = ch * per; e < (ch + 1) * per; ++e) {
        const Scalar v = (u[e] - b) / step;
        x[e] = v > Scalar(0) ? v : Scalar(0);
      }
    }
    state.codes[li] = x;
    c = std::move(x);
  }
  return state;
}

}  // namespace mlcsc
