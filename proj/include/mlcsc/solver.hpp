#pragma once

#include <Eigen/Core>

#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "mlcsc/conv.hpp"
#include "mlcsc/linop.hpp"
#include "mlcsc/tensor.hpp"

namespace mlcsc {

/// All per-model quantities: learnable {D_i, b_i, L_i, w_i} plus the fixed
/// layer weights, sweep count, and the problem's measurement operator.
/// `measurement == nullptr` means identity (signal space observed directly).
template <typename Scalar>
struct ModelParams {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  std::vector<ConvDictionary<Scalar>> dicts;  // D_1..D_N
  std::vector<Vector> biases;                 // per-channel, length K_in of D_i
  std::vector<Scalar> step_sizes;             // L_i > 0
  std::vector<Scalar> extrapolation;          // w_i in [0, 0.99]
  std::vector<Scalar> layer_weights;          // alpha_i > 0 (fixed)
  int sweeps = 1;                             // T
  std::shared_ptr<const LinearOperator<Scalar>> measurement;

  int num_layers() const { return static_cast<int>(dicts.size()); }

  void validate() const {
    const int n = num_layers();
    if (n == 0) throw std::invalid_argument("ModelParams: no layers");
    if (static_cast<int>(biases.size()) != n || static_cast<int>(step_sizes.size()) != n ||
        static_cast<int>(extrapolation.size()) != n ||
        static_cast<int>(layer_weights.size()) != n)
      throw std::invalid_argument("ModelParams: per-layer field count mismatch");
    if (sweeps < 1) throw std::invalid_argument("ModelParams: sweep count must be >= 1");
    for (int i = 0; i < n; ++i) {
      if (i + 1 < n && dicts[i].in_channels() != dicts[i + 1].out_channels())
        throw ShapeError("ModelParams: channel chain broken between layers " +
                         std::to_string(i + 1) + " and " + std::to_string(i + 2));
      if (biases[i].size() != dicts[i].in_channels())
        throw ShapeError("ModelParams: bias length mismatch at layer " + std::to_string(i + 1));
      if (biases[i].minCoeff() < Scalar(0))
        throw std::invalid_argument("ModelParams: negative bias");
      if (!(step_sizes[i] > Scalar(0)))
        throw std::invalid_argument("ModelParams: non-positive step size");
      if (!(extrapolation[i] >= Scalar(0) && extrapolation[i] <= Scalar(0.99)))
        throw std::invalid_argument("ModelParams: extrapolation weight outside [0,0.99]");
      if (!(layer_weights[i] > Scalar(0)))
        throw std::invalid_argument("ModelParams: non-positive layer weight");
    }
  }

  /// Shape of the clean signal z.
  Shape signal_shape(const Shape& y_shape) const {
    return measurement ? measurement->in_shape() : y_shape;
  }

  /// Shapes of the per-layer codes for a given measurement shape.
  std::vector<Shape> code_shapes(const Shape& y_shape) const {
    std::vector<Shape> out;
    Shape s = signal_shape(y_shape);
    for (const auto& d : dicts) {
      s = d.code_shape(s);
      out.push_back(s);
    }
    return out;
  }
};

/// Per-layer iterates: current codes x_i^[t] and previous x_i^[t-1]. The
/// extrapolated point is always derived on the fly. step_scale/restarts
/// record the divergence guard's outcome for a run.
template <typename Scalar>
struct SolverState {
  std::vector<Tensor<Scalar>> codes;
  std::vector<Tensor<Scalar>> codes_prev;
  Scalar step_scale = Scalar(1);
  int restarts = 0;
};

template <typename Scalar>
SolverState<Scalar> zero_state(const ModelParams<Scalar>& params, const Shape& y_shape) {
  SolverState<Scalar> st;
  for (const Shape& s : params.code_shapes(y_shape)) {
    st.codes.emplace_back(s);
    st.codes_prev.emplace_back(s);
  }
  return st;
}

namespace detail {

template <typename Scalar>
Tensor<Scalar> measure(const ModelParams<Scalar>& p, const Tensor<Scalar>& z) {
  return p.measurement ? p.measurement->apply(z) : z;
}

template <typename Scalar>
Tensor<Scalar> measure_adjoint(const ModelParams<Scalar>& p, const Tensor<Scalar>& r) {
  return p.measurement ? p.measurement->adjoint(r) : r;
}

// Smooth-part block gradient at an arbitrary evaluation point, with explicit
// neighbor codes (Gauss-Seidel staging is the caller's concern).
template <typename Scalar>
Tensor<Scalar> block_gradient_at(const ModelParams<Scalar>& p, const Tensor<Scalar>& eval_point,
                                 const Tensor<Scalar>* below,  // x_{i-1}, or y for i=0
                                 const Tensor<Scalar>* above,  // x_{i+1}, null at top
                                 int i) {
  const Scalar alpha = p.layer_weights[static_cast<std::size_t>(i)];
  Tensor<Scalar> g;
  if (i == 0) {
    Tensor<Scalar> r = measure(p, conv_synthesis(p.dicts[0], eval_point));
    r -= *below;  // below == y for the first layer
    g = conv_analysis(p.dicts[0], measure_adjoint(p, r));
    g *= alpha;
  } else {
    Tensor<Scalar> r = conv_synthesis(p.dicts[static_cast<std::size_t>(i)], eval_point);
    r -= *below;
    g = conv_analysis(p.dicts[static_cast<std::size_t>(i)], r);
    g *= alpha;
  }
  if (above) {
    const Scalar alpha_up = p.layer_weights[static_cast<std::size_t>(i) + 1];
    Tensor<Scalar> coupling = eval_point;
    coupling -= conv_synthesis(p.dicts[static_cast<std::size_t>(i) + 1], *above);
    coupling *= alpha_up;
    g += coupling;
  }
  return g;
}

// x_i + w_i(x_i - x_i_prev)
template <typename Scalar>
Tensor<Scalar> extrapolate(const Tensor<Scalar>& x, const Tensor<Scalar>& x_prev, Scalar w) {
  Tensor<Scalar> out(x.shape());
  out.flat() = x.flat() + w * (x.flat() - x_prev.flat());
  return out;
}

// relu(xhat - (g + b)/L) with per-channel bias broadcast.
template <typename Scalar>
Tensor<Scalar> prox_step(const Tensor<Scalar>& xhat, const Tensor<Scalar>& g,
                         const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& bias, Scalar step) {
  Tensor<Scalar> out(xhat.shape());
  const Index channels = xhat.extent(0);
  const Index per = xhat.size() / channels;
  const Scalar* xh = xhat.data();
  const Scalar* gp = g.data();
  Scalar* dst = out.data();
  for (Index c = 0; c < channels; ++c) {
    const Scalar b = bias[c];
    for (Index e = c * per; e < (c + 1) * per; ++e) {
      const Scalar v = xh[e] - (gp[e] + b) / step;
      dst[e] = v > Scalar(0) ? v : Scalar(0);
    }
  }
  return out;
}

}  // namespace detail

/// Σᵢ (αᵢ/2)‖x_{i−1} − Dᵢxᵢ‖² and Σᵢ ‖bᵢ∘xᵢ‖₁ for explicit codes, with the
/// measurement folded into the first layer. Returned as (smooth, l1).
template <typename Scalar>
std::pair<Scalar, Scalar> objective_parts(const ModelParams<Scalar>& params,
                                          const std::vector<Tensor<Scalar>>& codes,
                                          const Tensor<Scalar>& y) {
  const int n = params.num_layers();
  if (static_cast<int>(codes.size()) != n)
    throw ShapeError("objective_parts: wrong number of code tensors");
  Scalar smooth = 0, l1 = 0;
  for (int i = 0; i < n; ++i) {
    Tensor<Scalar> r = conv_synthesis(params.dicts[static_cast<std::size_t>(i)],
                                      codes[static_cast<std::size_t>(i)]);
    if (i == 0) r = detail::measure(params, r);
    r -= (i == 0) ? y : codes[static_cast<std::size_t>(i) - 1];
    smooth += Scalar(0.5) * params.layer_weights[static_cast<std::size_t>(i)] *
              r.flat().squaredNorm();
    const auto& x = codes[static_cast<std::size_t>(i)];
    const Index per = x.size() / x.extent(0);
    for (Index c = 0; c < x.extent(0); ++c)
      l1 += params.biases[static_cast<std::size_t>(i)][c] *
            x.flat().segment(c * per, per).cwiseAbs().sum();
  }
  return {smooth, l1};
}

/// Full objective value (Eq. smooth data couplings + weighted ℓ1) at the
/// state's current codes.
template <typename Scalar>
Scalar objective_value(const ModelParams<Scalar>& params, const SolverState<Scalar>& state,
                       const Tensor<Scalar>& y) {
  auto [smooth, l1] = objective_parts(params, state.codes, y);
  return smooth + l1;
}

/// Gradient of the smooth objective part w.r.t. block i (0-based), evaluated
/// at the extrapolated point x̂ᵢ derived from the state. Neighbor codes are
/// taken from the state as-is, so mid-sweep staging follows whatever the
/// caller has already written back.
template <typename Scalar>
Tensor<Scalar> block_gradient(const ModelParams<Scalar>& params, const SolverState<Scalar>& state,
                              int layer_index, const Tensor<Scalar>& y) {
  const int n = params.num_layers();
  if (layer_index < 0 || layer_index >= n)
    throw std::invalid_argument("block_gradient: layer index out of range");
  const std::size_t i = static_cast<std::size_t>(layer_index);
  Tensor<Scalar> xhat =
      detail::extrapolate(state.codes[i], state.codes_prev[i], params.extrapolation[i]);
  const Tensor<Scalar>* below = layer_index == 0 ? &y : &state.codes[i - 1];
  const Tensor<Scalar>* above = layer_index + 1 < n ? &state.codes[i + 1] : nullptr;
  return detail::block_gradient_at(params, xhat, below, above, layer_index);
}

/// Per-sweep intermediates of a full inference run, recorded for exact
/// reverse-mode differentiation. x_hist[t+1][i] holds x_i^[t] with
/// x^[-1] = x^[0] = 0; ghat[t-1][i] holds the block gradient of sweep t.
template <typename Scalar>
struct UnrollTrace {
  std::vector<std::vector<Tensor<Scalar>>> x_hist;
  std::vector<std::vector<Tensor<Scalar>>> ghat;
  Scalar step_scale = Scalar(1);
  int restarts = 0;

  void clear() {
    x_hist.clear();
    ghat.clear();
  }
};

namespace detail {

template <typename Scalar>
void sweep_update_rec(const ModelParams<Scalar>& params, SolverState<Scalar>& state,
                      const Tensor<Scalar>& y, std::vector<Tensor<Scalar>>* ghat_out) {
  const int n = params.num_layers();
  for (int li = 0; li < n; ++li) {
    const std::size_t i = static_cast<std::size_t>(li);
    Tensor<Scalar> xhat =
        extrapolate(state.codes[i], state.codes_prev[i], params.extrapolation[i]);
    const Tensor<Scalar>* below = li == 0 ? &y : &state.codes[i - 1];
    const Tensor<Scalar>* above = li + 1 < n ? &state.codes[i + 1] : nullptr;
    Tensor<Scalar> g = block_gradient_at(params, xhat, below, above, li);
    if (!g.all_finite())
      throw NumericError("sweep_update: non-finite gradient at layer " + std::to_string(li + 1));
    Tensor<Scalar> xnew =
        prox_step(xhat, g, params.biases[i], state.step_scale * params.step_sizes[i]);
    state.codes_prev[i] = std::move(state.codes[i]);
    state.codes[i] = std::move(xnew);
    if (ghat_out) ghat_out->push_back(std::move(g));
  }
}

}  // namespace detail

/// One Gauss-Seidel sweep i = 1..N of extrapolated proximal block updates:
/// xᵢ ← ReLU(x̂ᵢ − (ĝᵢ + bᵢ)/Lᵢ). Throws NumericError on a non-finite
/// gradient (the signature of a divergent step size).
template <typename Scalar>
void sweep_update(const ModelParams<Scalar>& params, SolverState<Scalar>& state,
                  const Tensor<Scalar>& y) {
  detail::sweep_update_rec<Scalar>(params, state, y, nullptr);
}

namespace detail {

// Divergence guard bookkeeping shared by infer() and the unrolled recorder:
// every 5 sweeps compare the objective against the previous sample; a blow-up
// beyond 10x (or a non-finite value) asks for a restart with halved steps.
inline constexpr int kGuardStride = 5;
inline constexpr int kMaxRestarts = 6;

template <typename Scalar>
bool guard_trips(Scalar current, Scalar previous) {
  if (!std::isfinite(static_cast<double>(current))) return true;
  return current > Scalar(10) * previous;
}

}  // namespace detail

/// Runs T sweeps from zero initialization (extrapolation inert on the first
/// sweep). If the objective blows up mid-run — learned step sizes can be
/// invalid mid-training — the run restarts from zero with all effective
/// steps halved, up to a small retry budget. With a trace attached, every
/// intermediate of the final (successful) attempt is recorded.
template <typename Scalar>
SolverState<Scalar> run_inference(const ModelParams<Scalar>& params, const Tensor<Scalar>& y,
                                  UnrollTrace<Scalar>* trace) {
  params.validate();
  const int n = params.num_layers();
  Scalar step_scale = Scalar(1);
  for (int attempt = 0;; ++attempt) {
    SolverState<Scalar> state = zero_state(params, y.shape());
    state.step_scale = step_scale;
    state.restarts = attempt;
    if (trace) {
      trace->clear();
      trace->step_scale = step_scale;
      trace->restarts = attempt;
      trace->x_hist.push_back(state.codes);  // x^[-1] = 0
      trace->x_hist.push_back(state.codes);  // x^[0] = 0
    }
    bool tripped = false;
    Scalar guard_prev = std::numeric_limits<Scalar>::max();
    try {
      for (int t = 1; t <= params.sweeps; ++t) {
        std::vector<Tensor<Scalar>>* ghat_row = nullptr;
        if (trace) {
          trace->ghat.emplace_back();
          trace->ghat.back().reserve(static_cast<std::size_t>(n));
          ghat_row = &trace->ghat.back();
        }
        try {
          detail::sweep_update_rec(params, state, y, ghat_row);
        } catch (const NumericError& e) {
          if (attempt >= detail::kMaxRestarts)
            throw NumericError(std::string(e.what()) + " (sweep " + std::to_string(t) + ")");
          throw;
        }
        if (trace) trace->x_hist.push_back(state.codes);
        if (t % detail::kGuardStride == 0 && t < params.sweeps) {
          const Scalar obj = objective_value(params, state, y);
          if (detail::guard_trips(obj, guard_prev)) {
            tripped = true;
            break;
          }
          guard_prev = obj;
        }
      }
    } catch (const NumericError&) {
      if (attempt >= detail::kMaxRestarts) throw;
      tripped = true;
    }
    if (!tripped) return state;
    if (attempt >= detail::kMaxRestarts)
      throw NumericError("infer: objective diverged despite step halving");
    step_scale *= Scalar(2);  // halves every 1/L_i
  }
}

template <typename Scalar>
SolverState<Scalar> infer(const ModelParams<Scalar>& params, const Tensor<Scalar>& y) {
  return run_inference<Scalar>(params, y, nullptr);
}

/// Prediction cascade ẑ = D₁ReLU(D₂ReLU(…D_N ReLU(x_N)…)) from the top code.
template <typename Scalar>
Tensor<Scalar> predict(const ModelParams<Scalar>& params, const SolverState<Scalar>& state) {
  const int n = params.num_layers();
  Tensor<Scalar> c = relu(state.codes[static_cast<std::size_t>(n - 1)]);
  for (int i = n - 1; i >= 1; --i)
    c = relu(conv_synthesis(params.dicts[static_cast<std::size_t>(i)], c));
  return conv_synthesis(params.dicts[0], c);
}

/// Complementary-slackness diagnostic of the non-negative ℓ1 subproblems:
/// per layer, ‖min(xᵢ, ĝᵢ + bᵢ)‖ / (1 + ‖xᵢ‖) with the gradient taken at xᵢ
/// itself. Near zero at a fixed point.
template <typename Scalar>
std::vector<Scalar> kkt_residuals(const ModelParams<Scalar>& params,
                                  const SolverState<Scalar>& state, const Tensor<Scalar>& y) {
  const int n = params.num_layers();
  std::vector<Scalar> out;
  for (int li = 0; li < n; ++li) {
    const std::size_t i = static_cast<std::size_t>(li);
    const Tensor<Scalar>* below = li == 0 ? &y : &state.codes[i - 1];
    const Tensor<Scalar>* above = li + 1 < n ? &state.codes[i + 1] : nullptr;
    Tensor<Scalar> g = detail::block_gradient_at(params, state.codes[i], below, above, li);
    const Index channels = state.codes[i].extent(0);
    const Index per = state.codes[i].size() / channels;
    Scalar sq = 0;
    for (Index c = 0; c < channels; ++c) {
      const Scalar b = params.biases[i][c];
      for (Index e = c * per; e < (c + 1) * per; ++e) {
        const Scalar r = std::min(state.codes[i][e], g[e] + b);
        sq += r * r;
      }
    }
    out.push_back(std::sqrt(sq) / (Scalar(1) + state.codes[i].flat().norm()));
  }
  return out;
}

namespace detail {

// Dictionary viewed as a linear operator on a fixed code shape, for power
// iteration.
template <typename Scalar>
struct DictOperator {
  using scalar_type = Scalar;
  const ConvDictionary<Scalar>* dict;
  Shape code_shape;
  const Shape& in_shape() const { return code_shape; }
  Tensor<Scalar> apply(const Tensor<Scalar>& x) const { return conv_synthesis(*dict, x); }
  Tensor<Scalar> adjoint(const Tensor<Scalar>& s) const { return conv_analysis(*dict, s); }
};

// M·D_1 as one operator.
template <typename Scalar>
struct MeasuredDictOperator {
  using scalar_type = Scalar;
  const ConvDictionary<Scalar>* dict;
  const LinearOperator<Scalar>* m;  // may be null
  Shape code_shape;
  const Shape& in_shape() const { return code_shape; }
  Tensor<Scalar> apply(const Tensor<Scalar>& x) const {
    Tensor<Scalar> z = conv_synthesis(*dict, x);
    return m ? m->apply(z) : z;
  }
  Tensor<Scalar> adjoint(const Tensor<Scalar>& r) const {
    return conv_analysis(*dict, m ? m->adjoint(r) : r);
  }
};

}  // namespace detail

/// Block Lipschitz bounds of the smooth part: αᵢ‖Dᵢ‖² + α_{i+1} for i<N (with
/// ‖M·D₁‖² at the first layer), α_N‖D_N‖² at the top. Valid step sizes for
/// monotone descent with wᵢ = 0.
template <typename Scalar>
std::vector<Scalar> lipschitz_step_sizes(const ModelParams<Scalar>& params, const Shape& y_shape,
                                         int power_iters = 60, std::uint64_t seed = 0x5eed) {
  const int n = params.num_layers();
  const std::vector<Shape> shapes = params.code_shapes(y_shape);
  std::vector<Scalar> out;
  for (int i = 0; i < n; ++i) {
    double nsq;
    if (i == 0) {
      detail::MeasuredDictOperator<Scalar> op{&params.dicts[0], params.measurement.get(),
                                              shapes[0]};
      nsq = spectral_norm_sq(op, power_iters, seed);
    } else {
      detail::DictOperator<Scalar> op{&params.dicts[static_cast<std::size_t>(i)],
                                      shapes[static_cast<std::size_t>(i)]};
      nsq = spectral_norm_sq(op, power_iters, seed);
    }
    Scalar bound = params.layer_weights[static_cast<std::size_t>(i)] * static_cast<Scalar>(nsq);
    if (i + 1 < n) bound += params.layer_weights[static_cast<std::size_t>(i) + 1];
    out.push_back(bound);
  }
  return out;
}

}  // namespace mlcsc
