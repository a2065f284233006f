#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "mlcsc/solver.hpp"

namespace mlcsc {

/// Gradients of the training loss w.r.t. every learnable field of
/// ModelParams; shapes mirror the parameters exactly.
template <typename Scalar>
struct ParamGradients {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  std::vector<Tensor<Scalar>> dicts;
  std::vector<Vector> biases;
  std::vector<Scalar> step_sizes;
  std::vector<Scalar> extrapolation;

  static ParamGradients zeros_like(const ModelParams<Scalar>& p) {
    ParamGradients g;
    for (const auto& d : p.dicts) g.dicts.emplace_back(d.filters().shape());
    for (const auto& b : p.biases) g.biases.push_back(Vector::Zero(b.size()));
    g.step_sizes.assign(p.step_sizes.size(), Scalar(0));
    g.extrapolation.assign(p.extrapolation.size(), Scalar(0));
    return g;
  }

  void add_scaled(const ParamGradients& o, Scalar s) {
    for (std::size_t i = 0; i < dicts.size(); ++i) {
      dicts[i].flat() += s * o.dicts[i].flat();
      biases[i] += s * o.biases[i];
      step_sizes[i] += s * o.step_sizes[i];
      extrapolation[i] += s * o.extrapolation[i];
    }
  }

  void scale(Scalar s) {
    for (std::size_t i = 0; i < dicts.size(); ++i) {
      dicts[i] *= s;
      biases[i] *= s;
      step_sizes[i] *= s;
      extrapolation[i] *= s;
    }
  }

  Scalar squared_norm() const {
    Scalar sq = 0;
    for (std::size_t i = 0; i < dicts.size(); ++i) {
      sq += dicts[i].flat().squaredNorm();
      sq += biases[i].squaredNorm();
      sq += step_sizes[i] * step_sizes[i];
      sq += extrapolation[i] * extrapolation[i];
    }
    return sq;
  }

  bool all_finite() const {
    for (std::size_t i = 0; i < dicts.size(); ++i) {
      if (!dicts[i].all_finite() || !biases[i].allFinite()) return false;
      if (!std::isfinite(static_cast<double>(step_sizes[i])) ||
          !std::isfinite(static_cast<double>(extrapolation[i])))
        return false;
    }
    return true;
  }
};

enum class LossKind { mse };

struct TrainConfig {
  double learning_rate = 0.01;
  int batch_size = 4;
  int epochs = 10;
  std::uint64_t seed = 0;
  LossKind loss = LossKind::mse;
  double clip = 10.0;     // global gradient-norm threshold; <= 0 disables
  double momentum = 0.9;  // heavy-ball coefficient; 0 gives plain SGD

  void validate() const {
    if (!(learning_rate >= 0)) throw std::invalid_argument("TrainConfig: negative learning rate");
    if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch size < 1");
    if (epochs < 0) throw std::invalid_argument("TrainConfig: negative epoch count");
    if (!(momentum >= 0 && momentum < 1))
      throw std::invalid_argument("TrainConfig: momentum outside [0,1)");
  }
};

/// Mean squared error.
template <typename Scalar>
Scalar loss_mse(const Tensor<Scalar>& prediction, const Tensor<Scalar>& target) {
  require_shape(target.shape(), prediction.shape(), "loss_mse");
  return (prediction.flat() - target.flat()).squaredNorm() / Scalar(prediction.size());
}

namespace detail {

template <typename Scalar>
Tensor<Scalar> relu_mask_mul(const Tensor<Scalar>& grad, const Tensor<Scalar>& post_relu) {
  Tensor<Scalar> out(grad.shape());
  for (Index e = 0; e < grad.size(); ++e)
    out[e] = post_relu[e] > Scalar(0) ? grad[e] : Scalar(0);
  return out;
}

}  // namespace detail

/// Exact chain rule through the T-sweep unrolled solver plus the prediction
/// cascade into the MSE loss. Runs its own recorded forward pass (identical
/// to infer, including the divergence guard) and walks it in reverse.
/// Returns the gradients together with the forward loss.
template <typename Scalar>
std::pair<ParamGradients<Scalar>, Scalar> param_gradients_unrolled(
    const ModelParams<Scalar>& params, const Tensor<Scalar>& y, const Tensor<Scalar>& target) {
  const int n = params.num_layers();
  const int T = params.sweeps;
  UnrollTrace<Scalar> trace;
  SolverState<Scalar> state = run_inference(params, y, &trace);

  // prediction cascade, keeping each post-ReLU stage
  std::vector<Tensor<Scalar>> cascade(static_cast<std::size_t>(n));
  cascade[static_cast<std::size_t>(n - 1)] = relu(state.codes[static_cast<std::size_t>(n - 1)]);
  for (int i = n - 1; i >= 1; --i)
    cascade[static_cast<std::size_t>(i - 1)] =
        relu(conv_synthesis(params.dicts[static_cast<std::size_t>(i)],
                            cascade[static_cast<std::size_t>(i)]));
  Tensor<Scalar> zhat = conv_synthesis(params.dicts[0], cascade[0]);
  require_shape(target.shape(), zhat.shape(), "param_gradients_unrolled: target");
  const Scalar loss = loss_mse(zhat, target);

  ParamGradients<Scalar> g = ParamGradients<Scalar>::zeros_like(params);
  const LinearOperator<Scalar>* m = params.measurement.get();

  // ---- backward through the cascade ----
  Tensor<Scalar> zb(zhat.shape());
  zb.flat() = (zhat.flat() - target.flat()) * (Scalar(2) / Scalar(zhat.size()));
  g.dicts[0] += conv_weight_grad(params.dicts[0], cascade[0], zb);
  Tensor<Scalar> cb = conv_analysis(params.dicts[0], zb);
  for (int i = 1; i < n; ++i) {
    const std::size_t li = static_cast<std::size_t>(i);
    Tensor<Scalar> sb = detail::relu_mask_mul(cb, cascade[li - 1]);
    g.dicts[li] += conv_weight_grad(params.dicts[li], cascade[li], sb);
    cb = conv_analysis(params.dicts[li], sb);
  }

  // adjoints of x_i^[t], aligned with trace.x_hist rows (row t+1 <-> x^[t])
  std::vector<std::vector<Tensor<Scalar>>> xb(trace.x_hist.size());
  for (std::size_t r = 0; r < xb.size(); ++r)
    for (const auto& t : trace.x_hist[r]) xb[r].emplace_back(t.shape());
  xb[static_cast<std::size_t>(T + 1)][static_cast<std::size_t>(n - 1)] =
      detail::relu_mask_mul(cb, cascade[static_cast<std::size_t>(n - 1)]);

  // ---- backward through the sweeps ----
  for (int t = T; t >= 1; --t) {
    for (int i = n - 1; i >= 0; --i) {
      const std::size_t li = static_cast<std::size_t>(i);
      const std::size_t rt = static_cast<std::size_t>(t);
      const Tensor<Scalar>& xnew = trace.x_hist[rt + 1][li];
      const Tensor<Scalar>& xnewb = xb[rt + 1][li];
      Tensor<Scalar> ub = detail::relu_mask_mul(xnewb, xnew);

      const Scalar step_eff = trace.step_scale * params.step_sizes[li];
      const Tensor<Scalar>& ghat = trace.ghat[rt - 1][li];

      // u = xhat - (ghat + b)/L_eff
      Tensor<Scalar> ghb(ub.shape());
      ghb.flat() = -ub.flat() / step_eff;
      {
        const Index channels = ub.extent(0);
        const Index per = ub.size() / channels;
        Scalar lg = 0;
        for (Index c = 0; c < channels; ++c) {
          const Scalar b = params.biases[li][c];
          Scalar usum = 0, gdot = 0;
          for (Index e = c * per; e < (c + 1) * per; ++e) {
            usum += ub[e];
            gdot += ub[e] * (ghat[e] + b);
          }
          g.biases[li][c] -= usum / step_eff;
          lg += gdot;
        }
        g.step_sizes[li] += lg * trace.step_scale / (step_eff * step_eff);
      }

      Tensor<Scalar> xhatb = ub;  // d u / d xhat = I

      // ghat backward
      const Scalar alpha = params.layer_weights[li];
      Tensor<Scalar> xhat = detail::extrapolate(trace.x_hist[rt][li], trace.x_hist[rt - 1][li],
                                                params.extrapolation[li]);
      if (i == 0) {
        Tensor<Scalar> s = conv_synthesis(params.dicts[0], xhat);
        Tensor<Scalar> r = m ? m->apply(s) : s;
        r -= y;
        Tensor<Scalar> q = m ? m->adjoint(r) : r;
        Tensor<Scalar> wg1 = conv_weight_grad(params.dicts[0], ghb, q);
        g.dicts[0].flat() += alpha * wg1.flat();
        Tensor<Scalar> qb = conv_synthesis(params.dicts[0], ghb);
        qb *= alpha;
        Tensor<Scalar> rb = m ? m->apply(qb) : qb;
        Tensor<Scalar> sbn = m ? m->adjoint(rb) : rb;
        xhatb += conv_analysis(params.dicts[0], sbn);
        g.dicts[0] += conv_weight_grad(params.dicts[0], xhat, sbn);
      } else {
        Tensor<Scalar> r = conv_synthesis(params.dicts[li], xhat);
        r -= trace.x_hist[rt + 1][li - 1];  // x_{i-1}^[t], already updated this sweep
        Tensor<Scalar> wg1 = conv_weight_grad(params.dicts[li], ghb, r);
        g.dicts[li].flat() += alpha * wg1.flat();
        Tensor<Scalar> rb = conv_synthesis(params.dicts[li], ghb);
        rb *= alpha;
        xhatb += conv_analysis(params.dicts[li], rb);
        g.dicts[li] += conv_weight_grad(params.dicts[li], xhat, rb);
        xb[rt + 1][li - 1] -= rb;
      }
      if (i + 1 < n) {
        const Scalar alpha_up = params.layer_weights[li + 1];
        xhatb.flat() += alpha_up * ghb.flat();
        Tensor<Scalar> above_b = conv_analysis(params.dicts[li + 1], ghb);
        xb[rt][li + 1].flat() -= alpha_up * above_b.flat();  // x_{i+1}^[t-1]
        Tensor<Scalar> wg2 =
            conv_weight_grad(params.dicts[li + 1], trace.x_hist[rt][li + 1], ghb);
        g.dicts[li + 1].flat() -= alpha_up * wg2.flat();
      }

      // extrapolation xhat = x^[t-1] + w (x^[t-1] - x^[t-2])
      const Scalar w = params.extrapolation[li];
      xb[rt][li].flat() += (Scalar(1) + w) * xhatb.flat();
      xb[rt - 1][li].flat() -= w * xhatb.flat();
      g.extrapolation[li] +=
          xhatb.flat().dot(trace.x_hist[rt][li].flat() - trace.x_hist[rt - 1][li].flat());
    }
  }

  if (!g.all_finite())
    throw NumericError("param_gradients_unrolled: non-finite gradient");
  return {std::move(g), loss};
}

/// Momentum buffer carried across optimizer steps.
template <typename Scalar>
struct OptimizerState {
  ParamGradients<Scalar> velocity;
  bool initialized = false;
};

/// One descent step: clip the global gradient norm, apply SGD with momentum,
/// then re-impose the parameter constraints (bᵢ ≥ 0, Lᵢ ≥ 1e-6,
/// wᵢ ∈ [0, 0.99]). Passing no state gives a plain memoryless step.
template <typename Scalar>
ModelParams<Scalar> optimizer_step(const ModelParams<Scalar>& params,
                                   const ParamGradients<Scalar>& grads, const TrainConfig& config,
                                   OptimizerState<Scalar>* opt_state = nullptr) {
  ParamGradients<Scalar> g = grads;
  const Scalar gn = std::sqrt(g.squared_norm());
  if (config.clip > 0 && gn > Scalar(config.clip)) g.scale(Scalar(config.clip) / gn);

  const ParamGradients<Scalar>* dir = &g;
  if (opt_state && config.momentum > 0) {
    if (!opt_state->initialized) {
      opt_state->velocity = ParamGradients<Scalar>::zeros_like(params);
      opt_state->initialized = true;
    }
    opt_state->velocity.scale(Scalar(config.momentum));
    opt_state->velocity.add_scaled(g, Scalar(1));
    dir = &opt_state->velocity;
  }

  const Scalar lr = Scalar(config.learning_rate);
  ModelParams<Scalar> out = params;
  for (std::size_t i = 0; i < out.dicts.size(); ++i) {
    Tensor<Scalar> f = out.dicts[i].filters();
    f.flat() -= lr * dir->dicts[i].flat();
    out.dicts[i] = ConvDictionary<Scalar>(std::move(f));
    out.biases[i] = (out.biases[i] - lr * dir->biases[i]).cwiseMax(Scalar(0));
    out.step_sizes[i] = std::max(Scalar(1e-6), out.step_sizes[i] - lr * dir->step_sizes[i]);
    out.extrapolation[i] =
        std::clamp(out.extrapolation[i] - lr * dir->extrapolation[i], Scalar(0), Scalar(0.99));
  }
  return out;
}

/// One training example: measurement, its operator (null = identity), target.
template <typename Scalar>
struct TrainExample {
  Tensor<Scalar> y;
  std::shared_ptr<const LinearOperator<Scalar>> m;
  Tensor<Scalar> z;
};

struct TrainLogRow {
  int epoch;
  int batch;
  double loss;
  double grad_norm;
};

template <typename Scalar>
struct TrainResult {
  ModelParams<Scalar> params;
  std::vector<TrainLogRow> log;
  std::vector<double> epoch_loss;
};

/// Stochastic gradient training of Eq.-style reconstruction loss over a
/// dataset whose measurement operator varies per example. Deterministic for
/// a fixed seed: shuffling and the batch reduction order are both fixed.
/// Aborts with NumericError on a non-finite loss, naming epoch and batch.
template <typename Scalar>
TrainResult<Scalar> train(
    const std::vector<TrainExample<Scalar>>& dataset, const ModelParams<Scalar>& init,
    const TrainConfig& config,
    const std::function<void(int, const ModelParams<Scalar>&)>& epoch_callback = nullptr) {
  if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
  config.validate();
  init.validate();

  TrainResult<Scalar> result;
  result.params = init;
  OptimizerState<Scalar> opt;
  auto rng = make_rng(config.seed);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss_sum = 0;
    int epoch_examples = 0;
    int batch_id = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_id) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      ParamGradients<Scalar> acc = ParamGradients<Scalar>::zeros_like(result.params);
      Scalar loss_sum = 0;
      ModelParams<Scalar> p = result.params;
      for (std::size_t k = start; k < stop; ++k) {
        const TrainExample<Scalar>& ex = dataset[order[k]];
        p.measurement = ex.m;
        try {
          auto [grads, loss] = param_gradients_unrolled(p, ex.y, ex.z);
          acc.add_scaled(grads, Scalar(1));
          loss_sum += loss;
        } catch (const NumericError& e) {
          throw NumericError("train: diverged at epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(batch_id) + ": " + e.what());
        }
      }
      const Scalar inv = Scalar(1) / Scalar(stop - start);
      acc.scale(inv);
      const double batch_loss = static_cast<double>(loss_sum * inv);
      if (!std::isfinite(batch_loss))
        throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) +
                           ", batch " + std::to_string(batch_id));
      result.params = optimizer_step(result.params, acc, config, &opt);
      result.log.push_back(TrainLogRow{epoch, batch_id, batch_loss,
                                       std::sqrt(static_cast<double>(acc.squared_norm()))});
      epoch_loss_sum += batch_loss * static_cast<double>(stop - start);
      epoch_examples += static_cast<int>(stop - start);
    }
    result.epoch_loss.push_back(epoch_loss_sum / epoch_examples);
    if (epoch_callback) epoch_callback(epoch, result.params);
  }
  return result;
}

/// Seeded initialization per the artifact's conventions: Gaussian filters
/// rescaled to unit spectral norm per layer, biases 0.01, step sizes at the
/// block Lipschitz bound, extrapolation weights 0.
template <typename Scalar>
ModelParams<Scalar> init_model_params(const Shape& signal_shape, const std::vector<Index>& widths,
                                      const std::vector<Index>& filter_sizes, int sweeps,
                                      std::shared_ptr<const LinearOperator<Scalar>> measurement,
                                      std::uint64_t seed) {
  if (widths.empty() || widths.size() != filter_sizes.size())
    throw std::invalid_argument("init_model_params: need one width and filter size per layer");
  const bool one_d = signal_shape.size() == 2;
  if (!one_d && signal_shape.size() != 3)
    throw ShapeError("init_model_params: signal must be (C,L) or (C,H,W)");

  ModelParams<Scalar> p;
  auto rng = make_rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Index in_ch = signal_shape[0];
  Shape code_sp = signal_shape;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    const Index f = filter_sizes[i];
    if (f % 2 == 0) throw std::invalid_argument("init_model_params: filter sizes must be odd");
    Shape fs = one_d ? Shape{in_ch, widths[i], f} : Shape{in_ch, widths[i], f, f};
    Tensor<Scalar> filt(fs);
    for (Index e = 0; e < filt.size(); ++e) filt[e] = static_cast<Scalar>(gauss(rng));
    ConvDictionary<Scalar> d(std::move(filt));
    code_sp[0] = widths[i];
    detail::DictOperator<Scalar> op{&d, code_sp};
    const double nrm = std::sqrt(spectral_norm_sq(op, 60, split_seed(seed, 77 + i)));
    Tensor<Scalar> scaled = d.filters();
    scaled *= static_cast<Scalar>(1.0 / nrm);
    p.dicts.emplace_back(std::move(scaled));
    p.biases.push_back(Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Constant(widths[i], Scalar(0.01)));
    p.layer_weights.push_back(Scalar(1));
    p.extrapolation.push_back(Scalar(0));
    p.step_sizes.push_back(Scalar(1));  // placeholder until the Lipschitz pass below
    in_ch = widths[i];
  }
  p.sweeps = sweeps;
  p.measurement = std::move(measurement);
  const Shape y_shape = p.measurement ? p.measurement->out_shape() : signal_shape;
  p.step_sizes = lipschitz_step_sizes(p, y_shape, 60, split_seed(seed, 991));
  p.validate();
  return p;
}

}  // namespace mlcsc
