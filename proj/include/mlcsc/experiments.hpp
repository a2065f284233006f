#pragma once

#include <string>
#include <vector>

#include "mlcsc/config.hpp"
#include "mlcsc/metrics.hpp"
#include "mlcsc/unroll.hpp"

namespace mlcsc {

/// One emitted CSV row: `experiment,alpha_or_qf,rmse,psnr,ssim,nrmse`.
struct ExperimentRow {
  std::string experiment;
  double alpha_or_qf = 0;
  MetricReport metrics;
};

struct ExperimentResult {
  std::vector<ExperimentRow> rows;
  std::string csv;  // exact bytes written to <out>/results.csv
};

/// Interpolated inpainting/block-recovery sweep: one model trained at
/// α = 0.5 evaluated across the grid, naive identity-operator baselines
/// trained per α on Mᵀy inputs.
ExperimentResult run_alpha_sweep(const ExperimentConfig& config);

/// Planted-signal oracle: inference with injected ground-truth parameters,
/// then training from scratch with held-out evaluation.
ExperimentResult run_planted_recovery(const ExperimentConfig& config);

/// Per-quality-factor artifact removal on the bundled fixture crops, against
/// the decompressed-input baseline.
ExperimentResult run_jpeg_experiment(const ExperimentConfig& config);

/// Orbit-camera trajectory reconstruction on planted temporal signals,
/// including the truncated feed-forward mode.
ExperimentResult run_traj_experiment(const ExperimentConfig& config);

/// Training phase only: fits the configured experiment's model and writes a
/// checkpoint plus the training log under the output directory.
void run_training(const ExperimentConfig& config);

std::string render_results_csv(const std::vector<ExperimentRow>& rows);

}  // namespace mlcsc
