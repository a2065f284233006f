#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mlcsc/tensor.hpp"
#include "mlcsc/unroll.hpp"

namespace mlcsc {

enum class ExperimentKind { alpha_sweep, planted, jpeg_ar, traj };

const char* experiment_kind_name(ExperimentKind k);

/// Fully resolved experiment configuration. Parsed from the flat
/// `[section]` / `key = value` format; unknown sections or keys are
/// rejected outright. Every key and its default is listed in docs/config.md.
struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::planted;
  std::uint64_t seed = 0;
  int threads = 1;
  std::filesystem::path out_dir = "out";
  std::filesystem::path fixtures_dir = "data/fixtures";

  // model
  std::vector<Index> filters = {8, 6};
  std::vector<Index> filter_sizes = {5, 3};
  int sweeps = 8;

  TrainConfig train;
  int checkpoint_interval = 0;  // epochs between checkpoints, 0 = off

  // alpha-sweep
  std::vector<double> alpha_grid = {0.0, 0.25, 0.5, 0.75, 1.0};
  Index image_size = 32;
  int train_images = 24;
  int test_images = 8;
  double drop_probability = 0.5;
  Index block_edge = 4;
  int naive_epochs = 0;  // 0: same as train.epochs

  // jpeg-ar
  std::vector<int> quality_factors = {10, 50};
  Index crop = 64;
  int train_crops = 8;
  int test_crops = 4;
  bool data_consistency = true;

  // planted
  int planted_examples = 60;
  int planted_test_examples = 12;
  Index planted_length = 64;
  Index planted_channels = 3;
  double planted_mask_drop = 0.3;

  // traj
  int traj_sequences = 80;
  int traj_test_sequences = 12;
  Index traj_frames = 150;
  double traj_rate = 3.14159265358979323846;
  double traj_fps = 30.0;
  int traj_full_sweeps = 15;

  void validate() const;
};

/// Parse `key = value` lines under `[section]` headers; '#' starts a comment.
std::map<std::string, std::string> parse_config_file(const std::filesystem::path& path);

/// Build a validated ExperimentConfig from a parsed file, rejecting unknown
/// keys. Values not present keep their defaults.
ExperimentConfig make_experiment_config(const std::map<std::string, std::string>& kv);

ExperimentConfig load_experiment_config(const std::filesystem::path& path);

}  // namespace mlcsc
