#include "mlcsc/config.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "mlcsc/io.hpp"

namespace mlcsc {

const char* experiment_kind_name(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::alpha_sweep: return "alpha-sweep";
    case ExperimentKind::planted: return "planted";
    case ExperimentKind::jpeg_ar: return "jpeg-ar";
    case ExperimentKind::traj: return "traj";
  }
  return "?";
}

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  const auto b = s.find_last_not_of(" \t\r");
  return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(trim(item));
  return out;
}

}  // namespace

std::map<std::string, std::string> parse_config_file(const std::filesystem::path& path) {
  const std::string text = io::read_text_file(path);
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw FormatError(path.string() + ":" + std::to_string(lineno) + ": malformed section");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty() || section.empty())
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": key outside a section");
    kv[section + "." + key] = trim(line.substr(eq + 1));
  }
  return kv;
}

namespace {

struct Reader {
  const std::map<std::string, std::string>& kv;
  std::set<std::string> seen;

  bool has(const std::string& key) {
    const auto it = kv.find(key);
    if (it == kv.end()) return false;
    seen.insert(key);
    return true;
  }
  std::string str(const std::string& key, const std::string& dflt) {
    return has(key) ? kv.at(key) : dflt;
  }
  double num(const std::string& key, double dflt) {
    return has(key) ? io::parse_double(kv.at(key)) : dflt;
  }
  long integer(const std::string& key, long dflt) {
    if (!has(key)) return dflt;
    const double v = io::parse_double(kv.at(key));
    if (v != static_cast<long>(v))
      throw FormatError("config: key '" + key + "' expects an integer");
    return static_cast<long>(v);
  }
  bool boolean(const std::string& key, bool dflt) {
    if (!has(key)) return dflt;
    const std::string v = kv.at(key);
    if (v == "on" || v == "true" || v == "1") return true;
    if (v == "off" || v == "false" || v == "0") return false;
    throw FormatError("config: key '" + key + "' expects on/off");
  }
  std::vector<double> num_list(const std::string& key, std::vector<double> dflt) {
    if (!has(key)) return dflt;
    std::vector<double> out;
    for (const auto& item : split_list(kv.at(key))) out.push_back(io::parse_double(item));
    if (out.empty()) throw FormatError("config: key '" + key + "' expects a non-empty list");
    return out;
  }
};

}  // namespace

ExperimentConfig make_experiment_config(const std::map<std::string, std::string>& kv) {
  Reader r{kv, {}};
  ExperimentConfig c;

  const std::string kind = r.str("experiment.kind", "planted");
  if (kind == "alpha-sweep") c.kind = ExperimentKind::alpha_sweep;
  else if (kind == "planted") c.kind = ExperimentKind::planted;
  else if (kind == "jpeg-ar") c.kind = ExperimentKind::jpeg_ar;
  else if (kind == "traj") c.kind = ExperimentKind::traj;
  else throw FormatError("config: unknown experiment.kind '" + kind + "'");
  c.seed = static_cast<std::uint64_t>(r.integer("experiment.seed", 0));
  c.threads = static_cast<int>(r.integer("experiment.threads", 1));
  c.out_dir = r.str("experiment.out", "out");
  c.fixtures_dir = r.str("data.fixtures", "data/fixtures");

  {
    std::vector<double> f = r.num_list("model.filters", {8, 6});
    std::vector<double> fs = r.num_list("model.filter_sizes", {5, 3});
    c.filters.assign(f.begin(), f.end());
    c.filter_sizes.assign(fs.begin(), fs.end());
  }
  c.sweeps = static_cast<int>(r.integer("model.sweeps", 8));

  c.train.learning_rate = r.num("train.learning_rate", 0.02);
  c.train.momentum = r.num("train.momentum", 0.9);
  c.train.batch_size = static_cast<int>(r.integer("train.batch_size", 4));
  c.train.epochs = static_cast<int>(r.integer("train.epochs", 30));
  c.train.clip = r.num("train.clip", 5.0);
  c.checkpoint_interval = static_cast<int>(r.integer("train.checkpoint_interval", 0));

  c.alpha_grid = r.num_list("alpha-sweep.grid", c.alpha_grid);
  c.image_size = r.integer("alpha-sweep.image_size", 32);
  c.train_images = static_cast<int>(r.integer("alpha-sweep.train_images", 24));
  c.test_images = static_cast<int>(r.integer("alpha-sweep.test_images", 8));
  c.drop_probability = r.num("alpha-sweep.drop_probability", 0.5);
  c.block_edge = r.integer("alpha-sweep.block_edge", 4);
  c.naive_epochs = static_cast<int>(r.integer("alpha-sweep.naive_epochs", 0));

  {
    std::vector<double> qf = r.num_list("jpeg-ar.quality_factors", {10, 50});
    c.quality_factors.assign(qf.begin(), qf.end());
  }
  c.crop = r.integer("jpeg-ar.crop", 64);
  c.train_crops = static_cast<int>(r.integer("jpeg-ar.train_crops", 8));
  c.test_crops = static_cast<int>(r.integer("jpeg-ar.test_crops", 4));
  c.data_consistency = r.boolean("jpeg-ar.data_consistency", true);

  c.planted_examples = static_cast<int>(r.integer("planted.examples", 60));
  c.planted_test_examples = static_cast<int>(r.integer("planted.test_examples", 12));
  c.planted_length = r.integer("planted.length", 64);
  c.planted_channels = r.integer("planted.channels", 3);
  c.planted_mask_drop = r.num("planted.mask_drop", 0.3);

  c.traj_sequences = static_cast<int>(r.integer("traj.sequences", 80));
  c.traj_test_sequences = static_cast<int>(r.integer("traj.test_sequences", 12));
  c.traj_frames = r.integer("traj.frames", 150);
  c.traj_rate = r.num("traj.rate", c.traj_rate);
  c.traj_fps = r.num("traj.fps", 30.0);
  c.traj_full_sweeps = static_cast<int>(r.integer("traj.full_sweeps", 15));

  for (const auto& [key, value] : kv)
    if (!r.seen.count(key)) throw FormatError("config: unknown key '" + key + "'");

  c.validate();
  return c;
}

void ExperimentConfig::validate() const {
  if (filters.empty() || filters.size() != filter_sizes.size())
    throw FormatError("config: model.filters and model.filter_sizes must be non-empty and match");
  for (Index f : filter_sizes)
    if (f < 1 || f % 2 == 0) throw FormatError("config: filter sizes must be odd and positive");
  if (sweeps < 1) throw FormatError("config: model.sweeps must be >= 1");
  if (threads < 1) throw FormatError("config: experiment.threads must be >= 1");
  for (double a : alpha_grid)
    if (!(a >= 0.0 && a <= 1.0)) throw FormatError("config: alpha grid values must lie in [0,1]");
  for (int qf : quality_factors)
    if (qf < 1 || qf > 100) throw FormatError("config: quality factors must lie in [1,100]");
  if (!(drop_probability >= 0.0 && drop_probability < 1.0))
    throw FormatError("config: drop probability must lie in [0,1)");
  if (image_size % block_edge != 0)
    throw FormatError("config: image_size must be divisible by block_edge");
  if (crop % 16 != 0) throw FormatError("config: jpeg crop must be divisible by 16");
  if (traj_frames < 2) throw FormatError("config: traj.frames must be >= 2");
  train.validate();
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  return make_experiment_config(parse_config_file(path));
}

}  // namespace mlcsc
