#include "elastic/run_config.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <sstream>

namespace elastic {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (v.empty() || *end != '\0') throw ConfigError(key + ": expected a number, got '" + v + "'");
  return d;
}

std::size_t to_size(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const long long n = std::strtoll(v.c_str(), &end, 10);
  if (v.empty() || *end != '\0' || n < 0) {
    throw ConfigError(key + ": expected a nonnegative integer, got '" + v + "'");
  }
  return static_cast<std::size_t>(n);
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

}  // namespace

void RunConfig::apply_seed(std::uint64_t s) {
  seed = s;
  split.seed = s;
  train.seed = s;
}

std::vector<std::string> run_config_keys() {
  return {"backbone", "elastic",  "keep_exits", "dataset",   "data_dir",  "per_class",
          "epochs1",  "epochs2",  "lr",         "momentum",  "batch",     "patience",
          "factor",   "min_delta", "seed",      "out",       "train_fraction", "dropout",
          "alpha",    "rho",      "class_scaled_loss", "loss_weights"};
}

std::vector<std::size_t> parse_index_list(const std::string& text) {
  std::vector<std::size_t> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    out.push_back(to_size("keep_exits", item));
  }
  return out;
}

void apply_setting(RunConfig& c, const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  if (key == "backbone") c.backbone = v;
  else if (key == "elastic") c.elastic = to_bool(key, v);
  else if (key == "keep_exits") c.keep_exits = parse_index_list(v);
  else if (key == "dataset") {
    if (v != "mnist" && v != "cifar10") throw ConfigError("dataset must be mnist or cifar10");
    c.dataset = v;
  } else if (key == "data_dir") c.data_dir = v;
  else if (key == "per_class") c.per_class = to_size(key, v);
  else if (key == "epochs1") c.train.phase1_epochs = to_size(key, v);
  else if (key == "epochs2") c.train.phase2_epochs = to_size(key, v);
  else if (key == "lr") c.train.lr = to_double(key, v);
  else if (key == "momentum") c.train.momentum = to_double(key, v);
  else if (key == "batch") c.train.batch_size = to_size(key, v);
  else if (key == "patience") c.train.patience = to_size(key, v);
  else if (key == "factor") c.train.factor = to_double(key, v);
  else if (key == "min_delta") c.train.min_delta = to_double(key, v);
  else if (key == "seed") c.apply_seed(to_size(key, v));
  else if (key == "out") c.out = v;
  else if (key == "train_fraction") c.split.train_fraction = to_double(key, v);
  else if (key == "dropout") c.dropout = to_double(key, v);
  else if (key == "alpha") c.alpha = to_double(key, v);
  else if (key == "rho") c.rho = to_double(key, v);
  else if (key == "class_scaled_loss") c.class_scaled_loss = to_bool(key, v);
  else if (key == "loss_weights") {
    std::vector<double> w;
    std::istringstream in(v);
    std::string item;
    while (std::getline(in, item, ',')) w.push_back(to_double(key, trim(item)));
    c.loss_weights = w;
  } else {
    throw ConfigError("unknown key '" + key + "'");
  }
}

RunConfig parse_run_config(const std::string& text, RunConfig base) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    try {
      apply_setting(base, trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return base;
}

LoadedData load_run_data(const RunConfig& config) {
  namespace fs = std::filesystem;
  const fs::path dir(config.data_dir);
  LoadedData d;
  if (config.dataset == "mnist") {
    d.train = load_mnist_idx(dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte");
    if (fs::exists(dir / "test-images-idx3-ubyte")) {
      d.test = load_mnist_idx(dir / "test-images-idx3-ubyte", dir / "test-labels-idx1-ubyte");
    }
  } else {
    bool any = false;
    for (int b = 1; b <= 5; ++b) {
      const auto p = dir / ("data_batch_" + std::to_string(b) + ".bin");
      if (!fs::exists(p)) continue;
      if (!any) d.train = load_cifar10_binary(p);
      else append(d.train, load_cifar10_binary(p));
      any = true;
    }
    if (!any) throw FormatError("no data_batch_*.bin files in " + dir.string());
    if (fs::exists(dir / "test_batch.bin")) d.test = load_cifar10_binary(dir / "test_batch.bin");
  }
  return d;
}

BackboneConfig backbone_for(const RunConfig& config, const FeatureShape& input) {
  BackboneConfig b = BackboneConfig::by_name(config.backbone);
  if (b.scale != Scale::mini && b.family != Family::concat_standin) {
    throw ConfigError("'" + config.backbone + "' is a shape-only audit graph and cannot be trained");
  }
  b.input = input;
  b.alpha = config.alpha;
  b.rho = config.rho;
  return b;
}

}  // namespace elastic
