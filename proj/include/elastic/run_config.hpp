#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "elastic/backbones.hpp"
#include "elastic/dataset.hpp"
#include "elastic/training.hpp"

namespace elastic {

/// Everything `train` needs. Defaults are the reference training setup.
struct RunConfig {
  std::string backbone = "mini-mobilenet";
  bool elastic = true;
  std::optional<std::vector<std::size_t>> keep_exits;
  std::string dataset = "mnist";  // mnist | cifar10
  std::string data_dir = "data/mnist";
  std::size_t per_class = 500;
  TrainConfig train;
  SplitSpec split;
  double dropout = 0.2;
  double alpha = 1.0;
  double rho = 1.0;
  bool class_scaled_loss = true;
  std::optional<std::vector<double>> loss_weights;
  std::string out = "run";
  std::uint64_t seed = 0;

  /// Seeds the split and the training streams from `seed`.
  void apply_seed(std::uint64_t s);
};

/// Applies one `key = value` setting. Keys use the flag names with
/// underscores (per_class, epochs1, keep_exits, ...). Throws ConfigError
/// for an unknown key or a malformed value.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);

/// `key = value` lines; '#' starts a comment. Errors name the line.
RunConfig parse_run_config(const std::string& text, RunConfig base = {});

std::vector<std::string> run_config_keys();

/// "1,2,3" -> {1, 2, 3}; an empty string gives an empty list.
std::vector<std::size_t> parse_index_list(const std::string& text);

/// Train and test sets named by the config (test may be empty when the
/// directory has no test files).
struct LoadedData {
  Dataset train;
  Dataset test;
};
LoadedData load_run_data(const RunConfig& config);

/// Backbone config for the dataset's image shape.
BackboneConfig backbone_for(const RunConfig& config, const FeatureShape& input);

}  // namespace elastic
