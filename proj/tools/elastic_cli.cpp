// Command-line front end: train, eval, audit, curves.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "elastic/budget.hpp"
#include "elastic/checkpoint.hpp"
#include "elastic/metrics_io.hpp"
#include "elastic/run_config.hpp"

namespace fs = std::filesystem;
using namespace elastic;

namespace {

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
  if (!out) throw ConfigError("short write to " + path.string());
}

std::string percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", fraction * 100.0);
  return buf;
}

std::string error_table(const std::vector<double>& errors) {
  std::ostringstream out;
  out << "exit  error(%)\n";
  for (std::size_t i = 0; i < errors.size(); ++i) {
    char line[64];
    std::snprintf(line, sizeof line, "%4zu  %8s\n", i + 1, percent(errors[i]).c_str());
    out << line;
  }
  return out.str();
}

std::string error_csv(const std::vector<double>& errors) {
  std::ostringstream out;
  out << "exit,error_percent\n";
  for (std::size_t i = 0; i < errors.size(); ++i) out << i + 1 << ',' << percent(errors[i]) << '\n';
  return out.str();
}

// -- train --------------------------------------------------------------------

struct TrainFlags {
  std::string config_file;
  std::map<std::string, std::string> values;
  bool elastic = false, no_elastic = false;
};

int run_train(const TrainFlags& flags) {
  RunConfig cfg;
  if (!flags.config_file.empty()) cfg = parse_run_config(read_text(flags.config_file));
  // seed first so an explicit flag order never matters
  if (auto it = flags.values.find("seed"); it != flags.values.end()) apply_setting(cfg, "seed", it->second);
  for (const auto& [key, value] : flags.values) {
    if (key != "seed") apply_setting(cfg, key, value);
  }
  if (flags.elastic) cfg.elastic = true;
  if (flags.no_elastic) cfg.elastic = false;
  if (!cfg.elastic && cfg.keep_exits && !cfg.keep_exits->empty()) {
    throw ConfigError("--keep-exits needs an elastic network");
  }

  const auto data = load_run_data(cfg);
  const Dataset pool = cfg.per_class > 0 ? subsample(data.train, cfg.per_class, cfg.seed) : data.train;
  const auto [train, val] = split_train_val(pool, cfg.split);

  ElasticNetwork net = make_elastic_network(backbone_for(cfg, train.shape),
                                            HeadConfig{train.classes, cfg.dropout}, cfg.seed);
  if (!cfg.elastic) {
    net = prune_exits(net, {});
  } else if (cfg.keep_exits) {
    net = prune_exits(net, std::set<std::size_t>(cfg.keep_exits->begin(), cfg.keep_exits->end()));
  }
  LossConfig loss{cfg.loss_weights ? *cfg.loss_weights : net.loss_weights(), cfg.class_scaled_loss};
  loss.validate(net.exit_count());
  net.set_loss_weights(loss.weights);

  std::cout << "backbone " << cfg.backbone << (cfg.elastic ? " (elastic)" : " (plain)") << ", "
            << net.exit_count() << " exit(s), " << train.size() << " train / " << val.size()
            << " validation samples\n";
  MetricsLog log = train_phase1(net, train, val, cfg.train, loss);
  if (!log.halted) {
    MetricsLog p2 = train_phase2(net, train, val, cfg.train, loss, cfg.train.phase1_epochs);
    log.records.insert(log.records.end(), p2.records.begin(), p2.records.end());
    log.halted = p2.halted;
    log.diagnostic = p2.diagnostic;
  }

  fs::create_directories(cfg.out);
  const fs::path out(cfg.out);
  write_text(out / "metrics.csv", metrics_csv(log, net.exit_count()));
  save_checkpoint(net, out / "checkpoint.elnet");

  std::ostringstream summary;
  summary << "backbone: " << cfg.backbone << "\nelastic: " << (cfg.elastic ? "yes" : "no")
          << "\nexits: " << net.exit_count() << "\nseed: " << cfg.seed
          << "\nepochs: " << log.records.size() << "\n";
  if (!log.records.empty()) {
    summary << "final learning rate: " << log.records.back().lr << "\n\nvalidation\n"
            << error_table(log.records.back().val_error);
  }
  if (data.test.size() > 0) {
    const auto test_errors = evaluate(net, data.test);
    summary << "\ntest (" << data.test.size() << " samples)\n" << error_table(test_errors);
    write_text(out / "test_errors.csv", error_csv(test_errors));
  }
  if (log.halted) summary << "\nhalted: " << log.diagnostic << "\n";
  write_text(out / "summary.txt", summary.str());
  std::cout << summary.str();
  if (log.halted) {
    std::cerr << "error: training halted: " << log.diagnostic << "\n";
    return 1;
  }
  return 0;
}

// -- eval ---------------------------------------------------------------------

int run_eval(const std::string& checkpoint, const std::string& dataset, const std::string& data_dir,
             const std::string& split, const std::string& csv) {
  ElasticNetwork net = load_checkpoint(checkpoint);
  RunConfig cfg;
  apply_setting(cfg, "dataset", dataset);
  cfg.data_dir = data_dir;
  const auto data = load_run_data(cfg);
  const Dataset& set = split == "train" ? data.train : data.test;
  if (set.size() == 0) throw ConfigError("no " + split + " samples in " + data_dir);
  if (!(set.shape == net.backbone().input_shape())) {
    const auto s = net.backbone().input_shape();
    throw ShapeError("dataset images are " + std::to_string(set.shape.height) + "x" +
                     std::to_string(set.shape.width) + "x" + std::to_string(set.shape.channels) +
                     ", checkpoint expects " + std::to_string(s.height) + "x" +
                     std::to_string(s.width) + "x" + std::to_string(s.channels));
  }
  const auto errors = evaluate(net, set);
  std::cout << error_table(errors);
  if (!csv.empty()) write_text(csv, error_csv(errors));
  return 0;
}

// -- audit --------------------------------------------------------------------

int run_audit(const std::string& target, std::size_t classes, const std::string& csv) {
  std::optional<ElasticNetwork> net;
  if (fs::is_regular_file(target)) {
    net.emplace(load_checkpoint(target));
  } else {
    BackboneConfig config;
    try {
      config = BackboneConfig::by_name(target);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string(e.what()) + "; or pass a checkpoint file");
    }
    if (classes == 0) classes = config.scale == Scale::full_audit ? 100 : 10;
    auto rng = substream(0, "audit");
    net.emplace(elasticize(build_backbone(config), HeadConfig{classes, 0.2}, rng, config));
  }
  const CostTable table = cost_audit(*net);
  std::cout << format_cost_table(table);
  if (!csv.empty()) write_text(csv, cost_table_csv(table));
  else std::cout << "\n" << cost_table_csv(table);
  return 0;
}

// -- curves -------------------------------------------------------------------

int run_curves(const std::vector<std::string>& inputs, const std::string& out, bool per_exit) {
  std::vector<CurveSeries> series;
  for (const auto& arg : inputs) {
    std::string label, path = arg;
    if (const auto eq = arg.find('='); eq != std::string::npos) {
      label = arg.substr(0, eq);
      path = arg.substr(eq + 1);
    } else {
      label = fs::path(path).parent_path().filename().string();
      if (label.empty()) label = fs::path(path).stem().string();
    }
    try {
      series.push_back({label, parse_metrics_csv(read_text(path))});
    } catch (const FormatError& e) {
      throw FormatError(path + ": " + e.what());
    }
  }
  CurveOptions options;
  options.per_exit = per_exit;
  write_text(out, render_curves_svg(series, options));
  std::cout << "wrote " << out << " (" << series.size() << " run(s), " << 2 * series.size()
            << " loss curves)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-exit network toolkit"};
  app.require_subcommand(1);

  auto* train = app.add_subcommand("train", "two-phase training; writes checkpoint and metrics CSV");
  TrainFlags tf;
  train->add_option("--config", tf.config_file, "key = value configuration file");
  const std::vector<std::pair<std::string, std::string>> train_options{
      {"--backbone", "backbone"}, {"--keep-exits", "keep_exits"}, {"--dataset", "dataset"},
      {"--data-dir", "data_dir"}, {"--per-class", "per_class"},   {"--epochs1", "epochs1"},
      {"--epochs2", "epochs2"},   {"--lr", "lr"},                 {"--momentum", "momentum"},
      {"--batch", "batch"},       {"--patience", "patience"},     {"--seed", "seed"},
      {"--out", "out"}};
  for (const auto& [flag, key] : train_options) {
    train->add_option_function<std::string>(
        flag, [&tf, key = key](const std::string& v) { tf.values[key] = v; }, "sets " + key);
  }
  auto* el = train->add_flag("--elastic", tf.elastic, "attach an exit at every anchor (default)");
  auto* nel = train->add_flag("--no-elastic", tf.no_elastic, "final exit only (plain baseline)");
  el->excludes(nel);

  auto* eval = app.add_subcommand("eval", "per-exit error table of a checkpoint");
  std::string ckpt, dataset = "mnist", data_dir = "data/mnist", split = "test", eval_csv;
  eval->add_option("--checkpoint", ckpt)->required();
  eval->add_option("--dataset", dataset);
  eval->add_option("--data-dir", data_dir);
  eval->add_option("--split", split)->check(CLI::IsMember({"train", "test"}));
  eval->add_option("--csv", eval_csv, "also write the table as CSV");

  auto* audit = app.add_subcommand("audit", "cumulative parameter / FLOP table per exit");
  std::string audit_target, audit_csv;
  std::size_t classes = 0;
  audit->add_option("target", audit_target, "backbone name or checkpoint file")->required();
  audit->add_option("--classes", classes, "class count (default 100 full-size, 10 mini)");
  audit->add_option("--csv", audit_csv, "write CSV here instead of after the table");

  auto* curves = app.add_subcommand("curves", "render loss curves of metrics CSVs to SVG");
  std::vector<std::string> curve_inputs;
  std::string curve_out;
  bool per_exit = false;
  curves->add_option("csv", curve_inputs, "[label=]metrics.csv, one per run")->required();
  curves->add_option("--out", curve_out, "output SVG")->required();
  curves->add_flag("--per-exit", per_exit, "add per-exit validation error panel");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*train) return run_train(tf);
    if (*eval) return run_eval(ckpt, dataset, data_dir, split, eval_csv);
    if (*audit) return run_audit(audit_target, classes, audit_csv);
    if (*curves) return run_curves(curve_inputs, curve_out, per_exit);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
