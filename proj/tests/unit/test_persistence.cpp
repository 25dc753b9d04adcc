#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "elastic/checkpoint.hpp"
#include "elastic/metrics_io.hpp"
#include "elastic/run_config.hpp"
#include "oracles.hpp"

using namespace elastic;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("elastic_unit_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void put_be32(std::ofstream& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.put(static_cast<char>((v >> s) & 0xff));
}

// Small random MNIST-format dataset in `dir`.
void write_idx(const fs::path& dir, const std::string& prefix, std::uint32_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::ofstream img(dir / (prefix + "-images-idx3-ubyte"), std::ios::binary);
  put_be32(img, 0x803);
  put_be32(img, n);
  put_be32(img, 28);
  put_be32(img, 28);
  for (std::uint32_t i = 0; i < n * 784; ++i) img.put(static_cast<char>(rng() & 0xff));
  std::ofstream lab(dir / (prefix + "-labels-idx1-ubyte"), std::ios::binary);
  put_be32(lab, 0x801);
  put_be32(lab, n);
  for (std::uint32_t i = 0; i < n; ++i) lab.put(static_cast<char>(i % 10));
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(ELASTIC_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

MetricsLog sample_log(std::size_t exits) {
  MetricsLog log;
  for (std::size_t e = 1; e <= 4; ++e) {
    EpochRecord r;
    r.epoch = e;
    r.phase = e <= 2 ? 1 : 2;
    r.lr = 1e-3;
    r.train_loss_total = 2.0 / static_cast<double>(e);
    r.val_loss_total = 2.5 / static_cast<double>(e);
    r.val_error.assign(exits, 0.9 / static_cast<double>(e));
    log.records.push_back(r);
  }
  return log;
}

}  // namespace

class Roundtrip : public ::testing::TestWithParam<const char*> {};

TEST_P(Roundtrip, SaveLoadIsBitwiseIdentical) {
  auto net = make_elastic_network(BackboneConfig::by_name(GetParam()), {}, 21);
  const auto bytes = serialize_checkpoint(net);
  auto back = deserialize_checkpoint(bytes);
  EXPECT_EQ(serialize_checkpoint(back), bytes);
  auto a = net.parameters(), b = back.parameters();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].name, b[i].name);
    EXPECT_TRUE(*a[i].param->value == *b[i].param->value) << a[i].name;
  }
  EXPECT_TRUE(isomorphic(net.backbone(), back.backbone()));
  std::mt19937_64 rng(1);
  const auto s = net.backbone().input_shape();
  const auto x = oracle::random_tensor<float>({2, s.height, s.width, s.channels}, rng, 0.0, 1.0);
  const auto pa = forward_all_exits(net, x), pb = forward_all_exits(back, x);
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_TRUE(pa[i] == pb[i]);
}

INSTANTIATE_TEST_SUITE_P(MiniBackbones, Roundtrip,
                         ::testing::Values("mini-vgg", "mini-mobilenet", "mini-densenet", "mini-resnet"),
                         [](const auto& info) {
                           std::string n = info.param;
                           for (auto& c : n) if (c == '-') c = '_';
                           return n;
                         });

TEST(Checkpoint, PrunedNetworkKeepsItsExits) {
  auto net = prune_exits(make_elastic_network(BackboneConfig::mini_mobilenet(), {}, 2), {3, 7});
  auto back = deserialize_checkpoint(serialize_checkpoint(net));
  ASSERT_EQ(back.exit_count(), 3u);
  EXPECT_EQ(back.exit(1).anchor, 3u);
  EXPECT_EQ(back.exit(2).anchor, 7u);
  EXPECT_EQ(back.exit(3).anchor, 13u);
}

TEST(Checkpoint, CorruptedPayloadFailsChecksum) {
  auto net = make_elastic_network(BackboneConfig::mini_vgg(), {}, 2);
  auto bytes = serialize_checkpoint(net);
  bytes[bytes.size() - 5] ^= 0x40;
  try {
    deserialize_checkpoint(bytes);
    FAIL() << "expected CheckpointError";
  } catch (const CheckpointError& e) {
    EXPECT_NE(std::string(e.what()).find("checksum"), std::string::npos) << e.what();
  }
}

TEST(Checkpoint, StructuralCorruptionIsNamed) {
  auto net = make_elastic_network(BackboneConfig::mini_vgg(), {}, 2);
  const auto good = serialize_checkpoint(net);
  auto expect_error = [](std::vector<std::uint8_t> bytes, const std::string& fragment) {
    try {
      deserialize_checkpoint(bytes);
      ADD_FAILURE() << "expected CheckpointError mentioning " << fragment;
    } catch (const CheckpointError& e) {
      EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
    }
  };
  auto magic = good;
  magic[0] = 'X';
  expect_error(magic, "magic");
  auto version = good;
  version[8] = 2;
  expect_error(version, "version");
  expect_error(std::vector<std::uint8_t>(good.begin(), good.begin() + good.size() / 2), "truncated");
  auto trailing = good;
  trailing.push_back(0);
  expect_error(trailing, "trailing");
}

TEST(Checkpoint, ShapeOnlyNetworkCannotBeSaved) {
  auto rng = substream(0, "init");
  auto net = elasticize(build_full_audit_graph("mobilenet"), {}, rng, BackboneConfig::full_audit("mobilenet"));
  EXPECT_THROW(serialize_checkpoint(net), CheckpointError);
}

TEST(Checkpoint, FileRoundTrip) {
  const auto dir = scratch("ckpt");
  auto net = make_elastic_network(BackboneConfig::mini_densenet(), {}, 4);
  save_checkpoint(net, dir / "a.elnet");
  auto back = load_checkpoint(dir / "a.elnet");
  EXPECT_EQ(parameter_checksum(back), parameter_checksum(net));
  EXPECT_THROW(load_checkpoint(dir / "missing.elnet"), CheckpointError);
}

TEST(MetricsCsv, RoundTripsThroughParser) {
  const auto csv = metrics_csv(sample_log(3), 3);
  const auto t = parse_metrics_csv(csv);
  EXPECT_EQ(t.columns, metrics_columns(3));
  EXPECT_EQ(t.exits(), 3u);
  ASSERT_EQ(t.rows.size(), 4u);
  EXPECT_DOUBLE_EQ(t.rows[1][3], 1.0);
  EXPECT_EQ(t.rows[3][1], 2.0);
}

TEST(MetricsCsv, ErrorsNameTheLine) {
  auto expect_line = [](const std::string& text, const std::string& fragment) {
    try {
      parse_metrics_csv(text);
      ADD_FAILURE() << "expected FormatError for " << text;
    } catch (const FormatError& e) {
      EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
    }
  };
  const std::string header = "epoch,phase,lr,train_loss_total,val_loss_total,val_err_1\n";
  expect_line(header, "no data rows");
  expect_line(header + "1,1,0.001,2,2,0.5\n1,1,0.001,2\n", "line 3");
  expect_line(header + "1,1,abc,2,2,0.5\n", "line 2");
  expect_line("epoch,phase\n1,1\n", "line 1");
}

TEST(Curves, DeterministicAndStyled) {
  const auto t = parse_metrics_csv(metrics_csv(sample_log(2), 2));
  const std::vector<CurveSeries> s{{"elastic", t}, {"plain", t}};
  const auto a = render_curves_svg(s), b = render_curves_svg(s);
  EXPECT_EQ(a, b);
  EXPECT_NE(a.find("stroke-dasharray"), std::string::npos);
  EXPECT_NE(a.find("elastic validation"), std::string::npos);
  EXPECT_NE(a.find("plain training"), std::string::npos);
  CurveOptions opt;
  opt.per_exit = true;
  EXPECT_NE(render_curves_svg(s, opt).find("per exit"), std::string::npos);
  EXPECT_THROW(render_curves_svg({}), ContractViolation);
}

TEST(RunConfig, ParsesKeysAndRejectsUnknown) {
  const auto c = parse_run_config("# comment\nbackbone = mini-vgg\nepochs2 = 4\nkeep_exits = 1, 3\nseed=7\n");
  EXPECT_EQ(c.backbone, "mini-vgg");
  EXPECT_EQ(c.train.phase2_epochs, 4u);
  EXPECT_EQ(*c.keep_exits, (std::vector<std::size_t>{1, 3}));
  EXPECT_EQ(c.train.seed, 7u);
  EXPECT_EQ(c.split.seed, 7u);
  try {
    parse_run_config("lr = 0.1\nlearning_rate = 3\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("line 2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("learning_rate"), std::string::npos) << msg;
  }
  EXPECT_THROW(parse_run_config("lr = fast\n"), ConfigError);
  EXPECT_THROW(parse_run_config("just words\n"), ConfigError);
}

TEST(RunConfig, FullAuditBackboneCannotBeTrained) {
  RunConfig c;
  c.backbone = "densenet-121";
  EXPECT_THROW(backbone_for(c, {224, 224, 3}), ConfigError);
}

TEST(Cli, AuditPrintsDepthsAndCsv) {
  const auto dir = scratch("cli_audit");
  ASSERT_EQ(run_cli("audit densenet-169 --csv " + (dir / "cost.csv").string(), dir / "log"), 0)
      << slurp(dir / "log");
  const auto csv = slurp(dir / "cost.csv");
  EXPECT_EQ(csv.rfind("exit,conv_depth,params,flops\n", 0), 0u);
  EXPECT_NE(csv.find("\n1,14,"), std::string::npos) << csv;
  EXPECT_NE(csv.find("\n4,168,"), std::string::npos) << csv;
  EXPECT_NE(run_cli("audit no-such-net", dir / "log2"), 0);
  EXPECT_NE(slurp(dir / "log2").find("error:"), std::string::npos);
}

TEST(Cli, TrainEvalCurvesPipeline) {
  const auto dir = scratch("cli_train");
  const auto data = dir / "data";
  fs::create_directories(data);
  write_idx(data, "train", 60, 1);
  write_idx(data, "test", 20, 2);
  const std::string common = " --backbone mini-densenet --data-dir " + data.string() +
                             " --per-class 6 --epochs1 1 --epochs2 1 --batch 8 --seed 3";
  ASSERT_EQ(run_cli("train" + common + " --out " + (dir / "el").string(), dir / "log1"), 0)
      << slurp(dir / "log1");
  ASSERT_EQ(run_cli("train --no-elastic" + common + " --out " + (dir / "pl").string(), dir / "log2"), 0)
      << slurp(dir / "log2");
  for (const char* f : {"metrics.csv", "checkpoint.elnet", "summary.txt", "test_errors.csv"}) {
    EXPECT_TRUE(fs::exists(dir / "el" / f)) << f;
  }
  EXPECT_EQ(parse_metrics_csv(slurp(dir / "el" / "metrics.csv")).exits(), 4u);
  EXPECT_EQ(parse_metrics_csv(slurp(dir / "pl" / "metrics.csv")).exits(), 1u);

  ASSERT_EQ(run_cli("eval --checkpoint " + (dir / "el" / "checkpoint.elnet").string() + " --data-dir " +
                        data.string() + " --csv " + (dir / "eval.csv").string(),
                    dir / "log3"),
            0)
      << slurp(dir / "log3");
  EXPECT_EQ(slurp(dir / "eval.csv"), slurp(dir / "el" / "test_errors.csv"));

  const std::string curves = "curves elastic=" + (dir / "el" / "metrics.csv").string() + " plain=" +
                             (dir / "pl" / "metrics.csv").string() + " --out ";
  ASSERT_EQ(run_cli(curves + (dir / "a.svg").string(), dir / "log4"), 0) << slurp(dir / "log4");
  ASSERT_EQ(run_cli(curves + (dir / "b.svg").string(), dir / "log5"), 0);
  EXPECT_EQ(slurp(dir / "a.svg"), slurp(dir / "b.svg"));
}

TEST(Cli, RejectsBadInvocations) {
  const auto dir = scratch("cli_bad");
  EXPECT_NE(run_cli("train --elastic --no-elastic", dir / "log1"), 0);
  EXPECT_NE(run_cli("train --no-elastic --keep-exits 1,2 --data-dir /nonexistent", dir / "log2"), 0);
  EXPECT_NE(slurp(dir / "log2").find("keep-exits"), std::string::npos) << slurp(dir / "log2");
  std::ofstream(dir / "bad.cfg") << "backbone = mini-vgg\nwarp_speed = 9\n";
  EXPECT_NE(run_cli("train --config " + (dir / "bad.cfg").string(), dir / "log3"), 0);
  EXPECT_NE(slurp(dir / "log3").find("warp_speed"), std::string::npos) << slurp(dir / "log3");
  std::ofstream(dir / "empty.csv") << "epoch,phase,lr,train_loss_total,val_loss_total,val_err_1\n";
  EXPECT_NE(run_cli("curves " + (dir / "empty.csv").string() + " --out " + (dir / "x.svg").string(),
                    dir / "log4"),
            0);
  EXPECT_FALSE(fs::exists(dir / "x.svg"));
}
