#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "rgae/cli.hpp"
#include "rgae/config.hpp"
#include "rgae/data.hpp"
#include "rgae/eval.hpp"

using namespace rgae;
namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code;
  std::string out, err;
};

CliRun run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() /
          ("rgae_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::ofstream(dir / "tiny.conf") << "# tiny\n"
                                        "data.alphabet = 24\n"
                                        "data.fragment_lengths = 2,3\n"
                                        "data.train_per_cell = 2\n"
                                        "data.test_per_cell = 1\n"
                                        "data.eval_per_cell = 1\n"
                                        "data.sequence_length = 20\n"
                                        "data.walk_low = 4\n"
                                        "data.walk_high = 18\n"
                                        "gae.context = 3\n"
                                        "gae.factors = 8\n"
                                        "gae.mappings = 4\n"
                                        "rgae.hidden = 4\n"
                                        "pretrain.epochs = 2\n"
                                        "pretrain.delta_min = -3\n"
                                        "pretrain.delta_max = 3\n"
                                        "train.epochs = 4\n"
                                        "train.delta_min = -3\n"
                                        "train.delta_max = 3\n"
                                        "baseline.window = 2\n"
                                        "baseline.hidden = 6\n"
                                        "baseline.epochs = 2\n"
                                        "eval.primer = 8\n";
    conf = (dir / "tiny.conf").string();
  }
  void TearDown() override { fs::remove_all(dir); }

  std::string p(const std::string& name) const { return (dir / name).string(); }

  fs::path dir;
  std::string conf;
};

}  // namespace

TEST(CliHelp, ListsEveryConfigKey) {
  const CliRun r = run({"--help"});
  EXPECT_EQ(r.code, kExitOk);
  for (const auto& k : config_keys()) EXPECT_NE(r.out.find(k.name), std::string::npos) << k.name;
  for (const char* sub : {"gen-data", "pretrain", "train", "train-baseline", "eval", "continue", "ensemble"})
    EXPECT_NE(r.out.find(sub), std::string::npos) << sub;
}

TEST(CliUsage, ErrorsExitTwo) {
  EXPECT_EQ(run({}).code, kExitUsage);
  EXPECT_EQ(run({"frobnicate"}).code, kExitUsage);
  const CliRun r = run({"gen-data", "--set", "no.such.key=1", "--out", "/tmp/x"});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("no.such.key"), std::string::npos);
  EXPECT_EQ(run({"gen-data", "--set", "data.alphabet=banana", "--out", "/tmp/x"}).code, kExitUsage);
  EXPECT_EQ(run({"gen-data", "--config", "/nonexistent/file.conf", "--out", "/tmp/x"}).code, kExitUsage);
}

TEST_F(CliTest, GenDataIsByteIdentical) {
  ASSERT_EQ(run({"gen-data", "--config", conf, "--out", p("a")}).code, kExitOk);
  ASSERT_EQ(run({"gen-data", "--config", conf, "--out", p("b")}).code, kExitOk);
  for (const char* f : {"train.txt", "test.txt", "eval.txt", "manifest.txt"})
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
  const Corpus train = read_corpus(p("a/train.txt"));
  EXPECT_EQ(train.size(), 10u * 2u * 2u);
  ASSERT_EQ(run({"gen-data", "--config", conf, "--seed", "5", "--out", p("c")}).code, kExitOk);
  EXPECT_NE(slurp(dir / "a" / "train.txt"), slurp(dir / "c" / "train.txt"));
}

TEST_F(CliTest, ScaleShrinksCounts) {
  ASSERT_EQ(run({"gen-data", "--config", conf, "--set", "data.train_per_cell=8", "--scale", "0.25", "--out", p("s")})
                .code,
            kExitOk);
  EXPECT_EQ(read_corpus(p("s/train.txt")).size(), 10u * 2u * 2u);
  EXPECT_EQ(read_corpus(p("s/test.txt")).size(), 10u * 2u * 1u);
}

TEST_F(CliTest, TrainWithoutGaeFailsClearly) {
  ASSERT_EQ(run({"gen-data", "--config", conf, "--out", p("d")}).code, kExitOk);
  const CliRun r = run({"train", "--config", conf, "--set", "path.train=" + p("d/train.txt"), "--out", p("m.bin")});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("path.gae"), std::string::npos);
}

TEST_F(CliTest, PipelineAssertionsAndResume) {
  ASSERT_EQ(run({"gen-data", "--config", conf, "--out", p("d")}).code, kExitOk);
  const std::string train = "path.train=" + p("d/train.txt");
  ASSERT_EQ(run({"pretrain", "--config", conf, "--set", train, "--out", p("gae.bin")}).code, kExitOk);
  const std::string gae = "path.gae=" + p("gae.bin");
  ASSERT_EQ(run({"train", "--config", conf, "--set", train, gae, "--out", p("full.bin")}).code, kExitOk);

  // Stop after two epochs, then resume: same model bytes and trace.
  ASSERT_EQ(run({"train", "--config", conf, "--set", train, gae, "--stop-after", "2", "--out", p("part.bin")}).code,
            kExitOk);
  EXPECT_FALSE(fs::exists(p("part.bin")));
  ASSERT_EQ(run({"train", "--config", conf, "--set", train, gae, "--resume", "--out", p("part.bin")}).code, kExitOk);
  EXPECT_EQ(slurp(dir / "part.bin"), slurp(dir / "full.bin"));
  EXPECT_EQ(slurp(dir / "part.bin.trace"), slurp(dir / "full.bin.trace"));

  const std::string model = "path.model=" + p("full.bin");
  const std::string test = "path.eval=" + p("d/test.txt");
  EXPECT_EQ(run({"continue", "--config", conf, "--set", model, test, "--out", p("c.report"), "--assert",
                 "precision_mean>=0"})
                .code,
            kExitOk);
  EXPECT_EQ(run({"continue", "--config", conf, "--set", model, test, "--out", p("c.report"), "--assert",
                 "precision_mean>=1.5"})
                .code,
            kExitAssertion);
  EXPECT_EQ(run({"eval", "--config", conf, "--set", model, test, "--out", p("e.report"), "--assert",
                 "mean_ce_bits=0"})
                .code,
            kExitAssertion);
  EXPECT_EQ(run({"eval", "--config", conf, "--set", model, test, "--out", p("e.report"), "--assert", "bogus=1"}).code,
            kExitUsage);
  const EvalReport r = parse_report(p("c.report"));
  EXPECT_EQ(r.model_kind, "rgae");
  EXPECT_TRUE(r.precision_mean.has_value());

  ASSERT_EQ(run({"train-baseline", "--config", conf, "--set", train, "--out", p("base.bin")}).code, kExitOk);
  const std::string members = "path.members=" + p("full.bin") + "," + p("base.bin");
  EXPECT_EQ(run({"ensemble", "--config", conf, "--set", members, test, "--out", p("ens.report")}).code, kExitOk);
  EXPECT_EQ(parse_report(p("ens.report")).model_kind, "ensemble");
  EXPECT_EQ(run({"ensemble", "--config", conf, "--set", "path.members=" + p("full.bin"), test, "--out",
                 p("ens.report")})
                .code,
            kExitUsage);
}
