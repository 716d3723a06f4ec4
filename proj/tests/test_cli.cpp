#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "hvs5m/cli.hpp"
#include "hvs5m/io.hpp"
#include "hvs5m/parallel.hpp"
#include "support/tempdir.hpp"

using namespace hvs;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t count_lines(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (std::size_t pos = s.find(needle); pos != std::string::npos; pos = s.find(needle, pos + 1)) ++n;
  return n;
}

// One small synthetic dataset and a briefly trained checkpoint, shared by the suite.
class CliData : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new testutil::TempDir();
    const auto s = run({"synth", "--out", (dir_->path() / "data").string(), "--videos", "10", "--size", "64",
                        "--frames", "4", "--threads", "1"});
    ASSERT_EQ(s.code, 0) << s.err;
    manifest_ = (dir_->path() / "data" / "manifest.txt").string();
    ckpt_ = (dir_->path() / "ck").string();
    const auto t = run({"train", "--manifest", manifest_, "--out", ckpt_, "--epochs", "2", "--lr", "1e-3",
                        "--batch", "3", "--threads", "1"});
    ASSERT_EQ(t.code, 0) << t.err;
    train_out_ = t.out;
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }
  static testutil::TempDir* dir_;
  static std::string manifest_, ckpt_, train_out_;
};

testutil::TempDir* CliData::dir_ = nullptr;
std::string CliData::manifest_, CliData::ckpt_, CliData::train_out_;

}  // namespace

TEST(Cli, UsageErrorsExitTwo) {
  auto r = run({});
  EXPECT_EQ(r.code, 2);
  r = run({"bogus"});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(r.err.rfind("error: usage: ", 0), 0u);
  EXPECT_EQ(count_lines(r.err, "\n"), 1u);
  r = run({"score", "--manifest", "x"});
  EXPECT_EQ(r.code, 2);
  r = run({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("extract-edges"), std::string::npos);
}

TEST(Cli, ConfigPrecedence) {
  testutil::TempDir dir;
  std::ofstream(dir / "c.txt") << "canny.upper = 150\ncanny.lower = 7\ntemphyst.tau = 4\n";
  auto r = run({"config", "--config", (dir / "c.txt").string(), "--set", "canny.lower=9", "--threads", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("canny.upper = 150\n"), std::string::npos);
  EXPECT_NE(r.out.find("canny.lower = 9\n"), std::string::npos);
  EXPECT_NE(r.out.find("temphyst.tau = 4\n"), std::string::npos);
  EXPECT_NE(r.out.find("runtime.threads = 2\n"), std::string::npos);
  r = run({"config"});
  EXPECT_NE(r.out.find("canny.upper = 140\n"), std::string::npos);
  r = run({"config", "--set", "no.such=1"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("no.such"), std::string::npos);
  r = run({"config", "--set", "canny.upper"});
  EXPECT_EQ(r.code, 1);
}

TEST(Cli, ExtractEdgesGuards) {
  testutil::TempDir dir;
  fs::create_directories(dir / "in");
  auto r = run({"extract-edges", "--in", (dir / "in").string(), "--out", (dir / "out").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(r.err.rfind("error: io: no input frames", 0), 0u) << r.err;
  r = run({"extract-edges", "--in", (dir / "in").string(), "--out", (dir / "out").string(), "--u", "50", "--l", "60"});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(r.err.rfind("error: invalid-argument: ", 0), 0u) << r.err;
  r = run({"extract-edges", "--in", (dir / "missing").string(), "--out", (dir / "out").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(r.err.rfind("error: io: ", 0), 0u) << r.err;
}

TEST(Cli, ExtractEdgesWritesBinaryMaps) {
  testutil::TempDir dir;
  fs::create_directories(dir / "in");
  TensorU8 frame({32, 32, 3}, 0);
  for (std::size_t y = 0; y < 32; ++y)
    for (std::size_t x = 16; x < 32; ++x)
      for (std::size_t c = 0; c < 3; ++c) frame(y, x, c) = 200;
  io::write_tensor(dir / "in" / "f0.hvsf", frame);
  auto r = run({"extract-edges", "--in", (dir / "in").string(), "--out", (dir / "out").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto e = std::get<TensorU8>(io::read_tensor(dir / "out" / "f0.hvsf"));
  EXPECT_EQ(e.shape(), (Shape{32, 32, 3}));
  std::size_t on = 0;
  for (auto v : e.data()) {
    EXPECT_TRUE(v == 0 || v == 255);
    on += v == 255;
  }
  EXPECT_EQ(on, 32u * 3);
  r = run({"extract-edges", "--in", (dir / "in").string(), "--out", (dir / "norm").string(), "--normalize"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto n = std::get<TensorF>(io::read_tensor(dir / "norm" / "f0.hvsf"));
  ASSERT_EQ(n.shape(), e.shape());
  for (std::size_t i = 0; i < n.size(); ++i) ASSERT_EQ(n[i], static_cast<float>(e[i]) / 255.0f);
}

TEST_F(CliData, TrainWritesCheckpointAndHistory) {
  EXPECT_EQ(count_lines(train_out_, "\"epoch\""), 2u);
  for (const char* f : {"checkpoint.txt", "config.txt", "fc.weight.hvsf", "history.jsonl", "history.csv", "split.txt"})
    EXPECT_TRUE(fs::exists(fs::path(ckpt_) / f)) << f;
  const auto ck = io::read_checkpoint(ckpt_);
  EXPECT_EQ(ck.params.dims.input, 8704u);
  EXPECT_EQ(ck.input_mean.size(), 8704u);
  EXPECT_EQ(count_lines(slurp(fs::path(ckpt_) / "history.csv"), "\n"), 3u);
}

TEST_F(CliData, ScoreIsReproducible) {
  const auto a = (dir_->path() / "a.txt").string(), b = (dir_->path() / "b.jsonl").string();
  auto r = run({"score", "--manifest", manifest_, "--checkpoint", ckpt_, "--out", a, "--threads", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  r = run({"score", "--manifest", manifest_, "--checkpoint", ckpt_, "--out", b, "--format", "jsonl", "--threads", "3",
           "--plot", (dir_->path() / "plot.csv").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto a2 = (dir_->path() / "a2.txt").string();
  r = run({"score", "--manifest", manifest_, "--checkpoint", ckpt_, "--out", a2, "--threads", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(a), slurp(a2));
  EXPECT_EQ(count_lines(slurp(b), "\n"), 10u);
  EXPECT_EQ(count_lines(slurp(dir_->path() / "plot.csv"), "\n"), 11u);
  r = run({"score", "--manifest", manifest_, "--checkpoint", ckpt_, "--out", "-"});
  EXPECT_EQ(r.out, slurp(a));
}

TEST_F(CliData, ScoreRejectsMismatchedPipeline) {
  auto r = run({"score", "--manifest", manifest_, "--checkpoint", ckpt_, "--out", "-", "--set",
                "ablation.disable_motion=true"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("fc.weight"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("8704"), std::string::npos);
  EXPECT_NE(r.err.find("8192"), std::string::npos);
}

TEST_F(CliData, MissingFeatureFileIsNamed) {
  auto r = run({"score", "--manifest", manifest_, "--checkpoint", ckpt_, "--out", "-", "--set",
                "backbone.motion.kind=file"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("motion"), std::string::npos) << r.err;
  EXPECT_EQ(count_lines(r.err, "\n"), 1u);
}

TEST_F(CliData, EvaluateProtocol) {
  auto r = run({"evaluate", "--manifest", manifest_, "--runs", "1", "--set", "train.epochs=1", "--threads", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.find("mean +- std"), std::string::npos);
  r = run({"evaluate", "--manifest", manifest_, "--runs", "3", "--set", "train.epochs=1", "--threads", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("mean +- std over 3 runs"), std::string::npos) << r.out;
  r = run({"evaluate", "--manifest", manifest_, "--runs", "2", "--set", "train.epochs=1", "--format", "jsonl"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(count_lines(r.out, "\n"), 3u);
  EXPECT_NE(r.out.find("\"aggregate\""), std::string::npos);
  r = run({"evaluate", "--manifest", manifest_, "--checkpoint", ckpt_, "--fixed"});
  ASSERT_EQ(r.code, 0) << r.err;
  r = run({"evaluate", "--manifest", manifest_, "--fixed"});
  EXPECT_EQ(r.code, 1);
  r = run({"evaluate", "--manifest", manifest_, "--runs", "0"});
  EXPECT_EQ(r.code, 1);
}

TEST_F(CliData, AblationChangesCheckpointWidth) {
  const auto out = (dir_->path() / "ck_nomo").string();
  auto r = run({"train", "--manifest", manifest_, "--out", out, "--epochs", "1", "--disable-motion"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(io::read_checkpoint(out).params.dims.input, 8192u);
  r = run({"score", "--manifest", manifest_, "--checkpoint", out, "--out", "-"});
  EXPECT_EQ(r.code, 0) << r.err;  // the checkpoint's own config carries the ablation
}

TEST(Threads, EnvironmentFallback) {
  EXPECT_EQ(resolve_threads(3), 3u);
  ::setenv("HVS5M_THREADS", "2", 1);
  EXPECT_EQ(resolve_threads(0), 2u);
  EXPECT_EQ(resolve_threads(5), 5u);
  ::setenv("HVS5M_THREADS", "junk", 1);
  EXPECT_GE(resolve_threads(0), 1u);
  ::unsetenv("HVS5M_THREADS");
  EXPECT_GE(resolve_threads(0), 1u);
}
