// Copyright 2026 The cttlstm Authors. Apache 2.0 License.
#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "cttl/io.hpp"
#include "doctest.h"
#include "helpers.hpp"

using cttl::testing::TempDir;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
};

Run cli(const TempDir& dir, const std::string& args) {
  const fs::path log = dir / "log.txt";
  const std::string cmd = std::string(CTTL_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

std::size_t lines(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string l; std::getline(in, l);) ++n;
  return n;
}

const char* kConfig =
    "cell = conv-tt-lstm\n"
    "channels = 4\n"
    "kernel = 3\n"
    "order = 2\n"
    "steps = 2\n"
    "ranks = 2\n"
    "canvas = 12\n"
    "sprite_size = 4\n"
    "speed_min = 0.5\n"
    "speed_max = 1\n"
    "sequence_length = 6\n"
    "train_count = 8\n"
    "val_count = 2\n"
    "test_count = 3\n"
    "data_seed = 4\n"
    "context_len = 3\n"
    "horizon = 3\n"
    "batch_size = 2\n"
    "epochs = 2\n"
    "steps_per_epoch = 2\n";

}  // namespace

TEST_CASE("usage errors exit with 2") {
  TempDir dir("cli_usage");
  CHECK(cli(dir, "").code == 2);
  CHECK(cli(dir, "bogus").code == 2);
  CHECK(cli(dir, "train --out x").code == 2);
  CHECK(cli(dir, "analyze --frame-dims 0x4").code == 2);
  CHECK(cli(dir, "analyze --preset nine-layer").code == 2);
  CHECK(cli(dir, "verify --mutation shuffle").code == 2);
  std::ofstream(dir / "bad.cfg") << "kernel = 3\nunknown_key = 1\n";
  const auto r = cli(dir, "analyze --config " + (dir / "bad.cfg").string());
  CHECK(r.code == 2);
  CHECK(r.out.find("line 2") != std::string::npos);
  CHECK(cli(dir, "--help").code == 0);
}

TEST_CASE("analyze reports totals and ratios") {
  TempDir dir("cli_analyze");
  auto r = cli(dir, "analyze --preset twelve-layer --compare --csv " + (dir / "c.csv").string());
  CHECK(r.code == 0);
  CHECK(r.out.find("ratio") != std::string::npos);
  CHECK(lines(dir / "c.csv") == 14);
  r = cli(dir, "analyze --preset four-layer --cell conv-lstm --frame-dims 32x48");
  CHECK(r.code == 0);
  CHECK(r.out.find("32x48") != std::string::npos);
}

TEST_CASE("quick verification passes and a mutation fails it") {
  TempDir dir("cli_verify");
  const auto ok = cli(dir, "verify --quick");
  CHECK(ok.code == 0);
  CHECK(ok.out.find("all checks passed") != std::string::npos);
  const auto bad = cli(dir, "verify --quick --mutation transpose-kernel");
  CHECK(bad.code == 1);
  CHECK(bad.out.find("FAIL") != std::string::npos);
}

TEST_CASE("generate, train, resume and evaluate") {
  TempDir dir("cli_flow");
  const std::string cfg = (dir / "exp.cfg").string(), data = (dir / "data").string();
  std::ofstream(cfg) << kConfig;

  auto r = cli(dir, "generate-data --config " + cfg + " --out " + data);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("fnv1a") != std::string::npos);
  const auto sum = cttl::file_checksum(dir / "data" / "train.tc");
  REQUIRE(cli(dir, "generate-data --config " + cfg + " --out " + (dir / "again").string()).code == 0);
  CHECK(cttl::file_checksum(dir / "again" / "train.tc") == sum);

  const std::string ckpt = (dir / "m.ckpt").string();
  r = cli(dir, "train --config " + cfg + " --data " + data + " --out " + ckpt + " --epochs 1");
  REQUIRE(r.code == 0);
  CHECK(fs::exists(ckpt));
  CHECK(fs::exists(ckpt + ".last"));
  CHECK(lines(ckpt + ".metrics.csv") == 2);

  CHECK(cli(dir, "train --resume " + ckpt + ".last --config " + cfg + " --data " + data + " --out " + ckpt).code ==
        2);
  r = cli(dir, "train --resume " + ckpt + ".last --data " + data + " --out " + ckpt + " --epochs 2");
  REQUIRE(r.code == 0);
  CHECK(r.out.find("resuming after epoch 1") != std::string::npos);
  CHECK(lines(ckpt + ".metrics.csv") == 3);

  const std::string csv = (dir / "eval.csv").string();
  r = cli(dir, "evaluate --ckpt " + ckpt + " --data " + data + " --csv " + csv + " --export " +
                   (dir / "frames").string());
  REQUIRE(r.code == 0);
  CHECK(lines(csv) == 4);
  CHECK(fs::exists(dir / "frames" / "frame_0002.pgm"));

  r = cli(dir, "evaluate --ckpt " + ckpt + " --data " + data + " --ground-truth --csv " + csv);
  REQUIRE(r.code == 0);
  std::ifstream in(csv);
  std::string line;
  std::getline(in, line);
  CHECK(line == "frame,mse,psnr,ssim");
  while (std::getline(in, line)) CHECK(line.substr(line.find(',')) == ",0,100,1");

  CHECK(cli(dir, "evaluate --ckpt " + ckpt + " --data " + data + " --horizon 9").code == 2);
  CHECK(cli(dir, "evaluate --ckpt " + (dir / "missing").string() + " --data " + data).code == 1);
  CHECK(cli(dir, "train --config " + cfg + " --data " + (dir / "nowhere").string() + " --out " + ckpt).code == 1);
}
