// SPDX-License-Identifier: Apache-2.0
//
// Drives the installed binary end to end through popen. CINEMAGEN_CLI_PATH
// is injected by the build.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cinemagen/gif.hpp"
#include "cinemagen/png_io.hpp"
#include "cinemagen/synthetic.hpp"
#include "doctest.h"
#include "support/gif_decode.hpp"

using namespace cinemagen;
namespace fs = std::filesystem;

namespace {

struct RunResult {
  int code = -1;
  std::string output;  // stdout + stderr
};

RunResult run_cli(const std::string& args, const std::string& env = "") {
  std::string cmd;
  if (!env.empty()) cmd += env + " ";
  cmd += std::string(CINEMAGEN_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  RunResult r;
  char buf[4096];
  size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.output.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path fresh_dir(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() / ("cinemagen_cli_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f.good());
  return std::string(std::istreambuf_iterator<char>(f), {});
}

size_t count_lines(const std::string& text) {
  size_t lines = 0;
  for (char c : text)
    if (c == '\n') ++lines;
  return lines;
}

bool contains(const std::string& hay, const std::string& needle) {
  return hay.find(needle) != std::string::npos;
}

}  // namespace

TEST_CASE("help and usage errors") {
  CHECK(run_cli("--help").code == 0);
  CHECK(contains(run_cli("--help").output, "gen-data"));
  CHECK(run_cli("train --help").code == 0);
  CHECK(run_cli("").code == 2);           // a subcommand is required
  CHECK(run_cli("gen-data --bogus 1").code == 2);
  CHECK(run_cli("frobnicate").code == 2);
}

TEST_CASE("configuration errors exit 2, runtime errors exit 1") {
  const fs::path dir = fresh_dir("errs");
  RunResult r = run_cli("gen-data --kind X --out " + (dir / "d").string());
  CHECK(r.code == 2);
  CHECK(contains(r.output, "pattern"));

  r = run_cli("train --iterations 1 --out " + (dir / "t").string());
  CHECK(r.code == 2);  // --data is required
  CHECK(contains(r.output, "--data"));

  r = run_cli("train --data " + (dir / "absent").string() +
              " --iterations 1 --out " + (dir / "t").string());
  CHECK(r.code == 1);  // dataset directory does not exist

  r = run_cli("evaluate --data " + (dir / "absent").string() +
              " --baseline none --out " + (dir / "e").string());
  CHECK(r.code == 2);  // nothing to score, caught before I/O
  fs::remove_all(dir);
}

TEST_CASE("gen-data is reproducible and reports the split") {
  const fs::path dir = fresh_dir("gendata");
  const std::string common = "gen-data --kind I --count 12 --size 16 --seed 5";
  const fs::path a = dir / "a";
  const fs::path b = dir / "b";

  RunResult r = run_cli(common + " --out " + a.string());
  CHECK(r.code == 0);
  CHECK(contains(r.output, "count=12"));
  CHECK(contains(r.output, "seq_len=27"));
  CHECK(fs::exists(a / "manifest.txt"));
  CHECK(fs::exists(a / "train.bin"));
  CHECK(fs::exists(a / "test.bin"));
  CHECK(fs::exists(a / "config.txt"));

  CHECK(run_cli(common + " --out " + b.string()).code == 0);
  CHECK(slurp(a / "train.bin") == slurp(b / "train.bin"));
  CHECK(slurp(a / "test.bin") == slurp(b / "test.bin"));
  CHECK(slurp(a / "manifest.txt") == slurp(b / "manifest.txt"));
  fs::remove_all(dir);
}

TEST_CASE("config file layering: defaults < file < flags") {
  const fs::path dir = fresh_dir("layering");
  std::ofstream(dir / "run.cfg") << "kind = O\ncount = 10\nsize = 16\n";

  // The flag wins over the file; the file wins over the default.
  RunResult r = run_cli("gen-data --config " + (dir / "run.cfg").string() +
                        " --count 21 --out " + (dir / "a").string());
  CHECK(r.code == 0);
  CHECK(contains(r.output, "dataset O"));
  CHECK(contains(r.output, "count=21"));

  // The snapshot in the output directory reproduces the run byte for byte.
  const std::string snap = slurp(dir / "a" / "config.txt");
  CHECK(contains(snap, "kind = O"));
  CHECK(contains(snap, "count = 21"));
  r = run_cli("gen-data --config " + (dir / "a" / "config.txt").string() +
              " --out " + (dir / "b").string());
  CHECK(r.code == 0);
  CHECK(slurp(dir / "a" / "train.bin") == slurp(dir / "b" / "train.bin"));

  std::ofstream(dir / "bad.cfg") << "kind = O\nbanana = 1\n";
  r = run_cli("gen-data --config " + (dir / "bad.cfg").string() + " --out " +
              (dir / "c").string());
  CHECK(r.code == 2);
  CHECK(contains(r.output, "banana"));
  fs::remove_all(dir);
}

TEST_CASE("CINEMAGEN_OUT_ROOT supplies the default output root") {
  const fs::path root = fresh_dir("outroot");
  RunResult r = run_cli("gen-data --kind I --count 4 --size 16 --seed 2",
                        "CINEMAGEN_OUT_ROOT=" + root.string());
  CHECK(r.code == 0);
  CHECK(fs::exists(root / "dataset-I" / "manifest.txt"));
  fs::remove_all(root);
}

TEST_CASE("pipeline: train, generate, evaluate") {
  const fs::path dir = fresh_dir("pipeline");
  const fs::path data = dir / "data";
  REQUIRE(run_cli("gen-data --kind O --count 45 --size 16 --seed 7 --out " +
                  data.string())
              .code == 0);

  // --- train ---
  const fs::path tdir = dir / "train";
  const std::string train_args =
      "train --data " + data.string() +
      " --variant rnn_dqn --z_dim 8 --n_actions 4 --horizon 2"
      " --batch_size 2 --iterations 4 --d_pairs 2 --seed 3 --out " +
      tdir.string();
  RunResult r = run_cli(train_args);
  CHECK(r.code == 0);
  CHECK(contains(r.output, "trained rnn_dqn"));
  const fs::path ckpt = tdir / "checkpoint_000004.ckpt";
  REQUIRE(fs::exists(ckpt));
  CHECK(count_lines(slurp(tdir / "loss.csv")) == 5);  // header + 4 rows
  CHECK(contains(slurp(tdir / "config.txt"), "variant = rnn_dqn"));

  // --- generate ---
  const Dataset test = load_dataset(data.string(), Split::test);
  REQUIRE(!test.samples.empty());
  const fs::path input = dir / "input.png";
  write_png(input.string(), test.samples[0].frames[0]);

  const fs::path gdir = dir / "gen";
  const std::string gen_args = "generate --checkpoint " + ckpt.string() +
                               " --input " + input.string() +
                               " --frames 3 --delay_cs 7 --loop 2 --out ";
  r = run_cli(gen_args + gdir.string());
  CHECK(r.code == 0);
  std::vector<ImageU8> pngs;
  for (int t = 0; t < 3; ++t) {
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%03d.png", t);
    REQUIRE(fs::exists(gdir / name));
    pngs.push_back(read_png((gdir / name).string()));
  }

  const gifdec::DecodedGif gif = gifdec::decode_gif((gdir / "sequence.gif").string());
  CHECK(gif.w == 16);
  CHECK(gif.h == 16);
  REQUIRE(gif.frames.size() == 3);
  for (int d : gif.delays_cs) CHECK(d == 7);
  CHECK(gif.has_loop_ext);
  CHECK(gif.loop_count == 2);

  // Every GIF pixel is the palette image of the PNG pixel, which makes the
  // two outputs consistent whether or not quantization kicked in.
  const GifPalette pal = build_gif_palette(pngs);
  for (size_t t = 0; t < 3; ++t) {
    for (int64_t y = 0; y < 16; ++y)
      for (int64_t x = 0; x < 16; ++x) {
        const int idx = pal.index_of(pngs[t].at(y, x, 0), pngs[t].at(y, x, 1),
                                     pngs[t].at(y, x, 2));
        for (int64_t c = 0; c < 3; ++c) {
          CHECK(gif.frames[t].at(y, x, c) ==
                pal.colors[static_cast<size_t>(3 * idx + c)]);
        }
      }
  }

  // Chosen actions: one index per generated frame, inside [0, n_actions).
  REQUIRE(fs::exists(gdir / "actions.txt"));
  std::ifstream af(gdir / "actions.txt");
  std::vector<int64_t> acts;
  int64_t v;
  while (af >> v) acts.push_back(v);
  REQUIRE(acts.size() == 3);
  for (int64_t a : acts) {
    CHECK(a >= 0);
    CHECK(a < 4);
  }

  // Regeneration is byte-identical.
  const fs::path gdir2 = dir / "gen2";
  REQUIRE(run_cli(gen_args + gdir2.string()).code == 0);
  CHECK(slurp(gdir / "sequence.gif") == slurp(gdir2 / "sequence.gif"));
  CHECK(slurp(gdir / "frame_000.png") == slurp(gdir2 / "frame_000.png"));

  // Mismatched input size is a runtime failure.
  const fs::path big = dir / "big.png";
  write_png(big.string(), ImageU8(32, 32, 3));
  CHECK(run_cli("generate --checkpoint " + ckpt.string() + " --input " +
                big.string() + " --out " + (dir / "genbad").string())
            .code == 1);

  // --- evaluate ---
  const fs::path edir = dir / "eval";
  const std::string eval_args = "evaluate --checkpoint " + ckpt.string() +
                                " --data " + data.string() + " --out ";
  r = run_cli(eval_args + edir.string());
  CHECK(r.code == 0);
  CHECK(contains(r.output, "rnn_dqn:"));
  CHECK(contains(r.output, "constant:"));

  const std::string csv = slurp(edir / "report.csv");
  std::istringstream lines(csv);
  std::string header;
  std::getline(lines, header);
  CHECK(header ==
        "method,category,sequence,psnr_raw,ssim_raw,psnr_diff,ssim_diff,"
        "center_distance");
  // 2 test sequences + a mean row, for the model and for the baseline.
  CHECK(count_lines(csv) == 7);
  CHECK(fs::exists(edir / "report.txt"));
  CHECK(contains(slurp(edir / "report.txt"), "constant"));

  const fs::path edir2 = dir / "eval2";
  REQUIRE(run_cli(eval_args + edir2.string()).code == 0);
  CHECK(slurp(edir / "report.csv") == slurp(edir2 / "report.csv"));
  CHECK(slurp(edir / "report.txt") == slurp(edir2 / "report.txt"));

  // Metric filtering trims the columns.
  const fs::path edir3 = dir / "eval3";
  r = run_cli("evaluate --checkpoint " + ckpt.string() + " --data " +
              data.string() + " --metrics psnr --out " + edir3.string());
  CHECK(r.code == 0);
  std::istringstream lines3(slurp(edir3 / "report.csv"));
  std::getline(lines3, header);
  CHECK(header == "method,category,sequence,psnr_raw,psnr_diff");

  CHECK(run_cli("evaluate --checkpoint " + ckpt.string() + " --data " +
                data.string() + " --metrics nope --out " +
                (dir / "evalbad").string())
            .code == 2);
  fs::remove_all(dir);
}

TEST_CASE("ablate sweeps dims deterministically") {
  const fs::path dir = fresh_dir("ablate");
  const fs::path data = dir / "data";
  REQUIRE(run_cli("gen-data --kind O --count 24 --size 16 --seed 13 --out " +
                  data.string())
              .code == 0);

  const std::string common =
      "ablate --data " + data.string() +
      " --variant rnn --horizon 2 --batch_size 2 --iterations 2 "
      "--d_pairs 1 --seed 4 --dims 2x2,4x2 --out ";
  const fs::path a = dir / "a";
  RunResult r = run_cli(common + a.string());
  CHECK(r.code == 0);
  CHECK(contains(r.output, "z=2 n=2:"));
  CHECK(contains(r.output, "z=4 n=2:"));

  const std::string csv = slurp(a / "ablation.csv");
  std::istringstream lines(csv);
  std::string header;
  std::getline(lines, header);
  CHECK(header == "z_dim,n_actions,mean_psnr,mean_ssim");
  CHECK(count_lines(csv) == 3);  // header + one row per setting
  CHECK(contains(slurp(a / "ablation.txt"), "variant=rnn"));

  const fs::path b = dir / "b";
  REQUIRE(run_cli(common + b.string()).code == 0);
  CHECK(slurp(a / "ablation.csv") == slurp(b / "ablation.csv"));

  CHECK(run_cli("ablate --data " + data.string() + " --dims 4x --out " +
                (dir / "bad").string())
            .code == 2);
  fs::remove_all(dir);
}
