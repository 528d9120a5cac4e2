// SPDX-License-Identifier: Apache-2.0
//
// cinemagen CLI: gen-data | train | generate | evaluate | ablate.
//
// Settings resolve as defaults < config file (--config) < explicit flags,
// and the resolved set is written to <out>/config.txt so any run can be
// reproduced from its snapshot. Exit codes: 0 success, 1 runtime/I-O
// failure, 2 usage or configuration error.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cinemagen/config.hpp"
#include "cinemagen/errors.hpp"
#include "cinemagen/evaluate.hpp"
#include "cinemagen/gif.hpp"
#include "cinemagen/png_io.hpp"
#include "cinemagen/synthetic.hpp"
#include "cinemagen/textures.hpp"
#include "cinemagen/train.hpp"

namespace fs = std::filesystem;
using namespace cinemagen;

namespace {

std::string out_root() {
  const char* env = std::getenv("CINEMAGEN_OUT_ROOT");
  return env && *env ? env : "runs";
}

std::string fmt9(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

// defaults < config file < flags, with every resolved key recorded in the
// snapshot that lands in the output directory.
struct Settings {
  CLI::App* cmd = nullptr;
  RunConfig file;
  RunConfig snap;

  void load_file(const std::string& path,
                 const std::vector<std::string>& known) {
    if (path.empty()) return;
    file = load_config(path);
    check_known_keys(file, known);
  }
  bool flag_given(const std::string& key) const {
    return cmd->count("--" + key) > 0;
  }
  std::string str(const std::string& key, const std::string& flag_val) {
    const std::string v = flag_given(key) ? flag_val : file.get(key, flag_val);
    snap.set(key, v);
    return v;
  }
  int64_t num(const std::string& key, int64_t flag_val) {
    const int64_t v = flag_given(key) ? flag_val : file.get_int(key, flag_val);
    snap.set(key, std::to_string(v));
    return v;
  }
  uint64_t u64(const std::string& key, uint64_t flag_val) {
    const uint64_t v = flag_given(key) ? flag_val : file.get_u64(key, flag_val);
    snap.set(key, std::to_string(v));
    return v;
  }
  double real(const std::string& key, double flag_val) {
    const double v =
        flag_given(key) ? flag_val : file.get_double(key, flag_val);
    snap.set(key, fmt9(v));
    return v;
  }

  // Creates the output directory and drops the snapshot into it.
  std::string finish_out(const std::string& out) {
    fs::create_directories(out);
    save_config(snap, (fs::path(out) / "config.txt").string());
    return out;
  }
};

QFill qfill_from_name(const std::string& name) {
  if (name == "zeros") return QFill::zeros;
  if (name == "onehot0") return QFill::onehot0;
  throw ConfigError("unknown rnn_q_fill '" + name +
                    "' (expected zeros or onehot0)");
}

std::string qfill_name(QFill fill) {
  return fill == QFill::zeros ? "zeros" : "onehot0";
}

// ---------------------------------------------------------------------------
// gen-data

struct GenDataOpts {
  std::string config, kind = "I", textures, out;
  int64_t count = 100, size = 32;
  uint64_t seed = 1;
};

void run_gen_data(const GenDataOpts& o, CLI::App* cmd) {
  Settings s{cmd};
  s.load_file(o.config, {"kind", "count", "size", "seed", "textures", "out"});
  const std::string kind_name = s.str("kind", o.kind);
  const PatternKind kind = pattern_from_name(kind_name);
  const int64_t count = s.num("count", o.count);
  const int64_t size = s.num("size", o.size);
  const uint64_t seed = s.u64("seed", o.seed);
  std::string textures = s.str("textures", o.textures);
  if (textures.empty()) textures = default_texture_dir();
  const std::string out =
      s.str("out", o.out.empty() ? out_root() + "/dataset-" + kind_name
                                 : o.out);

  fs::create_directories(out);
  const DatasetManifest m =
      generate_dataset(textures, kind, count, size, seed, out);
  s.finish_out(out);
  std::cout << "dataset " << pattern_name(m.kind) << ": count=" << m.count
            << " size=" << m.size << " seq_len=" << m.seq_len
            << " train=" << m.train_count << " test=" << m.test_count
            << " -> " << out << "\n";
}

// ---------------------------------------------------------------------------
// train

struct TrainOpts {
  std::string config, data, variant = "rnn_dqn", out, resume;
  std::string rnn_q_fill = "zeros";
  int64_t z_dim = 64, n_actions = 64, horizon = 4, batch_size = 16;
  int64_t iterations = 1000, d_pairs = 4, checkpoint_interval = 0;
  double learning_rate = 0.0002, lambda_adv = 0.005;
  uint64_t seed = 1;
};

const std::vector<std::string> kTrainKeys = {
    "data",          "variant",    "z_dim",
    "n_actions",     "horizon",    "batch_size",
    "iterations",    "learning_rate", "lambda_adv",
    "seed",          "d_pairs",    "checkpoint_interval",
    "rnn_q_fill",    "resume",     "out"};

TrainConfig resolve_train_config(Settings& s, const TrainOpts& o) {
  TrainConfig c;
  c.variant = variant_from_name(s.str("variant", o.variant));
  c.z_dim = s.num("z_dim", o.z_dim);
  c.n_actions = s.num("n_actions", o.n_actions);
  c.horizon = s.num("horizon", o.horizon);
  c.batch_size = s.num("batch_size", o.batch_size);
  c.iterations = s.num("iterations", o.iterations);
  c.learning_rate = static_cast<float>(s.real("learning_rate", o.learning_rate));
  c.lambda_adv = static_cast<float>(s.real("lambda_adv", o.lambda_adv));
  c.seed = s.u64("seed", o.seed);
  c.d_pairs = s.num("d_pairs", o.d_pairs);
  c.checkpoint_interval = s.num("checkpoint_interval", o.checkpoint_interval);
  c.rnn_q_fill = qfill_from_name(s.str("rnn_q_fill", o.rnn_q_fill));
  return c;
}

void run_train(const TrainOpts& o, CLI::App* cmd) {
  Settings s{cmd};
  s.load_file(o.config, kTrainKeys);
  const std::string data_dir = s.str("data", o.data);
  if (data_dir.empty()) {
    throw ConfigError("train: a dataset directory is required (--data)");
  }
  TrainConfig config = resolve_train_config(s, o);
  const std::string resume = s.str("resume", o.resume);
  config.out_dir = s.str(
      "out", o.out.empty()
                 ? out_root() + "/train-" + variant_name(config.variant)
                 : o.out);
  config.validate();

  const Dataset data = load_dataset(data_dir, Split::train);
  s.finish_out(config.out_dir);
  const TrainedModel model = train(data, config, resume);

  const LossRecord& last = model.records.back();
  char iter_buf[16];
  std::snprintf(iter_buf, sizeof(iter_buf), "%06lld",
                static_cast<long long>(config.iterations));
  std::cout << "trained " << variant_name(config.variant) << " for "
            << config.iterations << " iterations: loss_total="
            << fmt9(last.loss_total) << " d_loss=" << fmt9(last.d_loss)
            << "\ncheckpoint: "
            << (fs::path(config.out_dir) /
                ("checkpoint_" + std::string(iter_buf) + ".ckpt"))
                   .string()
            << "\n";
}

// ---------------------------------------------------------------------------
// generate

struct GenerateOpts {
  std::string config, checkpoint, input, out;
  int64_t frames = 0;  // 0 = the checkpoint's training horizon
  int64_t delay_cs = 10, loop = 0;
};

void run_generate(const GenerateOpts& o, CLI::App* cmd) {
  Settings s{cmd};
  s.load_file(o.config, {"checkpoint", "input", "frames", "delay_cs", "loop",
                         "out"});
  const std::string ckpt_path = s.str("checkpoint", o.checkpoint);
  const std::string input_path = s.str("input", o.input);
  if (ckpt_path.empty() || input_path.empty()) {
    throw ConfigError("generate: --checkpoint and --input are required");
  }
  int64_t n = s.num("frames", o.frames);
  const int64_t delay_cs = s.num("delay_cs", o.delay_cs);
  const int64_t loop = s.num("loop", o.loop);
  const std::string out =
      s.str("out", o.out.empty() ? out_root() + "/generate" : o.out);

  const TrainedModel model =
      model_from_checkpoint(load_train_checkpoint(ckpt_path));
  if (n == 0) n = model.config.horizon;
  if (n < 1) throw ConfigError("generate: frames must be >= 1");
  s.snap.set("frames", std::to_string(n));

  const ImageU8 input = read_png(input_path);
  const int64_t size = model.gen.config.image_size;
  if (input.h != size || input.w != size || input.c != 3) {
    throw DimensionError("generate: checkpoint expects " +
                         std::to_string(size) + "x" + std::to_string(size) +
                         " RGB input, got " + std::to_string(input.h) + "x" +
                         std::to_string(input.w) + "x" +
                         std::to_string(input.c));
  }

  Tensor x({1, 3, size, size});
  blit_frame(input, x.data());
  std::vector<std::vector<int64_t>> actions;
  const QNetworkParams* qnet =
      model.config.variant == Variant::rnn_dqn ? &model.qnet : nullptr;
  const std::vector<Tensor> frames =
      generate(model.gen, qnet, model.config.variant, x, n, &actions,
               model.config.rnn_q_fill);

  s.finish_out(out);
  std::vector<ImageU8> images;
  images.reserve(frames.size());
  for (size_t t = 0; t < frames.size(); ++t) {
    images.push_back(frame_to_image(frames[t], 0));
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%03zu.png", t);
    write_png((fs::path(out) / name).string(), images.back());
  }
  GifOptions gif;
  gif.delay_cs = static_cast<int>(delay_cs);
  gif.loop_count = static_cast<int>(loop);
  const std::string gif_path = (fs::path(out) / "sequence.gif").string();
  write_gif(gif_path, images, gif);

  if (model.config.variant == Variant::rnn_dqn) {
    std::ofstream af(fs::path(out) / "actions.txt");
    if (!af) throw IoError("generate: cannot write actions.txt");
    for (const auto& step : actions) af << step[0] << "\n";
  }
  std::cout << "generated " << n << " frames -> " << gif_path << "\n";
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateOpts {
  std::string config, data, metrics = "psnr,ssim,center";
  std::string baseline = "constant", out;
  std::vector<std::string> checkpoints;
  int64_t horizon = 0;  // 0 = first checkpoint's training horizon
};

std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (const auto& p : parts) {
    if (!out.empty()) out += sep;
    out += p;
  }
  return out;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::stringstream ss(text);
  while (std::getline(ss, item, sep))
    if (!item.empty()) out.push_back(item);
  return out;
}

void run_evaluate(const EvaluateOpts& o, CLI::App* cmd) {
  Settings s{cmd};
  s.load_file(o.config,
              {"checkpoint", "data", "horizon", "metrics", "baseline", "out"});
  const std::vector<std::string> checkpoints =
      split(s.str("checkpoint", join(o.checkpoints, ',')), ',');
  const std::string data_dir = s.str("data", o.data);
  int64_t horizon = s.num("horizon", o.horizon);
  const MetricSelection select =
      metric_selection_from_list(s.str("metrics", o.metrics));
  const std::string baseline = s.str("baseline", o.baseline);
  if (baseline != "constant" && baseline != "none") {
    throw ConfigError("unknown baseline '" + baseline +
                      "' (expected constant or none)");
  }
  const std::string out =
      s.str("out", o.out.empty() ? out_root() + "/evaluate" : o.out);
  if (data_dir.empty()) {
    throw ConfigError("evaluate: a dataset directory is required (--data)");
  }
  if (checkpoints.empty() && baseline == "none") {
    throw ConfigError("evaluate: nothing to score (no checkpoint, no baseline)");
  }

  const Dataset test = load_dataset(data_dir, Split::test);
  std::vector<SequenceEval> rows;
  for (const std::string& path : checkpoints) {
    const TrainedModel model =
        model_from_checkpoint(load_train_checkpoint(path));
    if (horizon == 0) horizon = model.config.horizon;
    const auto model_rows = evaluate_model(model, test, horizon);
    rows.insert(rows.end(), model_rows.begin(), model_rows.end());
  }
  if (baseline == "constant") {
    if (horizon == 0) horizon = 4;
    const auto base_rows = evaluate_constant(test, horizon);
    rows.insert(rows.end(), base_rows.begin(), base_rows.end());
  }

  const EvalReport report = make_report(std::move(rows), horizon);
  s.snap.set("horizon", std::to_string(horizon));
  s.finish_out(out);
  const std::string csv_path = (fs::path(out) / "report.csv").string();
  const std::string table_path = (fs::path(out) / "report.txt").string();
  write_eval_csv(csv_path, report, select);
  write_eval_table(table_path, report, select);

  for (const auto& a : report.aggregates) {
    if (a.category != "all") continue;
    std::cout << a.method << ": psnr_raw=" << fmt9(a.psnr_raw)
              << " ssim_raw=" << fmt9(a.ssim_raw)
              << " psnr_diff=" << fmt9(a.psnr_diff)
              << " ssim_diff=" << fmt9(a.ssim_diff)
              << " center=" << fmt9(a.center_dist) << "\n";
  }
  std::cout << "report: " << csv_path << "\n";
}

// ---------------------------------------------------------------------------
// ablate

struct AblateOpts {
  TrainOpts train;  // shared training settings (z_dim/n_actions ignored)
  std::string dims = "4x4,64x64";
};

std::vector<AblationSetting> parse_dims(const std::string& text) {
  std::vector<AblationSetting> dims;
  for (const std::string& part : split(text, ',')) {
    const size_t x = part.find('x');
    if (x == std::string::npos) {
      throw ConfigError("ablate: bad dims entry '" + part +
                        "' (expected ZxN, e.g. 4x4)");
    }
    try {
      AblationSetting s;
      s.z_dim = std::stoll(part.substr(0, x));
      s.n_actions = std::stoll(part.substr(x + 1));
      dims.push_back(s);
    } catch (const std::exception&) {
      throw ConfigError("ablate: bad dims entry '" + part + "'");
    }
  }
  if (dims.empty()) throw ConfigError("ablate: dims list is empty");
  return dims;
}

void run_ablate(const AblateOpts& o, CLI::App* cmd) {
  Settings s{cmd};
  std::vector<std::string> known = kTrainKeys;
  known.push_back("dims");
  s.load_file(o.train.config, known);
  const std::string data_dir = s.str("data", o.train.data);
  if (data_dir.empty()) {
    throw ConfigError("ablate: a dataset directory is required (--data)");
  }
  TrainConfig base = resolve_train_config(s, o.train);
  const std::vector<AblationSetting> dims =
      parse_dims(s.str("dims", o.dims));
  base.out_dir = s.str(
      "out", o.train.out.empty() ? out_root() + "/ablate" : o.train.out);
  base.validate();

  const Dataset train_data = load_dataset(data_dir, Split::train);
  const Dataset test_data = load_dataset(data_dir, Split::test);
  s.finish_out(base.out_dir);
  const std::vector<AblationRow> rows =
      ablation_run(train_data, test_data, base, dims);

  write_ablation_csv((fs::path(base.out_dir) / "ablation.csv").string(), rows);
  write_ablation_table((fs::path(base.out_dir) / "ablation.txt").string(),
                       rows, base);
  for (const auto& r : rows) {
    std::cout << "z=" << r.z_dim << " n=" << r.n_actions
              << ": psnr=" << fmt9(r.mean_psnr)
              << " ssim=" << fmt9(r.mean_ssim) << "\n";
  }
  std::cout << "report: " << base.out_dir << "/ablation.csv\n";
}

void add_train_options(CLI::App* cmd, TrainOpts& o) {
  cmd->add_option("--config", o.config, "key = value settings file");
  cmd->add_option("--data", o.data, "dataset directory (from gen-data)");
  cmd->add_option("--variant", o.variant, "rnn | rnn_dqn | stateless");
  cmd->add_option("--z_dim", o.z_dim, "latent dimension");
  cmd->add_option("--n_actions", o.n_actions, "Q-vector dimension");
  cmd->add_option("--horizon", o.horizon, "generated frames per sequence");
  cmd->add_option("--batch_size", o.batch_size, "sequences per iteration");
  cmd->add_option("--iterations", o.iterations, "training iterations");
  cmd->add_option("--learning_rate", o.learning_rate, "Adam learning rate");
  cmd->add_option("--lambda_adv", o.lambda_adv, "adversarial loss weight");
  cmd->add_option("--seed", o.seed, "master RNG seed");
  cmd->add_option("--d_pairs", o.d_pairs,
                  "(sample, step) pairs per discriminator step");
  cmd->add_option("--checkpoint_interval", o.checkpoint_interval,
                  "iterations between checkpoints (0 = final only)");
  cmd->add_option("--rnn_q_fill", o.rnn_q_fill,
                  "rnn-variant Q-slot content: zeros | onehot0");
  cmd->add_option("--out", o.out, "output directory");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cinemagraph pipeline: synthetic data, training, generation, "
               "evaluation"};
  app.require_subcommand(1);

  auto gen_data = std::make_shared<GenDataOpts>();
  CLI::App* gd = app.add_subcommand("gen-data", "generate a synthetic dataset");
  gd->add_option("--config", gen_data->config, "key = value settings file");
  gd->add_option("--kind", gen_data->kind,
                 "pattern: I | O | L | eight | rotate | scale");
  gd->add_option("--count", gen_data->count, "number of sequences");
  gd->add_option("--size", gen_data->size, "frame side in pixels");
  gd->add_option("--seed", gen_data->seed, "master RNG seed");
  gd->add_option("--textures", gen_data->textures,
                 "background texture directory");
  gd->add_option("--out", gen_data->out, "output directory");
  gd->callback([gen_data, gd] { run_gen_data(*gen_data, gd); });

  auto train_opts = std::make_shared<TrainOpts>();
  CLI::App* tr = app.add_subcommand("train", "train a model on a dataset");
  add_train_options(tr, *train_opts);
  tr->add_option("--resume", train_opts->resume,
                 "checkpoint to continue from");
  tr->callback([train_opts, tr] { run_train(*train_opts, tr); });

  auto gen = std::make_shared<GenerateOpts>();
  CLI::App* ge = app.add_subcommand(
      "generate", "roll a checkpoint forward from one input frame");
  ge->add_option("--config", gen->config, "key = value settings file");
  ge->add_option("--checkpoint", gen->checkpoint, "trained checkpoint");
  ge->add_option("--input", gen->input, "input PNG frame");
  ge->add_option("--frames", gen->frames,
                 "frames to generate (0 = training horizon)");
  ge->add_option("--delay_cs", gen->delay_cs,
                 "GIF frame delay in centiseconds");
  ge->add_option("--loop", gen->loop, "GIF loop count (0 = forever)");
  ge->add_option("--out", gen->out, "output directory");
  ge->callback([gen, ge] { run_generate(*gen, ge); });

  auto ev = std::make_shared<EvaluateOpts>();
  CLI::App* ea = app.add_subcommand("evaluate", "score checkpoints on a "
                                                "held-out test split");
  ea->add_option("--config", ev->config, "key = value settings file");
  ea->add_option("--checkpoint", ev->checkpoints,
                 "trained checkpoint (repeatable)");
  ea->add_option("--data", ev->data, "dataset directory");
  ea->add_option("--horizon", ev->horizon,
                 "frames to score (0 = checkpoint horizon)");
  ea->add_option("--metrics", ev->metrics, "comma list: psnr, ssim, center");
  ea->add_option("--baseline", ev->baseline, "constant | none");
  ea->add_option("--out", ev->out, "output directory");
  ea->callback([ev, ea] { run_evaluate(*ev, ea); });

  auto ab = std::make_shared<AblateOpts>();
  CLI::App* ablate = app.add_subcommand(
      "ablate", "sweep z/Q dimensions with shared training settings");
  add_train_options(ablate, ab->train);
  ablate->add_option("--dims", ab->dims,
                     "comma list of ZxN settings, e.g. 4x4,64x64");
  ablate->callback([ab, ablate] { run_ablate(*ab, ablate); });

  try {
    app.parse(argc, argv);
    return 0;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (...) {
    std::cerr << "error: unknown failure\n";
    return 1;
  }
}
