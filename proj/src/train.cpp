// SPDX-License-Identifier: Apache-2.0
#include "cinemagen/train.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <unordered_map>

#include "cinemagen/errors.hpp"
#include "cinemagen/rng.hpp"

namespace cinemagen {

namespace {

constexpr float kProbEps = 1e-7f;

std::string pad_iter(int64_t it) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06" PRId64, it);
  return buf;
}

std::string loss_csv_header() {
  return "iteration,loss_mse,loss_adv,loss_total,d_loss";
}

std::string format_loss_row(const LossRecord& r) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%" PRId64 ",%.9g,%.9g,%.9g,%.9g",
                r.iteration, static_cast<double>(r.loss_mse),
                static_cast<double>(r.loss_adv),
                static_cast<double>(r.loss_total),
                static_cast<double>(r.d_loss));
  return buf;
}

// Optimizer-facing view of the generator side. The stateless variant never
// runs the LSTM, so its parameters are excluded from the update (they would
// otherwise trip the strict missing-gradient check).
ParamSet generator_param_set(TrainedModel& m, bool for_optimizer) {
  ParamSet all = m.gen.params();
  if (m.config.variant == Variant::rnn_dqn) all.extend(m.qnet.params());
  if (!for_optimizer || m.config.variant != Variant::stateless) return all;
  ParamSet filtered;
  for (auto& p : all.items()) {
    if (p.name.rfind("gen/lstm/", 0) == 0) continue;
    filtered.add(p.name, p.tensor);
  }
  return filtered;
}

std::unordered_map<std::string, std::vector<float>> collect_grads(
    const Tape<float>& tape, const ParamSet& params) {
  std::unordered_map<std::string, std::vector<float>> grads;
  grads.reserve(params.size());
  for (const auto& p : params.items()) {
    const auto g = tape.grad(p.tensor);
    grads.emplace(p.name, std::vector<float>(g.begin(), g.end()));
  }
  return grads;
}

Rollout run_rollout(const TrainedModel& m, const Tensor& x) {
  switch (m.config.variant) {
    case Variant::rnn:
      return rollout_rnn(x, m.gen, m.config.horizon, m.config.rnn_q_fill);
    case Variant::rnn_dqn:
      return rollout_rnn_dqn(x, m.gen, m.qnet, m.config.horizon);
    case Variant::stateless:
      return rollout_stateless(x, m.gen, m.config.horizon);
  }
  throw ConfigError("train: unknown variant");
}

void put_u64_scalar(Checkpoint& ckpt, const std::string& name, uint64_t v) {
  ckpt.put_u64(name, {1}, &v, 1);
}

void put_f64_scalar(Checkpoint& ckpt, const std::string& name, double v) {
  ckpt.put_f64(name, {1}, &v, 1);
}

uint64_t get_u64_scalar(const Checkpoint& ckpt, const std::string& name) {
  return ckpt.get_u64(name).at(0);
}

double get_f64_scalar(const Checkpoint& ckpt, const std::string& name) {
  return ckpt.get_f64(name).at(0);
}

void save_adam(Checkpoint& ckpt, const std::string& prefix, AdamState& opt,
               const ParamSet& params) {
  put_u64_scalar(ckpt, prefix + "/step",
                 static_cast<uint64_t>(opt.step_count()));
  for (const auto& p : params.items()) {
    const auto& m = opt.moment_m(p.name, p.tensor.size());
    const auto& v = opt.moment_v(p.name, p.tensor.size());
    ckpt.put_f32(prefix + "/m/" + p.name, {p.tensor.size()}, m.data(), m.size());
    ckpt.put_f32(prefix + "/v/" + p.name, {p.tensor.size()}, v.data(), v.size());
  }
}

void load_adam(const Checkpoint& ckpt, const std::string& prefix,
               AdamState& opt, const ParamSet& params) {
  opt.set_step_count(
      static_cast<int64_t>(get_u64_scalar(ckpt, prefix + "/step")));
  for (const auto& p : params.items()) {
    const auto m = ckpt.get_f32(prefix + "/m/" + p.name);
    const auto v = ckpt.get_f32(prefix + "/v/" + p.name);
    opt.moment_m(p.name, p.tensor.size()) = m;
    opt.moment_v(p.name, p.tensor.size()) = v;
  }
}

void save_rng(Checkpoint& ckpt, const std::string& name, const Rng& rng) {
  const auto s = rng.state();
  ckpt.put_u64(name, {4}, s.data(), s.size());
}

void load_rng(const Checkpoint& ckpt, const std::string& name, Rng& rng) {
  const auto s = ckpt.get_u64(name);
  if (s.size() != 4) throw IoError("checkpoint: bad rng state '" + name + "'");
  rng.set_state({s[0], s[1], s[2], s[3]});
}

}  // namespace

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::rnn: return "rnn";
    case Variant::rnn_dqn: return "rnn_dqn";
    case Variant::stateless: return "stateless";
  }
  throw ConfigError("unknown variant");
}

Variant variant_from_name(const std::string& name) {
  if (name == "rnn") return Variant::rnn;
  if (name == "rnn_dqn") return Variant::rnn_dqn;
  if (name == "stateless") return Variant::stateless;
  throw ConfigError("unknown variant '" + name +
                    "' (expected rnn, rnn_dqn, or stateless)");
}

void TrainConfig::validate() const {
  if (iterations < 1) throw ConfigError("train: iterations must be >= 1");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (horizon < 1) throw ConfigError("train: horizon must be >= 1");
  if (lambda_adv < 0.0f) throw ConfigError("train: lambda_adv must be >= 0");
  if (learning_rate <= 0.0f) throw ConfigError("train: learning_rate must be > 0");
  if (d_pairs < 1) throw ConfigError("train: d_pairs must be >= 1");
  if (z_dim < 1) throw ConfigError("train: z_dim must be >= 1");
  if (n_actions < 1) throw ConfigError("train: n_actions must be >= 1");
  if (checkpoint_interval < 0) {
    throw ConfigError("train: checkpoint_interval must be >= 0");
  }
}

Tensor loss_mse(const std::vector<Tensor>& generated,
                const std::vector<Tensor>& truth) {
  if (generated.empty() || generated.size() != truth.size()) {
    throw DimensionError("loss_mse: sequence lengths differ, " +
                         std::to_string(generated.size()) + " vs " +
                         std::to_string(truth.size()));
  }
  Tensor acc;
  int64_t count = 0;
  for (size_t t = 0; t < generated.size(); ++t) {
    if (generated[t].shape() != truth[t].shape()) {
      throw DimensionError("loss_mse: frame " + std::to_string(t) +
                           " shapes differ, " + shape_str(generated[t].shape()) +
                           " vs " + shape_str(truth[t].shape()));
    }
    const Tensor d = sub(generated[t], truth[t]);
    const Tensor s = sum(mul(d, d));
    acc = acc.defined() ? add(acc, s) : s;
    count += generated[t].size();
  }
  return affine(acc, 1.0f / static_cast<float>(count), 0.0f);
}

Tensor loss_adv(const std::vector<Tensor>& generated,
                const DiscriminatorParams& disc) {
  if (generated.empty()) throw DimensionError("loss_adv: empty sequence");
  Tensor acc;
  int64_t count = 0;
  for (const Tensor& frame : generated) {
    const Tensor p = clamp(discriminate(frame, disc), kProbEps, 1.0f - kProbEps);
    const Tensor s = sum(log_op(p));
    acc = acc.defined() ? add(acc, s) : s;
    count += frame.dim(0);
  }
  return affine(acc, -1.0f / static_cast<float>(count), 0.0f);
}

Tensor loss_discriminator(const Tensor& real, const Tensor& fake,
                          const DiscriminatorParams& disc) {
  const Tensor pr = clamp(discriminate(real, disc), kProbEps, 1.0f - kProbEps);
  const Tensor pf = clamp(discriminate(fake, disc), kProbEps, 1.0f - kProbEps);
  const Tensor real_term =
      affine(sum(log_op(pr)), -1.0f / static_cast<float>(real.dim(0)), 0.0f);
  const Tensor fake_term =
      affine(sum(log_op(affine(pf, -1.0f, 1.0f))),
             -1.0f / static_cast<float>(fake.dim(0)), 0.0f);
  return add(real_term, fake_term);
}

void blit_frame(const ImageU8& img, float* dst) {
  const int64_t hw = img.h * img.w;
  for (int64_t y = 0; y < img.h; ++y)
    for (int64_t x = 0; x < img.w; ++x)
      for (int64_t c = 0; c < 3; ++c)
        dst[c * hw + y * img.w + x] =
            static_cast<float>(img.at(y, x, c)) / 255.0f * 2.0f - 1.0f;
}

Tensor batch_input(const Dataset& data, const std::vector<int64_t>& idx) {
  const int64_t s = data.manifest.size;
  Tensor x({static_cast<int64_t>(idx.size()), 3, s, s});
  for (size_t b = 0; b < idx.size(); ++b) {
    const auto& sample = data.samples.at(static_cast<size_t>(idx[b]));
    blit_frame(sample.frames.at(0), x.data() + static_cast<int64_t>(b) * 3 * s * s);
  }
  return x;
}

std::vector<Tensor> batch_truth(const Dataset& data,
                                const std::vector<int64_t>& idx,
                                int64_t horizon) {
  const int64_t s = data.manifest.size;
  std::vector<Tensor> truth;
  truth.reserve(static_cast<size_t>(horizon));
  for (int64_t t = 0; t < horizon; ++t) {
    Tensor y = Tensor::full({static_cast<int64_t>(idx.size()), 3, s, s}, -1.0f);
    for (size_t b = 0; b < idx.size(); ++b) {
      const auto& sample = data.samples.at(static_cast<size_t>(idx[b]));
      const size_t f = static_cast<size_t>(t) + 1;
      if (f < sample.frames.size()) {
        blit_frame(sample.frames[f],
                   y.data() + static_cast<int64_t>(b) * 3 * s * s);
      }
    }
    truth.push_back(std::move(y));
  }
  return truth;
}

ImageU8 frame_to_image(const Tensor& frames, int64_t b) {
  if (frames.shape().size() != 4 || frames.dim(1) != 3) {
    throw DimensionError("frame_to_image: expected [B,3,H,W], got " +
                         shape_str(frames.shape()));
  }
  const int64_t h = frames.dim(2), w = frames.dim(3), hw = h * w;
  const float* src = frames.data() + b * 3 * hw;
  ImageU8 img(h, w, 3);
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x)
      for (int64_t c = 0; c < 3; ++c) {
        const float unit = (src[c * hw + y * w + x] + 1.0f) / 2.0f;
        const float v = std::round(unit * 255.0f);
        img.at(y, x, c) =
            static_cast<uint8_t>(std::min(255.0f, std::max(0.0f, v)));
      }
  return img;
}

void save_train_checkpoint(const std::string& path, TrainedModel& model,
                           AdamState& opt_g, AdamState& opt_d, Rng& batch_rng,
                           Rng& dpair_rng, int64_t iteration) {
  Checkpoint ckpt;
  ParamSet gen_all = generator_param_set(model, false);
  ParamSet gen_opt = generator_param_set(model, true);
  ParamSet disc_all = model.disc.params();
  save_params(ckpt, gen_all);
  save_params(ckpt, disc_all);
  save_adam(ckpt, "adam_g", opt_g, gen_opt);
  save_adam(ckpt, "adam_d", opt_d, disc_all);
  save_rng(ckpt, "rng/batch-sampling", batch_rng);
  save_rng(ckpt, "rng/disc-pairs", dpair_rng);
  put_u64_scalar(ckpt, "train/iteration", static_cast<uint64_t>(iteration));

  const TrainConfig& c = model.config;
  put_u64_scalar(ckpt, "config/variant", static_cast<uint64_t>(c.variant));
  put_u64_scalar(ckpt, "config/image_size",
                 static_cast<uint64_t>(model.gen.config.image_size));
  put_u64_scalar(ckpt, "config/z_dim", static_cast<uint64_t>(c.z_dim));
  put_u64_scalar(ckpt, "config/n_actions", static_cast<uint64_t>(c.n_actions));
  put_u64_scalar(ckpt, "config/horizon", static_cast<uint64_t>(c.horizon));
  put_u64_scalar(ckpt, "config/batch_size", static_cast<uint64_t>(c.batch_size));
  put_u64_scalar(ckpt, "config/d_pairs", static_cast<uint64_t>(c.d_pairs));
  put_u64_scalar(ckpt, "config/seed", c.seed);
  put_u64_scalar(ckpt, "config/rnn_q_fill", static_cast<uint64_t>(c.rnn_q_fill));
  put_f64_scalar(ckpt, "config/lambda_adv", static_cast<double>(c.lambda_adv));
  put_f64_scalar(ckpt, "config/learning_rate",
                 static_cast<double>(c.learning_rate));
  ckpt.save(path);
}

Checkpoint load_train_checkpoint(const std::string& path) {
  return Checkpoint::load(path);
}

TrainConfig config_from_checkpoint(const Checkpoint& ckpt) {
  TrainConfig c;
  c.variant = static_cast<Variant>(get_u64_scalar(ckpt, "config/variant"));
  c.z_dim = static_cast<int64_t>(get_u64_scalar(ckpt, "config/z_dim"));
  c.n_actions = static_cast<int64_t>(get_u64_scalar(ckpt, "config/n_actions"));
  c.horizon = static_cast<int64_t>(get_u64_scalar(ckpt, "config/horizon"));
  c.batch_size = static_cast<int64_t>(get_u64_scalar(ckpt, "config/batch_size"));
  c.d_pairs = static_cast<int64_t>(get_u64_scalar(ckpt, "config/d_pairs"));
  c.seed = get_u64_scalar(ckpt, "config/seed");
  c.rnn_q_fill = static_cast<QFill>(get_u64_scalar(ckpt, "config/rnn_q_fill"));
  c.lambda_adv = static_cast<float>(get_f64_scalar(ckpt, "config/lambda_adv"));
  c.learning_rate =
      static_cast<float>(get_f64_scalar(ckpt, "config/learning_rate"));
  return c;
}

TrainedModel model_from_checkpoint(const Checkpoint& ckpt) {
  TrainedModel m;
  m.config = config_from_checkpoint(ckpt);
  ModelConfig mc;
  mc.image_size = static_cast<int64_t>(get_u64_scalar(ckpt, "config/image_size"));
  mc.z_dim = m.config.z_dim;
  mc.n_actions = m.config.n_actions;
  m.gen = GeneratorParams::init(mc, m.config.seed);
  m.disc = DiscriminatorParams::init(mc, m.config.seed);
  if (m.config.variant == Variant::rnn_dqn) {
    m.qnet = QNetworkParams::init(mc, m.config.seed);
  }
  ParamSet gen_all = generator_param_set(m, false);
  ParamSet disc_all = m.disc.params();
  load_params(ckpt, gen_all);
  load_params(ckpt, disc_all);
  return m;
}

std::vector<Tensor> generate(const GeneratorParams& gen,
                             const QNetworkParams* qnet, Variant variant,
                             const Tensor& x, int64_t n,
                             std::vector<std::vector<int64_t>>* actions,
                             QFill rnn_fill) {
  Rollout roll;
  switch (variant) {
    case Variant::rnn:
      roll = rollout_rnn(x, gen, n, rnn_fill);
      break;
    case Variant::rnn_dqn:
      if (!qnet) throw ConfigError("generate: rnn_dqn requires a q-network");
      roll = rollout_rnn_dqn(x, gen, *qnet, n);
      break;
    case Variant::stateless:
      roll = rollout_stateless(x, gen, n);
      break;
  }
  if (actions) *actions = roll.actions;
  return roll.frames;
}

TrainedModel train(const Dataset& data, const TrainConfig& config,
                   const std::string& resume_checkpoint) {
  config.validate();
  if (data.samples.empty()) throw ConfigError("train: dataset is empty");
  if (config.horizon > data.manifest.seq_len) {
    throw ConfigError("train: horizon " + std::to_string(config.horizon) +
                      " exceeds dataset sequence length " +
                      std::to_string(data.manifest.seq_len));
  }

  ModelConfig mc;
  mc.image_size = data.manifest.size;
  mc.z_dim = config.z_dim;
  mc.n_actions = config.n_actions;
  mc.validate();

  TrainedModel model;
  model.config = config;
  model.gen = GeneratorParams::init(mc, config.seed);
  model.disc = DiscriminatorParams::init(mc, config.seed);
  if (config.variant == Variant::rnn_dqn) {
    model.qnet = QNetworkParams::init(mc, config.seed);
  }

  ParamSet gen_opt = generator_param_set(model, true);
  ParamSet disc_all = model.disc.params();
  AdamState opt_g(AdamConfig{config.learning_rate});
  AdamState opt_d(AdamConfig{config.learning_rate});
  Rng batch_rng = Rng::stream(config.seed, "batch-sampling");
  Rng dpair_rng = Rng::stream(config.seed, "disc-pairs");
  int64_t start_iter = 0;

  if (!resume_checkpoint.empty()) {
    const Checkpoint ckpt = Checkpoint::load(resume_checkpoint);
    const TrainConfig saved = config_from_checkpoint(ckpt);
    if (saved.variant != config.variant || saved.z_dim != config.z_dim ||
        saved.n_actions != config.n_actions ||
        saved.horizon != config.horizon ||
        saved.batch_size != config.batch_size ||
        saved.d_pairs != config.d_pairs || saved.seed != config.seed ||
        saved.rnn_q_fill != config.rnn_q_fill ||
        saved.lambda_adv != config.lambda_adv ||
        saved.learning_rate != config.learning_rate) {
      throw ConfigError(
          "train: resume checkpoint was written with different settings");
    }
    ParamSet gen_all = generator_param_set(model, false);
    load_params(ckpt, gen_all);
    load_params(ckpt, disc_all);
    load_adam(ckpt, "adam_g", opt_g, gen_opt);
    load_adam(ckpt, "adam_d", opt_d, disc_all);
    load_rng(ckpt, "rng/batch-sampling", batch_rng);
    load_rng(ckpt, "rng/disc-pairs", dpair_rng);
    start_iter = static_cast<int64_t>(get_u64_scalar(ckpt, "train/iteration"));
  }

  std::ofstream csv;
  if (!config.out_dir.empty()) {
    std::filesystem::create_directories(config.out_dir);
    const auto csv_path = std::filesystem::path(config.out_dir) / "loss.csv";
    const bool fresh = !std::filesystem::exists(csv_path) ||
                       std::filesystem::file_size(csv_path) == 0;
    csv.open(csv_path, std::ios::app);
    if (!csv) throw IoError("train: cannot open '" + csv_path.string() + "'");
    if (fresh) csv << loss_csv_header() << "\n";
  }

  const int64_t train_count = static_cast<int64_t>(data.samples.size());
  const int64_t s = data.manifest.size;

  for (int64_t it = start_iter + 1; it <= config.iterations; ++it) {
    // Batch: uniform with replacement from the train split.
    std::vector<int64_t> idx(static_cast<size_t>(config.batch_size));
    for (auto& i : idx) i = batch_rng.uniform_int(0, train_count - 1);
    const Tensor x = batch_input(data, idx);
    const std::vector<Tensor> truth = batch_truth(data, idx, config.horizon);

    // Generator (and Q-network) step.
    LossRecord rec;
    rec.iteration = it;
    Rollout roll;
    std::unordered_map<std::string, std::vector<float>> grads;
    {
      Tape<float> tape;
      roll = run_rollout(model, x);
      const Tensor mse = loss_mse(roll.frames, truth);
      Tensor total = mse;
      if (config.lambda_adv > 0.0f) {
        const Tensor adv = loss_adv(roll.frames, model.disc);
        total = add(mse, affine(adv, config.lambda_adv, 0.0f));
        rec.loss_adv = adv.item();
      }
      tape.backward(total);
      grads = collect_grads(tape, gen_opt);
      rec.loss_mse = mse.item();
      rec.loss_total = total.item();
    }
    adam_step(gen_opt, grads, opt_g);

    // Discriminator step on a subsample of (sample, step) pairs; fakes are
    // plain value copies, so no gradient reaches the generator.
    const int64_t m = config.d_pairs;
    Tensor real({m, 3, s, s});
    Tensor fake({m, 3, s, s});
    const int64_t frame_sz = 3 * s * s;
    for (int64_t p = 0; p < m; ++p) {
      const int64_t b = dpair_rng.uniform_int(0, config.batch_size - 1);
      const int64_t t = dpair_rng.uniform_int(0, config.horizon - 1);
      std::memcpy(real.data() + p * frame_sz,
                  truth[static_cast<size_t>(t)].data() + b * frame_sz,
                  static_cast<size_t>(frame_sz) * sizeof(float));
      std::memcpy(fake.data() + p * frame_sz,
                  roll.frames[static_cast<size_t>(t)].data() + b * frame_sz,
                  static_cast<size_t>(frame_sz) * sizeof(float));
    }
    std::unordered_map<std::string, std::vector<float>> dgrads;
    {
      Tape<float> tape;
      const Tensor dl = loss_discriminator(real, fake, model.disc);
      tape.backward(dl);
      dgrads = collect_grads(tape, disc_all);
      rec.d_loss = dl.item();
    }
    adam_step(disc_all, dgrads, opt_d);

    model.records.push_back(rec);
    if (csv.is_open()) csv << format_loss_row(rec) << "\n" << std::flush;

    const bool scheduled = config.checkpoint_interval > 0 &&
                           it % config.checkpoint_interval == 0;
    if (!config.out_dir.empty() && (scheduled || it == config.iterations)) {
      const auto path = std::filesystem::path(config.out_dir) /
                        ("checkpoint_" + pad_iter(it) + ".ckpt");
      save_train_checkpoint(path.string(), model, opt_g, opt_d, batch_rng,
                            dpair_rng, it);
    }
  }
  return model;
}

void write_loss_csv(const std::string& path,
                    const std::vector<LossRecord>& records, bool append) {
  const bool fresh = !append || !std::filesystem::exists(path) ||
                     std::filesystem::file_size(path) == 0;
  std::ofstream f(path, append ? std::ios::app : std::ios::trunc);
  if (!f) throw IoError("loss csv: cannot open '" + path + "'");
  if (fresh) f << loss_csv_header() << "\n";
  for (const auto& r : records) f << format_loss_row(r) << "\n";
}

std::vector<LossRecord> read_loss_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("loss csv: cannot open '" + path + "'");
  std::vector<LossRecord> records;
  std::string line;
  bool first = true;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    if (first) {
      first = false;
      if (line != loss_csv_header()) {
        throw IoError("loss csv: unexpected header '" + line + "'");
      }
      continue;
    }
    LossRecord r;
    double mse = 0, adv = 0, total = 0, dl = 0;
    if (std::sscanf(line.c_str(), "%" SCNd64 ",%lf,%lf,%lf,%lf", &r.iteration,
                    &mse, &adv, &total, &dl) != 5) {
      throw IoError("loss csv: malformed row '" + line + "'");
    }
    r.loss_mse = static_cast<float>(mse);
    r.loss_adv = static_cast<float>(adv);
    r.loss_total = static_cast<float>(total);
    r.d_loss = static_cast<float>(dl);
    records.push_back(r);
  }
  return records;
}

}  // namespace cinemagen
