// SPDX-License-Identifier: Apache-2.0
#include "cinemagen/model.hpp"

#include "cinemagen/errors.hpp"
#include "cinemagen/rng.hpp"

namespace cinemagen {

namespace {

Tensor normal_tensor(Shape shape, Rng& rng, float scale) {
  Tensor t(std::move(shape));
  float* p = t.data();
  for (int64_t i = 0; i < t.size(); ++i)
    p[i] = scale * static_cast<float>(rng.normal());
  return t;
}

EncoderParams init_encoder(Rng& rng) {
  EncoderParams enc;
  for (int i = 0; i < 4; ++i) {
    enc.conv[static_cast<size_t>(i)].w = normal_tensor(
        {kEncChannels[i + 1], kEncChannels[i], kConvKernel, kConvKernel}, rng,
        0.02f);
    enc.conv[static_cast<size_t>(i)].b = Tensor({kEncChannels[i + 1]});
  }
  return enc;
}

void add_encoder(ParamSet& set, const std::string& prefix,
                 const EncoderParams& enc) {
  for (int i = 0; i < 4; ++i) {
    const std::string layer = prefix + "/enc" + std::to_string(i + 1);
    set.add(layer + "/w", enc.conv[static_cast<size_t>(i)].w);
    set.add(layer + "/b", enc.conv[static_cast<size_t>(i)].b);
  }
}

void check_frame_shape(const Tensor& x, const ModelConfig& config,
                       const char* who) {
  if (x.shape().size() != 4 || x.dim(1) != 3 || x.dim(2) != config.image_size ||
      x.dim(3) != config.image_size) {
    throw DimensionError(std::string(who) + ": expected [B,3," +
                         std::to_string(config.image_size) + "," +
                         std::to_string(config.image_size) + "] input, got " +
                         shape_str(x.shape()));
  }
}

Tensor batch_fill(int64_t batch, int64_t n, QFill fill) {
  Tensor q({batch, n});
  if (fill == QFill::onehot0) {
    float* p = q.data();
    for (int64_t r = 0; r < batch; ++r) p[r * n] = 1.0f;
  }
  return q;
}

void check_horizon(int64_t n) {
  if (n < 1) {
    throw ConfigError("rollout: horizon must be >= 1, got " +
                      std::to_string(n));
  }
}

}  // namespace

void ModelConfig::validate() const {
  if (image_size < 16 || image_size % 16 != 0) {
    throw ConfigError("model: image_size " + std::to_string(image_size) +
                      " must be a positive multiple of 16");
  }
  if (z_dim < 1) throw ConfigError("model: z_dim must be >= 1");
  if (n_actions < 1) throw ConfigError("model: n_actions must be >= 1");
}

GeneratorParams GeneratorParams::init(const ModelConfig& config,
                                      uint64_t seed) {
  config.validate();
  Rng rng = Rng::stream(seed, "generator-init");
  GeneratorParams g;
  g.config = config;
  g.encoder = init_encoder(rng);
  g.zproj.w = normal_tensor({config.z_dim, config.flat_dim()}, rng, 0.02f);
  g.zproj.b = Tensor({config.z_dim});
  g.lstm.wx = normal_tensor({4 * config.z_dim, config.z_dim}, rng, 0.02f);
  g.lstm.wh = normal_tensor({4 * config.z_dim, config.z_dim}, rng, 0.02f);
  g.lstm.b = Tensor({4 * config.z_dim});
  g.fuse.w = normal_tensor({config.flat_dim(), config.z_dim + config.n_actions},
                           rng, 0.02f);
  g.fuse.b = Tensor({config.flat_dim()});
  for (int i = 0; i < 4; ++i) {
    // conv2d_transpose kernels are [in, out, K, K].
    g.decoder[static_cast<size_t>(i)].w = normal_tensor(
        {kEncChannels[4 - i], kEncChannels[3 - i], kConvKernel, kConvKernel},
        rng, 0.02f);
    g.decoder[static_cast<size_t>(i)].b = Tensor({kEncChannels[3 - i]});
  }
  return g;
}

ParamSet GeneratorParams::params() {
  ParamSet set;
  add_encoder(set, "gen", encoder);
  set.add("gen/zproj/w", zproj.w);
  set.add("gen/zproj/b", zproj.b);
  set.add("gen/lstm/wx", lstm.wx);
  set.add("gen/lstm/wh", lstm.wh);
  set.add("gen/lstm/b", lstm.b);
  set.add("gen/fuse/w", fuse.w);
  set.add("gen/fuse/b", fuse.b);
  for (int i = 0; i < 4; ++i) {
    const std::string layer = "gen/dec" + std::to_string(i + 1);
    set.add(layer + "/w", decoder[static_cast<size_t>(i)].w);
    set.add(layer + "/b", decoder[static_cast<size_t>(i)].b);
  }
  return set;
}

DiscriminatorParams DiscriminatorParams::init(const ModelConfig& config,
                                              uint64_t seed) {
  config.validate();
  Rng rng = Rng::stream(seed, "discriminator-init");
  DiscriminatorParams d;
  d.config = config;
  d.encoder = init_encoder(rng);
  d.head.w = normal_tensor({1, config.flat_dim()}, rng, 0.02f);
  d.head.b = Tensor({1});
  return d;
}

ParamSet DiscriminatorParams::params() {
  ParamSet set;
  add_encoder(set, "disc", encoder);
  set.add("disc/head/w", head.w);
  set.add("disc/head/b", head.b);
  return set;
}

QNetworkParams QNetworkParams::init(const ModelConfig& config, uint64_t seed) {
  config.validate();
  Rng rng = Rng::stream(seed, "qnet-init");
  QNetworkParams q;
  q.config = config;
  q.encoder = init_encoder(rng);
  q.head.w = normal_tensor({config.n_actions, config.flat_dim()}, rng, 0.02f);
  q.head.b = Tensor({config.n_actions});
  return q;
}

ParamSet QNetworkParams::params() {
  ParamSet set;
  add_encoder(set, "qnet", encoder);
  set.add("qnet/head/w", head.w);
  set.add("qnet/head/b", head.b);
  return set;
}

Tensor encode_features(const Tensor& x, const EncoderParams& enc,
                       const ModelConfig& config, const char* who) {
  check_frame_shape(x, config, who);
  Tensor h = x;
  for (int i = 0; i < 4; ++i) {
    h = relu(conv2d(h, enc.conv[static_cast<size_t>(i)].w,
                    enc.conv[static_cast<size_t>(i)].b, kConvStride, kConvPad));
  }
  return reshape(h, {x.dim(0), config.flat_dim()});
}

Tensor encode(const Tensor& x, const GeneratorParams& gen) {
  const Tensor feats = encode_features(x, gen.encoder, gen.config, "encode");
  return tanh_act(fully_connected(feats, gen.zproj.w, gen.zproj.b));
}

Tensor q_vector(const Tensor& x, const QNetworkParams& qnet) {
  const Tensor feats =
      encode_features(x, qnet.encoder, qnet.config, "q_vector");
  return fully_connected(feats, qnet.head.w, qnet.head.b);
}

Tensor discriminate(const Tensor& x, const DiscriminatorParams& d) {
  const Tensor feats =
      encode_features(x, d.encoder, d.config, "discriminate");
  return sigmoid(fully_connected(feats, d.head.w, d.head.b));
}

Tensor fuse(const Tensor& h, const Tensor& q_slot,
            const GeneratorParams& gen) {
  if (h.shape().size() != 2 || h.dim(1) != gen.config.z_dim) {
    throw DimensionError("fuse: latent must be [B," +
                         std::to_string(gen.config.z_dim) + "], got " +
                         shape_str(h.shape()));
  }
  if (q_slot.shape().size() != 2 || q_slot.dim(1) != gen.config.n_actions ||
      q_slot.dim(0) != h.dim(0)) {
    throw DimensionError("fuse: q slot must be [B," +
                         std::to_string(gen.config.n_actions) + "], got " +
                         shape_str(q_slot.shape()));
  }
  return relu(fully_connected(concat_cols(h, q_slot), gen.fuse.w, gen.fuse.b));
}

Tensor decode(const Tensor& latent, const GeneratorParams& gen) {
  if (latent.shape().size() != 2 || latent.dim(1) != gen.config.flat_dim()) {
    throw DimensionError("decode: latent must be [B," +
                         std::to_string(gen.config.flat_dim()) + "], got " +
                         shape_str(latent.shape()));
  }
  const int64_t batch = latent.dim(0);
  int64_t side = gen.config.bottleneck();
  Tensor h = reshape(latent, {batch, int64_t{512}, side, side});
  for (int i = 0; i < 4; ++i) {
    side *= 2;
    h = conv2d_transpose(h, gen.decoder[static_cast<size_t>(i)].w,
                         gen.decoder[static_cast<size_t>(i)].b, kConvStride,
                         kConvPad, side, side);
    h = i < 3 ? relu(h) : tanh_act(h);
  }
  return h;
}

Rollout rollout_rnn(const Tensor& x, const GeneratorParams& gen, int64_t n,
                    QFill fill) {
  check_horizon(n);
  const Tensor z = encode(x, gen);
  const Tensor q_slot = batch_fill(x.dim(0), gen.config.n_actions, fill);
  RolloutState state{x, LstmStateT<float>::zeros(x.dim(0), gen.config.z_dim),
                     0, n};
  Rollout out;
  while (state.t < state.horizon) {
    state.lstm = lstm_step(z, state.lstm, gen.lstm);
    state.frame = decode(fuse(state.lstm.h, q_slot, gen), gen);
    state.t += 1;
    out.frames.push_back(state.frame);
  }
  return out;
}

Rollout rollout_rnn_dqn(const Tensor& x, const GeneratorParams& gen,
                        const QNetworkParams& qnet, int64_t n) {
  check_horizon(n);
  if (qnet.config.n_actions != gen.config.n_actions) {
    throw ConfigError("rollout: generator expects N=" +
                      std::to_string(gen.config.n_actions) +
                      " but q-network outputs N=" +
                      std::to_string(qnet.config.n_actions));
  }
  const Tensor z = encode(x, gen);
  RolloutState state{x, LstmStateT<float>::zeros(x.dim(0), gen.config.z_dim),
                     0, n};
  Rollout out;
  while (state.t < state.horizon) {
    state.lstm = lstm_step(z, state.lstm, gen.lstm);
    // The Q-network reads the previous frame but its gradient path into the
    // generator is cut; training signal reaches it only through the
    // straight-through one-hot.
    const Tensor q = q_vector(state.frame.detach(), qnet);
    out.actions.push_back(argmax_rows(q));
    state.frame = decode(fuse(state.lstm.h, argmax_onehot(q), gen), gen);
    state.t += 1;
    out.frames.push_back(state.frame);
  }
  return out;
}

Rollout rollout_stateless(const Tensor& x, const GeneratorParams& gen,
                          int64_t n) {
  check_horizon(n);
  const Tensor q_slot = batch_fill(x.dim(0), gen.config.n_actions, QFill::zeros);
  RolloutState state{x, LstmStateT<float>::zeros(x.dim(0), gen.config.z_dim),
                     0, n};
  Rollout out;
  while (state.t < state.horizon) {
    const Tensor z = encode(state.frame, gen);
    state.frame = decode(fuse(z, q_slot, gen), gen);
    state.t += 1;
    out.frames.push_back(state.frame);
  }
  return out;
}

void save_params(Checkpoint& ckpt, const ParamSet& params) {
  for (const auto& p : params.items())
    ckpt.put_f32(p.name, p.tensor.shape(), p.tensor.data(),
                 static_cast<size_t>(p.tensor.size()));
}

void load_params(const Checkpoint& ckpt, ParamSet& params) {
  for (auto& p : params.items()) {
    if (!ckpt.has(p.name)) {
      throw IoError("checkpoint: missing parameter '" + p.name + "'");
    }
    if (ckpt.shape(p.name) != p.tensor.shape()) {
      throw IoError("checkpoint: parameter '" + p.name + "' has shape " +
                    shape_str(ckpt.shape(p.name)) + ", model expects " +
                    shape_str(p.tensor.shape()));
    }
    const auto values = ckpt.get_f32(p.name);
    std::copy(values.begin(), values.end(), p.tensor.data());
  }
}

}  // namespace cinemagen
