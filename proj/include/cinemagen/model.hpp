// SPDX-License-Identifier: Apache-2.0
#pragma once

// Recurrent generator (conv encoder, LSTM over the latent, weight-shared
// deconv decoder), binary discriminator, and Q-network, plus the rollout
// variants that tie them together.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "cinemagen/checkpoint.hpp"
#include "cinemagen/tensor.hpp"

namespace cinemagen {

// Channel ladder shared by every conv stack: 3 -> 64 -> 128 -> 256 -> 512,
// each layer 5x5 stride 2 pad 2 (halves the spatial extent).
inline constexpr int64_t kEncChannels[5] = {3, 64, 128, 256, 512};
inline constexpr int64_t kConvKernel = 5;
inline constexpr int64_t kConvStride = 2;
inline constexpr int64_t kConvPad = 2;

struct ModelConfig {
  int64_t image_size = 32;  // square frames, divisible by 16
  int64_t z_dim = 64;       // latent width Z
  int64_t n_actions = 64;   // Q-vector width N

  void validate() const;
  int64_t bottleneck() const { return image_size / 16; }
  int64_t flat_dim() const { return 512 * bottleneck() * bottleneck(); }
};

struct ConvLayer {
  Tensor w, b;
};
struct FcLayer {
  Tensor w, b;
};

struct EncoderParams {
  std::array<ConvLayer, 4> conv;
};

struct GeneratorParams {
  ModelConfig config;
  EncoderParams encoder;
  FcLayer zproj;             // flat -> Z, tanh
  LstmParamsT<float> lstm;   // input Z, hidden Z
  FcLayer fuse;              // Z + N -> flat, relu
  std::array<ConvLayer, 4> decoder;  // 512 -> 256 -> 128 -> 64 -> 3

  // Weights Normal(0, 0.02) from the "generator-init" stream, biases zero.
  static GeneratorParams init(const ModelConfig& config, uint64_t seed);
  ParamSet params();  // names gen/enc1/w ... gen/dec4/b, fixed order
};

struct DiscriminatorParams {
  ModelConfig config;
  EncoderParams encoder;
  FcLayer head;  // flat -> 1, sigmoid applied in discriminate()

  static DiscriminatorParams init(const ModelConfig& config, uint64_t seed);
  ParamSet params();  // names disc/...
};

struct QNetworkParams {
  ModelConfig config;
  EncoderParams encoder;
  FcLayer head;  // flat -> N, no squashing

  static QNetworkParams init(const ModelConfig& config, uint64_t seed);
  ParamSet params();  // names qnet/...
};

// Conv stack + flatten, relu activations throughout: [B,3,S,S] -> [B, flat].
Tensor encode_features(const Tensor& x, const EncoderParams& enc,
                       const ModelConfig& config, const char* who);

Tensor encode(const Tensor& x, const GeneratorParams& gen);      // [B, Z]
Tensor q_vector(const Tensor& x, const QNetworkParams& qnet);    // [B, N]
Tensor discriminate(const Tensor& x, const DiscriminatorParams& d);  // [B,1]

// concat(h, q_slot) through the fusion projector, relu: -> [B, flat].
Tensor fuse(const Tensor& h, const Tensor& q_slot, const GeneratorParams& gen);

// Deconv stack on a fused latent: [B, flat] -> [B,3,S,S], tanh output.
Tensor decode(const Tensor& latent, const GeneratorParams& gen);

// What occupies the one-hot slot when no Q-network drives it.
enum class QFill { zeros, onehot0 };

// Stepwise bookkeeping carried through a rollout.
struct RolloutState {
  Tensor frame;  // most recent frame (input image before step 1)
  LstmStateT<float> lstm;
  int64_t t = 0;
  int64_t horizon = 0;
};

struct Rollout {
  std::vector<Tensor> frames;                  // horizon x [B,3,S,S]
  std::vector<std::vector<int64_t>> actions;   // horizon x B; empty unless dqn
};

// Pure recurrent variant: encode x once, step the LSTM on that z every
// frame, decode with the Q slot filled per `fill`.
Rollout rollout_rnn(const Tensor& x, const GeneratorParams& gen, int64_t n,
                    QFill fill = QFill::zeros);

// Recurrent + Q-network: the Q input is the previous generated frame
// (detached; the input image at step 1), its argmax one-hot conditions the
// decoder through a straight-through estimator.
Rollout rollout_rnn_dqn(const Tensor& x, const GeneratorParams& gen,
                        const QNetworkParams& qnet, int64_t n);

// Stateless baseline approximation: re-encode the previous output each step,
// no LSTM state carried.
Rollout rollout_stateless(const Tensor& x, const GeneratorParams& gen,
                          int64_t n);

// Parameter serialization: one f32 checkpoint entry per parameter, keyed by
// the parameter name. Loading requires exact name and shape agreement.
void save_params(Checkpoint& ckpt, const ParamSet& params);
void load_params(const Checkpoint& ckpt, ParamSet& params);

}  // namespace cinemagen
