// SPDX-License-Identifier: Apache-2.0
#pragma once

// Joint optimization of the generator (optionally with the Q-network head)
// against the discriminator: MSE + lambda_adv * adversarial loss, one
// discriminator step per generator step, Adam throughout. Deterministic
// under a fixed seed on a single thread.

#include <cstdint>
#include <string>
#include <vector>

#include "cinemagen/image.hpp"
#include "cinemagen/model.hpp"
#include "cinemagen/synthetic.hpp"
#include "cinemagen/tensor.hpp"

namespace cinemagen {

enum class Variant { rnn, rnn_dqn, stateless };

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);

struct TrainConfig {
  Variant variant = Variant::rnn;
  int64_t z_dim = 64;
  int64_t n_actions = 64;
  int64_t horizon = 4;
  int64_t batch_size = 16;
  int64_t iterations = 1000;
  float learning_rate = 0.0002f;
  float lambda_adv = 0.005f;
  uint64_t seed = 1;
  int64_t d_pairs = 4;              // (sample, step) pairs per discriminator step
  int64_t checkpoint_interval = 0;  // 0 = final checkpoint only
  std::string out_dir;              // empty = keep everything in memory
  // Q-slot content for the pure-RNN rollout; onehot0 realizes the N=1
  // degeneracy comparison against rnn_dqn.
  QFill rnn_q_fill = QFill::zeros;

  void validate() const;
};

struct LossRecord {
  int64_t iteration = 0;
  float loss_mse = 0.0f;
  float loss_adv = 0.0f;
  float loss_total = 0.0f;
  float d_loss = 0.0f;
};

struct TrainedModel {
  TrainConfig config;
  GeneratorParams gen;
  QNetworkParams qnet;  // populated only for Variant::rnn_dqn
  DiscriminatorParams disc;
  std::vector<LossRecord> records;  // one per iteration actually run
};

// ---------------------------------------------------------------------------
// Losses (tape ops; usable standalone)

// Mean squared difference over every frame, batch row, channel and pixel.
Tensor loss_mse(const std::vector<Tensor>& generated,
                const std::vector<Tensor>& truth);

// Mean over frames and batch of -log D(frame), D clamped to
// [1e-7, 1 - 1e-7] before the log.
Tensor loss_adv(const std::vector<Tensor>& generated,
                const DiscriminatorParams& disc);

// -mean log D(real) - mean log(1 - D(fake)), same clamping.
Tensor loss_discriminator(const Tensor& real, const Tensor& fake,
                          const DiscriminatorParams& disc);

// ---------------------------------------------------------------------------
// Data plumbing: dataset u8 frames <-> model tensors in [-1, 1]

// HWC u8 frame -> CHW float at `dst` (3*h*w floats), u/255*2-1.
void blit_frame(const ImageU8& img, float* dst);

// [B,3,S,S] batch of frame 0 of the given samples.
Tensor batch_input(const Dataset& data, const std::vector<int64_t>& idx);

// horizon tensors [B,3,S,S]: frames 1..horizon, black-padded past the end.
std::vector<Tensor> batch_truth(const Dataset& data,
                                const std::vector<int64_t>& idx,
                                int64_t horizon);

// Row b of a [B,3,S,S] tensor back to u8 HWC, mapping [-1,1] -> [0,255].
ImageU8 frame_to_image(const Tensor& frames, int64_t b);

// ---------------------------------------------------------------------------
// Training

// Train from scratch, or continue bit-exactly from `resume_checkpoint`
// (which restores parameters, Adam moments, RNG streams and the iteration
// counter; `config.iterations` still sets the stopping point).
TrainedModel train(const Dataset& data, const TrainConfig& config,
                   const std::string& resume_checkpoint = "");

// Inference-only rollout dispatch (no tape). For rnn_dqn pass the q-network;
// actions (when non-null) receive the chosen indices per step.
std::vector<Tensor> generate(const GeneratorParams& gen,
                             const QNetworkParams* qnet, Variant variant,
                             const Tensor& x, int64_t n,
                             std::vector<std::vector<int64_t>>* actions = nullptr,
                             QFill rnn_fill = QFill::zeros);

// Full training-state serialization.
void save_train_checkpoint(const std::string& path, TrainedModel& model,
                           AdamState& opt_g, AdamState& opt_d, Rng& batch_rng,
                           Rng& dpair_rng, int64_t iteration);
Checkpoint load_train_checkpoint(const std::string& path);

// Reads config fields back out of a checkpoint (for generate/evaluate).
TrainConfig config_from_checkpoint(const Checkpoint& ckpt);
TrainedModel model_from_checkpoint(const Checkpoint& ckpt);

// Loss CSV: "iteration,loss_mse,loss_adv,loss_total,d_loss" header + one row
// per record, floats formatted %.9g (round-trip exact for float32).
void write_loss_csv(const std::string& path,
                    const std::vector<LossRecord>& records, bool append);
std::vector<LossRecord> read_loss_csv(const std::string& path);

}  // namespace cinemagen
