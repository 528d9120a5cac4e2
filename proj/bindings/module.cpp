// SPDX-License-Identifier: Apache-2.0
//
// Python bindings over the pipeline's main operations: textures and
// synthetic samples, dataset generation, training, rollout from a
// checkpoint, metric scoring and GIF export. Images cross the boundary as
// numpy arrays (uint8 HxWx3 for frames, float64 in [0,1] for metrics).

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

#include "cinemagen/errors.hpp"
#include "cinemagen/evaluate.hpp"
#include "cinemagen/gif.hpp"
#include "cinemagen/metrics.hpp"
#include "cinemagen/png_io.hpp"
#include "cinemagen/synthetic.hpp"
#include "cinemagen/textures.hpp"
#include "cinemagen/train.hpp"

namespace py = pybind11;
using namespace cinemagen;

namespace {

py::array_t<uint8_t> image_to_array(const ImageU8& img) {
  py::array_t<uint8_t> out({img.h, img.w, img.c});
  std::memcpy(out.mutable_data(), img.pixels.data(), img.pixels.size());
  return out;
}

ImageU8 array_to_image(const py::array_t<uint8_t, py::array::c_style |
                                                      py::array::forcecast>& a) {
  if (a.ndim() != 3 || a.shape(2) != 3) {
    throw DimensionError("expected an HxWx3 uint8 array");
  }
  ImageU8 img(a.shape(0), a.shape(1), 3);
  std::memcpy(img.pixels.data(), a.data(), img.pixels.size());
  return img;
}

ImageD array_to_imaged(const py::array_t<double, py::array::c_style |
                                                     py::array::forcecast>& a) {
  if (a.ndim() != 3) throw DimensionError("expected an HxWxC float array");
  ImageD img(a.shape(0), a.shape(1), a.shape(2));
  std::memcpy(img.pixels.data(), a.data(), img.pixels.size() * sizeof(double));
  return img;
}

py::array_t<uint8_t> frames_to_array(const std::vector<ImageU8>& frames) {
  const int64_t t = static_cast<int64_t>(frames.size());
  const int64_t h = frames[0].h, w = frames[0].w;
  py::array_t<uint8_t> out({t, h, w, static_cast<int64_t>(3)});
  uint8_t* dst = out.mutable_data();
  for (const ImageU8& f : frames) {
    std::memcpy(dst, f.pixels.data(), f.pixels.size());
    dst += f.pixels.size();
  }
  return out;
}

TrainConfig config_from_kwargs(const std::string& variant, int64_t z_dim,
                               int64_t n_actions, int64_t horizon,
                               int64_t batch_size, int64_t iterations,
                               double learning_rate, double lambda_adv,
                               uint64_t seed, int64_t d_pairs,
                               int64_t checkpoint_interval,
                               const std::string& out_dir,
                               const std::string& rnn_q_fill) {
  TrainConfig c;
  c.variant = variant_from_name(variant);
  c.z_dim = z_dim;
  c.n_actions = n_actions;
  c.horizon = horizon;
  c.batch_size = batch_size;
  c.iterations = iterations;
  c.learning_rate = static_cast<float>(learning_rate);
  c.lambda_adv = static_cast<float>(lambda_adv);
  c.seed = seed;
  c.d_pairs = d_pairs;
  c.checkpoint_interval = checkpoint_interval;
  c.out_dir = out_dir;
  if (rnn_q_fill == "zeros") c.rnn_q_fill = QFill::zeros;
  else if (rnn_q_fill == "onehot0") c.rnn_q_fill = QFill::onehot0;
  else throw ConfigError("rnn_q_fill must be 'zeros' or 'onehot0'");
  return c;
}

py::dict row_dict(const SequenceEval& r) {
  py::dict d;
  d["method"] = r.method;
  d["category"] = r.category;
  d["sequence"] = r.sequence;
  d["psnr_raw"] = r.psnr_raw;
  d["ssim_raw"] = r.ssim_raw;
  d["psnr_diff"] = r.psnr_diff;
  d["ssim_diff"] = r.ssim_diff;
  d["center_distance"] = r.center_dist;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "cinemagraph pipeline core";

  py::register_exception<DimensionError>(m, "DimensionError");
  py::register_exception<ConfigError>(m, "ConfigError");
  py::register_exception<IoError>(m, "IoError");

  m.def("texture",
        [](int index) { return image_to_array(builtin_texture(index)); },
        py::arg("index"), "one of the ten 256x256 procedural textures");

  m.def("pattern_length",
        [](const std::string& kind) {
          return pattern_length(pattern_from_name(kind));
        },
        py::arg("kind"), "sequence length of a motion pattern");

  m.def("pattern_names", [] {
    std::vector<std::string> names;
    for (PatternKind k : all_patterns()) names.push_back(pattern_name(k));
    return names;
  });

  m.def("synth_sample",
        [](const std::string& kind, int64_t size, uint64_t seed) {
          std::vector<ImageU8> textures;
          for (int i = 0; i < kTextureCount; ++i)
            textures.push_back(builtin_texture(i));
          const SyntheticSample s =
              synth_sample(textures, pattern_from_name(kind), size, seed);
          py::array_t<bool> masks(
              {static_cast<int64_t>(s.masks.size()), s.h, s.w});
          bool* dst = masks.mutable_data();
          for (size_t t = 0; t < s.masks.size(); ++t)
            for (int64_t y = 0; y < s.h; ++y)
              for (int64_t x = 0; x < s.w; ++x)
                *dst++ = s.mask_at(t, y, x);
          py::dict d;
          d["kind"] = pattern_name(s.kind);
          d["frames"] = frames_to_array(s.frames);
          d["masks"] = masks;
          return d;
        },
        py::arg("kind"), py::arg("size"), py::arg("seed"),
        "one synthetic sequence rendered from the builtin textures");

  m.def("gen_dataset",
        [](const std::string& kind, int64_t count, int64_t size, uint64_t seed,
           const std::string& out, const std::string& textures) {
          const DatasetManifest man = generate_dataset(
              textures.empty() ? default_texture_dir() : textures,
              pattern_from_name(kind), count, size, seed, out);
          py::dict d;
          d["kind"] = pattern_name(man.kind);
          d["count"] = man.count;
          d["size"] = man.size;
          d["seq_len"] = man.seq_len;
          d["train_count"] = man.train_count;
          d["test_count"] = man.test_count;
          return d;
        },
        py::arg("kind"), py::arg("count"), py::arg("size"), py::arg("seed"),
        py::arg("out"), py::arg("textures") = "",
        "write a packed dataset plus manifest under `out`");

  m.def("train",
        [](const std::string& data_dir, const std::string& variant,
           int64_t z_dim, int64_t n_actions, int64_t horizon,
           int64_t batch_size, int64_t iterations, double learning_rate,
           double lambda_adv, uint64_t seed, int64_t d_pairs,
           int64_t checkpoint_interval, const std::string& out_dir,
           const std::string& rnn_q_fill) {
          const TrainConfig config = config_from_kwargs(
              variant, z_dim, n_actions, horizon, batch_size, iterations,
              learning_rate, lambda_adv, seed, d_pairs, checkpoint_interval,
              out_dir, rnn_q_fill);
          const Dataset data = load_dataset(data_dir, Split::train);
          const TrainedModel model = train(data, config);
          py::list records;
          for (const LossRecord& r : model.records) {
            py::dict d;
            d["iteration"] = r.iteration;
            d["loss_mse"] = r.loss_mse;
            d["loss_adv"] = r.loss_adv;
            d["loss_total"] = r.loss_total;
            d["d_loss"] = r.d_loss;
            records.append(d);
          }
          return records;
        },
        py::arg("data_dir"), py::arg("variant") = "rnn_dqn",
        py::arg("z_dim") = 64, py::arg("n_actions") = 64,
        py::arg("horizon") = 4, py::arg("batch_size") = 16,
        py::arg("iterations") = 1000, py::arg("learning_rate") = 0.0002,
        py::arg("lambda_adv") = 0.005, py::arg("seed") = 1,
        py::arg("d_pairs") = 4, py::arg("checkpoint_interval") = 0,
        py::arg("out_dir") = "", py::arg("rnn_q_fill") = "zeros",
        "train a model; returns per-iteration loss records (checkpoints and "
        "loss.csv land in out_dir when set)");

  m.def("generate_frames",
        [](const std::string& checkpoint, const py::array_t<uint8_t>& input,
           int64_t n) {
          const TrainedModel model =
              model_from_checkpoint(load_train_checkpoint(checkpoint));
          const ImageU8 img = array_to_image(input);
          const int64_t size = model.gen.config.image_size;
          if (img.h != size || img.w != size) {
            throw DimensionError("checkpoint expects " + std::to_string(size) +
                                 "x" + std::to_string(size) + " input");
          }
          if (n == 0) n = model.config.horizon;
          Tensor x({1, 3, size, size});
          blit_frame(img, x.data());
          std::vector<std::vector<int64_t>> actions;
          const QNetworkParams* qnet =
              model.config.variant == Variant::rnn_dqn ? &model.qnet : nullptr;
          const std::vector<Tensor> frames =
              generate(model.gen, qnet, model.config.variant, x, n, &actions,
                       model.config.rnn_q_fill);
          std::vector<ImageU8> images;
          for (const Tensor& f : frames) images.push_back(frame_to_image(f, 0));
          py::dict d;
          d["frames"] = frames_to_array(images);
          std::vector<int64_t> act;
          for (const auto& step : actions) act.push_back(step[0]);
          d["actions"] = act;
          return d;
        },
        py::arg("checkpoint"), py::arg("input"), py::arg("n") = 0,
        "roll a trained checkpoint forward from one uint8 frame");

  m.def("evaluate",
        [](const std::string& checkpoint, const std::string& data_dir,
           int64_t horizon, bool baseline) {
          const TrainedModel model =
              model_from_checkpoint(load_train_checkpoint(checkpoint));
          if (horizon == 0) horizon = model.config.horizon;
          const Dataset test = load_dataset(data_dir, Split::test);
          std::vector<SequenceEval> rows = evaluate_model(model, test, horizon);
          if (baseline) {
            const auto base = evaluate_constant(test, horizon);
            rows.insert(rows.end(), base.begin(), base.end());
          }
          const EvalReport report = make_report(std::move(rows), horizon);
          py::list out_rows, out_aggs;
          for (const auto& r : report.rows) out_rows.append(row_dict(r));
          for (const auto& a : report.aggregates) {
            py::dict d;
            d["method"] = a.method;
            d["category"] = a.category;
            d["sequences"] = a.sequences;
            d["psnr_raw"] = a.psnr_raw;
            d["ssim_raw"] = a.ssim_raw;
            d["psnr_diff"] = a.psnr_diff;
            d["ssim_diff"] = a.ssim_diff;
            d["center_distance"] = a.center_dist;
            out_aggs.append(d);
          }
          py::dict d;
          d["rows"] = out_rows;
          d["aggregates"] = out_aggs;
          return d;
        },
        py::arg("checkpoint"), py::arg("data_dir"), py::arg("horizon") = 0,
        py::arg("baseline") = true,
        "score a checkpoint (plus the constant baseline) on the test split");

  m.def("psnr",
        [](const py::array_t<double>& a, const py::array_t<double>& b) {
          return psnr(array_to_imaged(a), array_to_imaged(b));
        },
        py::arg("a"), py::arg("b"), "PSNR in dB, [0,1] convention, cap 99");

  m.def("ssim",
        [](const py::array_t<double>& a, const py::array_t<double>& b) {
          return ssim(array_to_imaged(a), array_to_imaged(b));
        },
        py::arg("a"), py::arg("b"), "mean local SSIM, 11x11 Gaussian window");

  m.def("write_gif",
        [](const std::string& path, const py::array_t<uint8_t>& frames,
           int delay_cs, int loop) {
          if (frames.ndim() != 4 || frames.shape(3) != 3) {
            throw DimensionError("expected a TxHxWx3 uint8 array");
          }
          std::vector<ImageU8> images;
          const int64_t t = frames.shape(0), h = frames.shape(1),
                        w = frames.shape(2);
          const uint8_t* src = frames.data();
          for (int64_t i = 0; i < t; ++i) {
            ImageU8 img(h, w, 3);
            std::memcpy(img.pixels.data(), src + i * h * w * 3,
                        static_cast<size_t>(h * w * 3));
            images.push_back(std::move(img));
          }
          GifOptions opt;
          opt.delay_cs = delay_cs;
          opt.loop_count = loop;
          write_gif(path, images, opt);
        },
        py::arg("path"), py::arg("frames"), py::arg("delay_cs") = 10,
        py::arg("loop") = 0, "animated GIF, global palette, infinite loop");

  m.def("read_png", [](const std::string& path) {
    return image_to_array(read_png(path));
  });
  m.def("write_png", [](const std::string& path, const py::array_t<uint8_t>& a) {
    write_png(path, array_to_image(a));
  });
}
