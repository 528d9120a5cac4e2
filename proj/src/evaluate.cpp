// SPDX-License-Identifier: Apache-2.0
#include "cinemagen/evaluate.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "cinemagen/errors.hpp"

namespace cinemagen {

namespace {

std::string fmt9(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::ofstream open_out(const std::string& path, const char* who) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError(std::string(who) + ": cannot open '" + path + "'");
  return f;
}

// Index of key in keys, appending on first sight.
size_t ordered_slot(std::vector<std::string>& keys, const std::string& key) {
  for (size_t i = 0; i < keys.size(); ++i)
    if (keys[i] == key) return i;
  keys.push_back(key);
  return keys.size() - 1;
}

struct Accum {
  int64_t n = 0;
  double psnr_raw = 0, ssim_raw = 0, psnr_diff = 0, ssim_diff = 0, center = 0;

  void add(const SequenceEval& r) {
    ++n;
    psnr_raw += r.psnr_raw;
    ssim_raw += r.ssim_raw;
    psnr_diff += r.psnr_diff;
    ssim_diff += r.ssim_diff;
    center += r.center_dist;
  }
  EvalAggregate mean(const std::string& method,
                     const std::string& category) const {
    EvalAggregate a;
    a.method = method;
    a.category = category;
    a.sequences = n;
    const double d = static_cast<double>(n);
    a.psnr_raw = psnr_raw / d;
    a.ssim_raw = ssim_raw / d;
    a.psnr_diff = psnr_diff / d;
    a.ssim_diff = ssim_diff / d;
    a.center_dist = center / d;
    return a;
  }
};

double pick_metric(const EvalAggregate& a, int metric) {
  switch (metric) {
    case 0: return a.psnr_raw;
    case 1: return a.ssim_raw;
    case 2: return a.psnr_diff;
    case 3: return a.ssim_diff;
    default: return a.center_dist;
  }
}

bool metric_enabled(const MetricSelection& select, int metric) {
  switch (metric) {
    case 0:
    case 2: return select.psnr;
    case 1:
    case 3: return select.ssim;
    default: return select.center;
  }
}

SyntheticSample padded_copy(const SyntheticSample& sample, int64_t length) {
  SyntheticSample padded = sample;
  if (static_cast<int64_t>(padded.frames.size()) < length)
    pad_sequence(padded, length);
  return padded;
}

}  // namespace

std::vector<ImageD> truth_frames(const SyntheticSample& sample,
                                 int64_t horizon) {
  const SyntheticSample padded = padded_copy(sample, horizon + 1);
  std::vector<ImageD> out;
  out.reserve(static_cast<size_t>(horizon));
  for (int64_t t = 1; t <= horizon; ++t)
    out.push_back(to_unit(padded.frames[static_cast<size_t>(t)]));
  return out;
}

SequenceEval score_sequence(const std::string& method,
                            const SyntheticSample& sample,
                            const std::vector<ImageD>& generated,
                            int64_t index) {
  const int64_t horizon = static_cast<int64_t>(generated.size());
  const std::vector<ImageD> truth = truth_frames(sample, horizon);
  const SyntheticSample padded = padded_copy(sample, horizon + 1);

  SequenceEval row;
  row.method = method;
  row.category = pattern_name(sample.kind);
  row.sequence = index;
  const FrameScores raw = sequence_metrics(generated, truth);
  const FrameScores diff = difference_metrics(generated, truth);
  row.psnr_raw = raw.mean_psnr;
  row.ssim_raw = raw.mean_ssim;
  row.psnr_diff = diff.mean_psnr;
  row.ssim_diff = diff.mean_ssim;
  row.center_dist = center_distance(generated, padded, 1);
  return row;
}

std::vector<SequenceEval> evaluate_model(const TrainedModel& model,
                                         const Dataset& test, int64_t horizon) {
  const int64_t size = model.gen.config.image_size;
  if (size != test.manifest.size) {
    throw ConfigError("evaluate: model expects " + std::to_string(size) +
                      "x" + std::to_string(size) + " frames, dataset is " +
                      std::to_string(test.manifest.size) + "x" +
                      std::to_string(test.manifest.size));
  }
  const std::string method = variant_name(model.config.variant);
  const QNetworkParams* qnet =
      model.config.variant == Variant::rnn_dqn ? &model.qnet : nullptr;

  std::vector<SequenceEval> rows;
  rows.reserve(test.samples.size());
  for (size_t i = 0; i < test.samples.size(); ++i) {
    const SyntheticSample& s = test.samples[i];
    Tensor x({1, 3, size, size});
    blit_frame(s.frames[0], x.data());
    const std::vector<Tensor> frames =
        generate(model.gen, qnet, model.config.variant, x, horizon, nullptr,
                 model.config.rnn_q_fill);
    std::vector<ImageD> images;
    images.reserve(frames.size());
    for (const Tensor& f : frames) images.push_back(tensor_to_unit(f, 0));
    rows.push_back(
        score_sequence(method, s, images, static_cast<int64_t>(i)));
  }
  return rows;
}

std::vector<SequenceEval> evaluate_constant(const Dataset& test,
                                            int64_t horizon) {
  std::vector<SequenceEval> rows;
  rows.reserve(test.samples.size());
  for (size_t i = 0; i < test.samples.size(); ++i) {
    const SyntheticSample& s = test.samples[i];
    const std::vector<ImageD> images =
        constant_baseline(to_unit(s.frames[0]), horizon);
    rows.push_back(
        score_sequence("constant", s, images, static_cast<int64_t>(i)));
  }
  return rows;
}

std::vector<EvalAggregate> aggregate_rows(
    const std::vector<SequenceEval>& rows) {
  std::vector<std::string> methods;
  std::vector<std::string> categories;
  for (const auto& r : rows) {
    ordered_slot(methods, r.method);
    ordered_slot(categories, r.category);
  }

  std::vector<EvalAggregate> out;
  for (const std::string& m : methods) {
    Accum all;
    std::vector<Accum> per(categories.size());
    size_t spanned = 0;
    for (const auto& r : rows) {
      if (r.method != m) continue;
      all.add(r);
      Accum& slot = per[ordered_slot(categories, r.category)];
      if (slot.n == 0) ++spanned;
      slot.add(r);
    }
    // Per-category means only say something beyond "all" when the method
    // covers several categories.
    if (spanned > 1) {
      for (size_t c = 0; c < categories.size(); ++c)
        if (per[c].n > 0) out.push_back(per[c].mean(m, categories[c]));
    }
    out.push_back(all.mean(m, "all"));
  }
  return out;
}

EvalReport make_report(std::vector<SequenceEval> rows, int64_t horizon) {
  EvalReport report;
  report.horizon = horizon;
  report.aggregates = aggregate_rows(rows);
  report.rows = std::move(rows);
  return report;
}

MetricSelection metric_selection_from_list(const std::string& list) {
  MetricSelection select{false, false, false};
  std::stringstream ss(list);
  std::string name;
  while (std::getline(ss, name, ',')) {
    if (name == "psnr") select.psnr = true;
    else if (name == "ssim") select.ssim = true;
    else if (name == "center") select.center = true;
    else throw ConfigError("unknown metric '" + name +
                           "' (expected psnr, ssim, center)");
  }
  if (!select.psnr && !select.ssim && !select.center)
    throw ConfigError("metric list selects nothing");
  return select;
}

void write_eval_csv(const std::string& path, const EvalReport& report,
                    const MetricSelection& select) {
  std::ofstream f = open_out(path, "eval csv");
  static const char* kColumns[] = {"psnr_raw", "ssim_raw", "psnr_diff",
                                   "ssim_diff", "center_distance"};
  f << "method,category,sequence";
  for (int m = 0; m < 5; ++m)
    if (metric_enabled(select, m)) f << ',' << kColumns[m];
  f << '\n';

  const auto emit = [&](const std::string& method, const std::string& category,
                        const std::string& sequence, const double* vals) {
    f << method << ',' << category << ',' << sequence;
    for (int m = 0; m < 5; ++m)
      if (metric_enabled(select, m)) f << ',' << fmt9(vals[m]);
    f << '\n';
  };
  for (const auto& r : report.rows) {
    const double vals[5] = {r.psnr_raw, r.ssim_raw, r.psnr_diff, r.ssim_diff,
                            r.center_dist};
    emit(r.method, r.category, std::to_string(r.sequence), vals);
  }
  for (const auto& a : report.aggregates) {
    const double vals[5] = {a.psnr_raw, a.ssim_raw, a.psnr_diff, a.ssim_diff,
                            a.center_dist};
    emit(a.method, a.category, "mean", vals);
  }
}

void write_eval_table(const std::string& path, const EvalReport& report,
                      const MetricSelection& select) {
  std::ofstream f = open_out(path, "eval table");

  std::vector<std::string> methods;
  std::vector<std::string> categories;
  for (const auto& a : report.aggregates) {
    ordered_slot(methods, a.method);
    if (a.category != "all") ordered_slot(categories, a.category);
  }
  categories.push_back("all");

  int64_t per_method = 0;
  for (const auto& a : report.aggregates)
    if (a.category == "all") per_method = std::max(per_method, a.sequences);

  f << "evaluation report\n"
    << "horizon: " << report.horizon
    << " generated frames, scored against truth frames 1.." << report.horizon
    << "\n"
    << "pixel convention: [0,1]; sequences shorter than the horizon are\n"
    << "black-padded and the padded frames stay in every PSNR/SSIM mean\n"
    << "sequences per method: " << per_method << "\n";

  static const char* kTitles[] = {
      "raw PSNR (dB), higher is better",
      "raw SSIM, higher is better",
      "difference-image PSNR (dB), higher is better",
      "difference-image SSIM, higher is better",
      "center distance (px), lower is better",
  };

  size_t method_width = 8;
  for (const auto& m : methods) method_width = std::max(method_width, m.size());

  for (int metric = 0; metric < 5; ++metric) {
    if (!metric_enabled(select, metric)) continue;
    f << "\n" << kTitles[metric] << "\n";
    f << std::left << std::setw(static_cast<int>(method_width + 2)) << "method";
    for (const auto& c : categories)
      f << std::right << std::setw(10) << c;
    f << "\n";
    for (const auto& m : methods) {
      f << std::left << std::setw(static_cast<int>(method_width + 2)) << m;
      for (const auto& c : categories) {
        bool found = false;
        for (const auto& a : report.aggregates) {
          if (a.method != m || a.category != c) continue;
          char buf[32];
          std::snprintf(buf, sizeof(buf), "%.4f", pick_metric(a, metric));
          f << std::right << std::setw(10) << buf;
          found = true;
          break;
        }
        if (!found) f << std::right << std::setw(10) << "-";
      }
      f << "\n";
    }
  }
}

std::vector<AblationRow> ablation_run(const Dataset& train_data,
                                      const Dataset& test_data,
                                      const TrainConfig& base,
                                      const std::vector<AblationSetting>& dims) {
  std::vector<AblationRow> rows;
  for (const AblationSetting& s : dims) {
    TrainConfig config = base;
    config.z_dim = s.z_dim;
    config.n_actions = s.n_actions;
    if (!base.out_dir.empty()) {
      config.out_dir = base.out_dir + "/z" + std::to_string(s.z_dim) + "_n" +
                       std::to_string(s.n_actions);
      std::filesystem::create_directories(config.out_dir);
    }
    const TrainedModel model = train(train_data, config);
    const auto evals = evaluate_model(model, test_data, config.horizon);
    const auto aggs = aggregate_rows(evals);

    AblationRow row;
    row.z_dim = s.z_dim;
    row.n_actions = s.n_actions;
    for (const auto& a : aggs) {
      if (a.category != "all") continue;
      row.mean_psnr = a.psnr_raw;
      row.mean_ssim = a.ssim_raw;
    }
    rows.push_back(row);
  }
  return rows;
}

void write_ablation_csv(const std::string& path,
                        const std::vector<AblationRow>& rows) {
  std::ofstream f = open_out(path, "ablation csv");
  f << "z_dim,n_actions,mean_psnr,mean_ssim\n";
  for (const auto& r : rows) {
    f << r.z_dim << ',' << r.n_actions << ',' << fmt9(r.mean_psnr) << ','
      << fmt9(r.mean_ssim) << '\n';
  }
}

void write_ablation_table(const std::string& path,
                          const std::vector<AblationRow>& rows,
                          const TrainConfig& base) {
  std::ofstream f = open_out(path, "ablation table");
  f << "latent/action dimension ablation\n"
    << "shared config: variant=" << variant_name(base.variant)
    << " horizon=" << base.horizon << " batch_size=" << base.batch_size
    << " iterations=" << base.iterations
    << " learning_rate=" << fmt9(base.learning_rate)
    << " lambda_adv=" << fmt9(base.lambda_adv) << " seed=" << base.seed
    << " d_pairs=" << base.d_pairs << "\n"
    << "swept per row: z_dim, n_actions\n\n";
  f << std::left << std::setw(8) << "z_dim" << std::setw(10) << "n_actions"
    << std::right << std::setw(12) << "mean_psnr" << std::setw(12)
    << "mean_ssim" << "\n";
  for (const auto& r : rows) {
    char psnr_buf[32], ssim_buf[32];
    std::snprintf(psnr_buf, sizeof(psnr_buf), "%.4f", r.mean_psnr);
    std::snprintf(ssim_buf, sizeof(ssim_buf), "%.4f", r.mean_ssim);
    f << std::left << std::setw(8) << r.z_dim << std::setw(10) << r.n_actions
      << std::right << std::setw(12) << psnr_buf << std::setw(12) << ssim_buf
      << "\n";
  }
}

}  // namespace cinemagen
