// SPDX-License-Identifier: Apache-2.0
#pragma once

// Scoring harness on held-out synthetic data: rolls models (and the
// constant first-frame baseline) over test sequences, scores raw frames,
// frame differences and object-center distance, and writes the CSV plus
// human-readable report tables. Also hosts the z/Q-dimension ablation sweep.

#include <cstdint>
#include <string>
#include <vector>

#include "cinemagen/metrics.hpp"
#include "cinemagen/synthetic.hpp"
#include "cinemagen/train.hpp"

namespace cinemagen {

// One scored test sequence.
struct SequenceEval {
  std::string method;    // variant name or "constant"
  std::string category;  // pattern name
  int64_t sequence = 0;  // index within the test split
  double psnr_raw = 0.0;
  double ssim_raw = 0.0;
  double psnr_diff = 0.0;
  double ssim_diff = 0.0;
  double center_dist = 0.0;
};

// Mean over the sequences of one method within one category ("all" spans
// every category of the method).
struct EvalAggregate {
  std::string method;
  std::string category;
  int64_t sequences = 0;
  double psnr_raw = 0.0;
  double ssim_raw = 0.0;
  double psnr_diff = 0.0;
  double ssim_diff = 0.0;
  double center_dist = 0.0;
};

struct EvalReport {
  int64_t horizon = 0;
  std::vector<SequenceEval> rows;
  std::vector<EvalAggregate> aggregates;
};

// Truth frames 1..horizon of a sample as [0,1] images, black-padded past
// the end of the sequence (padded frames stay in the means).
std::vector<ImageD> truth_frames(const SyntheticSample& sample,
                                 int64_t horizon);

// Score one generated sequence against sample frames 1..horizon. Requires
// horizon >= 2 (the difference stream needs two frames).
SequenceEval score_sequence(const std::string& method,
                            const SyntheticSample& sample,
                            const std::vector<ImageD>& generated,
                            int64_t index);

// Roll the trained model from frame 0 of every test sequence and score it.
std::vector<SequenceEval> evaluate_model(const TrainedModel& model,
                                         const Dataset& test, int64_t horizon);

// Score the constant baseline (n copies of frame 0) over the same split.
std::vector<SequenceEval> evaluate_constant(const Dataset& test,
                                            int64_t horizon);

// Per-method "all" mean over every row of the method, plus per-category
// means when a method spans more than one category. Methods and categories
// keep their first-appearance order.
std::vector<EvalAggregate> aggregate_rows(const std::vector<SequenceEval>& rows);

EvalReport make_report(std::vector<SequenceEval> rows, int64_t horizon);

// Which metric column groups the report files include.
struct MetricSelection {
  bool psnr = true;    // psnr_raw + psnr_diff
  bool ssim = true;    // ssim_raw + ssim_diff
  bool center = true;  // center_distance
};

// Parses a comma list like "psnr,ssim,center"; unknown names -> ConfigError.
MetricSelection metric_selection_from_list(const std::string& list);

// CSV: "method,category,sequence" plus the selected metric columns out of
// psnr_raw,ssim_raw,psnr_diff,ssim_diff,center_distance; per-sequence rows
// first, then aggregate rows with sequence column "mean". Doubles are %.9g.
void write_eval_csv(const std::string& path, const EvalReport& report,
                    const MetricSelection& select = MetricSelection{});

// method x category table per selected metric, preceded by a header that
// records the protocol (horizon, pixel convention, padded frames included).
void write_eval_table(const std::string& path, const EvalReport& report,
                      const MetricSelection& select = MetricSelection{});

// ---------------------------------------------------------------------------
// Ablation sweep

struct AblationSetting {
  int64_t z_dim = 0;
  int64_t n_actions = 0;
};

struct AblationRow {
  int64_t z_dim = 0;
  int64_t n_actions = 0;
  double mean_psnr = 0.0;  // raw-frame means over the whole test split
  double mean_ssim = 0.0;
};

// Trains and evaluates one model per setting; everything except z_dim /
// n_actions comes verbatim from `base`. When base.out_dir is nonempty each
// run writes under <out_dir>/z<Z>_n<N>.
std::vector<AblationRow> ablation_run(const Dataset& train_data,
                                      const Dataset& test_data,
                                      const TrainConfig& base,
                                      const std::vector<AblationSetting>& dims);

// CSV "z_dim,n_actions,mean_psnr,mean_ssim" (%.9g doubles).
void write_ablation_csv(const std::string& path,
                        const std::vector<AblationRow>& rows);

// Table with the shared config recorded verbatim above the rows.
void write_ablation_table(const std::string& path,
                          const std::vector<AblationRow>& rows,
                          const TrainConfig& base);

}  // namespace cinemagen
