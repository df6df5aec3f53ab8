#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "reid/checkpoint.hpp"
#include "reid/dataset.hpp"
#include "reid/evalkit.hpp"
#include "reid/losses.hpp"
#include "reid/model.hpp"
#include "reid/optimizer.hpp"
#include "reid/schedule.hpp"

namespace reid {

struct TrainConfig {
  std::string recipe_name = "attn-cl";
  LossRecipe recipe = LossRecipe::preset("attn-cl");
  int p = 4;
  int k = 2;
  int n_frames = 4;
  int epochs = 120;
  int steps_per_epoch = 8;
  Schedule schedule;
  OptimizerConfig optimizer;
  EraseParams erase;
  std::optional<double> erase_fill;  // empty = dataset train mean
  int hidden = 64;
  int embed = 32;
  double center_update_rate = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
};

// FNV-1a over a canonical field dump; stored in checkpoints so a resumed run
// can be traced back to its configuration.
std::uint64_t config_digest(const TrainConfig& config);

struct StepMetrics {
  std::map<std::string, double> terms;
  double total = 0.0;
  double erased_score_sum = 0.0;
  int erased_frames = 0;
};

// One optimization step: forward, losses, backward, optimizer update, BN
// running-stat commit, then the center update.
StepMetrics train_step(ModelParams& model, CenterState& centers,
                       OptimizerState& opt, const ClipBatch& batch,
                       const std::vector<int>& labels, const LossRecipe& recipe,
                       const OptimizerConfig& opt_config, double lr);

struct EpochLog {
  int epoch = 0;
  double lr = 0.0;
  std::map<std::string, double> mean_terms;
  double mean_total = 0.0;
  double erased_attention = -1.0;  // mean score on erased frames; -1 if none
};

struct FitResult {
  Checkpoint checkpoint;
  std::vector<EpochLog> log;
};

// Invoked after each epoch; return true to stop early.
using EpochCallback =
    std::function<bool(int epoch, const ModelParams&, const CenterState&)>;

// Deterministic in (config, dataset, init): batches come from streams keyed
// by (seed, epoch, step), so resuming from a checkpoint replays the exact
// remainder of an unbroken run.
FitResult fit(const TrainConfig& config, const Dataset& ds,
              const Checkpoint* init = nullptr, const EpochCallback& callback = {});

// Sorted-unique train ids define the class indices used everywhere.
std::map<int, int> class_index_of(const Dataset& ds);
std::vector<int> clip_class_labels(const ClipBatch& batch,
                                   const std::map<int, int>& class_of_pid);

struct GradCheckEntry {
  std::string tensor;
  double max_rel_err = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double tol = 0.0;
  bool pass = false;
};

// Central finite differences (step 1e-5) of the total loss against the
// analytic gradient for every trainable tensor, on one seeded batch. Centers
// are not optimizer parameters and deliberately have no entry.
GradCheckReport grad_check(const TrainConfig& config, const Dataset& ds,
                           std::uint64_t seed, double tol);

// Mean attention weight that infer-mode forward puts on erased frames,
// averaged over freshly sampled batches; used to probe the erase penalty.
double measure_erased_attention(const ModelParams& model, const Dataset& ds,
                                const TrainConfig& config, std::uint64_t seed,
                                int num_batches);

struct HpoRange {
  double lo = 0.0;
  double hi = 0.0;
  bool log_scale = false;
};

struct HpoSpace {
  std::map<std::string, HpoRange> ranges;  // see apply_hpo_param for names

  static HpoSpace defaults();
};

TrainConfig apply_hpo_param(TrainConfig config, const std::string& name, double value);

struct HpoTrial {
  int index = 0;
  TrainConfig config;
  double map = 0.0;
  Scores scores;
};

// Seeded random search: samples each range per trial, runs fit + evaluate,
// ranks by test mAP (ties by trial index).
std::vector<HpoTrial> random_search(const HpoSpace& space, int budget,
                                    const TrainConfig& base, const Dataset& ds,
                                    const EvalConfig& eval_config,
                                    std::uint64_t seed);

}  // namespace reid
