#pragma once

#include <map>
#include <string>
#include <vector>

#include "ntp/expert.hpp"
#include "ntp/model.hpp"

namespace ntp::train {

struct TrainConfig {
  double lr = 1e-3;
  int batch_size = 64;
  int epochs = 10;
  uint64_t seed = 0;
  double w_key = 1.0, w_eop = 1.0, w_scope = 1.0, w_args = 1.0;
  double ema_decay = 0.9;   // per-program error statistic decay
  double err_floor = 0.05;  // curriculum floor epsilon
  int workers = 4;          // fixed count keeps batch merges reproducible
  bool scope_average = true;  // average scoping CE over positions (vs sum)
  bool spec_swap = true;      // pair each trace with a same-task demo from another seed
};

struct LossBreakdown {
  double program_key_ce = 0.0;
  double eop_bce = 0.0;
  double scoping_ce = 0.0;
  double api_arg_ce = 0.0;
  double total = 0.0;
  // per-head step counts and correct-prediction counts
  int key_n = 0, eop_n = 0, scope_n = 0, args_n = 0, steps = 0;
  int key_ok = 0, eop_ok = 0, scope_ok = 0, args_ok = 0;
};

// Supervised steps grouped by governing program, with per-program running
// error statistics for the adaptive curriculum. One item is the sampling
// unit: a single step for the reactive variants, a program invocation (node)
// for NTP-GRU, and a whole episode for the flat baselines.
class TraceDataset {
 public:
  struct Item {
    int trace = 0;       // index into traces()
    int spec_from = 0;   // trace index supplying the demonstration frames
    std::vector<int> steps;  // step indices (flat: API indices, size+1 = stop)
  };
  struct Group {
    int program = 0;
    std::vector<Item> items;
    double error = 1.0;  // running EMA of prediction error, initialized to 1
  };

  static TraceDataset build(std::vector<expert::Trace> traces, model::Variant variant,
                            bool spec_swap);

  const std::vector<expert::Trace>& traces() const { return traces_; }
  const std::vector<Group>& groups() const { return groups_; }
  std::vector<Group>& groups() { return groups_; }
  size_t total_items() const;
  model::Variant variant() const { return variant_; }

 private:
  std::vector<expert::Trace> traces_;
  std::vector<Group> groups_;
  model::Variant variant_ = model::Variant::Ntp;
};

struct ItemRef {
  int group = 0;
  int item = 0;
};
using Batch = std::vector<ItemRef>;

// Programs are sampled with probability proportional to (error + floor),
// then items uniformly within the chosen program.
Batch curriculum_sample(const TraceDataset& dataset, Rng& rng, int batch_size, double err_floor);

// Forward/backward over a batch; gradients accumulate into the model's
// parameter store (averaged over items). Set with_grad=false to score only.
LossBreakdown compute_losses(model::NtpModel& model, const TraceDataset& dataset, const Batch& batch,
                             const TrainConfig& cfg, bool with_grad = true, int workers = 1);

struct EpochMetrics {
  int epoch = 0;
  int batches = 0;
  LossBreakdown loss;  // averaged over the epoch
  std::map<int, double> program_error;
};

// One pass of curriculum batches with Adam updates and error-stat refresh.
EpochMetrics train_epoch(model::NtpModel& model, TraceDataset& dataset, const TrainConfig& cfg,
                         Rng& rng, int epoch_index);

// Full loop; optionally appends one CSV row per epoch to metrics_csv.
std::vector<EpochMetrics> train(model::NtpModel& model, TraceDataset& dataset, const TrainConfig& cfg,
                                const std::string& metrics_csv_path = "");

std::string metrics_csv_header();
std::string metrics_csv_row(const EpochMetrics& m);

// Checkpoint round-trip lives with the model; re-exported here because the
// training loop is what owns checkpoint timing.
using model::load_checkpoint;
using model::save_checkpoint;

}  // namespace ntp::train
