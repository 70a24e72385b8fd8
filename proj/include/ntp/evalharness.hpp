#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ntp/interpreter.hpp"
#include "ntp/model.hpp"
#include "ntp/taskgen.hpp"
#include "ntp/trainer.hpp"

namespace ntp::eval {

struct EvalOptions {
  int episodes = 100;
  uint64_t seed = 0;
  bool use_seen = false;  // evaluate the seen half of the split
  double adversary_prob = 0.0;
  int fixed_count = 0;  // sorting: exact instances per category (0 = split range)
  runtime::RuntimeConfig runtime;
  int workers = 4;
  std::optional<double> sweep_value;  // annotated grid coordinate, if any
};

struct EvalReport {
  std::string policy;  // variant name or "oracle"
  std::string family;
  std::string axis;
  std::optional<double> sweep_value;
  double adversary_prob = 0.0;
  int episodes = 0;
  int successes = 0;
  double success_rate = 0.0;
  std::map<std::string, int> termination;
  struct TaskResult {
    std::string key;
    int episodes = 0;
    int successes = 0;
  };
  std::vector<TaskResult> per_task;
  uint64_t seed = 0;
  std::string config_fingerprint;
  std::string checkpoint_hash;
};

// One-shot evaluation: every episode samples a task from the split, records a
// fresh expert demonstration as the specification, resets the environment
// with an unrelated seed, and runs the policy. model == nullptr runs the
// expert-oracle control (teacher-forced replay of a demonstration generated
// for the evaluation seed).
EvalReport evaluate(model::NtpModel* model, const tasks::DatasetSplit& split, const EvalOptions& opts);

// Object Sorting task-length sweep: evaluates each named model (plus an
// "oracle" control row) at every objects-per-category grid point.
std::vector<EvalReport> length_sweep(const std::vector<std::pair<std::string, model::NtpModel*>>& models,
                                     const tasks::DatasetSplit& split, const std::vector<int>& grid,
                                     int episodes, uint64_t seed, int workers = 4);

struct AdversarialReport {
  EvalReport ntp_clean, ntp_adv, gru_clean, gru_adv;
  double drop_ntp = 0.0;
  double drop_gru = 0.0;
};

// Block Stacking under the stochastic topple adversary, paired with the
// clean runs of the same seeds.
AdversarialReport adversarial_eval(model::NtpModel& ntp, model::NtpModel& gru,
                                   const tasks::DatasetSplit& split, double prob, int episodes,
                                   uint64_t seed, int workers = 4);

std::string reports_to_json(const std::vector<EvalReport>& reports);
std::string reports_to_csv(const std::vector<EvalReport>& reports);
// format is "json" or "csv"
void emit_report(const std::vector<EvalReport>& reports, const std::string& path,
                 const std::string& format);

// ---- dataset generation ----------------------------------------------------

struct GenConfig {
  tasks::Family family = tasks::Family::ObjectSorting;
  tasks::Axis axis = tasks::Axis::Semantics;
  uint64_t seed = 0;
  int n_train = 4;          // seen tasks (ignored where the split fixes it)
  int traces_per_task = 2;  // expert rollouts per seen task (>=2 enables spec swap)
  int stacking_blocks = 8;
};

// Expert traces for the seen half of a split. Sorting tasks are instantiated
// in same-count pairs so every trace has a same-instance partner.
std::vector<expert::Trace> generate_traces(const tasks::DatasetSplit& split, const GenConfig& cfg);

// On-disk dataset: manifest.json, splits/split.json, traces/*.jsonl.
void write_dataset(const std::string& dir, const tasks::DatasetSplit& split,
                   const std::vector<expert::Trace>& traces, const GenConfig& cfg);
struct Dataset {
  tasks::DatasetSplit split;
  std::vector<expert::Trace> traces;
  GenConfig cfg;
};
Dataset load_dataset(const std::string& dir);

}  // namespace ntp::eval
