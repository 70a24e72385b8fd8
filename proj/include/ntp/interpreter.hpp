#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ntp/expert.hpp"
#include "ntp/model.hpp"
#include "ntp/taskgen.hpp"
#include "ntp/worldsim.hpp"

namespace ntp::runtime {

struct RuntimeConfig {
  double alpha = 0.5;              // end-of-program threshold
  int max_depth = 6;
  int max_api_calls = 500;
  int max_iterations_per_frame = 50;
  // Derived global bound keeping runs finite for arbitrary model outputs:
  // max_api_calls * max_iterations_per_frame core iterations in total.
  int64_t global_iteration_cap() const {
    return static_cast<int64_t>(max_api_calls) * max_iterations_per_frame;
  }
};

enum class Termination { Completed, DepthExceeded, BudgetExceeded, IterationCapExceeded };
const char* termination_name(Termination t);

struct RunResult {
  bool success = false;
  std::vector<sim::ApiEvent> api_log;
  expert::ProgramCallNode call_tree;
  Termination termination = Termination::Completed;
};

// Episode environment: the world plus API dispatch, logging, and the
// optional adversary applied after every release.
struct Environment {
  sim::WorldState world;
  const tasks::TaskInstance* task = nullptr;
  double adversary_prob = 0.0;
  Rng* adversary_rng = nullptr;
  std::vector<sim::ApiEvent> api_log;

  void dispatch(sim::Api api, std::optional<int> target);
};

// Decision produced by one core iteration of a running program frame.
struct Decision {
  bool eop = false;
  double r = 0.0;
  int child_program = -1;
  int child_st = -1, child_ed = -1;  // global frame window for the child
  std::optional<int> arg;            // move_to target when child is an API
};

// Per-invocation state (the Algorithm-1 RUN frame): caches the window
// encoding and, for recurrent variants, carries the hidden state.
struct NodeState {
  virtual ~NodeState() = default;
};

// A hierarchical policy drives RUN; both the trained models and the
// teacher-forced oracle implement it.
class HierPolicy {
 public:
  virtual ~HierPolicy() = default;
  virtual void begin_episode(const expert::SpecFrames& spec) = 0;
  virtual std::unique_ptr<NodeState> begin_node(int program, int st, int ed) = 0;
  virtual Decision decide(NodeState& node, const sim::Observation& obs, double alpha) = 0;
};

// Trained-model policy (NTP, NTP-GRU, NTP-NoScope).
class ModelPolicy : public HierPolicy {
 public:
  explicit ModelPolicy(model::NtpModel& m) : model_(m) {}
  void begin_episode(const expert::SpecFrames& spec) override;
  std::unique_ptr<NodeState> begin_node(int program, int st, int ed) override;
  Decision decide(NodeState& node, const sim::Observation& obs, double alpha) override;

 private:
  model::NtpModel& model_;
  const expert::SpecFrames* spec_ = nullptr;
  model::Tensor embedded_;
};

// Teacher-forced replay of an expert call tree; used as the runtime oracle.
class OraclePolicy : public HierPolicy {
 public:
  explicit OraclePolicy(const expert::ProgramCallNode& tree) : root_(&tree) {}
  void begin_episode(const expert::SpecFrames& spec) override;
  std::unique_ptr<NodeState> begin_node(int program, int st, int ed) override;
  Decision decide(NodeState& node, const sim::Observation& obs, double alpha) override;

 private:
  const expert::ProgramCallNode* root_;
};

// Algorithm-1 execution: closed-loop recursive program invocation with EOP
// thresholding and scoped sub-specifications. Cap violations land in
// RunResult::termination, never in exceptions.
RunResult run(int program, const expert::SpecFrames& spec, Environment& env, HierPolicy& policy,
              const RuntimeConfig& config);

// Flat baselines predict primitive APIs directly until their stop flag, the
// API budget, or the iteration cap fires.
RunResult run_flat(const expert::SpecFrames& spec, Environment& env, model::NtpModel& flat_model,
                   const RuntimeConfig& config);

}  // namespace ntp::runtime
