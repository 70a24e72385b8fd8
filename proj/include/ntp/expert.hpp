#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ntp/taskgen.hpp"
#include "ntp/worldsim.hpp"

namespace ntp::expert {

// Fixed program registry shared by every family. APIs are the only
// primitives; mid-level programs are reused across tasks.
enum Program : int {
  kBlockStacking = 0,
  kObjectSorting = 1,
  kTableCleanup = 2,
  kPickAndPlace = 3,
  kPick = 4,
  kPlace = 5,
  kMoveTo = 6,
  kGrip = 7,
  kRelease = 8,
};
constexpr int kNumPrograms = 9;

const char* program_name(int program);
bool is_primitive(int program);
int root_program(tasks::Family family);
sim::Api api_of(int program);
// Stamped into checkpoints and dataset manifests; load rejects mismatches.
std::string registry_version();

// Demonstration frames: one before and one after every API call, so a task
// with A calls yields N = 2A frames and every supervised window spans at
// least two positions.
using SpecFrames = std::vector<sim::Observation>;

struct ProgramCallNode {
  int program = 0;
  std::optional<int> arg;
  int st = 0, ed = 0;  // global frame window, 0-based inclusive
  std::vector<ProgramCallNode> children;
};

enum class StepKind { Call, CallApi, Eop };

// One supervised tuple xi_t. Observations are frame references: along the
// expert rollout the state at each decision equals a recorded frame.
struct TraceStep {
  int node_st = 0, node_ed = 0;  // running program's window (global)
  int program = 0;               // running program
  int obs_frame = 0;             // index into frames
  StepKind kind = StepKind::Eop;
  int child_program = -1;        // Call / CallApi
  int child_st = -1, child_ed = -1;  // scoped child window (global)
  std::optional<int> arg;        // CallApi move_to target
};

struct Trace {
  tasks::TaskInstance task;
  uint64_t seed = 0;
  SpecFrames frames;
  std::vector<TraceStep> steps;
  std::vector<sim::ApiEvent> api_log;
  ProgramCallNode tree;
};

// Rolls the hard-coded hierarchical policy on reset(task, seed). The
// resulting api_log replayed from the same reset always satisfies the task's
// success predicate.
Trace demonstrate(const tasks::TaskInstance& task, uint64_t seed);

enum class ScopeLabel : int { Start = 0, End = 1, Inside = 2, Outside = 3 };

// Labels over a parent window of length n for a child sub-window
// [st, ed] (0-based, relative to the parent). A length-1 child window is
// labeled Start only (tie rule for the 4-way exclusive softmax).
std::vector<ScopeLabel> scope_labels(int n, int st, int ed);

// Inverse of scope_labels: positions of Start and End (End falls back to
// Start when absent).
std::pair<int, int> decode_labels(const std::vector<ScopeLabel>& labels);

// Per parent->child edge labels over the parent's window, in DFS order.
struct EdgeLabels {
  int parent_program;
  int child_program;
  std::vector<ScopeLabel> labels;
};
std::vector<EdgeLabels> annotate_scoping(const ProgramCallNode& tree);

// Structural checks used by tests and dataset validation.
bool windows_nested(const ProgramCallNode& tree);

// JSONL serialization: first line is a header record with the task, seed,
// frames and api log; each following line is one step record
// {window:[st,ed], program, obs:[...], targets:{...}} (1-based windows).
std::string trace_to_jsonl(const Trace& trace);
Trace trace_from_jsonl(const std::string& text);

}  // namespace ntp::expert
