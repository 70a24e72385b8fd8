#include "ntp/expert.hpp"

#include <functional>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "ntp/util.hpp"

namespace ntp::expert {

namespace {

struct PickPlaceStep {
  int pick_target;   // object slot to grasp
  int place_target;  // object or container slot to drop onto
};

// The per-family plan is a flat list of pick-and-place units; everything
// below pick_and_place is identical across families.
std::vector<PickPlaceStep> plan_for(const tasks::TaskInstance& task) {
  std::vector<PickPlaceStep> plan;
  switch (task.family) {
    case tasks::Family::ObjectSorting: {
      const auto& g = task.sorting();
      int base = tasks::kSortCategories * tasks::kMaxPerCategory;
      for (int c = 0; c < tasks::kSortCategories; ++c)
        for (int j = 0; j < g.counts[c]; ++j)
          plan.push_back({c * tasks::kMaxPerCategory + j, base + g.container_of[c]});
      break;
    }
    case tasks::Family::BlockStacking: {
      for (auto& [above, below] : task.stacking().pairs()) plan.push_back({above, below});
      break;
    }
    case tasks::Family::TableCleanup: {
      const auto& g = task.cleanup();
      int bin = tasks::kMaxBowls + tasks::kMaxForks;
      int prev = bin;
      for (int b : g.bowl_order) {
        plan.push_back({b, prev});
        prev = b;
      }
      for (int f = 0; f < g.num_forks; ++f) plan.push_back({tasks::kMaxBowls + f, prev});
      break;
    }
  }
  return plan;
}

}  // namespace

const char* program_name(int program) {
  static const char* names[kNumPrograms] = {"block_stacking", "object_sorting", "table_cleanup",
                                            "pick_and_place", "pick",           "place",
                                            "move_to",        "grip",           "release"};
  if (program < 0 || program >= kNumPrograms) throw std::invalid_argument("bad program id");
  return names[program];
}

bool is_primitive(int program) { return program >= kMoveTo && program <= kRelease; }

int root_program(tasks::Family family) {
  switch (family) {
    case tasks::Family::BlockStacking: return kBlockStacking;
    case tasks::Family::ObjectSorting: return kObjectSorting;
    case tasks::Family::TableCleanup: return kTableCleanup;
  }
  return kBlockStacking;
}

sim::Api api_of(int program) {
  switch (program) {
    case kMoveTo: return sim::Api::MoveTo;
    case kGrip: return sim::Api::Grip;
    case kRelease: return sim::Api::Release;
  }
  throw std::invalid_argument("not an api program");
}

std::string registry_version() {
  std::string names;
  for (int p = 0; p < kNumPrograms; ++p) {
    names += program_name(p);
    names += is_primitive(p) ? "!" : ";";
  }
  return "ntp-registry-1/" + sha1_hex(names).substr(0, 12);
}

Trace demonstrate(const tasks::TaskInstance& task, uint64_t seed) {
  Trace trace;
  trace.task = task;
  trace.seed = seed;

  sim::WorldState world = tasks::reset(task, seed);
  auto plan = plan_for(task);

  auto run_api = [&](sim::Api api, std::optional<int> target) {
    trace.frames.push_back(sim::observe(world));
    sim::ApiEvent e = sim::step_api(world, api, target);
    trace.api_log.push_back(e);
    trace.frames.push_back(sim::observe(world));
  };

  // APIs of unit i occupy frames [8i, 8i+7]: each call k contributes its
  // before-frame at 2k and after-frame at 2k+1.
  ProgramCallNode root;
  root.program = root_program(task.family);
  for (size_t i = 0; i < plan.size(); ++i) {
    int f0 = static_cast<int>(8 * i);
    ProgramCallNode pp{kPickAndPlace, std::nullopt, f0, f0 + 7, {}};
    ProgramCallNode pick{kPick, std::nullopt, f0, f0 + 3, {}};
    pick.children.push_back({kMoveTo, plan[i].pick_target, f0, f0 + 1, {}});
    pick.children.push_back({kGrip, std::nullopt, f0 + 2, f0 + 3, {}});
    ProgramCallNode place{kPlace, std::nullopt, f0 + 4, f0 + 7, {}};
    place.children.push_back({kMoveTo, plan[i].place_target, f0 + 4, f0 + 5, {}});
    place.children.push_back({kRelease, std::nullopt, f0 + 6, f0 + 7, {}});
    pp.children.push_back(pick);
    pp.children.push_back(place);
    root.children.push_back(pp);

    run_api(sim::Api::MoveTo, plan[i].pick_target);
    run_api(sim::Api::Grip, std::nullopt);
    run_api(sim::Api::MoveTo, plan[i].place_target);
    run_api(sim::Api::Release, std::nullopt);
  }
  root.st = 0;
  root.ed = static_cast<int>(trace.frames.size()) - 1;
  if (trace.frames.empty()) {
    // A task with no work still needs a nonempty specification.
    trace.frames.push_back(sim::observe(world));
    root.ed = 0;
  }
  trace.tree = root;

  // Flatten the tree into supervised steps (DFS order).
  std::function<void(const ProgramCallNode&)> emit = [&](const ProgramCallNode& node) {
    for (const auto& child : node.children) {
      TraceStep s;
      s.node_st = node.st;
      s.node_ed = node.ed;
      s.program = node.program;
      s.obs_frame = child.st;  // state right before the child's first API
      s.kind = is_primitive(child.program) ? StepKind::CallApi : StepKind::Call;
      s.child_program = child.program;
      s.child_st = child.st;
      s.child_ed = child.ed;
      s.arg = child.arg;
      trace.steps.push_back(s);
      if (!is_primitive(child.program)) emit(child);
    }
    TraceStep eop;
    eop.node_st = node.st;
    eop.node_ed = node.ed;
    eop.program = node.program;
    eop.obs_frame = node.ed;  // state after the node's last API
    eop.kind = StepKind::Eop;
    trace.steps.push_back(eop);
  };
  emit(trace.tree);
  return trace;
}

std::vector<ScopeLabel> scope_labels(int n, int st, int ed) {
  if (n <= 0 || st < 0 || ed < st || ed >= n) throw std::invalid_argument("invalid scope window");
  std::vector<ScopeLabel> labels(n, ScopeLabel::Outside);
  if (st == ed) {
    labels[st] = ScopeLabel::Start;  // tie rule for length-1 windows
    return labels;
  }
  labels[st] = ScopeLabel::Start;
  labels[ed] = ScopeLabel::End;
  for (int i = st + 1; i < ed; ++i) labels[i] = ScopeLabel::Inside;
  return labels;
}

std::pair<int, int> decode_labels(const std::vector<ScopeLabel>& labels) {
  int st = -1, ed = -1;
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == ScopeLabel::Start && st < 0) st = static_cast<int>(i);
    if (labels[i] == ScopeLabel::End) ed = static_cast<int>(i);
  }
  if (st < 0) throw std::invalid_argument("labels without Start");
  if (ed < 0) ed = st;
  return {st, ed};
}

std::vector<EdgeLabels> annotate_scoping(const ProgramCallNode& tree) {
  std::vector<EdgeLabels> out;
  std::function<void(const ProgramCallNode&)> walk = [&](const ProgramCallNode& node) {
    int n = node.ed - node.st + 1;
    if (n <= 0) throw std::invalid_argument("invalid tree: empty window");
    for (const auto& child : node.children) {
      EdgeLabels e;
      e.parent_program = node.program;
      e.child_program = child.program;
      e.labels = scope_labels(n, child.st - node.st, child.ed - node.st);
      out.push_back(std::move(e));
      if (!child.children.empty() || !is_primitive(child.program)) walk(child);
    }
  };
  walk(tree);
  return out;
}

bool windows_nested(const ProgramCallNode& tree) {
  if (tree.st > tree.ed) return false;
  int cursor = tree.st - 1;
  for (const auto& child : tree.children) {
    if (child.st < tree.st || child.ed > tree.ed) return false;
    if (child.st <= cursor) return false;  // overlap or out of order
    cursor = child.ed;
    if (!windows_nested(child)) return false;
  }
  return true;
}

namespace {

nlohmann::ordered_json step_targets(const TraceStep& s) {
  nlohmann::ordered_json t;
  if (s.kind == StepKind::Eop) {
    t["eop"] = 1;
    return t;
  }
  t["next_program"] = s.child_program;
  // labels over the node window for the scoped child window
  auto labels = scope_labels(s.node_ed - s.node_st + 1, s.child_st - s.node_st, s.child_ed - s.node_st);
  std::vector<int> li(labels.size());
  for (size_t i = 0; i < labels.size(); ++i) li[i] = static_cast<int>(labels[i]);
  t["labels"] = li;
  if (s.kind == StepKind::CallApi && s.arg) t["args"] = {*s.arg};
  return t;
}

}  // namespace

std::string trace_to_jsonl(const Trace& trace) {
  std::string out;
  {
    nlohmann::ordered_json h;
    h["type"] = "header";
    h["registry"] = registry_version();
    h["task"] = nlohmann::ordered_json::parse(tasks::task_to_json(trace.task));
    h["seed"] = trace.seed;
    h["frames"] = trace.frames;
    auto log_arr = nlohmann::ordered_json::array();
    for (const auto& e : trace.api_log) {
      nlohmann::ordered_json ej;
      ej["step"] = e.step;
      ej["api"] = sim::api_name(e.api);
      ej["args"] = e.target ? nlohmann::ordered_json::array({*e.target}) : nlohmann::ordered_json::array();
      ej["grasp_miss"] = e.grasp_miss;
      log_arr.push_back(ej);
    }
    h["api_log"] = log_arr;
    out += h.dump();
    out += '\n';
  }
  for (const auto& s : trace.steps) {
    nlohmann::ordered_json j;
    j["window"] = {s.node_st + 1, s.node_ed + 1};
    j["program"] = s.program;
    j["obs"] = trace.frames[s.obs_frame];
    if (s.kind != StepKind::Eop) j["child_window"] = {s.child_st + 1, s.child_ed + 1};
    j["targets"] = step_targets(s);
    out += j.dump();
    out += '\n';
  }
  return out;
}

Trace trace_from_jsonl(const std::string& text) {
  Trace trace;
  std::istringstream in(text);
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line);
    if (!have_header) {
      if (j.value("type", "") != "header") throw std::runtime_error("trace parse error: missing header");
      if (j.at("registry").get<std::string>() != registry_version())
        throw std::runtime_error("registry version mismatch in trace file");
      trace.task = tasks::task_from_json(j.at("task").dump());
      trace.seed = j.at("seed").get<uint64_t>();
      trace.frames = j.at("frames").get<SpecFrames>();
      std::string log_lines;
      for (const auto& e : j.at("api_log")) log_lines += e.dump() + "\n";
      trace.api_log = sim::api_log_from_jsonl(log_lines);
      have_header = true;
      continue;
    }
    TraceStep s;
    s.node_st = j.at("window")[0].get<int>() - 1;
    s.node_ed = j.at("window")[1].get<int>() - 1;
    s.program = j.at("program").get<int>();
    const auto& t = j.at("targets");
    if (t.contains("eop")) {
      s.kind = StepKind::Eop;
      s.obs_frame = s.node_ed;
    } else {
      s.child_program = t.at("next_program").get<int>();
      s.kind = is_primitive(s.child_program) ? StepKind::CallApi : StepKind::Call;
      s.child_st = j.at("child_window")[0].get<int>() - 1;
      s.child_ed = j.at("child_window")[1].get<int>() - 1;
      s.obs_frame = s.child_st;
      if (t.contains("args")) s.arg = t.at("args")[0].get<int>();
    }
    trace.steps.push_back(s);
  }
  if (!have_header) throw std::runtime_error("trace parse error: empty file");
  return trace;
}

}  // namespace ntp::expert
