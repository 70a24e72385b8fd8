#include "ntp/interpreter.hpp"

#include <algorithm>
#include <stdexcept>

namespace ntp::runtime {

const char* termination_name(Termination t) {
  switch (t) {
    case Termination::Completed: return "completed";
    case Termination::DepthExceeded: return "depth_exceeded";
    case Termination::BudgetExceeded: return "budget_exceeded";
    case Termination::IterationCapExceeded: return "iteration_cap_exceeded";
  }
  return "?";
}

void Environment::dispatch(sim::Api api, std::optional<int> target) {
  api_log.push_back(sim::step_api(world, api, target));
  if (api == sim::Api::Release && adversary_prob > 0.0 && adversary_rng)
    sim::apply_adversary(world, *adversary_rng, adversary_prob);
}

// ---- ModelPolicy -----------------------------------------------------------

namespace {

struct ModelNodeState : NodeState {
  int program = 0;
  int st = 0, ed = 0;
  model::Tensor c;      // window encoding, computed once per RUN invocation
  model::Tensor p_emb;  // program embedding
  model::Tensor h;      // recurrent state (GRU variant)
  bool has_h = false;
};

struct OracleNodeState : NodeState {
  const expert::ProgramCallNode* node = nullptr;
  size_t next_child = 0;
};

const expert::ProgramCallNode* find_node(const expert::ProgramCallNode* root, int program, int st,
                                         int ed) {
  if (root->program == program && root->st == st && root->ed == ed) return root;
  for (const auto& child : root->children) {
    if (st >= child.st && ed <= child.ed) {
      if (const auto* hit = find_node(&child, program, st, ed)) return hit;
    }
  }
  return nullptr;
}

}  // namespace

void ModelPolicy::begin_episode(const expert::SpecFrames& spec) {
  spec_ = &spec;
  embedded_ = model_.infer_embed(model::FrameSpan(spec.data(), spec.size()));
}

std::unique_ptr<NodeState> ModelPolicy::begin_node(int program, int st, int ed) {
  auto node = std::make_unique<ModelNodeState>();
  node->program = program;
  node->st = st;
  node->ed = ed;
  node->c = model_.infer_spec_encoding(embedded_, st, ed);
  node->p_emb = model_.infer_prog_embedding(program);
  if (model_.config().variant == model::Variant::NtpGru) {
    node->h = model::Tensor(1, model_.config().gru_hidden);
    node->has_h = true;
  }
  return node;
}

Decision ModelPolicy::decide(NodeState& node_state, const sim::Observation& obs, double alpha) {
  auto& node = static_cast<ModelNodeState&>(node_state);
  const auto& cfg = model_.config();
  model::Tensor s = model_.infer_state(obs);
  auto core = model_.infer_core(node.c, node.p_emb, s, node.has_h ? &node.h : nullptr);
  if (node.has_h) node.h = core.h;

  Decision d;
  d.r = core.r;
  if (core.r >= alpha) {
    d.eop = true;
    return d;
  }
  auto [child, child_emb] = model::memory_lookup(core.key, model_.params().value("mem.key"),
                                                 model_.params().value("mem.prog"));
  d.child_program = child;

  int sub_st = node.st, sub_ed = node.ed;
  if (model::has_scoping(cfg.variant)) {
    auto sel = model_.infer_scope(embedded_, node.st, node.ed, node.p_emb, s);
    sub_st = node.st + sel.st;
    sub_ed = node.st + sel.ed;
  }
  d.child_st = sub_st;
  d.child_ed = sub_ed;

  if (expert::is_primitive(child) && child == expert::kMoveTo) {
    model::Tensor c_sub = model_.infer_spec_encoding(embedded_, sub_st, sub_ed);
    model::Tensor p_api = model_.infer_prog_embedding(child);
    model::Tensor feats =
        model_.args_slot_matrix((*spec_)[sub_st], (*spec_)[sub_ed], obs);
    auto [target, logits] = model_.infer_args(feats, s, c_sub, p_api);
    d.arg = target;
  }
  return d;
}

// ---- OraclePolicy ----------------------------------------------------------

void OraclePolicy::begin_episode(const expert::SpecFrames&) {}

std::unique_ptr<NodeState> OraclePolicy::begin_node(int program, int st, int ed) {
  auto node = std::make_unique<OracleNodeState>();
  node->node = find_node(root_, program, st, ed);
  if (!node->node) throw std::runtime_error("oracle: runtime entered a node not in the expert tree");
  return node;
}

Decision OraclePolicy::decide(NodeState& node_state, const sim::Observation&, double) {
  auto& node = static_cast<OracleNodeState&>(node_state);
  Decision d;
  if (node.next_child >= node.node->children.size()) {
    d.eop = true;
    d.r = 1.0;
    return d;
  }
  const auto& child = node.node->children[node.next_child++];
  d.r = 0.0;
  d.child_program = child.program;
  d.child_st = child.st;
  d.child_ed = child.ed;
  d.arg = child.arg;
  return d;
}

// ---- Algorithm-1 runtime ---------------------------------------------------

namespace {

struct Runner {
  Environment& env;
  HierPolicy& policy;
  const RuntimeConfig& cfg;
  int64_t iterations = 0;

  Termination exec(int program, int st, int ed, int depth, expert::ProgramCallNode& node) {
    node.program = program;
    node.st = st;
    node.ed = ed;
    auto state = policy.begin_node(program, st, ed);
    for (int iter = 0; iter < cfg.max_iterations_per_frame; ++iter) {
      if (++iterations > cfg.global_iteration_cap()) return Termination::IterationCapExceeded;
      sim::Observation obs = sim::observe(env.world);  // re-read every iteration
      Decision d = policy.decide(*state, obs, cfg.alpha);
      if (d.r >= cfg.alpha) return Termination::Completed;
      if (d.child_program < 0 || d.child_program >= expert::kNumPrograms)
        return Termination::Completed;  // defensive: treat nonsense as return
      int cst = std::clamp(d.child_st, st, ed);
      int ced = std::clamp(d.child_ed, cst, ed);
      if (expert::is_primitive(d.child_program)) {
        if (static_cast<int>(env.api_log.size()) >= cfg.max_api_calls)
          return Termination::BudgetExceeded;
        std::optional<int> target = d.arg;
        expert::ProgramCallNode leaf;
        leaf.program = d.child_program;
        leaf.arg = target;
        leaf.st = cst;
        leaf.ed = ced;
        node.children.push_back(leaf);
        sim::Api api = expert::api_of(d.child_program);
        if (api == sim::Api::MoveTo) {
          if (!target) return Termination::Completed;  // unreachable for trained heads
          bool valid = env.world.find_object(*target) || env.world.find_container(*target);
          if (!valid) {
            // An absent slot is a wasted call, not a crash: burn budget and
            // keep the log honest about the attempted target.
            sim::ApiEvent e;
            e.step = env.world.step_count;
            e.api = api;
            e.target = target;
            e.grasp_miss = false;
            env.api_log.push_back(e);
            continue;
          }
        }
        env.dispatch(api, target);
      } else {
        if (depth + 1 > cfg.max_depth) return Termination::DepthExceeded;
        node.children.emplace_back();
        Termination t = exec(d.child_program, cst, ced, depth + 1, node.children.back());
        if (t != Termination::Completed) return t;
      }
    }
    return Termination::IterationCapExceeded;
  }
};

}  // namespace

RunResult run(int program, const expert::SpecFrames& spec, Environment& env, HierPolicy& policy,
              const RuntimeConfig& config) {
  if (spec.empty()) throw std::invalid_argument("run: empty task specification");
  policy.begin_episode(spec);
  RunResult result;
  Runner runner{env, policy, config};
  result.termination =
      runner.exec(program, 0, static_cast<int>(spec.size()) - 1, 1, result.call_tree);
  result.api_log = env.api_log;
  result.success = env.task ? tasks::success(env.world, *env.task) : false;
  return result;
}

RunResult run_flat(const expert::SpecFrames& spec, Environment& env, model::NtpModel& flat_model,
                   const RuntimeConfig& config) {
  if (spec.empty()) throw std::invalid_argument("run_flat: empty task specification");
  RunResult result;
  result.call_tree.program = -1;
  result.call_tree.st = 0;
  result.call_tree.ed = static_cast<int>(spec.size()) - 1;

  model::Tensor embedded = flat_model.infer_embed(model::FrameSpan(spec.data(), spec.size()));
  model::Tensor c = flat_model.infer_spec_encoding(embedded, 0, static_cast<int>(spec.size()) - 1);
  model::Tensor h(1, flat_model.config().gru_hidden);
  bool recurrent = flat_model.config().variant == model::Variant::FlatGru;

  result.termination = Termination::BudgetExceeded;
  for (int iter = 0; iter < config.max_api_calls; ++iter) {
    sim::Observation obs = sim::observe(env.world);
    model::Tensor s = flat_model.infer_state(obs);
    auto out = flat_model.infer_flat(c, s, recurrent ? &h : nullptr);
    if (recurrent) h = out.h;
    if (out.stop >= config.alpha) {
      result.termination = Termination::Completed;
      break;
    }
    sim::Api api = static_cast<sim::Api>(out.api);
    std::optional<int> target;
    if (api == sim::Api::MoveTo) {
      auto [t, logits] = flat_model.infer_flat_args(
          flat_model.args_slot_matrix(spec.front(), spec.back(), obs), s, c);
      target = t;
      bool valid = env.world.find_object(t) || env.world.find_container(t);
      if (!valid) {
        sim::ApiEvent e;
        e.step = env.world.step_count;
        e.api = api;
        e.target = target;
        env.api_log.push_back(e);
        expert::ProgramCallNode leaf;
        leaf.program = expert::kMoveTo;
        leaf.arg = target;
        leaf.st = 0;
        leaf.ed = result.call_tree.ed;
        result.call_tree.children.push_back(leaf);
        continue;
      }
    }
    env.dispatch(api, target);
    expert::ProgramCallNode leaf;
    leaf.program = api == sim::Api::MoveTo  ? expert::kMoveTo
                   : api == sim::Api::Grip ? expert::kGrip
                                            : expert::kRelease;
    leaf.arg = target;
    leaf.st = 0;
    leaf.ed = result.call_tree.ed;
    result.call_tree.children.push_back(leaf);
  }
  result.api_log = env.api_log;
  result.success = env.task ? tasks::success(env.world, *env.task) : false;
  return result;
}

}  // namespace ntp::runtime
