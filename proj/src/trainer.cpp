#include "ntp/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <stdexcept>
#include <thread>

#include "ntp/nn.hpp"
#include "ntp/util.hpp"

namespace ntp::train {

using expert::StepKind;
using model::Graph;
using model::NtpModel;
using model::ParamView;
using model::Tensor;
using model::Variant;

namespace {

constexpr int kFlatGroupId = -1;

int api_class(sim::Api api) { return static_cast<int>(api); }

struct StepScore {
  double key = 0, eop = 0, scope = 0, args = 0;
  int key_n = 0, eop_n = 0, scope_n = 0, args_n = 0;
  int key_ok = 0, eop_ok = 0, scope_ok = 0, args_ok = 0;
  int steps = 0;
  double weighted_total(const TrainConfig& cfg) const {
    return cfg.w_key * key + cfg.w_eop * eop + cfg.w_scope * scope + cfg.w_args * args;
  }
};

// Builds the loss subgraph for one hierarchical step within an already
// prepared node context (embedded window, c, p). Returns the scalar loss
// vars to be weighted into the item loss.
struct NodeCtx {
  Graph::Var embedded;  // L x frame_dim over the node window
  Graph::Var c;
  Graph::Var p;
  int node_st = 0, node_ed = 0;  // effective window (global frame indices)
};

std::vector<Graph::Var> hier_step_losses(NtpModel& m, Graph& g, ParamView& pv, const NodeCtx& ctx,
                                         const expert::Trace& tr, const expert::SpecFrames& specF,
                                         const expert::TraceStep& st, Graph::Var s_enc,
                                         Graph::Var r_logit, Graph::Var key, const TrainConfig& cfg,
                                         StepScore& score) {
  std::vector<Graph::Var> losses;
  std::vector<double> weights;

  bool eop_target = st.kind == StepKind::Eop;
  Graph::Var eop_loss = g.sigmoid_bce(r_logit, eop_target ? 1.0 : 0.0);
  losses.push_back(eop_loss);
  weights.push_back(cfg.w_eop);
  score.eop += g.value(eop_loss)[0];
  score.eop_n += 1;
  score.eop_ok += ((g.value(r_logit)[0] >= 0.0) == eop_target) ? 1 : 0;

  if (st.kind == StepKind::Eop) {
    score.steps += 1;
    return {g.add_scalars(losses, weights)};
  }

  Graph::Var plogits = m.program_logits(g, pv, key);
  Graph::Var key_loss = g.softmax_ce_rows(plogits, {st.child_program});
  losses.push_back(key_loss);
  weights.push_back(cfg.w_key);
  score.key += g.value(key_loss)[0];
  score.key_n += 1;
  {
    const Tensor& pl = g.value(plogits);
    int best = 0;
    for (int i = 1; i < pl.cols; ++i)
      if (pl[i] > pl[best]) best = i;
    score.key_ok += best == st.child_program ? 1 : 0;
  }

  int rel_st = st.child_st - ctx.node_st;
  int rel_ed = st.child_ed - ctx.node_st;
  int win_len = ctx.node_ed - ctx.node_st + 1;

  if (model::has_scoping(m.config().variant)) {
    auto labels = expert::scope_labels(win_len, rel_st, rel_ed);
    std::vector<int> targets(labels.size());
    for (size_t i = 0; i < labels.size(); ++i) targets[i] = static_cast<int>(labels[i]);
    Graph::Var slogits = m.scope_logits(g, pv, ctx.embedded, ctx.p, s_enc);
    Graph::Var scope_loss = g.softmax_ce_rows(slogits, targets, cfg.scope_average);
    losses.push_back(scope_loss);
    weights.push_back(cfg.w_scope);
    score.scope += g.value(scope_loss)[0];
    score.scope_n += 1;
    auto sel = model::decode_scope(num::softmax_rows(g.value(slogits)));
    score.scope_ok += (sel.st == rel_st && sel.ed == rel_ed) ? 1 : 0;
  }

  if (st.kind == StepKind::CallApi && st.child_program == expert::kMoveTo && st.arg) {
    int sub_st = st.child_st, sub_ed = st.child_ed;
    if (!model::has_scoping(m.config().variant)) {
      sub_st = ctx.node_st;
      sub_ed = ctx.node_ed;
    }
    Graph::Var c_sub = m.encode_spec(
        g, pv, g.slice_rows(ctx.embedded, sub_st - ctx.node_st, sub_ed - sub_st + 1));
    Graph::Var p_api = m.prog_embedding(g, pv, st.child_program);
    Tensor feats = m.args_slot_matrix(specF[sub_st], specF[sub_ed], tr.frames[st.obs_frame]);
    Graph::Var alogits = m.args_logits(g, pv, feats, s_enc, c_sub, p_api);
    Graph::Var args_loss = g.softmax_ce_rows(alogits, {*st.arg});
    losses.push_back(args_loss);
    weights.push_back(cfg.w_args);
    score.args += g.value(args_loss)[0];
    score.args_n += 1;
    const Tensor& al = g.value(alogits);
    int best = 0;
    for (int i = 1; i < al.cols; ++i)
      if (al[i] > al[best]) best = i;
    score.args_ok += best == *st.arg ? 1 : 0;
  }
  score.steps += 1;
  return {g.add_scalars(losses, weights)};
}

// Loss graph for one dataset item; returns the item's summed loss var.
Graph::Var item_loss_graph(NtpModel& m, Graph& g, ParamView& pv, const TraceDataset& ds,
                           const TraceDataset::Item& item, const TrainConfig& cfg,
                           StepScore& score) {
  const expert::Trace& tr = ds.traces()[item.trace];
  const expert::SpecFrames& specF = ds.traces()[item.spec_from].frames;
  Variant var = m.config().variant;
  std::vector<Graph::Var> step_losses;

  if (!model::is_flat(var)) {
    // one node's decision sequence (reactive items carry a single step)
    const expert::TraceStep& first = tr.steps[item.steps.front()];
    NodeCtx ctx;
    ctx.node_st = model::has_scoping(var) ? first.node_st : 0;
    ctx.node_ed = model::has_scoping(var) ? first.node_ed : static_cast<int>(specF.size()) - 1;
    ctx.embedded = m.embed_frames(
        g, pv, model::FrameSpan(specF.data() + ctx.node_st, ctx.node_ed - ctx.node_st + 1));
    ctx.c = m.encode_spec(g, pv, ctx.embedded);
    ctx.p = m.prog_embedding(g, pv, first.program);
    std::optional<Graph::Var> h;
    if (var == Variant::NtpGru) h = g.input(Tensor(1, m.config().gru_hidden));

    for (int step_idx : item.steps) {
      const expert::TraceStep& st = tr.steps[step_idx];
      Graph::Var s_enc = m.encode_state(g, pv, tr.frames[st.obs_frame]);
      model::CoreOut core = m.core_forward(g, pv, ctx.c, ctx.p, s_enc, h);
      if (var == Variant::NtpGru) h = core.h;
      auto ls = hier_step_losses(m, g, pv, ctx, tr, specF, st, s_enc, core.r_logit, core.key, cfg, score);
      step_losses.insert(step_losses.end(), ls.begin(), ls.end());
    }
  } else {
    // flat baselines: the item is a whole episode over the api log
    int n_api = static_cast<int>(tr.api_log.size());
    Graph::Var embedded = m.embed_frames(g, pv, model::FrameSpan(specF.data(), specF.size()));
    Graph::Var c = m.encode_spec(g, pv, embedded);
    std::optional<Graph::Var> h;
    if (var == Variant::FlatGru) h = g.input(Tensor(1, m.config().gru_hidden));

    for (int k : item.steps) {
      bool stop_step = k >= n_api;
      const sim::Observation& obs = stop_step ? tr.frames.back() : tr.frames[2 * k];
      Graph::Var s_enc = m.encode_state(g, pv, obs);
      auto out = m.flat_forward(g, pv, c, s_enc, h);
      if (var == Variant::FlatGru) h = out.h;

      std::vector<Graph::Var> losses;
      std::vector<double> weights;
      Graph::Var stop_loss = g.sigmoid_bce(out.stop_logit, stop_step ? 1.0 : 0.0);
      losses.push_back(stop_loss);
      weights.push_back(cfg.w_eop);
      score.eop += g.value(stop_loss)[0];
      score.eop_n += 1;
      score.eop_ok += ((g.value(out.stop_logit)[0] >= 0.0) == stop_step) ? 1 : 0;

      if (!stop_step) {
        const sim::ApiEvent& ev = tr.api_log[k];
        int api_target = api_class(ev.api);
        Graph::Var api_loss = g.softmax_ce_rows(out.api_logits, {api_target});
        losses.push_back(api_loss);
        weights.push_back(cfg.w_key);
        score.key += g.value(api_loss)[0];
        score.key_n += 1;
        const Tensor& al = g.value(out.api_logits);
        int best = 0;
        for (int i = 1; i < al.cols; ++i)
          if (al[i] > al[best]) best = i;
        score.key_ok += best == api_target ? 1 : 0;

        if (ev.api == sim::Api::MoveTo && ev.target) {
          Tensor feats = m.args_slot_matrix(specF.front(), specF.back(), obs);
          Graph::Var alogits = m.flat_args_logits(g, pv, feats, s_enc, c);
          Graph::Var args_loss = g.softmax_ce_rows(alogits, {*ev.target});
          losses.push_back(args_loss);
          weights.push_back(cfg.w_args);
          score.args += g.value(args_loss)[0];
          score.args_n += 1;
          const Tensor& av = g.value(alogits);
          int abest = 0;
          for (int i = 1; i < av.cols; ++i)
            if (av[i] > av[abest]) abest = i;
          score.args_ok += abest == *ev.target ? 1 : 0;
        }
      }
      score.steps += 1;
      step_losses.push_back(g.add_scalars(losses, weights));
    }
  }
  return g.add_scalars(step_losses);
}

}  // namespace

TraceDataset TraceDataset::build(std::vector<expert::Trace> traces, model::Variant variant,
                                 bool spec_swap) {
  TraceDataset ds;
  ds.traces_ = std::move(traces);
  ds.variant_ = variant;
  if (ds.traces_.empty()) throw std::invalid_argument("empty dataset");

  // Demonstration pairing: each trace reads its task specification from a
  // different rollout of the same task instance when one exists, matching
  // the one-shot evaluation protocol.
  std::vector<int> spec_from(ds.traces_.size());
  std::map<std::string, std::vector<int>> by_instance;
  for (size_t i = 0; i < ds.traces_.size(); ++i)
    by_instance[tasks::instance_key(ds.traces_[i].task)].push_back(static_cast<int>(i));
  for (auto& [key, ids] : by_instance) {
    for (size_t j = 0; j < ids.size(); ++j) {
      int partner = spec_swap ? ids[(j + 1) % ids.size()] : ids[j];
      if (ds.traces_[partner].frames.size() != ds.traces_[ids[j]].frames.size())
        throw std::runtime_error("spec swap: same-instance traces disagree on frame count");
      spec_from[ids[j]] = partner;
    }
  }

  std::map<int, Group> groups;
  if (model::is_flat(variant)) {
    Group& grp = groups[kFlatGroupId];
    grp.program = kFlatGroupId;
    for (size_t t = 0; t < ds.traces_.size(); ++t) {
      Item item;
      item.trace = static_cast<int>(t);
      item.spec_from = spec_from[t];
      for (int k = 0; k <= static_cast<int>(ds.traces_[t].api_log.size()); ++k)
        item.steps.push_back(k);
      grp.items.push_back(std::move(item));
    }
  } else if (model::is_recurrent(variant)) {
    for (size_t t = 0; t < ds.traces_.size(); ++t) {
      // group this trace's steps by owning node (program, window)
      std::map<std::tuple<int, int, int>, Item> nodes;
      const auto& steps = ds.traces_[t].steps;
      for (size_t s = 0; s < steps.size(); ++s) {
        auto key = std::make_tuple(steps[s].program, steps[s].node_st, steps[s].node_ed);
        Item& item = nodes[key];
        item.trace = static_cast<int>(t);
        item.spec_from = spec_from[t];
        item.steps.push_back(static_cast<int>(s));
      }
      for (auto& [key, item] : nodes) {
        Group& grp = groups[std::get<0>(key)];
        grp.program = std::get<0>(key);
        grp.items.push_back(std::move(item));
      }
    }
  } else {
    for (size_t t = 0; t < ds.traces_.size(); ++t) {
      const auto& steps = ds.traces_[t].steps;
      for (size_t s = 0; s < steps.size(); ++s) {
        Group& grp = groups[steps[s].program];
        grp.program = steps[s].program;
        Item item;
        item.trace = static_cast<int>(t);
        item.spec_from = spec_from[t];
        item.steps.push_back(static_cast<int>(s));
        grp.items.push_back(std::move(item));
      }
    }
  }
  for (auto& [p, grp] : groups) ds.groups_.push_back(std::move(grp));
  return ds;
}

size_t TraceDataset::total_items() const {
  size_t n = 0;
  for (const auto& g : groups_) n += g.items.size();
  return n;
}

Batch curriculum_sample(const TraceDataset& dataset, Rng& rng, int batch_size, double err_floor) {
  const auto& groups = dataset.groups();
  if (groups.empty()) throw std::invalid_argument("curriculum_sample: empty dataset");
  std::vector<double> cumulative;
  double total = 0.0;
  for (const auto& g : groups) {
    total += g.items.empty() ? 0.0 : (g.error + err_floor);
    cumulative.push_back(total);
  }
  if (total <= 0.0) throw std::invalid_argument("curriculum_sample: no sampleable groups");
  Batch batch;
  for (int i = 0; i < batch_size; ++i) {
    double u = rng.uniform() * total;
    size_t gi = std::lower_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin();
    if (gi >= groups.size()) gi = groups.size() - 1;
    ItemRef ref;
    ref.group = static_cast<int>(gi);
    ref.item = static_cast<int>(rng.uniform_index(groups[gi].items.size()));
    batch.push_back(ref);
  }
  return batch;
}

namespace {

struct BatchResult {
  LossBreakdown breakdown;
  std::vector<double> item_total;  // per item mean step loss
  std::vector<int> item_group;
};

BatchResult compute_batch(NtpModel& m, const TraceDataset& ds, const Batch& batch,
                          const TrainConfig& cfg, bool with_grad, int workers) {
  int total_steps = 0;
  for (const ItemRef& ref : batch)
    total_steps += static_cast<int>(ds.groups()[ref.group].items[ref.item].steps.size());
  double scale = total_steps > 0 ? 1.0 / total_steps : 0.0;

  std::vector<StepScore> scores(batch.size());
  std::vector<std::map<std::string, Tensor>> worker_grads(std::max(1, workers));

  auto work = [&](int w) {
    for (size_t i = w; i < batch.size(); i += std::max(1, workers)) {
      const ItemRef& ref = batch[i];
      const TraceDataset::Item& item = ds.groups()[ref.group].items[ref.item];
      Graph g(with_grad);
      ParamView pv{&m.params(), with_grad ? &worker_grads[w] : nullptr};
      Graph::Var loss = item_loss_graph(m, g, pv, ds, item, cfg, scores[i]);
      if (with_grad) {
        Graph::Var scaled = g.scalar_affine(loss, scale, 0.0);
        g.backward(scaled);
      }
    }
  };
  if (workers <= 1) {
    work(0);
  } else {
    std::vector<std::thread> threads;
    for (int w = 0; w < workers; ++w) threads.emplace_back(work, w);
    for (auto& t : threads) t.join();
  }
  if (with_grad) {
    // merge in fixed worker order so batch gradients are reproducible
    for (auto& wg : worker_grads) {
      for (auto& [name, g] : wg) {
        Tensor& dst = m.params().grad(name);
        for (int i = 0; i < dst.size(); ++i) dst[i] += g[i];
      }
    }
  }

  BatchResult result;
  result.item_total.resize(batch.size());
  result.item_group.resize(batch.size());
  LossBreakdown& b = result.breakdown;
  for (size_t i = 0; i < batch.size(); ++i) {
    const StepScore& s = scores[i];
    b.program_key_ce += s.key;
    b.eop_bce += s.eop;
    b.scoping_ce += s.scope;
    b.api_arg_ce += s.args;
    b.key_n += s.key_n;
    b.eop_n += s.eop_n;
    b.scope_n += s.scope_n;
    b.args_n += s.args_n;
    b.key_ok += s.key_ok;
    b.eop_ok += s.eop_ok;
    b.scope_ok += s.scope_ok;
    b.args_ok += s.args_ok;
    b.steps += s.steps;
    result.item_total[i] = s.steps > 0 ? s.weighted_total(cfg) / s.steps : 0.0;
    result.item_group[i] = batch[i].group;
  }
  b.total = (cfg.w_key * b.program_key_ce + cfg.w_eop * b.eop_bce + cfg.w_scope * b.scoping_ce +
             cfg.w_args * b.api_arg_ce) /
            std::max(1, b.steps);
  if (!std::isfinite(b.total)) throw std::runtime_error("training divergence: non-finite batch loss");
  return result;
}

}  // namespace

LossBreakdown compute_losses(NtpModel& model, const TraceDataset& dataset, const Batch& batch,
                             const TrainConfig& cfg, bool with_grad, int workers) {
  LossBreakdown b = compute_batch(model, dataset, batch, cfg, with_grad, workers).breakdown;
  // report per-head means (e.g. scoping CE per supervised position set)
  if (b.key_n) b.program_key_ce /= b.key_n;
  if (b.eop_n) b.eop_bce /= b.eop_n;
  if (b.scope_n) b.scoping_ce /= b.scope_n;
  if (b.args_n) b.api_arg_ce /= b.args_n;
  return b;
}

EpochMetrics train_epoch(NtpModel& model, TraceDataset& dataset, const TrainConfig& cfg, Rng& rng,
                         int epoch_index) {
  EpochMetrics metrics;
  metrics.epoch = epoch_index;
  size_t total = dataset.total_items();
  int batches = static_cast<int>((total + cfg.batch_size - 1) / cfg.batch_size);
  num::AdamConfig adam{cfg.lr, 0.9, 0.999, 1e-8};

  LossBreakdown sum;
  for (int bi = 0; bi < batches; ++bi) {
    Batch batch = curriculum_sample(dataset, rng, cfg.batch_size, cfg.err_floor);
    BatchResult res = compute_batch(model, dataset, batch, cfg, true, cfg.workers);
    model.params().adam_step(adam);

    // refresh per-program running error from this batch
    std::map<int, std::pair<double, int>> per_group;
    for (size_t i = 0; i < res.item_total.size(); ++i) {
      auto& acc = per_group[res.item_group[i]];
      acc.first += res.item_total[i];
      acc.second += 1;
    }
    for (auto& [gi, acc] : per_group) {
      auto& grp = dataset.groups()[gi];
      grp.error = cfg.ema_decay * grp.error + (1.0 - cfg.ema_decay) * (acc.first / acc.second);
    }

    const LossBreakdown& b = res.breakdown;
    sum.program_key_ce += b.program_key_ce;
    sum.eop_bce += b.eop_bce;
    sum.scoping_ce += b.scoping_ce;
    sum.api_arg_ce += b.api_arg_ce;
    sum.total += b.total;
    sum.key_n += b.key_n;
    sum.eop_n += b.eop_n;
    sum.scope_n += b.scope_n;
    sum.args_n += b.args_n;
    sum.key_ok += b.key_ok;
    sum.eop_ok += b.eop_ok;
    sum.scope_ok += b.scope_ok;
    sum.args_ok += b.args_ok;
    sum.steps += b.steps;
  }
  metrics.batches = batches;
  metrics.loss = sum;
  metrics.loss.program_key_ce = sum.key_n ? sum.program_key_ce / sum.key_n : 0.0;
  metrics.loss.eop_bce = sum.eop_n ? sum.eop_bce / sum.eop_n : 0.0;
  metrics.loss.scoping_ce = sum.scope_n ? sum.scoping_ce / sum.scope_n : 0.0;
  metrics.loss.api_arg_ce = sum.args_n ? sum.api_arg_ce / sum.args_n : 0.0;
  metrics.loss.total = batches ? sum.total / batches : 0.0;
  for (const auto& g : dataset.groups()) metrics.program_error[g.program] = g.error;
  return metrics;
}

std::vector<EpochMetrics> train(NtpModel& model, TraceDataset& dataset, const TrainConfig& cfg,
                                const std::string& metrics_csv_path) {
  Rng rng(derive_seed(cfg.seed, 7001));
  std::vector<EpochMetrics> history;
  std::string csv = metrics_csv_header() + "\n";
  for (int e = 0; e < cfg.epochs; ++e) {
    history.push_back(train_epoch(model, dataset, cfg, rng, e));
    csv += metrics_csv_row(history.back()) + "\n";
    if (!metrics_csv_path.empty()) write_file(metrics_csv_path, csv);
  }
  return history;
}

std::string metrics_csv_header() {
  return "epoch,batches,total,key_ce,eop_bce,scope_ce,args_ce,key_acc,eop_acc,scope_acc,args_acc";
}

std::string metrics_csv_row(const EpochMetrics& m) {
  char buf[320];
  const LossBreakdown& b = m.loss;
  auto acc = [](int ok, int n) { return n > 0 ? static_cast<double>(ok) / n : 1.0; };
  std::snprintf(buf, sizeof(buf), "%d,%d,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f", m.epoch,
                m.batches, b.total, b.program_key_ce, b.eop_bce, b.scoping_ce, b.api_arg_ce,
                acc(b.key_ok, b.key_n), acc(b.eop_ok, b.eop_n), acc(b.scope_ok, b.scope_n),
                acc(b.args_ok, b.args_n));
  return buf;
}

}  // namespace ntp::train
