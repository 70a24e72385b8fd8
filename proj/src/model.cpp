#include "ntp/model.hpp"

#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "ntp/nn.hpp"
#include "ntp/util.hpp"

namespace ntp::model {

namespace {

constexpr int kSlotFeatureDim = 10;   // dx,dy,dz,present,slot_frac,cat(4),is_container
constexpr int kArgsFeatureDim = 18;   // demo first/last + now (4 each) + slot_frac + cat(4) + is_container
constexpr int kApiCount = 3;          // flat head: move_to, grip, release

bool slot_present(const sim::Observation& frame, int slot) { return frame[3 * slot] < 999.0; }

}  // namespace

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::Ntp: return "ntp";
    case Variant::NtpGru: return "ntp_gru";
    case Variant::NtpNoScope: return "ntp_noscope";
    case Variant::Flat: return "flat";
    case Variant::FlatGru: return "flat_gru";
  }
  return "?";
}

Variant variant_from_name(const std::string& s) {
  if (s == "ntp") return Variant::Ntp;
  if (s == "ntp_gru") return Variant::NtpGru;
  if (s == "ntp_noscope") return Variant::NtpNoScope;
  if (s == "flat") return Variant::Flat;
  if (s == "flat_gru") return Variant::FlatGru;
  throw std::invalid_argument("unknown variant: " + s);
}

bool is_flat(Variant v) { return v == Variant::Flat || v == Variant::FlatGru; }
bool is_recurrent(Variant v) { return v == Variant::NtpGru || v == Variant::FlatGru; }
bool has_scoping(Variant v) { return v == Variant::Ntp || v == Variant::NtpGru; }

std::string ModelConfig::to_json() const {
  nlohmann::ordered_json j;
  j["variant"] = variant_name(variant);
  j["object_slots"] = object_slots;
  j["n_containers"] = n_containers;
  j["slot_category"] = slot_category;
  j["n_categories"] = n_categories;
  j["slot_feat"] = slot_feat;
  j["frame_dim"] = frame_dim;
  j["state_dim"] = state_dim;
  j["spec_dim"] = spec_dim;
  j["prog_dim"] = prog_dim;
  j["key_dim"] = key_dim;
  j["conv_m"] = conv_m;
  j["conv_k"] = conv_k;
  j["core_hidden"] = core_hidden;
  j["gru_hidden"] = gru_hidden;
  j["scope_hidden"] = scope_hidden;
  j["args_ctx"] = args_ctx;
  j["args_hidden"] = args_hidden;
  j["n_programs"] = n_programs;
  return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  auto j = nlohmann::json::parse(text);
  ModelConfig c;
  c.variant = variant_from_name(j.at("variant").get<std::string>());
  c.object_slots = j.at("object_slots").get<int>();
  c.n_containers = j.at("n_containers").get<int>();
  c.slot_category = j.at("slot_category").get<std::vector<int>>();
  c.n_categories = j.at("n_categories").get<int>();
  c.slot_feat = j.at("slot_feat").get<int>();
  c.frame_dim = j.at("frame_dim").get<int>();
  c.state_dim = j.at("state_dim").get<int>();
  c.spec_dim = j.at("spec_dim").get<int>();
  c.prog_dim = j.at("prog_dim").get<int>();
  c.key_dim = j.at("key_dim").get<int>();
  c.conv_m = j.at("conv_m").get<int>();
  c.conv_k = j.at("conv_k").get<int>();
  c.core_hidden = j.at("core_hidden").get<int>();
  c.gru_hidden = j.at("gru_hidden").get<int>();
  c.scope_hidden = j.at("scope_hidden").get<int>();
  c.args_ctx = j.at("args_ctx").get<int>();
  c.args_hidden = j.at("args_hidden").get<int>();
  c.n_programs = j.at("n_programs").get<int>();
  return c;
}

bool ModelConfig::operator==(const ModelConfig& o) const { return to_json() == o.to_json(); }

ModelConfig make_model_config(Variant v, tasks::Family family, int stacking_blocks) {
  ModelConfig c;
  c.variant = v;
  c.object_slots = tasks::object_slot_count(family, stacking_blocks);
  c.n_containers = tasks::container_count(family);
  c.slot_category.resize(c.object_slots);
  for (int s = 0; s < c.object_slots; ++s) c.slot_category[s] = tasks::category_of_slot(family, s);
  return c;
}

Graph::Var ParamView::leaf(Graph& g, const std::string& name) {
  const Tensor& v = store->value(name);
  if (!g.grad_enabled()) return g.param(&v, nullptr);
  Tensor* gt;
  if (grads) {
    Tensor& slot = (*grads)[name];
    if (!slot.same_shape(v)) slot = Tensor(v.rows, v.cols);
    gt = &slot;
  } else {
    gt = &store->grad(name);
  }
  return g.param(&v, gt);
}

ScopeSelection decode_scope(const Tensor& probs) {
  ScopeSelection sel;
  sel.label_probs = probs;
  int n = probs.rows;
  int st = 0, ed = 0;
  double best_st = -1.0, best_ed = -1.0;
  for (int j = 0; j < n; ++j) {
    double ps = probs.at(j, static_cast<int>(expert::ScopeLabel::Start));
    double pe = probs.at(j, static_cast<int>(expert::ScopeLabel::End));
    if (ps > best_st) {
      best_st = ps;
      st = j;
    }
    if (pe > best_ed) {
      best_ed = pe;
      ed = j;
    }
  }
  if (ed < st) ed = st;
  sel.st = st;
  sel.ed = ed;
  return sel;
}

std::pair<int, Tensor> memory_lookup(const Tensor& key, const Tensor& m_key, const Tensor& m_prog) {
  if (key.cols != m_key.cols) throw std::invalid_argument("memory_lookup key dim");
  int best = 0;
  double best_dot = -1e300;
  for (int j = 0; j < m_key.rows; ++j) {
    double dot = 0.0;
    for (int c = 0; c < m_key.cols; ++c) dot += m_key.at(j, c) * key[c];
    if (dot > best_dot) {  // strict: ties keep the lowest id
      best_dot = dot;
      best = j;
    }
  }
  Tensor emb(1, m_prog.cols);
  for (int c = 0; c < m_prog.cols; ++c) emb[c] = m_prog.at(best, c);
  return {best, emb};
}

NtpModel::NtpModel(const ModelConfig& cfg, uint64_t init_seed) : cfg_(cfg) { build_params(init_seed); }

void NtpModel::build_params(uint64_t seed) {
  Rng rng(derive_seed(seed, 101));
  const ModelConfig& c = cfg_;
  // shared frame featurizer + embedding
  params_.add("feat.w1", kSlotFeatureDim, c.slot_feat, rng);
  params_.add("feat.b1", 1, c.slot_feat, rng, true);
  params_.add("feat.proj_w", c.pool_dim(), c.frame_dim, rng);
  params_.add("feat.proj_b", 1, c.frame_dim, rng, true);
  // state encoder
  params_.add("enc.w1", c.frame_dim, c.state_dim, rng);
  params_.add("enc.b1", 1, c.state_dim, rng, true);
  params_.add("enc.w2", c.state_dim, c.state_dim, rng);
  params_.add("enc.b2", 1, c.state_dim, rng, true);
  // task-spec encoder
  params_.add("tse.conv_w", c.conv_m, c.frame_dim * c.conv_k, rng);
  params_.add("tse.conv_b", 1, c.conv_m, rng, true);
  params_.add("tse.out_w", c.conv_m, c.spec_dim, rng);
  params_.add("tse.out_b", 1, c.spec_dim, rng, true);

  if (!is_flat(c.variant)) {
    params_.add("mem.key", c.n_programs, c.key_dim, rng);
    params_.add("mem.prog", c.n_programs, c.prog_dim, rng);
    int core_in = c.spec_dim + c.prog_dim + c.state_dim;
    if (c.variant == Variant::NtpGru) {
      int gin = core_in + c.gru_hidden;
      params_.add("gru.wz", gin, c.gru_hidden, rng);
      params_.add("gru.bz", 1, c.gru_hidden, rng, true);
      params_.add("gru.wr", gin, c.gru_hidden, rng);
      params_.add("gru.br", 1, c.gru_hidden, rng, true);
      params_.add("gru.wh", gin, c.gru_hidden, rng);
      params_.add("gru.bh", 1, c.gru_hidden, rng, true);
      params_.add("gru.head_w", c.gru_hidden, c.key_dim + 1, rng);
      params_.add("gru.head_b", 1, c.key_dim + 1, rng, true);
    } else {
      params_.add("core.w1", core_in, c.core_hidden, rng);
      params_.add("core.b1", 1, c.core_hidden, rng, true);
      params_.add("core.w2", c.core_hidden, c.key_dim + 1, rng);
      params_.add("core.b2", 1, c.key_dim + 1, rng, true);
    }
    if (has_scoping(c.variant)) {
      params_.add("tsi.conv_w", c.conv_m, c.frame_dim * c.conv_k, rng);
      params_.add("tsi.conv_b", 1, c.conv_m, rng, true);
      params_.add("tsi.w1", c.prog_dim + c.conv_m + c.state_dim, c.scope_hidden, rng);
      params_.add("tsi.b1", 1, c.scope_hidden, rng, true);
      params_.add("tsi.w2", c.scope_hidden, 4, rng);
      params_.add("tsi.b2", 1, 4, rng, true);
    }
    params_.add("args.ctx_w", c.state_dim + c.spec_dim + c.prog_dim, c.args_ctx, rng);
    params_.add("args.ctx_b", 1, c.args_ctx, rng, true);
    params_.add("args.w1", kArgsFeatureDim + c.args_ctx, c.args_hidden, rng);
    params_.add("args.b1", 1, c.args_hidden, rng, true);
    params_.add("args.w2", c.args_hidden, 1, rng);
    params_.add("args.b2", 1, 1, rng, true);
  } else {
    int flat_in = c.spec_dim + c.state_dim;
    if (c.variant == Variant::FlatGru) {
      int gin = flat_in + c.gru_hidden;
      params_.add("fgru.wz", gin, c.gru_hidden, rng);
      params_.add("fgru.bz", 1, c.gru_hidden, rng, true);
      params_.add("fgru.wr", gin, c.gru_hidden, rng);
      params_.add("fgru.br", 1, c.gru_hidden, rng, true);
      params_.add("fgru.wh", gin, c.gru_hidden, rng);
      params_.add("fgru.bh", 1, c.gru_hidden, rng, true);
      params_.add("fgru.head_w", c.gru_hidden, kApiCount + 1, rng);
      params_.add("fgru.head_b", 1, kApiCount + 1, rng, true);
    } else {
      params_.add("flat.w1", flat_in, c.core_hidden, rng);
      params_.add("flat.b1", 1, c.core_hidden, rng, true);
      params_.add("flat.head_w", c.core_hidden, kApiCount + 1, rng);
      params_.add("flat.head_b", 1, kApiCount + 1, rng, true);
    }
    params_.add("fargs.ctx_w", c.state_dim + c.spec_dim, c.args_ctx, rng);
    params_.add("fargs.ctx_b", 1, c.args_ctx, rng, true);
    params_.add("fargs.w1", kArgsFeatureDim + c.args_ctx, c.args_hidden, rng);
    params_.add("fargs.b1", 1, c.args_hidden, rng, true);
    params_.add("fargs.w2", c.args_hidden, 1, rng);
    params_.add("fargs.b2", 1, 1, rng, true);
  }
}

Tensor NtpModel::slot_matrix(FrameSpan frames) const {
  const ModelConfig& c = cfg_;
  int S = c.total_slots();
  int n = static_cast<int>(frames.size());
  Tensor out(n * S, kSlotFeatureDim);
  for (int f = 0; f < n; ++f) {
    const sim::Observation& frame = frames[f];
    if (static_cast<int>(frame.size()) != c.obs_dim())
      throw std::invalid_argument("observation length does not match model configuration");
    for (int s = 0; s < S; ++s) {
      double* row = out.data.data() + static_cast<size_t>(f * S + s) * kSlotFeatureDim;
      bool is_cont = s >= c.object_slots;
      bool present = is_cont || slot_present(frame, s);
      if (present) {
        row[0] = frame[3 * s];
        row[1] = frame[3 * s + 1];
        row[2] = frame[3 * s + 2];
        row[3] = 1.0;
      }
      row[4] = static_cast<double>(s + 1) / S;
      if (!is_cont) {
        int cat = c.slot_category[s];
        if (cat >= 0 && cat < 4) row[5 + cat] = 1.0;
      }
      row[9] = is_cont ? 1.0 : 0.0;
    }
  }
  return out;
}

Graph::PoolMeta NtpModel::pool_meta(FrameSpan frames) const {
  const ModelConfig& c = cfg_;
  int S = c.total_slots();
  int n = static_cast<int>(frames.size());
  Graph::PoolMeta meta;
  meta.n_frames = n;
  meta.slots = S;
  meta.n_categories = c.n_categories;
  meta.category.resize(S);
  for (int s = 0; s < S; ++s) meta.category[s] = s < c.object_slots ? c.slot_category[s] : -1;
  for (int s = c.object_slots; s < S; ++s) meta.container_slots.push_back(s);
  meta.present.resize(static_cast<size_t>(n) * S, 0.0);
  meta.aperture.resize(n);
  for (int f = 0; f < n; ++f) {
    for (int s = 0; s < S; ++s)
      meta.present[static_cast<size_t>(f) * S + s] =
          (s >= c.object_slots || slot_present(frames[f], s)) ? 1.0 : 0.0;
    meta.aperture[f] = frames[f].back();
  }
  return meta;
}

Tensor NtpModel::args_slot_matrix(const sim::Observation& demo_first, const sim::Observation& demo_last,
                                  const sim::Observation& now) const {
  const ModelConfig& c = cfg_;
  int S = c.total_slots();
  Tensor out(S, kArgsFeatureDim);
  auto put = [&](int s, int off, const sim::Observation& frame) {
    double* row = out.data.data() + static_cast<size_t>(s) * kArgsFeatureDim + off;
    bool present = s >= c.object_slots || slot_present(frame, s);
    if (present) {
      row[0] = frame[3 * s];
      row[1] = frame[3 * s + 1];
      row[2] = frame[3 * s + 2];
      row[3] = 1.0;
    }
  };
  for (int s = 0; s < S; ++s) {
    put(s, 0, demo_first);
    put(s, 4, demo_last);
    put(s, 8, now);
    double* row = out.data.data() + static_cast<size_t>(s) * kArgsFeatureDim;
    row[12] = static_cast<double>(s + 1) / S;
    if (s < c.object_slots) {
      int cat = c.slot_category[s];
      if (cat >= 0 && cat < 4) row[13 + cat] = 1.0;
    }
    row[17] = s >= c.object_slots ? 1.0 : 0.0;
  }
  return out;
}

Graph::Var NtpModel::embed_frames(Graph& g, ParamView& pv, FrameSpan frames) const {
  Graph::Var slots = g.input(slot_matrix(frames));
  Graph::Var f1 = num::dense_relu(g, slots, pv.leaf(g, "feat.w1"), pv.leaf(g, "feat.b1"));
  Graph::Var pooled = g.frame_pool(f1, pool_meta(frames));
  return num::dense_relu(g, pooled, pv.leaf(g, "feat.proj_w"), pv.leaf(g, "feat.proj_b"));
}

Graph::Var NtpModel::encode_spec(Graph& g, ParamView& pv, Graph::Var embedded) const {
  Graph::Var conv = g.relu(
      g.conv1d_temporal(embedded, pv.leaf(g, "tse.conv_w"), pv.leaf(g, "tse.conv_b"), cfg_.conv_k));
  Graph::Var pooled = g.row_max(conv);
  return num::dense(g, pooled, pv.leaf(g, "tse.out_w"), pv.leaf(g, "tse.out_b"));
}

Graph::Var NtpModel::encode_state(Graph& g, ParamView& pv, const sim::Observation& obs) const {
  FrameSpan one(&obs, 1);
  Graph::Var w = embed_frames(g, pv, one);
  Graph::Var h = num::dense_relu(g, w, pv.leaf(g, "enc.w1"), pv.leaf(g, "enc.b1"));
  return num::dense(g, h, pv.leaf(g, "enc.w2"), pv.leaf(g, "enc.b2"));
}

Graph::Var NtpModel::prog_embedding(Graph& g, ParamView& pv, int program) const {
  Tensor onehot(1, cfg_.n_programs);
  if (program < 0 || program >= cfg_.n_programs) throw std::invalid_argument("program id out of range");
  onehot[program] = 1.0;
  return g.matmul(g.input(std::move(onehot)), pv.leaf(g, "mem.prog"));
}

CoreOut NtpModel::core_forward(Graph& g, ParamView& pv, Graph::Var c, Graph::Var p, Graph::Var s,
                               std::optional<Graph::Var> h_prev) const {
  Graph::Var x = g.concat_cols({c, p, s});
  CoreOut out;
  if (cfg_.variant == Variant::NtpGru) {
    if (!h_prev) throw std::invalid_argument("gru core requires recurrent state");
    num::GruVars gv{pv.leaf(g, "gru.wz"), pv.leaf(g, "gru.bz"), pv.leaf(g, "gru.wr"),
                    pv.leaf(g, "gru.br"), pv.leaf(g, "gru.wh"), pv.leaf(g, "gru.bh")};
    Graph::Var h = num::gru_cell(g, x, *h_prev, gv);
    Graph::Var head = num::dense(g, h, pv.leaf(g, "gru.head_w"), pv.leaf(g, "gru.head_b"));
    out.key = g.slice_cols(head, 0, cfg_.key_dim);
    out.r_logit = g.slice_cols(head, cfg_.key_dim, 1);
    out.h = h;
  } else {
    Graph::Var h = num::dense_relu(g, x, pv.leaf(g, "core.w1"), pv.leaf(g, "core.b1"));
    Graph::Var head = num::dense(g, h, pv.leaf(g, "core.w2"), pv.leaf(g, "core.b2"));
    out.key = g.slice_cols(head, 0, cfg_.key_dim);
    out.r_logit = g.slice_cols(head, cfg_.key_dim, 1);
    out.h = out.key;  // unused
  }
  return out;
}

Graph::Var NtpModel::program_logits(Graph& g, ParamView& pv, Graph::Var key) const {
  return g.matmul(key, g.transpose(pv.leaf(g, "mem.key")));
}

Graph::Var NtpModel::scope_logits(Graph& g, ParamView& pv, Graph::Var embedded, Graph::Var p,
                                  Graph::Var s) const {
  if (!has_scoping(cfg_.variant)) throw std::invalid_argument("variant has no scoping head");
  Graph::Var conv = g.relu(
      g.conv1d_temporal(embedded, pv.leaf(g, "tsi.conv_w"), pv.leaf(g, "tsi.conv_b"), cfg_.conv_k));
  int n = g.value(conv).rows;
  Graph::Var h = g.concat_cols({g.repeat_row(p, n), conv, g.repeat_row(s, n)});
  Graph::Var h1 = num::dense_relu(g, h, pv.leaf(g, "tsi.w1"), pv.leaf(g, "tsi.b1"));
  return num::dense(g, h1, pv.leaf(g, "tsi.w2"), pv.leaf(g, "tsi.b2"));
}

Graph::Var NtpModel::args_logits(Graph& g, ParamView& pv, const Tensor& slot_feats, Graph::Var s,
                                 Graph::Var c_sub, Graph::Var p_api) const {
  Graph::Var ctx = g.relu(num::dense(g, g.concat_cols({s, c_sub, p_api}), pv.leaf(g, "args.ctx_w"),
                                     pv.leaf(g, "args.ctx_b")));
  int S = slot_feats.rows;
  Graph::Var rows = g.concat_cols({g.input(slot_feats), g.repeat_row(ctx, S)});
  Graph::Var h = num::dense_relu(g, rows, pv.leaf(g, "args.w1"), pv.leaf(g, "args.b1"));
  Graph::Var scores = num::dense(g, h, pv.leaf(g, "args.w2"), pv.leaf(g, "args.b2"));
  return g.reshape(scores, 1, S);
}

NtpModel::FlatOut NtpModel::flat_forward(Graph& g, ParamView& pv, Graph::Var c, Graph::Var s,
                                         std::optional<Graph::Var> h_prev) const {
  Graph::Var x = g.concat_cols({c, s});
  FlatOut out;
  if (cfg_.variant == Variant::FlatGru) {
    if (!h_prev) throw std::invalid_argument("flat gru requires recurrent state");
    num::GruVars gv{pv.leaf(g, "fgru.wz"), pv.leaf(g, "fgru.bz"), pv.leaf(g, "fgru.wr"),
                    pv.leaf(g, "fgru.br"), pv.leaf(g, "fgru.wh"), pv.leaf(g, "fgru.bh")};
    Graph::Var h = num::gru_cell(g, x, *h_prev, gv);
    Graph::Var head = num::dense(g, h, pv.leaf(g, "fgru.head_w"), pv.leaf(g, "fgru.head_b"));
    out.api_logits = g.slice_cols(head, 0, kApiCount);
    out.stop_logit = g.slice_cols(head, kApiCount, 1);
    out.h = h;
  } else {
    Graph::Var h = num::dense_relu(g, x, pv.leaf(g, "flat.w1"), pv.leaf(g, "flat.b1"));
    Graph::Var head = num::dense(g, h, pv.leaf(g, "flat.head_w"), pv.leaf(g, "flat.head_b"));
    out.api_logits = g.slice_cols(head, 0, kApiCount);
    out.stop_logit = g.slice_cols(head, kApiCount, 1);
    out.h = out.api_logits;  // unused
  }
  return out;
}

Graph::Var NtpModel::flat_args_logits(Graph& g, ParamView& pv, const Tensor& slot_feats, Graph::Var s,
                                      Graph::Var c) const {
  Graph::Var ctx = g.relu(
      num::dense(g, g.concat_cols({s, c}), pv.leaf(g, "fargs.ctx_w"), pv.leaf(g, "fargs.ctx_b")));
  int S = slot_feats.rows;
  Graph::Var rows = g.concat_cols({g.input(slot_feats), g.repeat_row(ctx, S)});
  Graph::Var h = num::dense_relu(g, rows, pv.leaf(g, "fargs.w1"), pv.leaf(g, "fargs.b1"));
  Graph::Var scores = num::dense(g, h, pv.leaf(g, "fargs.w2"), pv.leaf(g, "fargs.b2"));
  return g.reshape(scores, 1, S);
}

// ---- inference -----------------------------------------------------------

Tensor NtpModel::infer_embed(FrameSpan frames) {
  Graph g(false);
  ParamView pv = view();
  return g.value(embed_frames(g, pv, frames));
}

Tensor NtpModel::infer_spec_encoding(const Tensor& embedded, int st, int ed) {
  Graph g(false);
  ParamView pv = view();
  int n = ed - st + 1;
  Tensor window(n, embedded.cols);
  std::copy(embedded.data.begin() + static_cast<size_t>(st) * embedded.cols,
            embedded.data.begin() + static_cast<size_t>(ed + 1) * embedded.cols, window.data.begin());
  return g.value(encode_spec(g, pv, g.input(std::move(window))));
}

Tensor NtpModel::infer_state(const sim::Observation& obs) {
  Graph g(false);
  ParamView pv = view();
  return g.value(encode_state(g, pv, obs));
}

NtpModel::CoreResult NtpModel::infer_core(const Tensor& c, const Tensor& p, const Tensor& s,
                                          const Tensor* h_prev) {
  Graph g(false);
  ParamView pv = view();
  std::optional<Graph::Var> h;
  if (cfg_.variant == Variant::NtpGru) h = g.input(h_prev ? *h_prev : Tensor(1, cfg_.gru_hidden));
  CoreOut out = core_forward(g, pv, g.input(c), g.input(p), g.input(s), h);
  CoreResult res;
  res.key = g.value(out.key);
  res.r = 1.0 / (1.0 + std::exp(-g.value(out.r_logit)[0]));
  if (cfg_.variant == Variant::NtpGru) res.h = g.value(out.h);
  return res;
}

Tensor NtpModel::infer_prog_embedding(int program) const {
  const Tensor& mp = params_.value("mem.prog");
  Tensor out(1, mp.cols);
  for (int c = 0; c < mp.cols; ++c) out[c] = mp.at(program, c);
  return out;
}

ScopeSelection NtpModel::infer_scope(const Tensor& embedded, int st, int ed, const Tensor& p,
                                     const Tensor& s) {
  Graph g(false);
  ParamView pv = view();
  int n = ed - st + 1;
  Tensor window(n, embedded.cols);
  std::copy(embedded.data.begin() + static_cast<size_t>(st) * embedded.cols,
            embedded.data.begin() + static_cast<size_t>(ed + 1) * embedded.cols, window.data.begin());
  Graph::Var logits = scope_logits(g, pv, g.input(std::move(window)), g.input(p), g.input(s));
  return decode_scope(num::softmax_rows(g.value(logits)));
}

std::pair<int, Tensor> NtpModel::infer_args(const Tensor& slot_feats, const Tensor& s,
                                            const Tensor& c_sub, const Tensor& p_api) {
  Graph g(false);
  ParamView pv = view();
  Graph::Var logits = args_logits(g, pv, slot_feats, g.input(s), g.input(c_sub), g.input(p_api));
  Tensor lv = g.value(logits);
  int best = 0;
  for (int i = 1; i < lv.cols; ++i)
    if (lv[i] > lv[best]) best = i;
  return {best, lv};
}

NtpModel::FlatResult NtpModel::infer_flat(const Tensor& c, const Tensor& s, const Tensor* h_prev) {
  Graph g(false);
  ParamView pv = view();
  std::optional<Graph::Var> h;
  if (cfg_.variant == Variant::FlatGru) h = g.input(h_prev ? *h_prev : Tensor(1, cfg_.gru_hidden));
  FlatOut out = flat_forward(g, pv, g.input(c), g.input(s), h);
  FlatResult res;
  Tensor al = g.value(out.api_logits);
  res.api = 0;
  for (int i = 1; i < al.cols; ++i)
    if (al[i] > al[res.api]) res.api = i;
  res.stop = 1.0 / (1.0 + std::exp(-g.value(out.stop_logit)[0]));
  if (cfg_.variant == Variant::FlatGru) res.h = g.value(out.h);
  return res;
}

std::pair<int, Tensor> NtpModel::infer_flat_args(const Tensor& slot_feats, const Tensor& s,
                                                 const Tensor& c) {
  Graph g(false);
  ParamView pv = view();
  Graph::Var logits = flat_args_logits(g, pv, slot_feats, g.input(s), g.input(c));
  Tensor lv = g.value(logits);
  int best = 0;
  for (int i = 1; i < lv.cols; ++i)
    if (lv[i] > lv[best]) best = i;
  return {best, lv};
}

// ---- checkpoints -----------------------------------------------------------

std::string checkpoint_to_json(const NtpModel& model) {
  nlohmann::ordered_json j;
  j["kind"] = "ntp-checkpoint";
  j["registry"] = expert::registry_version();
  j["config"] = nlohmann::ordered_json::parse(model.config().to_json());
  nlohmann::ordered_json params = nlohmann::ordered_json::object();
  for (const auto& [name, e] : model.params().entries()) {
    nlohmann::ordered_json pj;
    pj["shape"] = {e.value.rows, e.value.cols};
    pj["data"] = e.value.data;
    params[name] = pj;
  }
  j["params"] = params;
  return j.dump();
}

NtpModel checkpoint_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("checkpoint parse error: ") + e.what());
  }
  if (j.value("kind", "") != "ntp-checkpoint") throw std::runtime_error("checkpoint parse error: bad kind");
  if (j.at("registry").get<std::string>() != expert::registry_version())
    throw std::runtime_error("registry version mismatch: checkpoint was written for " +
                             j.at("registry").get<std::string>());
  ModelConfig cfg = ModelConfig::from_json(j.at("config").dump());
  NtpModel model(cfg, 0);
  for (auto& [name, e] : model.params().entries()) {
    if (!j.at("params").contains(name)) throw std::runtime_error("checkpoint parse error: missing " + name);
    const auto& pj = j.at("params").at(name);
    int rows = pj.at("shape")[0].get<int>();
    int cols = pj.at("shape")[1].get<int>();
    if (rows != e.value.rows || cols != e.value.cols)
      throw std::runtime_error("checkpoint parse error: shape mismatch for " + name);
    e.value.data = pj.at("data").get<std::vector<double>>();
    if (e.value.data.size() != static_cast<size_t>(rows) * cols)
      throw std::runtime_error("checkpoint parse error: data size mismatch for " + name);
  }
  return model;
}

void save_checkpoint(const NtpModel& model, const std::string& path) {
  write_file(path, checkpoint_to_json(model));
}

NtpModel load_checkpoint(const std::string& path) { return checkpoint_from_json(read_file(path)); }

}  // namespace ntp::model
