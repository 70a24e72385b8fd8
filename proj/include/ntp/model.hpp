#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ntp/expert.hpp"
#include "ntp/graph.hpp"
#include "ntp/params.hpp"
#include "ntp/taskgen.hpp"

namespace ntp::model {

using num::Graph;
using num::ParamStore;
using num::Tensor;

enum class Variant { Ntp, NtpGru, NtpNoScope, Flat, FlatGru };

const char* variant_name(Variant v);
Variant variant_from_name(const std::string& s);
bool is_flat(Variant v);
bool is_recurrent(Variant v);
bool has_scoping(Variant v);

struct ModelConfig {
  Variant variant = Variant::Ntp;
  // canonical slot layout (objects then containers)
  int object_slots = 0;
  int n_containers = 0;
  std::vector<int> slot_category;  // per object slot
  int n_categories = 4;

  // dimensions
  int slot_feat = 32;
  int frame_dim = 64;
  int state_dim = 128;
  int spec_dim = 128;
  int prog_dim = 32;
  int key_dim = 32;
  int conv_m = 64;
  int conv_k = 3;
  int core_hidden = 256;
  int gru_hidden = 128;
  int scope_hidden = 128;
  int args_ctx = 64;
  int args_hidden = 64;
  int n_programs = expert::kNumPrograms;

  int total_slots() const { return object_slots + n_containers; }
  int obs_dim() const { return 3 * total_slots() + 1; }
  int pool_dim() const { return n_categories * slot_feat + n_categories + slot_feat + n_containers * slot_feat + 1; }
  int n_targets() const { return total_slots(); }

  std::string to_json() const;
  static ModelConfig from_json(const std::string& text);
  bool operator==(const ModelConfig& o) const;
};

ModelConfig make_model_config(Variant v, tasks::Family family, int stacking_blocks = 8);

// Parameter leaves for graph building. When grads points at a map, gradients
// for this pass accumulate there instead of the store (used by parallel
// batch workers).
struct ParamView {
  ParamStore* store = nullptr;
  std::map<std::string, Tensor>* grads = nullptr;
  Graph::Var leaf(Graph& g, const std::string& name);
};

struct CoreOut {
  Graph::Var key;      // 1 x key_dim
  Graph::Var r_logit;  // 1 x 1
  Graph::Var h;        // recurrent variants only
};

struct ScopeSelection {
  Tensor label_probs;  // N x 4
  int st = 0, ed = 0;  // decoded, 0-based relative to the window
};

// argmax decode with the ed<st clamp; total for arbitrary inputs.
ScopeSelection decode_scope(const Tensor& label_probs);

// Content-based addressing: argmax_j M_key[j,:].key, ties to the lowest id.
std::pair<int, Tensor> memory_lookup(const Tensor& key, const Tensor& m_key, const Tensor& m_prog);

using FrameSpan = std::span<const sim::Observation>;

// The NTP networks plus the flat baselines. The variant decides which
// parameter groups exist; graph builders assert their group is present.
class NtpModel {
 public:
  NtpModel() = default;
  NtpModel(const ModelConfig& cfg, uint64_t init_seed);

  const ModelConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  ParamView view(std::map<std::string, Tensor>* grads = nullptr) {
    return ParamView{&params_, grads};
  }

  // ---- constant feature builders --------------------------------------
  Tensor slot_matrix(FrameSpan frames) const;          // (N*S) x 10
  Graph::PoolMeta pool_meta(FrameSpan frames) const;   // masks + apertures
  // per-slot pointer features from the scoped demo window and current state
  Tensor args_slot_matrix(const sim::Observation& demo_first, const sim::Observation& demo_last,
                          const sim::Observation& now) const;  // S x 18

  // ---- graph builders ---------------------------------------------------
  // raw frames -> embedded frame sequence, N x frame_dim
  Graph::Var embed_frames(Graph& g, ParamView& pv, FrameSpan frames) const;
  // embedded window -> task-spec encoding c, 1 x spec_dim
  Graph::Var encode_spec(Graph& g, ParamView& pv, Graph::Var embedded) const;
  // observation -> state encoding s, 1 x state_dim (2-layer relu MLP on the
  // shared frame embedding)
  Graph::Var encode_state(Graph& g, ParamView& pv, const sim::Observation& obs) const;
  Graph::Var prog_embedding(Graph& g, ParamView& pv, int program) const;
  CoreOut core_forward(Graph& g, ParamView& pv, Graph::Var c, Graph::Var p, Graph::Var s,
                       std::optional<Graph::Var> h_prev = std::nullopt) const;
  Graph::Var program_logits(Graph& g, ParamView& pv, Graph::Var key) const;  // 1 x n_programs
  Graph::Var scope_logits(Graph& g, ParamView& pv, Graph::Var embedded, Graph::Var p,
                          Graph::Var s) const;  // N x 4
  Graph::Var args_logits(Graph& g, ParamView& pv, const Tensor& slot_feats, Graph::Var s,
                         Graph::Var c_sub, Graph::Var p_api) const;  // 1 x n_targets
  // flat baseline head: (c, s[, h]) -> api logits (3), stop logit, new h
  struct FlatOut {
    Graph::Var api_logits;
    Graph::Var stop_logit;
    Graph::Var h;
  };
  FlatOut flat_forward(Graph& g, ParamView& pv, Graph::Var c, Graph::Var s,
                       std::optional<Graph::Var> h_prev = std::nullopt) const;
  Graph::Var flat_args_logits(Graph& g, ParamView& pv, const Tensor& slot_feats, Graph::Var s,
                              Graph::Var c) const;

  // ---- inference (no-grad) ---------------------------------------------
  Tensor infer_embed(FrameSpan frames);                    // N x frame_dim
  Tensor infer_spec_encoding(const Tensor& embedded, int st, int ed);
  Tensor infer_state(const sim::Observation& obs);
  struct CoreResult {
    Tensor key;
    double r = 0.0;
    Tensor h;
  };
  CoreResult infer_core(const Tensor& c, const Tensor& p, const Tensor& s, const Tensor* h_prev);
  Tensor infer_prog_embedding(int program) const;
  ScopeSelection infer_scope(const Tensor& embedded, int st, int ed, const Tensor& p, const Tensor& s);
  // decoded move_to target plus its logits
  std::pair<int, Tensor> infer_args(const Tensor& slot_feats, const Tensor& s, const Tensor& c_sub,
                                    const Tensor& p_api);
  struct FlatResult {
    int api = 0;  // index into {move_to, grip, release}
    double stop = 0.0;
    Tensor h;
  };
  FlatResult infer_flat(const Tensor& c, const Tensor& s, const Tensor* h_prev);
  std::pair<int, Tensor> infer_flat_args(const Tensor& slot_feats, const Tensor& s, const Tensor& c);

 private:
  void build_params(uint64_t seed);
  ModelConfig cfg_;
  ParamStore params_;
};

// Checkpoint container: registry stamp, model config, parameters.
std::string checkpoint_to_json(const NtpModel& model);
NtpModel checkpoint_from_json(const std::string& text);
void save_checkpoint(const NtpModel& model, const std::string& path);
NtpModel load_checkpoint(const std::string& path);

}  // namespace ntp::model
