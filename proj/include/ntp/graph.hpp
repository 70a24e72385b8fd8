#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ntp/tensor.hpp"

namespace ntp::num {

// Reverse-mode tape. A Graph is built per forward pass and discarded after
// backward(); nodes are appended in topological order by construction, so the
// backward sweep is a reverse walk over the tape.
//
// Parameter leaves alias external storage (value and gradient live in a
// ParamStore), everything else is owned by the node. Gradients accumulate
// with +=, so one ParamStore can absorb many graphs before an optimizer step.
class Graph {
 public:
  using Var = int;

  explicit Graph(bool grad_enabled = true) : grad_enabled_(grad_enabled) { nodes_.reserve(256); }

  bool grad_enabled() const { return grad_enabled_; }

  // Constant leaf (no gradient flows into it).
  Var input(Tensor value);
  // Parameter leaf aliasing external value/grad storage.
  Var param(const Tensor* value, Tensor* grad);

  const Tensor& value(Var v) const { return nodes_[v].value_ptr ? *nodes_[v].value_ptr : nodes_[v].value; }
  const Tensor& grad(Var v) const { return nodes_[v].grad_ptr ? *nodes_[v].grad_ptr : nodes_[v].grad; }

  // ---- ops ------------------------------------------------------------
  Var matmul(Var a, Var b);
  Var add(Var a, Var b);                 // same shape
  Var mul(Var a, Var b);                 // elementwise, same shape
  Var add_rowvec(Var x, Var bias);       // bias is 1xC, broadcast over rows
  Var scalar_affine(Var x, double a, double b);  // a*x + b elementwise
  Var relu(Var x);
  Var sigmoid(Var x);
  Var tanh_(Var x);
  Var concat_cols(const std::vector<Var>& xs);  // same row count
  Var repeat_row(Var v, int n);                 // 1xC -> NxC
  Var slice_cols(Var x, int start, int len);
  Var slice_rows(Var x, int start, int len);
  Var reshape(Var x, int rows, int cols);
  Var transpose(Var x);
  Var row_max(Var x);  // NxC -> 1xC, columnwise max over rows
  // Temporal convolution over a sequence of N frames of width d. W is
  // m x (d*k), b is 1 x m, k odd; ends are zero-padded so output is N x m.
  Var conv1d_temporal(Var seq, Var w, Var b, int k);
  // Mean of per-row softmax cross-entropies against integer targets
  // (targets.size() == rows). If average=false, sums instead.
  Var softmax_ce_rows(Var logits, std::vector<int> targets, bool average = true);
  // Binary cross-entropy on a single logit (1x1) against target in {0,1}.
  Var sigmoid_bce(Var logit, double target);
  Var add_scalars(const std::vector<Var>& xs, const std::vector<double>& weights = {});

  // Per-frame slot pooling for observation featurization; see model.cpp for
  // the layout contract. slot_feats is (n_frames*slots_per_frame) x F.
  struct PoolMeta {
    int n_frames = 0;
    int slots = 0;              // slots per frame
    int n_categories = 0;       // pooled category groups
    std::vector<int> category;  // per slot, -1 for container slots
    std::vector<int> container_slots;
    std::vector<double> present;    // n_frames*slots, 1.0 if slot present in that frame
    std::vector<double> aperture;   // per frame
  };
  // Output per frame: [cat means (n_cat*F) | cat fractions (n_cat) |
  //                    global masked max (F) | container rows (|cont|*F) | aperture]
  Var frame_pool(Var slot_feats, PoolMeta meta);

  // ---- execution -------------------------------------------------------
  // Seeds d(loss)/d(loss)=1 and runs the reverse sweep. loss must be 1x1.
  void backward(Var loss);

  size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;               // owned value (unused when value_ptr set)
    const Tensor* value_ptr = nullptr;
    Tensor grad;                // owned grad
    Tensor* grad_ptr = nullptr;
    bool needs_grad = false;
    std::function<void()> backward;
  };

  Tensor& grad_mut(Var v) { return nodes_[v].grad_ptr ? *nodes_[v].grad_ptr : nodes_[v].grad; }
  Var push(Tensor value, bool needs_grad, std::function<void()> bw);
  void ensure_grad(Var v);

  std::vector<Node> nodes_;
  bool grad_enabled_;
};

// Numerically stable softmax over each row.
Tensor softmax_rows(const Tensor& logits);

}  // namespace ntp::num
