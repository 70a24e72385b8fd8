#include "ntp/graph.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ntp::num {

namespace {

void check(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(std::string("graph: ") + msg);
}

}  // namespace

Graph::Var Graph::push(Tensor value, bool needs_grad, std::function<void()> bw) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad && grad_enabled_;
  if (n.needs_grad) n.backward = std::move(bw);
  nodes_.push_back(std::move(n));
  return static_cast<Var>(nodes_.size() - 1);
}

void Graph::ensure_grad(Var v) {
  Node& n = nodes_[v];
  if (n.grad_ptr) return;  // param grads are pre-allocated
  const Tensor& val = n.value_ptr ? *n.value_ptr : n.value;
  if (!n.grad.same_shape(val)) n.grad = Tensor(val.rows, val.cols);
}

Graph::Var Graph::input(Tensor value) { return push(std::move(value), false, {}); }

Graph::Var Graph::param(const Tensor* value, Tensor* grad) {
  Node n;
  n.value_ptr = value;
  n.grad_ptr = grad;
  n.needs_grad = grad_enabled_;
  nodes_.push_back(std::move(n));
  return static_cast<Var>(nodes_.size() - 1);
}

Graph::Var Graph::matmul(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  check(A.cols == B.rows, "matmul inner dims");
  Tensor out(A.rows, B.cols);
  emap(out).noalias() = emap(A) * emap(B);
  bool ng = nodes_[a].needs_grad || nodes_[b].needs_grad;
  Var o = push(std::move(out), ng, {});
  if (nodes_[o].needs_grad) {
    nodes_[o].backward = [this, a, b, o]() {
      const Tensor& go = grad(o);
      if (nodes_[a].needs_grad) {
        ensure_grad(a);
        emap(grad_mut(a)).noalias() += emap(go) * emap(value(b)).transpose();
      }
      if (nodes_[b].needs_grad) {
        ensure_grad(b);
        emap(grad_mut(b)).noalias() += emap(value(a)).transpose() * emap(go);
      }
    };
  }
  return o;
}

Graph::Var Graph::add(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  check(A.same_shape(B), "add shapes");
  Tensor out = A;
  for (int i = 0; i < out.size(); ++i) out[i] += B[i];
  bool ng = nodes_[a].needs_grad || nodes_[b].needs_grad;
  Var o = push(std::move(out), ng, {});
  if (nodes_[o].needs_grad) {
    nodes_[o].backward = [this, a, b, o]() {
      const Tensor& go = grad(o);
      for (Var v : {a, b}) {
        if (!nodes_[v].needs_grad) continue;
        ensure_grad(v);
        Tensor& g = grad_mut(v);
        for (int i = 0; i < g.size(); ++i) g[i] += go[i];
      }
    };
  }
  return o;
}

Graph::Var Graph::mul(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  check(A.same_shape(B), "mul shapes");
  Tensor out = A;
  for (int i = 0; i < out.size(); ++i) out[i] *= B[i];
  bool ng = nodes_[a].needs_grad || nodes_[b].needs_grad;
  Var o = push(std::move(out), ng, {});
  if (nodes_[o].needs_grad) {
    nodes_[o].backward = [this, a, b, o]() {
      const Tensor& go = grad(o);
      if (nodes_[a].needs_grad) {
        ensure_grad(a);
        Tensor& g = grad_mut(a);
        const Tensor& B2 = value(b);
        for (int i = 0; i < g.size(); ++i) g[i] += go[i] * B2[i];
      }
      if (nodes_[b].needs_grad) {
        ensure_grad(b);
        Tensor& g = grad_mut(b);
        const Tensor& A2 = value(a);
        for (int i = 0; i < g.size(); ++i) g[i] += go[i] * A2[i];
      }
    };
  }
  return o;
}

Graph::Var Graph::add_rowvec(Var x, Var bias) {
  const Tensor& X = value(x);
  const Tensor& B = value(bias);
  check(B.rows == 1 && B.cols == X.cols, "add_rowvec shapes");
  Tensor out = X;
  for (int r = 0; r < out.rows; ++r)
    for (int c = 0; c < out.cols; ++c) out.at(r, c) += B[c];
  bool ng = nodes_[x].needs_grad || nodes_[bias].needs_grad;
  Var o = push(std::move(out), ng, {});
  if (nodes_[o].needs_grad) {
    nodes_[o].backward = [this, x, bias, o]() {
      const Tensor& go = grad(o);
      if (nodes_[x].needs_grad) {
        ensure_grad(x);
        Tensor& g = grad_mut(x);
        for (int i = 0; i < g.size(); ++i) g[i] += go[i];
      }
      if (nodes_[bias].needs_grad) {
        ensure_grad(bias);
        Tensor& g = grad_mut(bias);
        for (int r = 0; r < go.rows; ++r)
          for (int c = 0; c < go.cols; ++c) g[c] += go.at(r, c);
      }
    };
  }
  return o;
}

Graph::Var Graph::scalar_affine(Var x, double a, double b) {
  Tensor out = value(x);
  for (int i = 0; i < out.size(); ++i) out[i] = a * out[i] + b;
  Var o = push(std::move(out), nodes_[x].needs_grad, {});
  if (nodes_[o].needs_grad) {
    nodes_[o].backward = [this, x, a, o]() {
      ensure_grad(x);
      Tensor& g = grad_mut(x);
      const Tensor& go = grad(o);
      for (int i = 0; i < g.size(); ++i) g[i] += a * go[i];
    };
  }
  return o;
}

Graph::Var Graph::relu(Var x) {
  Tensor out = value(x);
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  Var o = push(std::move(out), nodes_[x].needs_grad, {});
  if (nodes_[o].needs_grad) {
    nodes_[o].backward = [this, x, o]() {
      ensure_grad(x);
      Tensor& g = grad_mut(x);
      const Tensor& go = grad(o);
      const Tensor& in = value(x);
      for (int i = 0; i < g.size(); ++i) g[i] += in[i] > 0.0 ? go[i] : 0.0;
    };
  }
  return o;
}

Graph::Var Graph::sigmoid(Var x) {
  Tensor out = value(x);
  for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
  Var o = push(std::move(out), nodes_[x].needs_grad, {});
  if (nodes_[o].needs_grad) {
    nodes_[o].backward = [this, x, o]() {
      ensure_grad(x);
      Tensor& g = grad_mut(x);
      const Tensor& go = grad(o);
      const Tensor& y = value(o);
      for (int i = 0; i < g.size(); ++i) g[i] += go[i] * y[i] * (1.0 - y[i]);
    };
  }
  return o;
}

Graph::Var Graph::tanh_(Var x) {
  Tensor out = value(x);
  for (double& v : out.data) v = std::tanh(v);
  Var o = push(std::move(out), nodes_[x].needs_grad, {});
  if (nodes_[o].needs_grad) {
    nodes_[o].backward = [this, x, o]() {
      ensure_grad(x);
      Tensor& g = grad_mut(x);
      const Tensor& go = grad(o);
      const Tensor& y = value(o);
      for (int i = 0; i < g.size(); ++i) g[i] += go[i] * (1.0 - y[i] * y[i]);
    };
  }
  return o;
}

Graph::Var Graph::concat_cols(const std::vector<Var>& xs) {
  check(!xs.empty(), "concat_cols empty");
  int rows = value(xs[0]).rows;
  int cols = 0;
  bool ng = false;
  for (Var v : xs) {
    check(value(v).rows == rows, "concat_cols rows");
    cols += value(v).cols;
    ng = ng || nodes_[v].needs_grad;
  }
  Tensor out(rows, cols);
  int off = 0;
  for (Var v : xs) {
    const Tensor& X = value(v);
    for (int r = 0; r < rows; ++r)
      std::copy(X.data.begin() + static_cast<size_t>(r) * X.cols,
                X.data.begin() + static_cast<size_t>(r + 1) * X.cols,
                out.data.begin() + static_cast<size_t>(r) * cols + off);
    off += X.cols;
  }
  Var o = push(std::move(out), ng, {});
  if (nodes_[o].needs_grad) {
    std::vector<Var> parts = xs;
    nodes_[o].backward = [this, parts, o]() {
      const Tensor& go = grad(o);
      int off2 = 0;
      for (Var v : parts) {
        const Tensor& X = value(v);
        if (nodes_[v].needs_grad) {
          ensure_grad(v);
          Tensor& g = grad_mut(v);
          for (int r = 0; r < go.rows; ++r)
            for (int c = 0; c < X.cols; ++c) g.at(r, c) += go.at(r, off2 + c);
        }
        off2 += X.cols;
      }
    };
  }
  return o;
}

Graph::Var Graph::repeat_row(Var v, int n) {
  const Tensor& V = value(v);
  check(V.rows == 1, "repeat_row expects 1xC");
  Tensor out(n, V.cols);
  for (int r = 0; r < n; ++r)
    std::copy(V.data.begin(), V.data.end(), out.data.begin() + static_cast<size_t>(r) * V.cols);
  Var o = push(std::move(out), nodes_[v].needs_grad, {});
  if (nodes_[o].needs_grad) {
    nodes_[o].backward = [this, v, o]() {
      ensure_grad(v);
      Tensor& g = grad_mut(v);
      const Tensor& go = grad(o);
      for (int r = 0; r < go.rows; ++r)
        for (int c = 0; c < go.cols; ++c) g[c] += go.at(r, c);
    };
  }
  return o;
}

Graph::Var Graph::slice_cols(Var x, int start, int len) {
  const Tensor& X = value(x);
  check(start >= 0 && start + len <= X.cols, "slice_cols range");
  Tensor out(X.rows, len);
  for (int r = 0; r < X.rows; ++r)
    std::copy(X.data.begin() + static_cast<size_t>(r) * X.cols + start,
              X.data.begin() + static_cast<size_t>(r) * X.cols + start + len,
              out.data.begin() + static_cast<size_t>(r) * len);
  Var o = push(std::move(out), nodes_[x].needs_grad, {});
  if (nodes_[o].needs_grad) {
    nodes_[o].backward = [this, x, o, start, len]() {
      ensure_grad(x);
      Tensor& g = grad_mut(x);
      const Tensor& go = grad(o);
      for (int r = 0; r < go.rows; ++r)
        for (int c = 0; c < len; ++c) g.at(r, start + c) += go.at(r, c);
    };
  }
  return o;
}

Graph::Var Graph::slice_rows(Var x, int start, int len) {
  const Tensor& X = value(x);
  check(start >= 0 && start + len <= X.rows, "slice_rows range");
  Tensor out(len, X.cols);
  std::copy(X.data.begin() + static_cast<size_t>(start) * X.cols,
            X.data.begin() + static_cast<size_t>(start + len) * X.cols, out.data.begin());
  Var o = push(std::move(out), nodes_[x].needs_grad, {});
  if (nodes_[o].needs_grad) {
    nodes_[o].backward = [this, x, o, start]() {
      ensure_grad(x);
      Tensor& g = grad_mut(x);
      const Tensor& go = grad(o);
      for (int r = 0; r < go.rows; ++r)
        for (int c = 0; c < go.cols; ++c) g.at(start + r, c) += go.at(r, c);
    };
  }
  return o;
}

Graph::Var Graph::reshape(Var x, int rows, int cols) {
  const Tensor& X = value(x);
  check(rows * cols == X.size(), "reshape size");
  Tensor out(rows, cols, X.data);
  Var o = push(std::move(out), nodes_[x].needs_grad, {});
  if (nodes_[o].needs_grad) {
    nodes_[o].backward = [this, x, o]() {
      ensure_grad(x);
      Tensor& g = grad_mut(x);
      const Tensor& go = grad(o);
      for (int i = 0; i < g.size(); ++i) g[i] += go[i];
    };
  }
  return o;
}

Graph::Var Graph::transpose(Var x) {
  const Tensor& X = value(x);
  Tensor out(X.cols, X.rows);
  for (int r = 0; r < X.rows; ++r)
    for (int c = 0; c < X.cols; ++c) out.at(c, r) = X.at(r, c);
  Var o = push(std::move(out), nodes_[x].needs_grad, {});
  if (nodes_[o].needs_grad) {
    nodes_[o].backward = [this, x, o]() {
      ensure_grad(x);
      Tensor& g = grad_mut(x);
      const Tensor& go = grad(o);
      for (int r = 0; r < go.rows; ++r)
        for (int c = 0; c < go.cols; ++c) g.at(c, r) += go.at(r, c);
    };
  }
  return o;
}

Graph::Var Graph::row_max(Var x) {
  const Tensor& X = value(x);
  check(X.rows >= 1, "row_max empty");
  Tensor out(1, X.cols);
  std::vector<int> arg(X.cols, 0);
  for (int c = 0; c < X.cols; ++c) {
    double best = X.at(0, c);
    int bi = 0;
    for (int r = 1; r < X.rows; ++r) {
      if (X.at(r, c) > best) {
        best = X.at(r, c);
        bi = r;
      }
    }
    out[c] = best;
    arg[c] = bi;
  }
  Var o = push(std::move(out), nodes_[x].needs_grad, {});
  if (nodes_[o].needs_grad) {
    nodes_[o].backward = [this, x, o, arg]() {
      ensure_grad(x);
      Tensor& g = grad_mut(x);
      const Tensor& go = grad(o);
      for (int c = 0; c < go.cols; ++c) g.at(arg[c], c) += go[c];
    };
  }
  return o;
}

Graph::Var Graph::conv1d_temporal(Var seq, Var w, Var b, int k) {
  const Tensor& S = value(seq);
  const Tensor& W = value(w);
  const Tensor& B = value(b);
  check(k >= 1 && k % 2 == 1, "conv width must be odd");
  check(S.rows >= 1, "conv needs at least one frame");
  int n = S.rows, d = S.cols, m = W.rows;
  check(W.cols == d * k, "conv kernel width");
  check(B.rows == 1 && B.cols == m, "conv bias shape");
  int half = k / 2;

  // im2col: row j holds k consecutive zero-padded frames centered at j.
  Tensor col(n, d * k);
  for (int j = 0; j < n; ++j) {
    for (int t = 0; t < k; ++t) {
      int src = j + t - half;
      if (src < 0 || src >= n) continue;
      std::copy(S.data.begin() + static_cast<size_t>(src) * d,
                S.data.begin() + static_cast<size_t>(src + 1) * d,
                col.data.begin() + static_cast<size_t>(j) * (d * k) + static_cast<size_t>(t) * d);
    }
  }
  Tensor out(n, m);
  emap(out).noalias() = emap(col) * emap(W).transpose();
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < m; ++c) out.at(r, c) += B[c];

  bool ng = nodes_[seq].needs_grad || nodes_[w].needs_grad || nodes_[b].needs_grad;
  Var o = push(std::move(out), ng, {});
  if (nodes_[o].needs_grad) {
    nodes_[o].backward = [this, seq, w, b, o, col = std::move(col), k, half]() {
      const Tensor& go = grad(o);
      int n2 = go.rows;
      const Tensor& W2 = value(w);
      int d2 = value(seq).cols;
      if (nodes_[w].needs_grad) {
        ensure_grad(w);
        emap(grad_mut(w)).noalias() += emap(go).transpose() * emap(col);
      }
      if (nodes_[b].needs_grad) {
        ensure_grad(b);
        Tensor& g = grad_mut(b);
        for (int r = 0; r < n2; ++r)
          for (int c = 0; c < go.cols; ++c) g[c] += go.at(r, c);
      }
      if (nodes_[seq].needs_grad) {
        ensure_grad(seq);
        Tensor gcol(n2, d2 * k);
        emap(gcol).noalias() = emap(go) * emap(W2);
        Tensor& g = grad_mut(seq);
        for (int j = 0; j < n2; ++j) {
          for (int t = 0; t < k; ++t) {
            int src = j + t - half;
            if (src < 0 || src >= n2) continue;
            for (int c = 0; c < d2; ++c) g.at(src, c) += gcol.at(j, t * d2 + c);
          }
        }
      }
    };
  }
  return o;
}

Graph::Var Graph::softmax_ce_rows(Var logits, std::vector<int> targets, bool average) {
  const Tensor& L = value(logits);
  check(static_cast<int>(targets.size()) == L.rows, "softmax_ce target count");
  for (int t : targets) check(t >= 0 && t < L.cols, "softmax_ce target range");
  Tensor probs = softmax_rows(L);
  double total = 0.0;
  for (int r = 0; r < L.rows; ++r) total += -std::log(std::max(probs.at(r, targets[r]), 1e-300));
  double scale = average ? 1.0 / L.rows : 1.0;
  Tensor out(1, 1);
  out[0] = total * scale;
  Var o = push(std::move(out), nodes_[logits].needs_grad, {});
  if (nodes_[o].needs_grad) {
    nodes_[o].backward = [this, logits, o, probs = std::move(probs), targets = std::move(targets), scale]() {
      ensure_grad(logits);
      Tensor& g = grad_mut(logits);
      double seed = grad(o)[0] * scale;
      for (int r = 0; r < g.rows; ++r) {
        for (int c = 0; c < g.cols; ++c) {
          double delta = probs.at(r, c) - (c == targets[r] ? 1.0 : 0.0);
          g.at(r, c) += seed * delta;
        }
      }
    };
  }
  return o;
}

Graph::Var Graph::sigmoid_bce(Var logit, double target) {
  const Tensor& L = value(logit);
  check(L.rows == 1 && L.cols == 1, "sigmoid_bce expects scalar logit");
  double z = L[0];
  // Stable: max(z,0) - z*y + log(1+exp(-|z|))
  double loss = std::max(z, 0.0) - z * target + std::log1p(std::exp(-std::abs(z)));
  Tensor out(1, 1);
  out[0] = loss;
  Var o = push(std::move(out), nodes_[logit].needs_grad, {});
  if (nodes_[o].needs_grad) {
    nodes_[o].backward = [this, logit, o, z, target]() {
      ensure_grad(logit);
      double p = 1.0 / (1.0 + std::exp(-z));
      grad_mut(logit)[0] += grad(o)[0] * (p - target);
    };
  }
  return o;
}

Graph::Var Graph::add_scalars(const std::vector<Var>& xs, const std::vector<double>& weights) {
  check(!xs.empty(), "add_scalars empty");
  check(weights.empty() || weights.size() == xs.size(), "add_scalars weights");
  double total = 0.0;
  bool ng = false;
  for (size_t i = 0; i < xs.size(); ++i) {
    const Tensor& X = value(xs[i]);
    check(X.rows == 1 && X.cols == 1, "add_scalars expects scalars");
    total += X[0] * (weights.empty() ? 1.0 : weights[i]);
    ng = ng || nodes_[xs[i]].needs_grad;
  }
  Tensor out(1, 1);
  out[0] = total;
  Var o = push(std::move(out), ng, {});
  if (nodes_[o].needs_grad) {
    std::vector<Var> parts = xs;
    std::vector<double> ws = weights;
    nodes_[o].backward = [this, parts, ws, o]() {
      double seed = grad(o)[0];
      for (size_t i = 0; i < parts.size(); ++i) {
        if (!nodes_[parts[i]].needs_grad) continue;
        ensure_grad(parts[i]);
        grad_mut(parts[i])[0] += seed * (ws.empty() ? 1.0 : ws[i]);
      }
    };
  }
  return o;
}

Graph::Var Graph::frame_pool(Var slot_feats, PoolMeta meta) {
  const Tensor& F = value(slot_feats);
  int nf = meta.n_frames, S = meta.slots, fd = F.cols;
  check(F.rows == nf * S, "frame_pool rows");
  check(static_cast<int>(meta.category.size()) == S, "frame_pool categories");
  check(meta.present.size() == static_cast<size_t>(nf) * S, "frame_pool present");
  check(static_cast<int>(meta.aperture.size()) == nf, "frame_pool aperture");
  int nc = meta.n_categories;
  int ncont = static_cast<int>(meta.container_slots.size());
  int out_cols = nc * fd + nc + fd + ncont * fd + 1;

  Tensor out(nf, out_cols);
  std::vector<int> max_arg(static_cast<size_t>(nf) * fd, -1);
  for (int f = 0; f < nf; ++f) {
    double* orow = &out.at(f, 0);
    // per-category masked means over object slots
    for (int c = 0; c < nc; ++c) {
      double cnt = 0.0;
      for (int s = 0; s < S; ++s) {
        if (meta.category[s] != c) continue;
        double pr = meta.present[static_cast<size_t>(f) * S + s];
        if (pr <= 0.0) continue;
        cnt += 1.0;
        const double* frow = F.data.data() + static_cast<size_t>(f * S + s) * fd;
        for (int j = 0; j < fd; ++j) orow[c * fd + j] += frow[j];
      }
      if (cnt > 0.0) {
        for (int j = 0; j < fd; ++j) orow[c * fd + j] /= cnt;
      }
      double denom = 0.0;
      for (int s = 0; s < S; ++s)
        if (meta.category[s] == c) denom += 1.0;
      orow[nc * fd + c] = denom > 0.0 ? cnt / denom : 0.0;
    }
    // global masked max over object slots (zero when nothing present)
    for (int j = 0; j < fd; ++j) {
      double best = 0.0;
      int bi = -1;
      for (int s = 0; s < S; ++s) {
        if (meta.category[s] < 0) continue;
        if (meta.present[static_cast<size_t>(f) * S + s] <= 0.0) continue;
        double v = F.at(f * S + s, j);
        if (bi < 0 || v > best) {
          best = v;
          bi = s;
        }
      }
      out.at(f, nc * fd + nc + j) = bi >= 0 ? best : 0.0;
      max_arg[static_cast<size_t>(f) * fd + j] = bi;
    }
    // container slot features verbatim
    for (int ci = 0; ci < ncont; ++ci) {
      const double* frow = F.data.data() + static_cast<size_t>(f * S + meta.container_slots[ci]) * fd;
      for (int j = 0; j < fd; ++j) out.at(f, nc * fd + nc + fd + ci * fd + j) = frow[j];
    }
    out.at(f, out_cols - 1) = meta.aperture[f];
  }

  Var o = push(std::move(out), nodes_[slot_feats].needs_grad, {});
  if (nodes_[o].needs_grad) {
    nodes_[o].backward = [this, slot_feats, o, meta = std::move(meta), max_arg = std::move(max_arg), fd]() {
      ensure_grad(slot_feats);
      Tensor& g = grad_mut(slot_feats);
      const Tensor& go = grad(o);
      int nc = meta.n_categories, S = meta.slots;
      int ncont = static_cast<int>(meta.container_slots.size());
      for (int f = 0; f < meta.n_frames; ++f) {
        const double* grow = go.data.data() + static_cast<size_t>(f) * go.cols;
        for (int c = 0; c < nc; ++c) {
          double cnt = 0.0;
          for (int s = 0; s < S; ++s)
            if (meta.category[s] == c && meta.present[static_cast<size_t>(f) * S + s] > 0.0) cnt += 1.0;
          if (cnt <= 0.0) continue;
          for (int s = 0; s < S; ++s) {
            if (meta.category[s] != c || meta.present[static_cast<size_t>(f) * S + s] <= 0.0) continue;
            double* gr = &g.at(f * S + s, 0);
            for (int j = 0; j < fd; ++j) gr[j] += grow[c * fd + j] / cnt;
          }
        }
        for (int j = 0; j < fd; ++j) {
          int bi = max_arg[static_cast<size_t>(f) * fd + j];
          if (bi >= 0) g.at(f * S + bi, j) += grow[nc * fd + nc + j];
        }
        for (int ci = 0; ci < ncont; ++ci) {
          double* gr = &g.at(f * S + meta.container_slots[ci], 0);
          for (int j = 0; j < fd; ++j) gr[j] += grow[nc * fd + nc + fd + ci * fd + j];
        }
      }
    };
  }
  return o;
}

void Graph::backward(Var loss) {
  check(grad_enabled_, "backward on no-grad graph");
  const Tensor& L = value(loss);
  check(L.rows == 1 && L.cols == 1, "backward expects scalar loss");
  ensure_grad(loss);
  grad_mut(loss)[0] = 1.0;
  for (int i = loss; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.needs_grad || !n.backward) continue;
    // Nodes off the path to the loss never had their grad allocated.
    if (!n.grad_ptr && n.grad.rows == 0) continue;
    n.backward();
  }
}

Tensor softmax_rows(const Tensor& logits) {
  Tensor out = logits;
  for (int r = 0; r < out.rows; ++r) {
    double mx = out.at(r, 0);
    for (int c = 1; c < out.cols; ++c) mx = std::max(mx, out.at(r, c));
    double sum = 0.0;
    for (int c = 0; c < out.cols; ++c) {
      double e = std::exp(out.at(r, c) - mx);
      out.at(r, c) = e;
      sum += e;
    }
    for (int c = 0; c < out.cols; ++c) out.at(r, c) /= sum;
  }
  return out;
}

}  // namespace ntp::num
