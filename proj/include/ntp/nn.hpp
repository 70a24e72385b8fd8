#pragma once

#include "ntp/graph.hpp"

namespace ntp::num {

// Affine map out = x*W + b, with b broadcast over rows.
inline Graph::Var dense(Graph& g, Graph::Var x, Graph::Var w, Graph::Var b) {
  return g.add_rowvec(g.matmul(x, w), b);
}

inline Graph::Var dense_relu(Graph& g, Graph::Var x, Graph::Var w, Graph::Var b) {
  return g.relu(dense(g, x, w, b));
}

struct GruVars {
  Graph::Var wz, bz, wr, br, wh, bh;  // each W is (in+hidden) x hidden
};

// Standard GRU update. With the update gate saturated at zero the cell
// returns h_prev unchanged.
inline Graph::Var gru_cell(Graph& g, Graph::Var x, Graph::Var h_prev, const GruVars& p) {
  Graph::Var xh = g.concat_cols({x, h_prev});
  Graph::Var z = g.sigmoid(dense(g, xh, p.wz, p.bz));
  Graph::Var r = g.sigmoid(dense(g, xh, p.wr, p.br));
  Graph::Var xrh = g.concat_cols({x, g.mul(r, h_prev)});
  Graph::Var cand = g.tanh_(dense(g, xrh, p.wh, p.bh));
  Graph::Var keep = g.mul(g.scalar_affine(z, -1.0, 1.0), h_prev);  // (1-z)*h
  return g.add(keep, g.mul(z, cand));
}

}  // namespace ntp::num
