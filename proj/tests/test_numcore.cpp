#include <doctest.h>
#include <functional>
#include <limits>
#include <map>

#include <cmath>

#include "ntp/graph.hpp"
#include "ntp/nn.hpp"
#include "ntp/params.hpp"
#include "ntp/util.hpp"

using namespace ntp;
using num::Graph;
using num::ParamStore;
using num::Tensor;

namespace {

Tensor random_tensor(int r, int c, Rng& rng, double scale = 1.0) {
  Tensor t(r, c);
  for (double& v : t.data) v = rng.uniform(-scale, scale);
  return t;
}

double fd_check(ParamStore& params, const std::function<double(bool)>& loss_fn, int probes = -1) {
  auto report = num::grad_check(loss_fn, params, 1e-5, probes, 1234);
  return report.max_rel_err;
}

// Helper: builds a scalar loss from an op output by summing squares through
// a fixed random projection, so every output coordinate gets gradient.
Graph::Var to_scalar(Graph& g, Graph::Var x, uint64_t seed) {
  const Tensor& v = g.value(x);
  Rng rng(seed);
  Tensor proj = random_tensor(v.cols, 1, rng);
  Graph::Var y = g.matmul(x, g.input(proj));  // rows x 1
  Graph::Var ones = g.input([&] {
    Tensor t(1, v.rows);
    for (double& d : t.data) d = 1.0;
    return t;
  }());
  Graph::Var total = g.matmul(ones, y);  // 1x1
  return g.mul(total, total);
}

}  // namespace

TEST_SUITE("numcore") {

TEST_CASE("dense: identity weights pass input through") {
  Graph g;
  Tensor w(3, 3);
  for (int i = 0; i < 3; ++i) w.at(i, i) = 1.0;
  Tensor b(1, 3);
  Tensor x = Tensor::row({0.5, -1.0, 2.0});
  Graph::Var out = num::dense(g, g.input(x), g.input(w), g.input(b));
  CHECK(g.value(out).data == x.data);
}

TEST_CASE("relu clamps negatives") {
  Graph g;
  Graph::Var out = g.relu(g.input(Tensor::row({-1.0, 2.0})));
  CHECK(g.value(out)[0] == 0.0);
  CHECK(g.value(out)[1] == 2.0);
}

TEST_CASE("dense backward matches finite differences on random 5->7") {
  Rng rng(42);
  ParamStore params;
  params.add("w", 5, 7, rng);
  params.add("b", 1, 7, rng, true);
  Tensor x = random_tensor(1, 5, rng);
  auto loss_fn = [&](bool with_grad) {
    Graph g(with_grad);
    std::map<std::string, Tensor> sink;
    Graph::Var w = g.param(&params.value("w"), with_grad ? &params.grad("w") : nullptr);
    Graph::Var b = g.param(&params.value("b"), with_grad ? &params.grad("b") : nullptr);
    Graph::Var out = g.relu(num::dense(g, g.input(x), w, b));
    Graph::Var loss = to_scalar(g, out, 9);
    double v = g.value(loss)[0];
    if (with_grad) g.backward(loss);
    return v;
  };
  CHECK(fd_check(params, loss_fn) < 1e-6);
}

TEST_CASE("conv1d: k=1 reduces to a per-frame linear map") {
  Rng rng(7);
  Graph g;
  Tensor seq = random_tensor(4, 3, rng);
  Tensor w = random_tensor(2, 3, rng);
  Tensor b = random_tensor(1, 2, rng);
  Graph::Var out = g.conv1d_temporal(g.input(seq), g.input(w), g.input(b), 1);
  const Tensor& o = g.value(out);
  REQUIRE(o.rows == 4);
  REQUIRE(o.cols == 2);
  for (int j = 0; j < 4; ++j) {
    for (int m = 0; m < 2; ++m) {
      double want = b[m];
      for (int c = 0; c < 3; ++c) want += w.at(m, c) * seq.at(j, c);
      CHECK(o.at(j, m) == doctest::Approx(want).epsilon(1e-12));
    }
  }
}

TEST_CASE("conv1d: constant input sequence gives constant interior output") {
  Rng rng(8);
  Graph g;
  Tensor seq(6, 3);
  for (int j = 0; j < 6; ++j)
    for (int c = 0; c < 3; ++c) seq.at(j, c) = 0.3 * (c + 1);
  Tensor w = random_tensor(4, 9, rng);
  Tensor b = random_tensor(1, 4, rng);
  Graph::Var out = g.conv1d_temporal(g.input(seq), g.input(w), g.input(b), 3);
  const Tensor& o = g.value(out);
  // rows away from the zero-padded ends are identical
  for (int j = 2; j < 5; ++j)
    for (int m = 0; m < 4; ++m) CHECK(o.at(j, m) == doctest::Approx(o.at(1, m)).epsilon(1e-12));
}

TEST_CASE("conv1d backward matches finite differences (N=9,d=4,k=3,m=6)") {
  Rng rng(11);
  ParamStore params;
  params.add("w", 6, 12, rng);
  params.add("b", 1, 6, rng, true);
  params.add("seq", 9, 4, rng);
  auto loss_fn = [&](bool with_grad) {
    Graph g(with_grad);
    Graph::Var seq = g.param(&params.value("seq"), with_grad ? &params.grad("seq") : nullptr);
    Graph::Var w = g.param(&params.value("w"), with_grad ? &params.grad("w") : nullptr);
    Graph::Var b = g.param(&params.value("b"), with_grad ? &params.grad("b") : nullptr);
    Graph::Var loss = to_scalar(g, g.relu(g.conv1d_temporal(seq, w, b, 3)), 10);
    double v = g.value(loss)[0];
    if (with_grad) g.backward(loss);
    return v;
  };
  CHECK(fd_check(params, loss_fn) < 1e-6);
}

TEST_CASE("gru: saturated update gate keeps previous state") {
  Rng rng(13);
  Graph g;
  int in = 4, hid = 3;
  num::GruVars p;
  Tensor wz = random_tensor(in + hid, hid, rng);
  Tensor bz(1, hid);
  for (double& v : bz.data) v = -50.0;  // z ~ 0
  Tensor wr = random_tensor(in + hid, hid, rng);
  Tensor br(1, hid);
  Tensor wh = random_tensor(in + hid, hid, rng);
  Tensor bh(1, hid);
  p.wz = g.input(wz);
  p.bz = g.input(bz);
  p.wr = g.input(wr);
  p.br = g.input(br);
  p.wh = g.input(wh);
  p.bh = g.input(bh);
  Tensor h_prev = random_tensor(1, hid, rng);
  Tensor x = random_tensor(1, in, rng);
  Graph::Var h = num::gru_cell(g, g.input(x), g.input(h_prev), p);
  for (int i = 0; i < hid; ++i) CHECK(g.value(h)[i] == doctest::Approx(h_prev[i]).epsilon(1e-9));
}

TEST_CASE("gru: zero params and zero state give zero output") {
  Graph g;
  int in = 2, hid = 2;
  num::GruVars p;
  p.wz = g.input(Tensor(in + hid, hid));
  p.bz = g.input(Tensor(1, hid));
  p.wr = g.input(Tensor(in + hid, hid));
  p.br = g.input(Tensor(1, hid));
  p.wh = g.input(Tensor(in + hid, hid));
  p.bh = g.input(Tensor(1, hid));
  Graph::Var h = num::gru_cell(g, g.input(Tensor(1, in)), g.input(Tensor(1, hid)), p);
  for (int i = 0; i < hid; ++i) CHECK(g.value(h)[i] == 0.0);
}

TEST_CASE("gru: BPTT over 5 steps matches finite differences") {
  Rng rng(17);
  int in = 8, hid = 16;
  ParamStore params;
  params.add("wz", in + hid, hid, rng);
  params.add("bz", 1, hid, rng, true);
  params.add("wr", in + hid, hid, rng);
  params.add("br", 1, hid, rng, true);
  params.add("wh", in + hid, hid, rng);
  params.add("bh", 1, hid, rng, true);
  std::vector<Tensor> xs;
  for (int t = 0; t < 5; ++t) xs.push_back(random_tensor(1, in, rng));
  auto loss_fn = [&](bool with_grad) {
    Graph g(with_grad);
    auto leaf = [&](const char* n) {
      return g.param(&params.value(n), with_grad ? &params.grad(n) : nullptr);
    };
    num::GruVars p{leaf("wz"), leaf("bz"), leaf("wr"), leaf("br"), leaf("wh"), leaf("bh")};
    Graph::Var h = g.input(Tensor(1, hid));
    for (int t = 0; t < 5; ++t) h = num::gru_cell(g, g.input(xs[t]), h, p);
    Graph::Var loss = to_scalar(g, h, 21);
    double v = g.value(loss)[0];
    if (with_grad) g.backward(loss);
    return v;
  };
  CHECK(fd_check(params, loss_fn, 200) < 1e-5);
}

TEST_CASE("softmax cross-entropy: uniform logits over 4 classes give ln 4") {
  Graph g;
  Graph::Var loss = g.softmax_ce_rows(g.input(Tensor::row({0.7, 0.7, 0.7, 0.7})), {2});
  CHECK(g.value(loss)[0] == doctest::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("sigmoid bce analytic values") {
  Graph g;
  Graph::Var loss = g.sigmoid_bce(g.input(Tensor(1, 1)), 1.0);
  CHECK(g.value(loss)[0] == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("softmax gradient equals probs minus one-hot") {
  Rng rng(23);
  ParamStore params;
  params.add("logits", 1, 6, rng);
  auto loss_fn = [&](bool with_grad) {
    Graph g(with_grad);
    Graph::Var l = g.param(&params.value("logits"), with_grad ? &params.grad("logits") : nullptr);
    Graph::Var loss = g.softmax_ce_rows(l, {3});
    double v = g.value(loss)[0];
    if (with_grad) g.backward(loss);
    return v;
  };
  loss_fn(true);
  Tensor probs = num::softmax_rows(params.value("logits"));
  for (int i = 0; i < 6; ++i) {
    double want = probs[i] - (i == 3 ? 1.0 : 0.0);
    CHECK(params.grad("logits")[i] == doctest::Approx(want).epsilon(1e-8));
  }
  params.zero_grads();
  CHECK(fd_check(params, loss_fn) < 1e-8);
}

TEST_CASE("softmax rows sum to one") {
  Rng rng(29);
  Tensor logits = random_tensor(7, 4, rng, 30.0);
  Tensor probs = num::softmax_rows(logits);
  for (int r = 0; r < 7; ++r) {
    double sum = 0.0;
    for (int c = 0; c < 4; ++c) sum += probs.at(r, c);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("remaining graph ops pass finite differences") {
  Rng rng(31);
  ParamStore params;
  params.add("a", 3, 4, rng);
  params.add("b", 3, 4, rng);
  params.add("v", 1, 4, rng);
  auto loss_fn = [&](bool with_grad) {
    Graph g(with_grad);
    auto leaf = [&](const char* n) {
      return g.param(&params.value(n), with_grad ? &params.grad(n) : nullptr);
    };
    Graph::Var a = leaf("a");
    Graph::Var b = leaf("b");
    Graph::Var v = leaf("v");
    Graph::Var x = g.mul(g.add(a, b), g.sigmoid(b));
    x = g.add_rowvec(x, v);
    x = g.tanh_(g.scalar_affine(x, 0.7, -0.1));
    Graph::Var cat = g.concat_cols({x, g.repeat_row(v, 3)});
    Graph::Var sl = g.slice_cols(cat, 2, 4);
    Graph::Var sr = g.slice_rows(sl, 1, 2);
    Graph::Var tr = g.transpose(g.reshape(sr, 4, 2));
    Graph::Var mx = g.row_max(g.matmul(tr, g.transpose(tr)));
    Graph::Var loss = to_scalar(g, mx, 35);
    double val = g.value(loss)[0];
    if (with_grad) g.backward(loss);
    return val;
  };
  CHECK(fd_check(params, loss_fn) < 1e-6);
}

TEST_CASE("frame_pool: means, fractions, max, containers and backward") {
  Rng rng(37);
  ParamStore params;
  params.add("feats", 2 * 4, 3, rng);  // 2 frames x 4 slots x 3 features
  Graph::PoolMeta meta;
  meta.n_frames = 2;
  meta.slots = 4;
  meta.n_categories = 2;
  meta.category = {0, 1, 1, -1};
  meta.container_slots = {3};
  meta.present = {1, 1, 0, 1, 0, 1, 1, 1};
  meta.aperture = {1.0, 0.0};

  {
    Graph g;
    Graph::Var f = g.input(params.value("feats"));
    Graph::Var out = g.frame_pool(f, meta);
    const Tensor& o = g.value(out);
    // frame 0: cat0 mean = slot0 row, cat1 mean = slot1 row (slot2 absent)
    const Tensor& F = params.value("feats");
    for (int j = 0; j < 3; ++j) {
      CHECK(o.at(0, j) == doctest::Approx(F.at(0, j)));
      CHECK(o.at(0, 3 + j) == doctest::Approx(F.at(1, j)));
    }
    // fractions: cat0 1/1 present, cat1 1/2 present
    CHECK(o.at(0, 6) == doctest::Approx(1.0));
    CHECK(o.at(0, 7) == doctest::Approx(0.5));
    // masked max over present object slots of frame 0 (slots 0 and 1)
    for (int j = 0; j < 3; ++j)
      CHECK(o.at(0, 8 + j) == doctest::Approx(std::max(F.at(0, j), F.at(1, j))));
    // container slot passthrough and aperture
    for (int j = 0; j < 3; ++j) CHECK(o.at(0, 11 + j) == doctest::Approx(F.at(3, j)));
    CHECK(o.at(0, 14) == doctest::Approx(1.0));
    CHECK(o.at(1, 14) == doctest::Approx(0.0));
  }

  auto loss_fn = [&](bool with_grad) {
    Graph g(with_grad);
    Graph::Var f = g.param(&params.value("feats"), with_grad ? &params.grad("feats") : nullptr);
    Graph::Var loss = to_scalar(g, g.frame_pool(f, meta), 41);
    double v = g.value(loss)[0];
    if (with_grad) g.backward(loss);
    return v;
  };
  CHECK(fd_check(params, loss_fn) < 1e-6);
}

TEST_CASE("adam: zero gradients leave parameters unchanged") {
  Rng rng(43);
  ParamStore params;
  params.add("w", 2, 2, rng);
  Tensor before = params.value("w");
  params.adam_step({0.01, 0.9, 0.999, 1e-8});
  CHECK(params.value("w").data == before.data);
}

TEST_CASE("adam: first step from zero moments has magnitude ~ lr") {
  Rng rng(47);
  ParamStore params;
  params.add("w", 1, 3, rng);
  Tensor before = params.value("w");
  for (int i = 0; i < 3; ++i) params.grad("w")[i] = 0.37;
  params.adam_step({0.01, 0.9, 0.999, 1e-8});
  for (int i = 0; i < 3; ++i)
    CHECK(std::abs(params.value("w")[i] - before[i]) == doctest::Approx(0.01).epsilon(1e-4));
}

TEST_CASE("adam: quadratic bowl norm decreases monotonically after warmup") {
  Rng rng(53);
  ParamStore params;
  params.add("w", 1, 8, rng);
  double prev = 1e300;
  num::AdamConfig cfg{0.01, 0.9, 0.999, 1e-8};
  for (int step = 0; step < 200; ++step) {
    Tensor& w = params.value("w");
    double norm2 = 0.0;
    for (int i = 0; i < 8; ++i) {
      params.grad("w")[i] = 2.0 * w[i];
      norm2 += w[i] * w[i];
    }
    if (step > 20 && prev > 1e-6) CHECK(norm2 < prev + 1e-15);
    prev = norm2;
    params.adam_step(cfg);
  }
  CHECK(prev < 1e-5);  // converged to the bowl floor
}

TEST_CASE("adam: non-finite gradient raises training divergence") {
  Rng rng(59);
  ParamStore params;
  params.add("w", 1, 2, rng);
  params.grad("w")[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_WITH_AS(params.adam_step({}), doctest::Contains("training divergence"),
                       std::runtime_error);
}

TEST_CASE("grad_check: linear function is exact and corrupted backward is caught") {
  Rng rng(61);
  ParamStore params;
  params.add("w", 1, 4, rng);
  Tensor c = random_tensor(4, 1, rng);
  auto loss_fn = [&](bool with_grad) {
    Graph g(with_grad);
    Graph::Var w = g.param(&params.value("w"), with_grad ? &params.grad("w") : nullptr);
    Graph::Var loss = g.matmul(w, g.input(c));
    double v = g.value(loss)[0];
    if (with_grad) g.backward(loss);
    return v;
  };
  CHECK(fd_check(params, loss_fn) < 1e-9);

  // negative control: a deliberately wrong gradient must exceed tolerance
  auto corrupted = [&](bool with_grad) {
    double v = loss_fn(with_grad);
    if (with_grad) params.grad("w")[2] += 0.5;
    return v;
  };
  CHECK(fd_check(params, corrupted) > 1e-2);
}

TEST_CASE("determinism: same seed yields identical parameter trajectories") {
  auto run = [] {
    Rng rng(1234);
    ParamStore params;
    params.add("w", 4, 4, rng);
    for (int step = 0; step < 5; ++step) {
      for (int i = 0; i < params.value("w").size(); ++i)
        params.grad("w")[i] = 0.1 * params.value("w")[i] - 0.02;
      params.adam_step({1e-3, 0.9, 0.999, 1e-8});
    }
    return params.value("w").data;
  };
  CHECK(run() == run());
}

}  // TEST_SUITE
