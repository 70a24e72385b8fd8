#include "ntp/params.hpp"

#include <cmath>
#include <stdexcept>

namespace ntp::num {

Tensor& ParamStore::add(const std::string& name, int rows, int cols, Rng& rng, bool zero_init) {
  if (entries_.count(name)) throw std::invalid_argument("duplicate parameter: " + name);
  Entry e;
  e.value = Tensor(rows, cols);
  if (!zero_init) {
    double bound = std::sqrt(6.0 / (rows + cols));
    for (double& v : e.value.data) v = rng.uniform(-bound, bound);
  }
  e.grad = Tensor(rows, cols);
  e.m = Tensor(rows, cols);
  e.v = Tensor(rows, cols);
  return entries_.emplace(name, std::move(e)).first->second.value;
}

Tensor& ParamStore::value(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw std::invalid_argument("unknown parameter: " + name);
  return it->second.value;
}

const Tensor& ParamStore::value(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw std::invalid_argument("unknown parameter: " + name);
  return it->second.value;
}

Tensor& ParamStore::grad(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw std::invalid_argument("unknown parameter: " + name);
  return it->second.grad;
}

void ParamStore::zero_grads() {
  for (auto& [name, e] : entries_) e.grad.zero();
}

void ParamStore::adam_step(const AdamConfig& cfg) {
  for (auto& [name, e] : entries_) {
    if (!e.grad.all_finite()) throw std::runtime_error("training divergence: non-finite gradient in " + name);
  }
  ++step_;
  double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step_));
  double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step_));
  for (auto& [name, e] : entries_) {
    for (int i = 0; i < e.value.size(); ++i) {
      double g = e.grad[i];
      e.m[i] = cfg.beta1 * e.m[i] + (1.0 - cfg.beta1) * g;
      e.v[i] = cfg.beta2 * e.v[i] + (1.0 - cfg.beta2) * g * g;
      double mhat = e.m[i] / bc1;
      double vhat = e.v[i] / bc2;
      e.value[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
    e.grad.zero();
  }
}

int64_t ParamStore::scalar_count() const {
  int64_t n = 0;
  for (const auto& [name, e] : entries_) n += e.value.size();
  return n;
}

void ParamStore::accumulate_grads(const ParamStore& other) {
  if (other.entries_.size() != entries_.size()) throw std::invalid_argument("param store mismatch");
  auto it = entries_.begin();
  auto jt = other.entries_.begin();
  for (; it != entries_.end(); ++it, ++jt) {
    if (it->first != jt->first || !it->second.grad.same_shape(jt->second.grad))
      throw std::invalid_argument("param store mismatch at " + it->first);
    for (int i = 0; i < it->second.grad.size(); ++i) it->second.grad[i] += jt->second.grad[i];
  }
}

GradCheckReport grad_check(const std::function<double(bool)>& loss_fn, ParamStore& params,
                           double h, int probes, uint64_t probe_seed) {
  params.zero_grads();
  loss_fn(true);  // populate analytic gradients

  // Snapshot analytic grads; the probing loop reuses the store.
  std::map<std::string, Tensor> analytic;
  for (auto& [name, e] : params.entries()) analytic[name] = e.grad;
  params.zero_grads();

  struct Probe {
    std::string name;
    int index;
  };
  std::vector<Probe> plan;
  if (probes <= 0) {
    for (auto& [name, e] : params.entries())
      for (int i = 0; i < e.value.size(); ++i) plan.push_back({name, i});
  } else {
    std::vector<std::pair<std::string, int>> flat;
    for (auto& [name, e] : params.entries()) flat.emplace_back(name, e.value.size());
    Rng rng(probe_seed ^ 0x9e3779b97f4a7c15ull);
    int64_t total = params.scalar_count();
    for (int p = 0; p < probes; ++p) {
      int64_t pick = static_cast<int64_t>(rng.uniform_index(static_cast<uint64_t>(total)));
      for (auto& [name, n] : flat) {
        if (pick < n) {
          plan.push_back({name, static_cast<int>(pick)});
          break;
        }
        pick -= n;
      }
    }
  }

  GradCheckReport report;
  for (const Probe& p : plan) {
    Tensor& t = params.value(p.name);
    double orig = t[p.index];
    t[p.index] = orig + h;
    double fp = loss_fn(false);
    t[p.index] = orig - h;
    double fm = loss_fn(false);
    t[p.index] = orig;
    double numeric = (fp - fm) / (2.0 * h);
    double an = analytic[p.name][p.index];
    double denom = std::max({std::abs(numeric), std::abs(an), 1e-6});
    double rel = std::abs(numeric - an) / denom;
    ++report.checked;
    if (rel > report.max_rel_err) {
      report.max_rel_err = rel;
      report.worst_param = p.name;
      report.worst_index = p.index;
    }
  }
  return report;
}

}  // namespace ntp::num
