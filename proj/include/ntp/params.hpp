#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "ntp/tensor.hpp"
#include "ntp/util.hpp"

namespace ntp::num {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Named parameter tensors with matching gradient accumulators and Adam
// moment buffers. Iteration order is the lexicographic key order of the map,
// which keeps every consumer (checkpoints, grad checks, updates) stable.
class ParamStore {
 public:
  struct Entry {
    Tensor value;
    Tensor grad;
    Tensor m;  // first moment
    Tensor v;  // second moment
  };

  // Registers a tensor initialized with uniform fan-in/fan-out scaling,
  // +-sqrt(6/(fan_in+fan_out)). Biases (rows==1 && zero_init) start at zero.
  Tensor& add(const std::string& name, int rows, int cols, Rng& rng, bool zero_init = false);

  bool has(const std::string& name) const { return entries_.count(name) > 0; }
  Tensor& value(const std::string& name);
  const Tensor& value(const std::string& name) const;
  Tensor& grad(const std::string& name);

  void zero_grads();
  // Standard Adam with bias correction; zeroes gradients afterwards.
  // Throws on non-finite gradients (training divergence).
  void adam_step(const AdamConfig& cfg);
  int64_t step_count() const { return step_; }

  size_t size() const { return entries_.size(); }
  int64_t scalar_count() const;

  // Deterministic iteration for merges and serialization.
  std::map<std::string, Entry>& entries() { return entries_; }
  const std::map<std::string, Entry>& entries() const { return entries_; }

  // Adds other's gradients into ours (shapes must match pairwise).
  void accumulate_grads(const ParamStore& other);

 private:
  std::map<std::string, Entry> entries_;
  int64_t step_ = 0;
};

// Central finite-difference gradient oracle. `loss_fn` must rebuild the
// forward pass from the current parameter values and return (loss, with
// gradients accumulated into the store when `with_grad` is true).
struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst_param;
  int worst_index = -1;
  int checked = 0;
};

// Checks d(loss)/d(theta_i) for `probes` randomly chosen coordinates
// (all coordinates when probes <= 0) against central differences with
// step h. Relative error uses max(|analytic|, |numeric|, floor) scaling.
GradCheckReport grad_check(const std::function<double(bool with_grad)>& loss_fn,
                           ParamStore& params, double h = 1e-5, int probes = -1,
                           uint64_t probe_seed = 0);

}  // namespace ntp::num
