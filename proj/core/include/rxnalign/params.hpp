#pragma once

// Named parameter collections, initialization and the Adam optimizer with
// global-norm clipping and the warmup/decay learning-rate schedule.

#include <cstdint>
#include <string>
#include <vector>

#include "rxnalign/tensor.hpp"

namespace rxnalign::nd {

struct ParamMap {
  std::vector<std::pair<std::string, Tensor>> entries;

  void add(std::string name, Tensor t);
  Tensor* find(const std::string& name);
  const Tensor* find(const std::string& name) const;
  std::int64_t total_size() const;
  void zero_grad();
};

// Uniform(-limit, limit) with the fan-based limit sqrt(6 / (fan_in + fan_out)).
Tensor glorot(Shape shape, std::uint64_t key);
// Normal(0, scale).
Tensor gaussian_init(Shape shape, double scale, std::uint64_t key);

// Scales all gradients in place so their joint L2 norm is at most max_norm.
// Returns the pre-clip norm.  Throws NdError when the norm is not finite.
double clip_global_norm(ParamMap& params, double max_norm);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  explicit Adam(const AdamConfig& config = {}) : config_(config) {}

  // One update with the given learning rate; gradients must be populated.
  void step(ParamMap& params, double lr);
  std::int64_t steps() const { return t_; }

  // Moment access for serialization.
  std::vector<std::vector<double>>& first_moments() { return m_; }
  std::vector<std::vector<double>>& second_moments() { return v_; }
  void set_steps(std::int64_t t) { t_ = t; }

 private:
  AdamConfig config_;
  std::int64_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

struct LrSchedule {
  double peak_lr = 1e-4;
  int warmup_epochs = 2;
  double decay_gamma = 0.99;

  // Linear warmup across whole steps, then exponential decay applied once
  // per completed epoch past warmup.
  double at(std::int64_t step, std::int64_t steps_per_epoch) const;
};

}  // namespace rxnalign::nd
