#include "rxnalign/params.hpp"

#include <cmath>

#include "rxnalign/rng.hpp"

namespace rxnalign::nd {

void ParamMap::add(std::string name, Tensor t) {
  if (find(name)) throw NdError("duplicate parameter name " + name);
  if (!t.requires_grad())
    throw NdError("parameter " + name + " does not track gradients");
  entries.emplace_back(std::move(name), std::move(t));
}

Tensor* ParamMap::find(const std::string& name) {
  for (auto& [n, t] : entries)
    if (n == name) return &t;
  return nullptr;
}

const Tensor* ParamMap::find(const std::string& name) const {
  for (auto& [n, t] : entries)
    if (n == name) return &t;
  return nullptr;
}

std::int64_t ParamMap::total_size() const {
  std::int64_t n = 0;
  for (auto& [name, t] : entries) n += t.size();
  return n;
}

void ParamMap::zero_grad() {
  for (auto& [name, t] : entries) t.zero_grad();
}

Tensor glorot(Shape shape, std::uint64_t key) {
  std::int64_t fan_in = shape.size() == 2 ? shape[0] : shape.back();
  std::int64_t fan_out = shape.back();
  double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::int64_t n = shape_size(shape);
  std::vector<double> data(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i)
    data[i] = (uniform01(key, static_cast<std::uint64_t>(i)) * 2.0 - 1.0) * limit;
  return Tensor::leaf(std::move(shape), std::move(data), true);
}

Tensor gaussian_init(Shape shape, double scale, std::uint64_t key) {
  std::int64_t n = shape_size(shape);
  std::vector<double> data(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i)
    data[i] = gaussian(key, static_cast<std::uint64_t>(i)) * scale;
  return Tensor::leaf(std::move(shape), std::move(data), true);
}

double clip_global_norm(ParamMap& params, double max_norm) {
  double sq = 0;
  for (auto& [name, t] : params.entries) {
    Node& node = *t.node();
    if (node.grad.empty()) continue;
    for (double g : node.grad) sq += g * g;
  }
  double norm = std::sqrt(sq);
  if (!std::isfinite(norm))
    throw NdError("gradient norm is not finite");
  if (norm > max_norm && norm > 0) {
    double s = max_norm / norm;
    for (auto& [name, t] : params.entries) {
      Node& node = *t.node();
      for (double& g : node.grad) g *= s;
    }
  }
  return norm;
}

void Adam::step(ParamMap& params, double lr) {
  if (m_.empty()) {
    m_.resize(params.entries.size());
    v_.resize(params.entries.size());
    for (std::size_t i = 0; i < params.entries.size(); ++i) {
      std::size_t n = params.entries[i].second.data().size();
      m_[i].assign(n, 0.0);
      v_[i].assign(n, 0.0);
    }
  }
  if (m_.size() != params.entries.size())
    throw NdError("optimizer state does not match parameter list");
  ++t_;
  double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.entries.size(); ++i) {
    Node& node = *params.entries[i].second.node();
    if (node.grad.empty()) continue;
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < node.value.size(); ++j) {
      double g = node.grad[j];
      m[j] = config_.beta1 * m[j] + (1.0 - config_.beta1) * g;
      v[j] = config_.beta2 * v[j] + (1.0 - config_.beta2) * g * g;
      double mhat = m[j] / bc1;
      double vhat = v[j] / bc2;
      node.value[j] -= lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
  }
}

double LrSchedule::at(std::int64_t step, std::int64_t steps_per_epoch) const {
  if (steps_per_epoch <= 0) throw NdError("steps_per_epoch must be positive");
  std::int64_t warmup_steps =
      static_cast<std::int64_t>(warmup_epochs) * steps_per_epoch;
  if (warmup_steps > 0 && step < warmup_steps)
    return peak_lr * static_cast<double>(step) /
           static_cast<double>(warmup_steps);
  std::int64_t epochs_past =
      (step - warmup_steps) / steps_per_epoch;
  return peak_lr * std::pow(decay_gamma, static_cast<double>(epochs_past));
}

}  // namespace rxnalign::nd
