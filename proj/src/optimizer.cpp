#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "schemex/training.hpp"

namespace schemex {

void TrainConfig::validate() const {
  if (epochs == 0 || batch_size == 0 || warmup_steps == 0) {
    throw std::invalid_argument("epochs, batch_size and warmup_steps must be positive");
  }
  if (!(lr_backbone > 0.0) || !(lr_heads > 0.0)) {
    throw std::invalid_argument("learning rates must be positive");
  }
  if (weight_decay < 0.0 || !(grad_clip > 0.0)) {
    throw std::invalid_argument("weight_decay must be >= 0 and grad_clip > 0");
  }
}

double scheduled_lr(double base, std::size_t step, std::size_t warmup_steps) {
  if (warmup_steps == 0 || step >= warmup_steps) return base;
  return base * static_cast<double>(step) / static_cast<double>(warmup_steps);
}

StepInfo optimizer_step(TensorMap& params, const TensorMap& grads, AdamState& state,
                        const TrainConfig& cfg, std::size_t step) {
  if (step < 1) throw std::invalid_argument("optimizer steps are 1-based");

  StepInfo info;
  double sq = 0.0;
  for (const auto& [_, g] : grads) {
    for (double x : g.data) sq += x * x;
  }
  info.grad_norm = std::sqrt(sq);
  const double clip = info.grad_norm > cfg.grad_clip ? cfg.grad_clip / info.grad_norm : 1.0;
  info.applied_norm = info.grad_norm * clip;
  info.lr_backbone = scheduled_lr(cfg.lr_backbone, step, cfg.warmup_steps);
  info.lr_heads = scheduled_lr(cfg.lr_heads, step, cfg.warmup_steps);

  const double bias1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double bias2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));

  for (auto& [name, p] : params) {
    auto git = grads.find(name);
    if (git == grads.end()) continue;
    const Tensor& g = git->second;
    auto [m_it, m_new] = state.first_moment.try_emplace(name, Tensor(p.shape, 0.0));
    auto [v_it, v_new] = state.second_moment.try_emplace(name, Tensor(p.shape, 0.0));
    Tensor& m = m_it->second;
    Tensor& v = v_it->second;
    const double lr = is_head_parameter(name) ? info.lr_heads : info.lr_backbone;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g.data[i] * clip;
      m.data[i] = cfg.beta1 * m.data[i] + (1.0 - cfg.beta1) * gi;
      v.data[i] = cfg.beta2 * v.data[i] + (1.0 - cfg.beta2) * gi * gi;
      const double m_hat = m.data[i] / bias1;
      const double v_hat = v.data[i] / bias2;
      p.data[i] -= lr * (m_hat / (std::sqrt(v_hat) + cfg.adam_eps) + cfg.weight_decay * p.data[i]);
    }
  }
  return info;
}

}  // namespace schemex
