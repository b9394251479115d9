#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "gta/numerics/tensor.hpp"

namespace gta {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double eps = 1e-8;
};

/// First/second moment buffers for one parameter. Zero-initialized on first use.
struct AdamMoments {
  std::vector<double> m;
  std::vector<double> v;
};

/// One bias-corrected Adam update of `param` in place. `step` is 1-based.
inline void adam_step(std::span<double> param, std::span<const double> grad, AdamMoments& state,
                      const AdamConfig& cfg, long step) {
  if (grad.size() != param.size()) {
    throw ShapeError("adam_step: gradient has " + std::to_string(grad.size()) + " entries, parameter has " +
                     std::to_string(param.size()));
  }
  if (state.m.empty()) {
    state.m.assign(param.size(), 0.0);
    state.v.assign(param.size(), 0.0);
  }
  if (state.m.size() != param.size()) throw ShapeError("adam_step: optimizer state size mismatch");
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    param[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
  }
}

/// Adam over a fixed list of parameter tensors. Parameters without a gradient
/// in a step are skipped (their moments do not decay).
class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg), state_(params_.size()) {}

  void step() {
    ++t_;
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& p = params_[i];
      if (!p.has_grad()) continue;
      for (double g : p.grad()) {
        if (!std::isfinite(g)) throw NumericError("non-finite gradient in optimizer step");
      }
      adam_step(p.mutable_data(), p.grad(), state_[i], cfg_, t_);
    }
  }

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

  AdamConfig& config() { return cfg_; }
  long steps() const { return t_; }

 private:
  std::vector<Tensor> params_;
  AdamConfig cfg_;
  std::vector<AdamMoments> state_;
  long t_ = 0;
};

}  // namespace gta
