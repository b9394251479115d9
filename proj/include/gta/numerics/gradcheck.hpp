#pragma once

// Central finite-difference check of reverse-mode gradients.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "gta/numerics/ops.hpp"
#include "gta/random.hpp"

namespace gta {

struct GradCheckReport {
  double max_rel_error = 0.0;  // max |analytic − numeric| / max(1, |analytic|, |numeric|)
  std::size_t entries = 0;
  std::string worst;  // "input k, entry e"
};

/// `loss` recomputes a scalar from the current values of `inputs` (each of
/// which must require grad). Every entry of every input is perturbed by ±h.
template <class LossFn>
GradCheckReport gradcheck(LossFn&& loss, const std::vector<Tensor>& inputs, double h = 1e-5) {
  std::vector<Tensor> params = inputs;
  for (auto& p : params) p.zero_grad();
  GradTape::current().clear();
  backward(loss());
  std::vector<std::vector<double>> analytic;
  for (const auto& p : params) {
    if (p.has_grad()) analytic.emplace_back(p.grad().begin(), p.grad().end());
    else analytic.emplace_back(p.numel(), 0.0);
  }
  GradCheckReport report;
  NoGradGuard guard;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto values = params[k].mutable_data();
    for (std::size_t e = 0; e < values.size(); ++e) {
      const double saved = values[e];
      values[e] = saved + h;
      const double up = loss().item();
      values[e] = saved - h;
      const double down = loss().item();
      values[e] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[k][e];
      const double err = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      ++report.entries;
      if (err > report.max_rel_error) {
        report.max_rel_error = err;
        report.worst = "input " + std::to_string(k) + ", entry " + std::to_string(e);
      }
    }
  }
  for (auto& p : params) p.zero_grad();
  return report;
}

/// Fixed random projection Σ y ⊙ R, turning any tensor into a scalar loss.
class Projector {
 public:
  explicit Projector(std::uint64_t seed) : gen_(seed) {}

  Tensor operator()(const Tensor& y) {
    auto& w = weights_[y.numel()];
    if (w.empty()) {
      w.resize(y.numel());
      for (double& v : w) v = gen_.normal();
    }
    return sum(mul(y, Tensor::from(y.shape(), w)));
  }

 private:
  Generator gen_;
  std::map<std::size_t, std::vector<double>> weights_;
};

/// Tensor of N(0, sd²) entries that requires grad.
inline Tensor random_tensor(Shape shape, Generator& gen, double sd = 1.0, bool requires_grad = true) {
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = gen.normal(0.0, sd);
  return Tensor::from(std::move(shape), std::move(v), requires_grad);
}

}  // namespace gta
