#pragma once

// Joint training of the connection policy and the network weights.
// The first `warmup` epochs use the complete graph with frozen logits; after
// that every batch draws one straight-through Gumbel-Softmax adjacency and the
// objective is L_mse + λ_s·L_s. Validation (the trailing windows of the
// training split) always uses the deterministic π₁ > 0.5 graph.

#include <algorithm>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "gta/detector/detector.hpp"
#include "gta/model/gta_model.hpp"
#include "gta/numerics/adam.hpp"

namespace gta::model {

struct TrainConfig {
  std::size_t epochs = 50;
  std::size_t patience = 10;
  std::size_t warmup = 5;
  std::size_t batch = 32;
  std::size_t stride = 1;
  double lr = 1e-4;
  double policy_lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double lambda_s = 0.01;
  double tau_start = 1.0;
  double tau_decay = 0.9;
  double tau_min = 0.1;
  double val_fraction = 0.1;
  bool learn_graph = true;  // false: complete graph throughout (ablation)

  void validate() const {
    if (epochs == 0 || batch == 0 || stride == 0) throw UsageError("epochs, batch and stride must be positive");
    if (!(lr > 0.0) || !(policy_lr > 0.0)) throw UsageError("learning rates must be positive");
    if (lambda_s < 0.0) throw UsageError("lambda_s must be non-negative");
    if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw UsageError("val_fraction must lie in (0, 1)");
    if (!(tau_start > 0.0 && tau_min > 0.0 && tau_decay > 0.0)) throw UsageError("temperature schedule must be positive");
  }
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_mse = 0.0;
  double val_mse = 0.0;
  double sparsity = 0.0;  // L_s at the end of the epoch
  double tau = 0.0;
  std::size_t edges = 0;  // π₁ > 0.5
  double lr = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_val_mse = std::numeric_limits<double>::infinity();
  double threshold = 0.0;  // max validation score at the restored weights
  bool early_stopped = false;
};

/// Adjacency used for validation and detection.
inline graph::AdjacencySample evaluation_graph(const GtaModel& model, bool graph_active) {
  return graph_active ? graph::extract_adjacency(model.policy) : graph::complete_adjacency(model.cfg.nodes);
}

/// Per-window anomaly scores Σ_i (y_i − ŷ_i)² without gradient tracking.
inline std::vector<double> score_windows(const GtaModel& model, const std::vector<data::WindowSample>& windows,
                                         const graph::AdjacencySample& adj) {
  NoGradGuard guard;
  std::vector<double> scores;
  scores.reserve(windows.size());
  for (const auto& w : windows) {
    Tensor pred = model.predict(w, adj);
    scores.push_back(detector::anomaly_score(pred.data(), w.target.data()));
  }
  return scores;
}

inline TrainResult train_model(GtaModel& model, const data::RawSeries& train_norm, const TrainConfig& tc,
                               Generator& gen, const std::function<void(const EpochRecord&)>& on_epoch = {}) {
  tc.validate();
  const auto& mc = model.cfg;
  if (train_norm.num_sensors() != mc.nodes) throw DataError("training data sensor count differs from the model");
  auto windows = data::make_windows(train_norm, {mc.window, mc.label_len, tc.stride});
  if (windows.size() < 2) throw DataError("need at least two training windows to hold out validation");
  const std::size_t n_val =
      std::clamp<std::size_t>(static_cast<std::size_t>(tc.val_fraction * double(windows.size()) + 0.5), 1,
                              windows.size() - 1);
  const std::vector<data::WindowSample> val(windows.end() - static_cast<std::ptrdiff_t>(n_val), windows.end());
  windows.resize(windows.size() - n_val);

  Adam net(model.network_tensors(), {tc.lr, tc.beta1, tc.beta2});
  Adam pol({model.policy.logits}, {tc.policy_lr, tc.beta1, tc.beta2});
  Generator shuffle_gen = gen.split();
  Generator graph_gen = gen.split();
  Generator drop_gen = gen.split();
  const forecaster::DropoutCtx drop{mc.dropout, &drop_gen};

  TrainResult result;
  GtaModel best = model.clone();
  std::size_t stale = 0;
  double best_threshold = 0.0;
  std::vector<std::size_t> order(windows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 0; epoch < tc.epochs; ++epoch) {
    const bool graph_active = tc.learn_graph && epoch >= tc.warmup;
    const double tau = graph_active ? graph::temperature_for_epoch(epoch - tc.warmup, tc.tau_start, tc.tau_decay,
                                                                   tc.tau_min)
                                    : tc.tau_start;
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_gen.below(i)]);

    double mse_total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += tc.batch) {
      const std::size_t stop = std::min(order.size(), start + tc.batch);
      const auto adj = graph_active
                           ? graph::hard_sample(graph::gumbel_softmax_sample(model.policy, tau, graph_gen))
                           : graph::complete_adjacency(mc.nodes);
      Tensor loss = Tensor::scalar(0.0);
      for (std::size_t k = start; k < stop; ++k) {
        const auto& w = windows[order[k]];
        loss = add(loss, detector::mse_loss(model.predict(w, adj, drop), w.target));
      }
      mse_total += loss.item();
      if (graph_active && tc.lambda_s > 0.0) loss = add(loss, scale(graph::sparsity_loss(model.policy), tc.lambda_s));
      if (!std::isfinite(loss.item())) {
        GradTape::current().clear();
        throw NumericError("loss became non-finite at epoch " + std::to_string(epoch + 1) +
                           " (lower lr or check the input scaling)");
      }
      backward(loss);
      net.step();
      if (graph_active) pol.step();
      net.zero_grad();
      pol.zero_grad();
    }

    const auto eval_adj = evaluation_graph(model, graph_active);
    const auto val_scores = score_windows(model, val, eval_adj);
    double val_mse = 0.0;
    for (double s : val_scores) val_mse += s / double(mc.nodes);
    val_mse /= double(val_scores.size());
    if (!std::isfinite(val_mse)) throw NumericError("validation loss became non-finite");

    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.train_mse = mse_total / double(windows.size());
    rec.val_mse = val_mse;
    {
      NoGradGuard guard;
      rec.sparsity = graph::sparsity_loss(model.policy).item();
    }
    rec.tau = tau;
    rec.edges = graph::extract_adjacency(model.policy).edge_count();
    rec.lr = tc.lr;
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);

    result.threshold = *std::max_element(val_scores.begin(), val_scores.end());
    // Model selection starts once the graph is being learned, so the restored
    // weights always come with a trained policy.
    if (tc.learn_graph && !graph_active) continue;
    if (val_mse < result.best_val_mse) {
      result.best_val_mse = val_mse;
      result.best_epoch = rec.epoch;
      best_threshold = result.threshold;
      best.copy_values_from(model);
      stale = 0;
    } else if (++stale >= tc.patience) {
      result.early_stopped = true;
      break;
    }
  }
  if (result.best_epoch > 0) {
    model.copy_values_from(best);
    result.threshold = best_threshold;
  }
  return result;
}

}  // namespace gta::model
