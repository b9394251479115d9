#pragma once

// Full detector network: connection policy → hierarchical encoder with IPConv →
// encoder-decoder forecaster. Holds every trainable tensor and knows how to
// round-trip itself through a GTA1 checkpoint.

#include <optional>
#include <string>
#include <vector>

#include "gta/data/series.hpp"
#include "gta/encoder/temporal_encoder.hpp"
#include "gta/forecaster/transformer.hpp"
#include "gta/graph/policy.hpp"
#include "gta/numerics/checkpoint.hpp"

namespace gta::model {

struct ModelConfig {
  std::size_t nodes = 0;
  std::size_t window = 60;
  std::size_t label_len = 30;
  std::size_t levels = 3;
  std::size_t kernel = 2;
  std::size_t base_channels = 32;
  std::size_t d_model = 128;
  std::size_t heads = 8;
  std::size_t m = 128;
  std::size_t encoder_layers = 3;
  std::size_t decoder_layers = 2;
  std::size_t d_ff = 128;
  double dropout = 0.05;
  bool branch_mixing = true;  // false: plain multi-head self-attention everywhere
  double p_init = graph::kInitEdgeProbability;

  encoder::EncoderConfig encoder_config() const { return {levels, kernel, base_channels, d_model}; }

  forecaster::BranchConfig branch_config() const {
    return branch_mixing ? forecaster::BranchConfig::three_way(d_model, heads) : forecaster::BranchConfig{d_model, 0, 0};
  }

  forecaster::ForecasterConfig forecaster_config() const {
    return {nodes, d_model, heads, m, label_len, branch_config(), {encoder_layers, decoder_layers, d_ff, dropout}};
  }

  void validate() const {
    if (nodes < 2) throw UsageError("the model needs at least 2 sensors (graph learning needs M >= 2)");
    if (label_len == 0 || label_len >= window) throw UsageError("label_len must lie in [1, window)");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw UsageError("dropout must lie in [0, 1)");
    try {
      encoder_config().validate();
      const std::size_t context = encoder_config().output_length(window);
      if (context > m) throw UsageError("encoder output length " + std::to_string(context) + " exceeds m");
      forecaster_config().validate();
    } catch (const std::invalid_argument& e) {
      throw UsageError(std::string("invalid model config: ") + e.what());
    }
  }

  /// Integer architecture fields as stored in checkpoints, in a fixed order.
  std::vector<std::pair<std::string, double>> hparams() const {
    return {{"nodes", double(nodes)},
            {"window", double(window)},
            {"label_len", double(label_len)},
            {"levels", double(levels)},
            {"kernel", double(kernel)},
            {"base_channels", double(base_channels)},
            {"d_model", double(d_model)},
            {"heads", double(heads)},
            {"m", double(m)},
            {"encoder_layers", double(encoder_layers)},
            {"decoder_layers", double(decoder_layers)},
            {"d_ff", double(d_ff)},
            {"dropout", dropout},
            {"branch_mixing", branch_mixing ? 1.0 : 0.0}};
  }

  static ModelConfig from_hparams(const TensorList& tensors) {
    ModelConfig c;
    auto get = [&tensors](const std::string& key) {
      const Tensor* t = find_tensor(tensors, "hparam." + key);
      if (!t || t->numel() != 1) throw DataError("checkpoint lacks hyperparameter '" + key + "'");
      return (*t)[0];
    };
    auto count = [&get](const std::string& key) { return static_cast<std::size_t>(get(key)); };
    c.nodes = count("nodes");
    c.window = count("window");
    c.label_len = count("label_len");
    c.levels = count("levels");
    c.kernel = count("kernel");
    c.base_channels = count("base_channels");
    c.d_model = count("d_model");
    c.heads = count("heads");
    c.m = count("m");
    c.encoder_layers = count("encoder_layers");
    c.decoder_layers = count("decoder_layers");
    c.d_ff = count("d_ff");
    c.dropout = get("dropout");
    c.branch_mixing = get("branch_mixing") != 0.0;
    return c;
  }
};

/// Name of the first architecture field on which two configs disagree, if any.
inline std::optional<std::string> architecture_mismatch(const ModelConfig& a, const ModelConfig& b) {
  const auto ha = a.hparams(), hb = b.hparams();
  for (std::size_t k = 0; k < ha.size(); ++k) {
    if (ha[k].first == "dropout") continue;  // inference-irrelevant
    if (ha[k].second != hb[k].second) return ha[k].first;
  }
  return std::nullopt;
}

struct GtaModel {
  ModelConfig cfg;
  graph::ConnectionLogits policy;
  encoder::EncoderWeights enc;
  forecaster::ForecasterWeights fc;

  static GtaModel init(const ModelConfig& cfg, Generator& gen) {
    cfg.validate();
    GtaModel model;
    model.cfg = cfg;
    model.policy = graph::init_complete_graph(cfg.nodes, cfg.p_init);
    Generator enc_gen = gen.split();
    Generator fc_gen = gen.split();
    model.enc = encoder::EncoderWeights::init(cfg.encoder_config(), cfg.window, enc_gen);
    model.fc = forecaster::ForecasterWeights::init(cfg.forecaster_config(), fc_gen);
    return model;
  }

  /// Encoder and forecaster weights, excluding the connection logits.
  TensorList network_parameters() const {
    TensorList out;
    const auto ep = enc.parameters();
    for (std::size_t i = 0; i < ep.size(); ++i) out.emplace_back("enc." + std::to_string(i), ep[i]);
    for (auto& p : fc.named_parameters()) out.push_back(std::move(p));
    return out;
  }

  TensorList named_parameters() const {
    TensorList out{{"policy.logits", policy.logits}};
    for (auto& p : network_parameters()) out.push_back(std::move(p));
    return out;
  }

  std::vector<Tensor> network_tensors() const {
    std::vector<Tensor> out;
    for (auto& [name, t] : network_parameters()) out.push_back(t);
    return out;
  }

  /// One-step forecast [M] for a window sample under adjacency `adj`.
  Tensor predict(const data::WindowSample& sample, const graph::AdjacencySample& adj,
                 const forecaster::DropoutCtx& drop = {}) const {
    auto ctx = encoder::encode_window(sample.encoder_input, cfg.encoder_config(), adj, enc);
    return forecaster::forecast(encoder::positional_encode(ctx), sample.decoder_labels, cfg.forecaster_config(), fc,
                                drop);
  }

  /// Copies values of every named parameter from `other` (same architecture).
  void copy_values_from(const GtaModel& other) {
    auto dst = named_parameters();
    auto src = other.named_parameters();
    for (std::size_t i = 0; i < dst.size(); ++i) {
      auto d = dst[i].second.mutable_data();
      auto s = src[i].second.data();
      std::copy(s.begin(), s.end(), d.begin());
    }
  }

  /// Deep copy with fresh storage.
  GtaModel clone() const {
    Generator scratch(0);
    GtaModel copy = init(cfg, scratch);
    copy.copy_values_from(*this);
    return copy;
  }
};

/// Everything `detect` needs besides the weights.
struct CheckpointExtras {
  data::NormalizerStats stats;
  double threshold = 0.0;
};

inline TensorList to_tensor_list(const GtaModel& model, const CheckpointExtras& extras) {
  TensorList out;
  for (const auto& [key, v] : model.cfg.hparams()) out.emplace_back("hparam." + key, Tensor::scalar(v));
  out.emplace_back("norm.min", Tensor::vector(extras.stats.min));
  out.emplace_back("norm.max", Tensor::vector(extras.stats.max));
  out.emplace_back("detect.threshold", Tensor::scalar(extras.threshold));
  for (auto& p : model.named_parameters()) out.push_back(std::move(p));
  return out;
}

inline void save_model(const std::string& path, const GtaModel& model, const CheckpointExtras& extras) {
  save_checkpoint(path, to_tensor_list(model, extras));
}

struct LoadedModel {
  GtaModel model;
  CheckpointExtras extras;
};

/// Rebuilds the model from a checkpoint. With `expected`, any architecture
/// disagreement is reported as a DataError naming the field.
inline LoadedModel load_model(const std::string& path, const std::optional<ModelConfig>& expected = std::nullopt) {
  const TensorList tensors = load_checkpoint(path);
  ModelConfig cfg = ModelConfig::from_hparams(tensors);
  if (expected) {
    if (auto field = architecture_mismatch(cfg, *expected)) {
      throw DataError("checkpoint architecture differs from config in '" + *field + "'");
    }
    cfg.p_init = expected->p_init;
  }
  try {
    cfg.validate();
  } catch (const UsageError& e) {
    throw DataError(std::string("checkpoint holds an invalid architecture: ") + e.what());
  }
  Generator scratch(0);
  LoadedModel out{GtaModel::init(cfg, scratch), {}};
  for (auto& [name, param] : out.model.named_parameters()) {
    const Tensor* t = find_tensor(tensors, name);
    if (!t) throw DataError("checkpoint lacks tensor '" + name + "'");
    if (t->shape() != param.shape()) {
      throw DataError("checkpoint tensor '" + name + "' has shape " + shape_str(t->shape()) + ", expected " +
                      shape_str(param.shape()));
    }
    auto dst = param.mutable_data();
    std::copy(t->data().begin(), t->data().end(), dst.begin());
  }
  const Tensor* mn = find_tensor(tensors, "norm.min");
  const Tensor* mx = find_tensor(tensors, "norm.max");
  const Tensor* th = find_tensor(tensors, "detect.threshold");
  if (!mn || !mx || !th) throw DataError("checkpoint lacks normalizer statistics or threshold");
  if (mn->numel() != cfg.nodes || mx->numel() != cfg.nodes) throw DataError("normalizer size differs from sensor count");
  out.extras.stats.min.assign(mn->data().begin(), mn->data().end());
  out.extras.stats.max.assign(mx->data().begin(), mx->data().end());
  out.extras.threshold = (*th)[0];
  return out;
}

}  // namespace gta::model
