#pragma once

// Hierarchical context encoding: l levels, each a width-2 dilated convolution
// (rate 2^(level-1)) shared across sensors, followed by an IPConv over the
// learned graph. No padding, so every level shortens the sequence.

#include <cmath>
#include <string>
#include <vector>

#include "gta/graph/ip_conv.hpp"
#include "gta/graph/policy.hpp"
#include "gta/numerics/ops.hpp"
#include "gta/random.hpp"

namespace gta::encoder {

struct EncoderConfig {
  std::size_t levels = 3;
  std::size_t kernel = 2;
  std::size_t base_channels = 32;  // level-1 width; doubles per level
  std::size_t d_model = 128;

  std::vector<std::size_t> dilations() const {
    std::vector<std::size_t> d;
    for (std::size_t k = 0; k < levels; ++k) d.push_back(std::size_t{1} << k);
    return d;
  }

  std::size_t channels(std::size_t level) const { return base_channels << level; }

  /// Input steps seen by one output step.
  std::size_t receptive_field() const {
    std::size_t rf = 1;
    for (std::size_t d : dilations()) rf += (kernel - 1) * d;
    return rf;
  }

  std::size_t output_length(std::size_t n) const {
    if (n < receptive_field()) {
      throw ShapeError("window of " + std::to_string(n) + " steps is shorter than the receptive field " +
                       std::to_string(receptive_field()));
    }
    return n - (receptive_field() - 1);
  }

  void validate() const {
    if (levels == 0 || kernel == 0 || base_channels == 0 || d_model == 0) {
      throw std::invalid_argument("encoder config values must be positive");
    }
  }
};

struct LevelWeights {
  Tensor conv_weight;  // [C_out × C_in × K]
  Tensor conv_bias;    // [C_out]
  graph::MessageMLP mlp;
};

struct EncoderWeights {
  std::vector<LevelWeights> levels;
  Tensor proj_weight;  // [C_last × d_model]
  Tensor proj_bias;    // [d_model]

  static EncoderWeights init(const EncoderConfig& cfg, std::size_t window, Generator& gen) {
    cfg.validate();
    auto uniform = [&gen](Shape shape, std::size_t fan_in) {
      const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
      std::vector<double> v(shape_numel(shape));
      for (double& x : v) x = gen.uniform(-bound, bound);
      return Tensor::from(std::move(shape), std::move(v), true);
    };
    EncoderWeights w;
    std::size_t c_in = 1;
    std::size_t length = window;
    const auto dil = cfg.dilations();
    for (std::size_t k = 0; k < cfg.levels; ++k) {
      const std::size_t c_out = cfg.channels(k);
      length -= (cfg.kernel - 1) * dil[k];
      LevelWeights lw;
      lw.conv_weight = uniform({c_out, c_in, cfg.kernel}, c_in * cfg.kernel);
      lw.conv_bias = uniform({c_out}, c_in * cfg.kernel);
      lw.mlp = graph::MessageMLP::init(length, gen);
      w.levels.push_back(std::move(lw));
      c_in = c_out;
    }
    w.proj_weight = uniform({c_in, cfg.d_model}, c_in);
    w.proj_bias = uniform({cfg.d_model}, c_in);
    return w;
  }

  std::vector<Tensor> parameters() const {
    std::vector<Tensor> p;
    for (const auto& l : levels) {
      p.push_back(l.conv_weight);
      p.push_back(l.conv_bias);
      for (auto& t : l.mlp.parameters()) p.push_back(t);
    }
    p.push_back(proj_weight);
    p.push_back(proj_bias);
    return p;
  }
};

/// Per-sensor embeddings after all levels: logical shape M × T′ × d_model,
/// stored as [T′ × M·d_model] with node i occupying columns [i·d, (i+1)·d).
struct ContextEmbedding {
  Tensor values;
  std::size_t nodes = 0;
  std::size_t length = 0;
  std::size_t d_model = 0;

  Tensor node(std::size_t i) const { return slice(values, 1, i * d_model, (i + 1) * d_model); }
};

/// Levels only: returns the [M·C_last × T′] activations before projection.
inline Tensor encode_levels(const Tensor& window, const EncoderConfig& cfg, const graph::AdjacencySample& adj,
                            const EncoderWeights& weights) {
  detail::require_rank(window, 2, "encode_window");
  const std::size_t nodes = window.dim(0);
  cfg.output_length(window.dim(1));
  if (weights.levels.size() != cfg.levels) throw ShapeError("encoder weights do not match level count");
  if (adj.weights.dim(0) != nodes) throw ShapeError("adjacency dimension does not match sensor count");
  const auto dil = cfg.dilations();
  Tensor x = window;  // one input channel per node
  for (std::size_t k = 0; k < cfg.levels; ++k) {
    const auto& lw = weights.levels[k];
    Tensor y = conv1d_dilated(x, lw.conv_weight, lw.conv_bias, dil[k], nodes);
    // Residual around the graph step: with an empty graph the stack reduces
    // to independent per-sensor dilated convolutions.
    x = add(y, graph::ip_conv_channels(y, adj, lw.mlp, nodes));
  }
  return x;
}

inline ContextEmbedding encode_window(const Tensor& window, const EncoderConfig& cfg,
                                      const graph::AdjacencySample& adj, const EncoderWeights& weights) {
  Tensor x = encode_levels(window, cfg, adj, weights);
  const std::size_t nodes = window.dim(0);
  const std::size_t channels = x.dim(0) / nodes;
  const std::size_t length = x.dim(1);
  const std::size_t d_model = weights.proj_weight.dim(1);
  std::vector<Tensor> per_node;
  per_node.reserve(nodes);
  for (std::size_t i = 0; i < nodes; ++i) {
    Tensor xi = transpose(slice(x, 0, i * channels, (i + 1) * channels));  // [T′ × C]
    per_node.push_back(add_bias(matmul(xi, weights.proj_weight), weights.proj_bias));
  }
  return {concat(per_node, 1), nodes, length, d_model};
}

/// Sinusoidal table: PE(pos, 2i) = sin(pos / 10000^(2i/d)), PE(pos, 2i+1) = cos(same angle).
inline Tensor positional_table(std::size_t length, std::size_t d) {
  std::vector<double> pe(length * d);
  for (std::size_t pos = 0; pos < length; ++pos)
    for (std::size_t k = 0; k < d; ++k) {
      const double pair = static_cast<double>(k - (k % 2));
      const double angle = static_cast<double>(pos) / std::pow(10000.0, pair / static_cast<double>(d));
      pe[pos * d + k] = (k % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  return Tensor::matrix(length, d, std::move(pe));
}

/// Adds the sinusoidal table to a [T × d] sequence.
inline Tensor positional_encode(const Tensor& seq) {
  detail::require_rank(seq, 2, "positional_encode");
  return add(seq, positional_table(seq.dim(0), seq.dim(1)));
}

/// Adds the same time-axis signal to every sensor's embedding.
inline ContextEmbedding positional_encode(const ContextEmbedding& emb) {
  Tensor table = positional_table(emb.length, emb.d_model);
  std::vector<Tensor> tiles(emb.nodes, table);
  Tensor tiled = emb.nodes == 1 ? table : concat(tiles, 1);
  return {add(emb.values, tiled), emb.nodes, emb.length, emb.d_model};
}

}  // namespace gta::encoder
