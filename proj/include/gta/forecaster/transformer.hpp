#pragma once

// Encoder-decoder forecaster. Pre-LN residual blocks; self-attention is the
// branch-wise mix (dot-product | global-learned | local conv), decoder
// cross-attention is plain multi-head over the encoder memory. The decoder
// reads the last label_len observed steps plus one zero-padded target slot and
// the prediction is read off that final slot.

#include <string>
#include <vector>

#include "gta/encoder/temporal_encoder.hpp"
#include "gta/forecaster/attention.hpp"
#include "gta/numerics/ops.hpp"

namespace gta::forecaster {

struct StackConfig {
  std::size_t encoder_layers = 3;
  std::size_t decoder_layers = 2;
  std::size_t d_ff = 128;
  double dropout = 0.05;
};

struct ForecasterConfig {
  std::size_t nodes = 0;
  std::size_t d_model = 128;
  std::size_t heads = 8;
  std::size_t m = 128;
  std::size_t label_len = 30;
  BranchConfig branches;
  StackConfig stack;

  void validate() const {
    if (nodes == 0 || d_model == 0 || heads == 0 || m == 0 || label_len == 0) {
      throw std::invalid_argument("forecaster config values must be positive");
    }
    if (stack.encoder_layers == 0 || stack.decoder_layers == 0 || stack.d_ff == 0) {
      throw std::invalid_argument("stack config values must be positive");
    }
    if (label_len + 1 > m) throw std::invalid_argument("decoder length exceeds global alignment size m");
    branches.validate(d_model);
  }
};

struct LayerNormParams {
  Tensor gain, bias;

  static LayerNormParams init(std::size_t d) {
    return {Tensor::full({d}, 1.0, true), Tensor::zeros({d}, true)};
  }
  Tensor operator()(const Tensor& x) const { return layer_norm(x, gain, bias); }
  std::vector<Tensor> parameters() const { return {gain, bias}; }
};

struct FeedForward {
  Tensor w1, b1, w2, b2;

  static FeedForward init(std::size_t d, std::size_t d_ff, Generator& gen) {
    return {detail::uniform_param({d, d_ff}, d, gen), detail::uniform_param({d_ff}, d, gen),
            detail::uniform_param({d_ff, d}, d_ff, gen), detail::uniform_param({d}, d_ff, gen)};
  }
  Tensor operator()(const Tensor& x, const DropoutCtx& drop) const {
    return drop(add_bias(matmul(relu(add_bias(matmul(x, w1), b1)), w2), b2));
  }
  std::vector<Tensor> parameters() const { return {w1, b1, w2, b2}; }
};

struct EncoderLayer {
  LayerNormParams ln1, ln2;
  BranchParams attn;
  FeedForward ff;
};

struct DecoderLayer {
  LayerNormParams ln1, ln2, ln3;
  BranchParams self_attn;
  AttentionParams cross;
  FeedForward ff;
};

struct ForecasterWeights {
  Tensor fuse_w, fuse_b;      // [M·d × d], [d]: sensor-major context → one token per step
  Tensor dec_in_w, dec_in_b;  // [M × d], [d]
  std::vector<EncoderLayer> encoder;
  std::vector<DecoderLayer> decoder;
  LayerNormParams enc_norm, dec_norm;
  Tensor head_w, head_b;  // [d × M], [M]

  static ForecasterWeights init(const ForecasterConfig& cfg, Generator& gen) {
    cfg.validate();
    const std::size_t d = cfg.d_model, mm = cfg.nodes;
    ForecasterWeights w;
    w.fuse_w = detail::uniform_param({mm * d, d}, mm * d, gen);
    w.fuse_b = detail::uniform_param({d}, mm * d, gen);
    w.dec_in_w = detail::uniform_param({mm, d}, mm, gen);
    w.dec_in_b = detail::uniform_param({d}, mm, gen);
    for (std::size_t l = 0; l < cfg.stack.encoder_layers; ++l) {
      w.encoder.push_back({LayerNormParams::init(d), LayerNormParams::init(d),
                           BranchParams::init(cfg.branches, cfg.heads, cfg.m, gen),
                           FeedForward::init(d, cfg.stack.d_ff, gen)});
    }
    for (std::size_t l = 0; l < cfg.stack.decoder_layers; ++l) {
      DecoderLayer layer{LayerNormParams::init(d), LayerNormParams::init(d), LayerNormParams::init(d),
                         BranchParams::init(cfg.branches, cfg.heads, cfg.m, gen),
                         AttentionParams::init(d, cfg.heads, gen), FeedForward::init(d, cfg.stack.d_ff, gen)};
      w.decoder.push_back(std::move(layer));
    }
    w.enc_norm = LayerNormParams::init(d);
    w.dec_norm = LayerNormParams::init(d);
    w.head_w = detail::uniform_param({d, mm}, d, gen);
    w.head_b = detail::uniform_param({mm}, d, gen);
    return w;
  }

  /// Named parameters in a fixed order (used for checkpoints and the optimizer).
  std::vector<std::pair<std::string, Tensor>> named_parameters() const {
    std::vector<std::pair<std::string, Tensor>> out;
    auto put = [&out](const std::string& prefix, const std::vector<Tensor>& ts) {
      for (std::size_t i = 0; i < ts.size(); ++i) out.emplace_back(prefix + "." + std::to_string(i), ts[i]);
    };
    put("fc.fuse", {fuse_w, fuse_b});
    put("fc.dec_in", {dec_in_w, dec_in_b});
    for (std::size_t l = 0; l < encoder.size(); ++l) {
      const auto p = "fc.enc" + std::to_string(l);
      put(p + ".ln1", encoder[l].ln1.parameters());
      put(p + ".attn", encoder[l].attn.parameters());
      put(p + ".ln2", encoder[l].ln2.parameters());
      put(p + ".ff", encoder[l].ff.parameters());
    }
    for (std::size_t l = 0; l < decoder.size(); ++l) {
      const auto p = "fc.dec" + std::to_string(l);
      put(p + ".ln1", decoder[l].ln1.parameters());
      put(p + ".self", decoder[l].self_attn.parameters());
      put(p + ".ln2", decoder[l].ln2.parameters());
      put(p + ".cross", decoder[l].cross.parameters());
      put(p + ".ln3", decoder[l].ln3.parameters());
      put(p + ".ff", decoder[l].ff.parameters());
    }
    put("fc.enc_norm", enc_norm.parameters());
    put("fc.dec_norm", dec_norm.parameters());
    put("fc.head", {head_w, head_b});
    return out;
  }
};

inline Tensor encoder_layer(const Tensor& x, const EncoderLayer& layer, const DropoutCtx& drop) {
  Tensor h = add(x, drop(branch_mix(layer.ln1(x), layer.attn, false, drop)));
  return add(h, layer.ff(layer.ln2(h), drop));
}

inline Tensor decoder_layer(const Tensor& y, const Tensor& memory, const DecoderLayer& layer,
                            const DropoutCtx& drop) {
  Tensor h = add(y, drop(branch_mix(layer.ln1(y), layer.self_attn, true, drop)));
  h = add(h, drop(multi_head(layer.ln2(h), memory, layer.cross, false, drop)));
  return add(h, layer.ff(layer.ln3(h), drop));
}

/// Encoder memory [T′ × d] from a (position-encoded) context embedding.
inline Tensor encode_memory(const encoder::ContextEmbedding& ctx, const ForecasterWeights& w,
                            const DropoutCtx& drop = {}) {
  if (ctx.values.dim(1) != w.fuse_w.dim(0)) throw ShapeError("context embedding width does not match fusion map");
  Tensor x = add_bias(matmul(ctx.values, w.fuse_w), w.fuse_b);
  for (const auto& layer : w.encoder) x = encoder_layer(x, layer, drop);
  return w.enc_norm(x);
}

/// Full decoder output [(L+1) × d] for a raw label sequence [(L+1) × M].
inline Tensor decode(const Tensor& labels, const Tensor& memory, const ForecasterWeights& w,
                     const DropoutCtx& drop = {}) {
  Tensor y = encoder::positional_encode(add_bias(matmul(labels, w.dec_in_w), w.dec_in_b));
  for (const auto& layer : w.decoder) y = decoder_layer(y, memory, layer, drop);
  return w.dec_norm(y);
}

/// Single-step forecast for all M sensors, read from the zero-padded final slot.
inline Tensor forecast(const encoder::ContextEmbedding& ctx, const Tensor& labels, const ForecasterConfig& cfg,
                       const ForecasterWeights& w, const DropoutCtx& drop = {}) {
  gta::detail::require_rank(labels, 2, "forecast");
  if (labels.dim(0) != cfg.label_len + 1 || labels.dim(1) != cfg.nodes) {
    throw ShapeError("forecast: decoder labels must be [" + std::to_string(cfg.label_len + 1) + " x " +
                     std::to_string(cfg.nodes) + "], got " + shape_str(labels.shape()));
  }
  if (ctx.length > cfg.m) throw ShapeError("forecast: context length exceeds m");
  Tensor memory = encode_memory(ctx, w, drop);
  Tensor y = decode(labels, memory, w, drop);
  Tensor last = slice(y, 0, cfg.label_len, cfg.label_len + 1);
  return reshape(add_bias(matmul(last, w.head_w), w.head_b), {cfg.nodes});
}

}  // namespace gta::forecaster
