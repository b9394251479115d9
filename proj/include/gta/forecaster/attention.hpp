#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "gta/numerics/ops.hpp"
#include "gta/random.hpp"

namespace gta::forecaster {

/// Dropout applied inside attention and feed-forward blocks. Inactive unless a
/// generator is attached and p > 0.
struct DropoutCtx {
  double p = 0.0;
  Generator* gen = nullptr;

  bool active() const { return gen != nullptr && p > 0.0; }
  Tensor operator()(const Tensor& x) const { return active() ? dropout(x, p, *gen, true) : x; }
};

namespace detail {

inline Tensor uniform_param(Shape shape, std::size_t fan_in, Generator& gen) {
  const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = gen.uniform(-bound, bound);
  return Tensor::from(std::move(shape), std::move(v), true);
}

}  // namespace detail

/// Softmax(Q·Kᵀ/√d_k)·V. With `causal`, query i sees keys up to i + (n_k − n_q).
inline Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v, bool causal = false,
                                   const DropoutCtx& drop = {}) {
  gta::detail::require_rank(q, 2, "scaled_dot_attention");
  gta::detail::require_rank(k, 2, "scaled_dot_attention");
  gta::detail::require_rank(v, 2, "scaled_dot_attention");
  if (q.dim(1) != k.dim(1)) throw ShapeError("scaled_dot_attention: Q and K widths differ");
  if (k.dim(0) != v.dim(0)) throw ShapeError("scaled_dot_attention: K and V lengths differ");
  const double inv = 1.0 / std::sqrt(static_cast<double>(q.dim(1)));
  Tensor scores = scale(matmul_nt(q, k), inv);
  const auto offset = static_cast<std::ptrdiff_t>(k.dim(0)) - static_cast<std::ptrdiff_t>(q.dim(0));
  Tensor weights = causal ? causal_softmax(scores, offset) : softmax(scores, 1);
  return matmul(drop(weights), v);
}

/// Multi-head projections for a branch of width d: W^Q, W^K, W^V pack the h
/// per-head d×d_k blocks column-wise; W^O maps h·d_v → d. No biases.
struct AttentionParams {
  std::size_t width = 0;
  std::size_t heads = 1;
  Tensor wq, wk, wv, wo;

  static AttentionParams init(std::size_t width, std::size_t heads, Generator& gen) {
    if (heads == 0 || width % heads != 0) {
      throw std::invalid_argument("head count " + std::to_string(heads) + " does not divide width " +
                                  std::to_string(width));
    }
    AttentionParams p;
    p.width = width;
    p.heads = heads;
    p.wq = detail::uniform_param({width, width}, width, gen);
    p.wk = detail::uniform_param({width, width}, width, gen);
    p.wv = detail::uniform_param({width, width}, width, gen);
    p.wo = detail::uniform_param({width, width}, width, gen);
    return p;
  }

  std::size_t head_width() const { return width / heads; }
  std::vector<Tensor> parameters() const { return {wq, wk, wv, wo}; }
};

/// Concat(head_1 … head_h)·W^O, head_i = Attention(X_q W_i^Q, X_kv W_i^K, X_kv W_i^V).
inline Tensor multi_head(const Tensor& x_q, const Tensor& x_kv, const AttentionParams& p, bool causal = false,
                         const DropoutCtx& drop = {}) {
  if (p.heads == 0 || p.width % p.heads != 0) throw std::invalid_argument("multi_head: heads must divide width");
  if (x_q.dim(1) != p.width || x_kv.dim(1) != p.width) {
    throw ShapeError("multi_head: input width does not match branch width " + std::to_string(p.width));
  }
  Tensor q = matmul(x_q, p.wq);
  Tensor k = matmul(x_kv, p.wk);
  Tensor v = matmul(x_kv, p.wv);
  if (p.heads == 1) return matmul(scaled_dot_attention(q, k, v, causal, drop), p.wo);
  const std::size_t dk = p.head_width();
  std::vector<Tensor> heads;
  heads.reserve(p.heads);
  for (std::size_t h = 0; h < p.heads; ++h) {
    heads.push_back(scaled_dot_attention(slice(q, 1, h * dk, (h + 1) * dk), slice(k, 1, h * dk, (h + 1) * dk),
                                         slice(v, 1, h * dk, (h + 1) * dk), causal, drop));
  }
  return matmul(concat(heads, 1), p.wo);
}

inline Tensor multi_head(const Tensor& x, const AttentionParams& p, bool causal = false, const DropoutCtx& drop = {}) {
  return multi_head(x, x, p, causal, drop);
}

/// Input-independent alignment: one learnable S ∈ R^{m×m} per head; only values
/// are projected from the input.
struct GlobalAttentionParams {
  std::size_t width = 0;
  std::size_t heads = 1;
  std::size_t m = 0;
  Tensor s;  // [heads × m × m]
  Tensor wv, wo;

  static GlobalAttentionParams init(std::size_t width, std::size_t heads, std::size_t m, Generator& gen) {
    if (heads == 0 || width % heads != 0) {
      throw std::invalid_argument("head count " + std::to_string(heads) + " does not divide width " +
                                  std::to_string(width));
    }
    if (m == 0) throw std::invalid_argument("global attention needs m > 0");
    GlobalAttentionParams p;
    p.width = width;
    p.heads = heads;
    p.m = m;
    std::vector<double> s(heads * m * m);
    for (double& x : s) x = gen.normal(0.0, 0.02);
    p.s = Tensor::from({heads, m, m}, std::move(s), true);
    p.wv = detail::uniform_param({width, width}, width, gen);
    p.wo = detail::uniform_param({width, width}, width, gen);
    return p;
  }

  std::vector<Tensor> parameters() const { return {s, wv, wo}; }
};

/// Row-stochastic weights Softmax(S[:n,:n]) for head h; independent of any input.
inline Tensor global_weights(const GlobalAttentionParams& p, std::size_t head, std::size_t n, bool causal = false) {
  if (n > p.m) {
    throw ShapeError("global attention: sequence length " + std::to_string(n) + " exceeds m = " + std::to_string(p.m));
  }
  Tensor sh = reshape(slice(p.s, 0, head, head + 1), {p.m, p.m});
  Tensor block = n == p.m ? sh : slice(slice(sh, 0, 0, n), 1, 0, n);
  return causal ? causal_softmax(block) : softmax(block, 1);
}

inline Tensor global_attention(const Tensor& x, const GlobalAttentionParams& p, bool causal = false,
                               const DropoutCtx& drop = {}) {
  gta::detail::require_rank(x, 2, "global_attention");
  if (x.dim(1) != p.width) throw ShapeError("global_attention: input width does not match branch width");
  const std::size_t n = x.dim(0);
  if (n > p.m) {
    throw ShapeError("global attention: sequence length " + std::to_string(n) + " exceeds m = " + std::to_string(p.m));
  }
  Tensor v = matmul(x, p.wv);
  const std::size_t dv = p.width / p.heads;
  std::vector<Tensor> heads;
  heads.reserve(p.heads);
  for (std::size_t h = 0; h < p.heads; ++h) {
    Tensor vh = p.heads == 1 ? v : slice(v, 1, h * dv, (h + 1) * dv);
    heads.push_back(matmul(drop(global_weights(p, h, n, causal)), vh));
  }
  return matmul(p.heads == 1 ? heads.front() : concat(heads, 1), p.wo);
}

/// lightConv-style local branch: one softmax-normalized width-3 kernel shared
/// by all channels and positions.
struct LocalConvParams {
  Tensor kernel_logits;  // [3]

  static LocalConvParams init(Generator& gen, std::size_t width = 3) {
    std::vector<double> k(width);
    for (double& x : k) x = gen.normal(0.0, 0.02);
    return {Tensor::from({width}, std::move(k), true)};
  }

  std::vector<Tensor> parameters() const { return {kernel_logits}; }
};

inline Tensor local_conv_branch(const Tensor& x, const LocalConvParams& p, bool causal = false) {
  return shared_depthwise_conv(x, softmax(p.kernel_logits, 0), causal);
}

/// Embedding split for branch-wise mixing: dot-product | global | local conv.
struct BranchConfig {
  std::size_t d1 = 0;  // multi-head dot-product branch
  std::size_t d2 = 0;  // global-learned branch
  std::size_t dc = 0;  // local convolution branch

  std::size_t width() const { return d1 + d2 + dc; }

  /// Three-way split: d2 = dc = the largest multiple of h not above d/3, the
  /// remainder goes to d1, so h divides every attention branch.
  static BranchConfig three_way(std::size_t d, std::size_t h) {
    if (h == 0 || d % h != 0) throw std::invalid_argument("heads must divide the model width");
    const std::size_t side = (d / 3) / h * h;
    return {d - 2 * side, side, side};
  }

  void validate(std::size_t d) const {
    if (width() != d) throw ShapeError("branch widths do not sum to model width");
    if (d1 == 0) throw std::invalid_argument("dot-product branch width must be positive");
  }
};

struct BranchParams {
  BranchConfig cfg;
  AttentionParams dot;
  GlobalAttentionParams global;
  LocalConvParams local;

  static BranchParams init(const BranchConfig& cfg, std::size_t heads, std::size_t m, Generator& gen) {
    BranchParams p;
    p.cfg = cfg;
    p.dot = AttentionParams::init(cfg.d1, heads, gen);
    if (cfg.d2 > 0) p.global = GlobalAttentionParams::init(cfg.d2, heads, m, gen);
    if (cfg.dc > 0) p.local = LocalConvParams::init(gen);
    return p;
  }

  std::vector<Tensor> parameters() const {
    std::vector<Tensor> out = dot.parameters();
    if (cfg.d2 > 0)
      for (auto& t : global.parameters()) out.push_back(t);
    if (cfg.dc > 0)
      for (auto& t : local.parameters()) out.push_back(t);
    return out;
  }
};

/// Splits X column-wise into (X¹, X², Xᶜ), runs multi-head, global-learned and
/// local-conv attention on the parts and concatenates the results.
inline Tensor branch_mix(const Tensor& x, const BranchParams& p, bool causal = false, const DropoutCtx& drop = {}) {
  gta::detail::require_rank(x, 2, "branch_mix");
  const auto& c = p.cfg;
  if (x.dim(1) != c.width()) {
    throw ShapeError("branch_mix: input width " + std::to_string(x.dim(1)) + " != d1+d2+dc = " +
                     std::to_string(c.width()));
  }
  if (c.d2 == 0 && c.dc == 0) return multi_head(x, p.dot, causal, drop);
  std::vector<Tensor> parts;
  parts.push_back(multi_head(slice(x, 1, 0, c.d1), p.dot, causal, drop));
  if (c.d2 > 0) parts.push_back(global_attention(slice(x, 1, c.d1, c.d1 + c.d2), p.global, causal, drop));
  if (c.dc > 0) parts.push_back(local_conv_branch(slice(x, 1, c.d1 + c.d2, c.width()), p.local, causal));
  return concat(parts, 1);
}

}  // namespace gta::forecaster
