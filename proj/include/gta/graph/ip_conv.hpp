#pragma once

// Influence Propagation convolution. For every edge j → i the message is
//   h_Θ(x_i ‖ (x_j − x_i) ‖ (x_i + x_j))
// and node i sums the messages of its in-neighbours, weighted by the
// adjacency entry a(j, i).

#include <cmath>
#include <vector>

#include "gta/graph/policy.hpp"
#include "gta/numerics/ops.hpp"
#include "gta/random.hpp"

namespace gta::graph {

/// Two-layer perceptron 3T → T → T with a rectifier in between.
/// Weights are stored input-major so that y = x·W + b for row vectors.
struct MessageMLP {
  std::size_t width = 0;  // T
  Tensor w1;              // [3T × T]
  Tensor b1;              // [T]
  Tensor w2;              // [T × T]
  Tensor b2;              // [T]

  static MessageMLP init(std::size_t width, Generator& gen) {
    auto uniform = [&gen](Shape shape, std::size_t fan_in) {
      const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
      std::vector<double> v(shape_numel(shape));
      for (double& x : v) x = gen.uniform(-bound, bound);
      return Tensor::from(std::move(shape), std::move(v), true);
    };
    MessageMLP mlp;
    mlp.width = width;
    mlp.w1 = uniform({3 * width, width}, 3 * width);
    mlp.b1 = uniform({width}, 3 * width);
    mlp.w2 = uniform({width, width}, width);
    mlp.b2 = uniform({width}, width);
    return mlp;
  }

  std::vector<Tensor> parameters() const { return {w1, b1, w2, b2}; }
};

/// The three-part message input (x_i ‖ x_j − x_i ‖ x_i + x_j), shape [3T].
inline Tensor ip_message_input(const Tensor& x_i, const Tensor& x_j) {
  if (x_i.numel() != x_j.numel()) throw ShapeError("ip_message: embedding lengths differ");
  const std::size_t t = x_i.numel();
  Tensor xi = reshape(x_i, {t});
  Tensor xj = reshape(x_j, {t});
  return concat({xi, sub(xj, xi), add(xi, xj)}, 0);
}

inline Tensor ip_message(const Tensor& x_i, const Tensor& x_j, const MessageMLP& mlp) {
  if (x_i.numel() != mlp.width) throw ShapeError("ip_message: embedding length does not match MLP width");
  const std::size_t t = mlp.width;
  Tensor z = reshape(ip_message_input(x_i, x_j), {1, 3 * t});
  Tensor hidden = relu(add_bias(matmul(z, mlp.w1), mlp.b1));
  return reshape(add_bias(matmul(hidden, mlp.w2), mlp.b2), {t});
}

/// Fused edge pass. With pre-projected node terms U (receiver) and V (sender),
/// both [M·C × H] node-major, returns G of shape [M·C × (H+1)]:
///   G[i·C+c, h] = Σ_j a(j,i) · relu(U[i·C+c, h] + V[j·C+c, h] + b1[h])
///   G[i·C+c, H] = Σ_j a(j,i)
/// The trailing column carries the weighted in-degree for the output bias.
inline Tensor edge_aggregate(const Tensor& u, const Tensor& v, const Tensor& b1, const Tensor& adj,
                             std::size_t nodes) {
  detail::require_rank(u, 2, "edge_aggregate");
  detail::require_same_shape(u, v, "edge_aggregate");
  detail::require_rank(adj, 2, "edge_aggregate");
  if (adj.dim(0) != nodes || adj.dim(1) != nodes) throw ShapeError("edge_aggregate: adjacency is not M×M");
  if (nodes == 0 || u.dim(0) % nodes != 0) throw ShapeError("edge_aggregate: rows not divisible by node count");
  const std::size_t channels = u.dim(0) / nodes;
  const std::size_t hidden = u.dim(1);
  if (b1.numel() != hidden) throw ShapeError("edge_aggregate: bias width mismatch");
  const std::size_t out_w = hidden + 1;
  std::vector<double> out(u.dim(0) * out_w, 0.0);
  const auto uv = u.data();
  const auto vv = v.data();
  const auto bv = b1.data();
  const auto av = adj.data();
  for (std::size_t i = 0; i < nodes; ++i)
    for (std::size_t j = 0; j < nodes; ++j) {
      const double a = av[j * nodes + i];
      if (a == 0.0) continue;
      for (std::size_t c = 0; c < channels; ++c) {
        const double* ur = uv.data() + (i * channels + c) * hidden;
        const double* vr = vv.data() + (j * channels + c) * hidden;
        double* g = out.data() + (i * channels + c) * out_w;
        for (std::size_t h = 0; h < hidden; ++h) {
          const double pre = ur[h] + vr[h] + bv[h];
          if (pre > 0.0) g[h] += a * pre;
        }
        g[hidden] += a;
      }
    }
  return detail::make_result(
      {u.dim(0), out_w}, std::move(out), {u, v, b1, adj},
      [nodes, channels, hidden, out_w](detail::Node& n) {
        auto& pu = n.parent(0);
        auto& pv = n.parent(1);
        auto& pb = n.parent(2);
        auto& pa = n.parent(3);
        for (auto* p : {&pu, &pv, &pb, &pa})
          if (p->requires_grad) p->ensure_grad();
        for (std::size_t i = 0; i < nodes; ++i)
          for (std::size_t j = 0; j < nodes; ++j) {
            const double a = pa.value[j * nodes + i];
            double da = 0.0;
            for (std::size_t c = 0; c < channels; ++c) {
              const std::size_t ri = (i * channels + c);
              const std::size_t rj = (j * channels + c);
              const double* ur = pu.value.data() + ri * hidden;
              const double* vr = pv.value.data() + rj * hidden;
              const double* g = n.grad.data() + ri * out_w;
              da += g[hidden];
              for (std::size_t h = 0; h < hidden; ++h) {
                const double pre = ur[h] + vr[h] + pb.value[h];
                if (pre <= 0.0) continue;
                da += g[h] * pre;
                if (a == 0.0) continue;
                const double d = a * g[h];
                if (pu.requires_grad) pu.grad[ri * hidden + h] += d;
                if (pv.requires_grad) pv.grad[rj * hidden + h] += d;
                if (pb.requires_grad) pb.grad[h] += d;
              }
            }
            if (pa.requires_grad) pa.grad[j * nodes + i] += da;
          }
      });
}

/// IPConv over C independent channels sharing one MLP.
/// `x` is [M·C × T] with node-major rows (row = node·C + channel).
inline Tensor ip_conv_channels(const Tensor& x, const AdjacencySample& adj, const MessageMLP& mlp,
                               std::size_t nodes) {
  detail::require_rank(x, 2, "ip_conv");
  const std::size_t t = mlp.width;
  if (x.dim(1) != t) throw ShapeError("ip_conv: embedding length " + std::to_string(x.dim(1)) +
                                      " does not match MLP width " + std::to_string(t));
  if (adj.weights.dim(0) != nodes || adj.weights.dim(1) != nodes || x.dim(0) % nodes != 0) {
    throw ShapeError("ip_conv: adjacency dimension does not match node count");
  }
  // First layer on (x_i ‖ x_j − x_i ‖ x_i + x_j) splits into a receiver term
  // x_i·(A − B + C) and a sender term x_j·(B + C), with W1 = [A; B; C].
  Tensor a = slice(mlp.w1, 0, 0, t);
  Tensor b = slice(mlp.w1, 0, t, 2 * t);
  Tensor c = slice(mlp.w1, 0, 2 * t, 3 * t);
  Tensor receiver = add(sub(a, b), c);
  Tensor sender = add(b, c);
  Tensor u = matmul(x, receiver);
  Tensor v = matmul(x, sender);
  Tensor g = edge_aggregate(u, v, mlp.b1, adj.weights, nodes);
  Tensor w2b = concat({mlp.w2, reshape(mlp.b2, {1, t})}, 0);
  return matmul(g, w2b);
}

/// x'_i = Σ_{j : j→i} a(j,i) · ip_message(x_i, x_j). Nodes is [M×T].
inline Tensor ip_conv(const Tensor& nodes, const AdjacencySample& adj, const MessageMLP& mlp) {
  detail::require_rank(nodes, 2, "ip_conv");
  if (adj.weights.dim(0) != nodes.dim(0)) throw ShapeError("ip_conv: adjacency dimension does not match node count");
  return ip_conv_channels(nodes, adj, mlp, nodes.dim(0));
}

}  // namespace gta::graph
