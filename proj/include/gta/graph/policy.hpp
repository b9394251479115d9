#pragma once

// Connection learning policy: per ordered sensor pair (i, j) a two-way
// categorical {π₀, π₁}, where π₁ is the probability that information flows
// from i to j. Graphs are drawn with the Gumbel-Max trick and relaxed with
// Gumbel-Softmax so the policy trains by ordinary gradient descent.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "gta/error.hpp"
#include "gta/numerics/ops.hpp"
#include "gta/random.hpp"

namespace gta::graph {

inline constexpr double kGumbelEps = 1e-12;
inline constexpr double kInitEdgeProbability = 0.9;

/// Unnormalized connection logits, shape [M×M×2]; channel 0 is "no edge",
/// channel 1 is "edge". log π is obtained with log_probs().
struct ConnectionLogits {
  std::size_t num_nodes = 0;
  Tensor logits;

  Tensor log_probs() const { return log_softmax(logits, 2); }

  /// π₁ for the ordered pair (src → dst), read without recording.
  double edge_probability(std::size_t src, std::size_t dst) const {
    const double l0 = logits[(src * num_nodes + dst) * 2];
    const double l1 = logits[(src * num_nodes + dst) * 2 + 1];
    return 1.0 / (1.0 + std::exp(l0 - l1));
  }
};

struct PolicySample {
  Tensor gumbel_noise;  // [M×M×2], never requires grad
  Tensor soft_sample;   // [M×M×2], rows on the 2-simplex
  double temperature = 1.0;
  std::size_t num_nodes = 0;
};

/// Directed graph; weights(i, j) is the strength of edge i → j.
struct AdjacencySample {
  Tensor weights;  // [M×M]
  bool hard = false;

  std::size_t num_nodes() const { return weights.dim(0); }
  std::size_t edge_count(double threshold = 0.5) const {
    std::size_t count = 0;
    for (double v : weights.data()) count += v > threshold ? 1 : 0;
    return count;
  }
};

/// Standard Gumbel by inverse transform of u ∈ (0, 1), clamped to [ε, 1−ε].
inline double gumbel_from_uniform(double u) {
  u = std::clamp(u, kGumbelEps, 1.0 - kGumbelEps);
  return -std::log(-std::log(u));
}

inline Tensor sample_gumbel(Generator& gen, const Shape& shape) {
  std::vector<double> g(shape_numel(shape));
  for (double& v : g) v = gumbel_from_uniform(gen.uniform());
  return Tensor::from(shape, std::move(g));
}

inline Tensor off_diagonal_mask(std::size_t m) {
  std::vector<double> mask(m * m, 1.0);
  for (std::size_t i = 0; i < m; ++i) mask[i * m + i] = 0.0;
  return Tensor::matrix(m, m, std::move(mask));
}

inline ConnectionLogits init_complete_graph(std::size_t m, double p_init = kInitEdgeProbability) {
  if (m < 2) throw std::invalid_argument("connection policy needs at least 2 nodes, got " + std::to_string(m));
  if (!(p_init > 0.0 && p_init < 1.0)) throw std::invalid_argument("p_init must lie in (0, 1)");
  std::vector<double> values(m * m * 2);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      const bool diag = i == j;
      values[(i * m + j) * 2] = diag ? 0.0 : std::log(1.0 - p_init);
      values[(i * m + j) * 2 + 1] = diag ? 0.0 : std::log(p_init);
    }
  return {m, Tensor::from({m, m, 2}, std::move(values), true)};
}

/// Gumbel-Softmax relaxation with caller-supplied noise.
inline PolicySample gumbel_softmax_sample(const ConnectionLogits& policy, double temperature, const Tensor& noise) {
  if (!(temperature > 0.0)) throw std::invalid_argument("Gumbel-Softmax temperature must be positive");
  if (noise.shape() != policy.logits.shape()) throw ShapeError("gumbel noise shape mismatch");
  Tensor perturbed = add(policy.log_probs(), noise);
  Tensor z = softmax(scale(perturbed, 1.0 / temperature), 2);
  return {noise, z, temperature, policy.num_nodes};
}

inline PolicySample gumbel_softmax_sample(const ConnectionLogits& policy, double temperature, Generator& gen) {
  if (!(temperature > 0.0)) throw std::invalid_argument("Gumbel-Softmax temperature must be positive");
  return gumbel_softmax_sample(policy, temperature, sample_gumbel(gen, policy.logits.shape()));
}

/// Soft edge weights z₁ with the diagonal zeroed, [M×M], differentiable.
inline Tensor soft_edge_weights(const PolicySample& sample) {
  const std::size_t m = sample.num_nodes;
  Tensor z1 = reshape(slice(sample.soft_sample, 2, 1, 2), {m, m});
  return mul(z1, off_diagonal_mask(m));
}

/// Argmax projection to {0,1} with a straight-through gradient into the soft sample.
inline AdjacencySample hard_sample(const PolicySample& sample) {
  const std::size_t m = sample.num_nodes;
  std::vector<double> hard(m * m, 0.0);
  const auto z = sample.soft_sample.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      if (i != j && z[(i * m + j) * 2 + 1] > z[(i * m + j) * 2]) hard[i * m + j] = 1.0;
  Tensor hard_values = Tensor::matrix(m, m, std::move(hard));
  return {straight_through(hard_values, soft_edge_weights(sample)), true};
}

/// L_s = Σ_{i≠j} log π₁^{i,j}. Minimizing it pushes every π₁ toward zero.
inline Tensor sparsity_loss(const ConnectionLogits& policy) {
  const std::size_t m = policy.num_nodes;
  Tensor log_pi1 = reshape(slice(policy.log_probs(), 2, 1, 2), {m, m});
  return sum(mul(log_pi1, off_diagonal_mask(m)));
}

/// Deterministic evaluation graph: edge i → j iff π₁ > threshold.
inline AdjacencySample extract_adjacency(const ConnectionLogits& policy, double threshold = 0.5) {
  const std::size_t m = policy.num_nodes;
  std::vector<double> w(m * m, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      if (i != j && policy.edge_probability(i, j) > threshold) w[i * m + j] = 1.0;
  return {Tensor::matrix(m, m, std::move(w)), true};
}

inline AdjacencySample complete_adjacency(std::size_t m) { return {off_diagonal_mask(m), true}; }

inline AdjacencySample empty_adjacency(std::size_t m) { return {Tensor::zeros({m, m}), true}; }

/// τ_e = max(0.1, 0.9^e) for policy epoch e (0-based).
inline double temperature_for_epoch(std::size_t epoch, double start = 1.0, double decay = 0.9, double floor = 0.1) {
  return std::max(floor, start * std::pow(decay, static_cast<double>(epoch)));
}

// ---------------------------------------------------------------------------
// Edge-list text format: one "src,dst,pi1" line per edge, sorted by (src, dst).

struct Edge {
  std::size_t src = 0;
  std::size_t dst = 0;
  double pi1 = 1.0;
  bool operator==(const Edge&) const = default;
};

inline std::vector<Edge> learned_edges(const ConnectionLogits& policy, double threshold = 0.5) {
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < policy.num_nodes; ++i)
    for (std::size_t j = 0; j < policy.num_nodes; ++j) {
      if (i == j) continue;
      const double p = policy.edge_probability(i, j);
      if (p > threshold) edges.push_back({i, j, p});
    }
  return edges;
}

inline std::vector<Edge> adjacency_edges(const AdjacencySample& adj) {
  std::vector<Edge> edges;
  const std::size_t m = adj.num_nodes();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      if (i != j && adj.weights[i * m + j] > 0.0) edges.push_back({i, j, adj.weights[i * m + j]});
  return edges;
}

inline void write_edge_list(std::ostream& os, std::vector<Edge> edges) {
  std::sort(edges.begin(), edges.end(),
            [](const Edge& a, const Edge& b) { return std::tie(a.src, a.dst) < std::tie(b.src, b.dst); });
  for (const auto& e : edges) os << e.src << ',' << e.dst << ',' << std::setprecision(9) << e.pi1 << '\n';
}

inline void write_edge_list(const std::string& path, const std::vector<Edge>& edges) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write edge list: " + path);
  write_edge_list(os, edges);
}

inline std::vector<Edge> read_edge_list(std::istream& is) {
  std::vector<Edge> edges;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    Edge e;
    char c1 = 0, c2 = 0;
    if (!(fields >> e.src >> c1 >> e.dst >> c2 >> e.pi1) || c1 != ',' || c2 != ',') {
      throw DataError("edge list line " + std::to_string(lineno) + ": expected src,dst,pi1");
    }
    edges.push_back(e);
  }
  return edges;
}

inline std::vector<Edge> read_edge_list(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open edge list: " + path);
  return read_edge_list(is);
}

inline AdjacencySample adjacency_from_edges(const std::vector<Edge>& edges, std::size_t m) {
  std::vector<double> w(m * m, 0.0);
  for (const auto& e : edges) {
    if (e.src >= m || e.dst >= m) throw DataError("edge references node outside [0, " + std::to_string(m) + ")");
    if (e.src != e.dst) w[e.src * m + e.dst] = 1.0;
  }
  return {Tensor::matrix(m, m, std::move(w)), true};
}

}  // namespace gta::graph
