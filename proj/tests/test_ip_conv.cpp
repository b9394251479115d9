#include <gtest/gtest.h>

#include <numeric>

#include "gta/graph/ip_conv.hpp"
#include "gta/numerics/gradcheck.hpp"

using namespace gta;
using namespace gta::graph;

namespace {

Tensor row(const Tensor& x, std::size_t i) { return reshape(slice(x, 0, i, i + 1), {x.dim(1)}); }

// Naive aggregation: explicit per-edge message sum, no fused kernel.
Tensor brute_force(const Tensor& x, const Tensor& adj, const MessageMLP& mlp) {
  const std::size_t m = x.dim(0), t = x.dim(1);
  std::vector<Tensor> rows;
  for (std::size_t i = 0; i < m; ++i) {
    Tensor acc = Tensor::zeros({t});
    for (std::size_t j = 0; j < m; ++j) {
      const double a = adj.at(j, i);
      if (a == 0.0) continue;
      acc = add(acc, scale(ip_message(row(x, i), row(x, j), mlp), a));
    }
    rows.push_back(reshape(acc, {1, t}));
  }
  return concat(rows, 0);
}

AdjacencySample soft_adj(std::size_t m, Generator& gen, bool requires_grad = false) {
  std::vector<double> w(m * m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) w[i * m + j] = i == j ? 0.0 : gen.uniform(0.05, 1.0);
  return {Tensor::matrix(m, m, w, requires_grad), false};
}

}  // namespace

TEST(IpMessage, InputLayout) {
  auto xi = Tensor::vector({1, 2});
  auto in = ip_message_input(xi, xi);
  EXPECT_EQ(std::vector<double>(in.data().begin(), in.data().end()), (std::vector<double>{1, 2, 0, 0, 2, 4}));
  auto zero_i = ip_message_input(Tensor::zeros({2}), Tensor::vector({3, -1}));
  EXPECT_EQ(std::vector<double>(zero_i.data().begin(), zero_i.data().end()),
            (std::vector<double>{0, 0, 3, -1, 3, -1}));
  EXPECT_THROW(ip_message_input(Tensor::zeros({2}), Tensor::zeros({3})), ShapeError);
}

TEST(IpMessage, MatchesHandComputation) {
  // Second layer set to identity with zero bias and a first layer whose outputs
  // stay positive, so the message is exactly concat·W1 + b1.
  Generator gen(1);
  auto mlp = MessageMLP::init(2, gen);
  std::vector<double> w1(6 * 2);
  for (std::size_t k = 0; k < w1.size(); ++k) w1[k] = 0.1 * static_cast<double>(k + 1);
  mlp.w1 = Tensor::from({6, 2}, w1);
  mlp.b1 = Tensor::vector({5.0, 6.0});
  mlp.w2 = Tensor::matrix(2, 2, {1, 0, 0, 1});
  mlp.b2 = Tensor::zeros({2});
  auto xi = Tensor::vector({1.0, 2.0}), xj = Tensor::vector({0.5, -1.0});
  const double z[6] = {1.0, 2.0, -0.5, -3.0, 1.5, 1.0};
  auto msg = ip_message(xi, xj, mlp);
  for (std::size_t h = 0; h < 2; ++h) {
    double expect = mlp.b1[h];
    for (std::size_t k = 0; k < 6; ++k) expect += z[k] * w1[k * 2 + h];
    EXPECT_NEAR(msg[h], expect, 1e-12);
  }
}

TEST(IpConv, EmptyGraphGivesZero) {
  Generator gen(2);
  auto mlp = MessageMLP::init(5, gen);
  auto x = random_tensor({4, 5}, gen, 1.0, false);
  auto y = ip_conv(x, empty_adjacency(4), mlp);
  for (double v : y.data()) EXPECT_EQ(v, 0.0);
}

TEST(IpConv, SingleEdgeIsScaledMessage) {
  Generator gen(3);
  auto mlp = MessageMLP::init(4, gen);
  auto x = random_tensor({3, 4}, gen, 1.0, false);
  auto a = Tensor::zeros({3, 3});
  a.mutable_data()[2 * 3 + 0] = 0.5;  // edge 2 → 0
  auto y = ip_conv(x, {a, false}, mlp);
  auto expect = scale(ip_message(row(x, 0), row(x, 2), mlp), 0.5);
  for (std::size_t t = 0; t < 4; ++t) {
    EXPECT_NEAR(y.at(0, t), expect[t], 1e-12);
    EXPECT_EQ(y.at(1, t), 0.0);
    EXPECT_EQ(y.at(2, t), 0.0);
  }
}

TEST(IpConv, FusedKernelMatchesBruteForce) {
  Generator gen(4);
  for (std::size_t m : {2u, 3u, 5u}) {
    auto mlp = MessageMLP::init(6, gen);
    auto x = random_tensor({m, 6}, gen, 1.0, false);
    auto adj = soft_adj(m, gen);
    auto fused = ip_conv(x, adj, mlp);
    auto naive = brute_force(x, adj.weights, mlp);
    for (std::size_t k = 0; k < fused.numel(); ++k) EXPECT_NEAR(fused[k], naive[k], 1e-12);
    auto full = ip_conv(x, complete_adjacency(m), mlp);
    auto full_naive = brute_force(x, complete_adjacency(m).weights, mlp);
    for (std::size_t k = 0; k < full.numel(); ++k) EXPECT_NEAR(full[k], full_naive[k], 1e-12);
  }
}

TEST(IpConv, MultiChannelRowsAreIndependent) {
  Generator gen(5);
  const std::size_t m = 3, c = 2, t = 4;
  auto mlp = MessageMLP::init(t, gen);
  auto x = random_tensor({m * c, t}, gen, 1.0, false);
  auto adj = soft_adj(m, gen);
  auto y = ip_conv_channels(x, adj, mlp, m);
  for (std::size_t ch = 0; ch < c; ++ch) {
    std::vector<Tensor> rows;
    for (std::size_t i = 0; i < m; ++i) rows.push_back(slice(x, 0, i * c + ch, i * c + ch + 1));
    auto single = ip_conv(concat(rows, 0), adj, mlp);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t s = 0; s < t; ++s) EXPECT_NEAR(y.at(i * c + ch, s), single.at(i, s), 1e-12);
  }
}

TEST(IpConv, PermutationEquivariance) {
  Generator gen(6);
  const std::size_t m = 4, t = 3;
  auto mlp = MessageMLP::init(t, gen);
  auto x = random_tensor({m, t}, gen, 1.0, false);
  auto adj = soft_adj(m, gen);
  const std::size_t perm[m] = {2, 0, 3, 1};  // new index k holds old node perm[k]
  std::vector<double> px(m * t), pa(m * m);
  for (std::size_t k = 0; k < m; ++k) {
    for (std::size_t s = 0; s < t; ++s) px[k * t + s] = x.at(perm[k], s);
    for (std::size_t l = 0; l < m; ++l) pa[k * m + l] = adj.weights.at(perm[k], perm[l]);
  }
  auto y = ip_conv(x, adj, mlp);
  auto yp = ip_conv(Tensor::matrix(m, t, px), {Tensor::matrix(m, m, pa), false}, mlp);
  for (std::size_t k = 0; k < m; ++k)
    for (std::size_t s = 0; s < t; ++s) EXPECT_NEAR(yp.at(k, s), y.at(perm[k], s), 1e-12);
}

TEST(IpConv, LinearInAdjacency) {
  Generator gen(7);
  auto mlp = MessageMLP::init(3, gen);
  auto x = random_tensor({3, 3}, gen, 1.0, false);
  auto a = soft_adj(3, gen), b = soft_adj(3, gen);
  auto mix = add(scale(a.weights, 0.3), scale(b.weights, 1.7));
  auto lhs = ip_conv(x, {mix, false}, mlp);
  auto rhs = add(scale(ip_conv(x, a, mlp), 0.3), scale(ip_conv(x, b, mlp), 1.7));
  for (std::size_t k = 0; k < lhs.numel(); ++k) EXPECT_NEAR(lhs[k], rhs[k], 1e-12);
}

TEST(IpConv, NonNeighbourIsInsensitive) {
  Generator gen(8);
  auto mlp = MessageMLP::init(3, gen);
  auto x = random_tensor({4, 3}, gen, 1.0, false);
  auto adj = soft_adj(4, gen);
  for (std::size_t k = 0; k < 4; ++k) {
    adj.weights.mutable_data()[1 * 4 + k] = 0.0;  // node 1 sends nothing
  }
  auto y0 = ip_conv(x, adj, mlp);
  auto x2 = x.detach();
  for (std::size_t s = 0; s < 3; ++s) x2.mutable_data()[1 * 3 + s] += 5.0;
  auto y1 = ip_conv(x2, adj, mlp);
  for (std::size_t i : {0u, 2u, 3u})
    for (std::size_t s = 0; s < 3; ++s) EXPECT_NEAR(y0.at(i, s), y1.at(i, s), 1e-12);
}

TEST(IpConv, DimensionMismatchThrows) {
  Generator gen(9);
  auto mlp = MessageMLP::init(3, gen);
  EXPECT_THROW(ip_conv(Tensor::zeros({3, 3}), complete_adjacency(4), mlp), ShapeError);
  EXPECT_THROW(ip_conv(Tensor::zeros({3, 4}), complete_adjacency(3), mlp), ShapeError);
}

TEST(IpConv, GradientsOnInputsWeightsAndAdjacency) {
  Generator gen(10);
  const std::size_t m = 3, t = 4;
  auto mlp = MessageMLP::init(t, gen);
  auto x = random_tensor({m, t}, gen);
  auto adj = soft_adj(m, gen, true);
  adj.weights.mutable_data()[0 * m + 2] = 0.0;  // a zero entry still needs its gradient
  Projector proj(11);
  std::vector<Tensor> inputs{x, adj.weights};
  for (auto& p : mlp.parameters()) inputs.push_back(p);
  auto r = gradcheck([&] { return proj(ip_conv(x, adj, mlp)); }, inputs);
  EXPECT_LE(r.max_rel_error, 1e-4) << r.worst;

  // Same check through the multi-channel path.
  auto xc = random_tensor({m * 2, t}, gen);
  r = gradcheck([&] { return proj(ip_conv_channels(xc, adj, mlp, m)); }, {xc, adj.weights, mlp.w1, mlp.b2});
  EXPECT_LE(r.max_rel_error, 1e-4) << r.worst;
}

TEST(IpConv, ZeroEntryGradientMatchesMessage) {
  // dL/da(j,i) at a = 0 equals <dL/dx'_i, message(i, j)>.
  Generator gen(12);
  auto mlp = MessageMLP::init(3, gen);
  auto x = random_tensor({2, 3}, gen, 1.0, false);
  auto a = Tensor::zeros({2, 2}, true);
  auto y = ip_conv(x, {a, false}, mlp);
  backward(sum(slice(y, 0, 1, 2)));
  auto msg = ip_message(row(x, 1), row(x, 0), mlp);
  double expect = 0.0;
  for (double v : msg.data()) expect += v;
  EXPECT_NEAR(a.grad()[0 * 2 + 1], expect, 1e-12);
  EXPECT_EQ(a.grad()[1 * 2 + 0], 0.0);
}
