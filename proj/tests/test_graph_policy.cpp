#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "gta/graph/policy.hpp"
#include "gta/numerics/gradcheck.hpp"

using namespace gta;
using namespace gta::graph;

namespace {

// Logits where every off-diagonal pair has edge probability p.
ConnectionLogits uniform_policy(std::size_t m, double p) { return init_complete_graph(m, p); }

double pi0(const ConnectionLogits& pol, std::size_t i, std::size_t j) {
  const auto lp = pol.log_probs();
  return std::exp(lp[(i * pol.num_nodes + j) * 2]);
}

}  // namespace

TEST(Policy, InitRejectsTooFewNodes) {
  EXPECT_THROW(init_complete_graph(1), std::invalid_argument);
  EXPECT_THROW(init_complete_graph(3, 1.0), std::invalid_argument);
}

TEST(Policy, InitSetsEdgeProbabilityAndNormalizes) {
  auto pol = init_complete_graph(3);
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      if (i == j) continue;
      ++pairs;
      EXPECT_NEAR(pol.edge_probability(i, j), 0.9, 1e-12);
      EXPECT_NEAR(pi0(pol, i, j) + pol.edge_probability(i, j), 1.0, 1e-9);
    }
  EXPECT_EQ(pairs, 6u);
  auto adj = extract_adjacency(pol);
  EXPECT_EQ(adj.edge_count(), 6u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(adj.weights.at(i, i), 0.0);
}

TEST(Gumbel, InverseTransformClosedForms) {
  EXPECT_NEAR(gumbel_from_uniform(std::exp(-1.0)), 0.0, 1e-12);
  EXPECT_NEAR(gumbel_from_uniform(std::exp(-std::exp(1.0))), -1.0, 1e-12);
  EXPECT_TRUE(std::isfinite(gumbel_from_uniform(0.0)));
  EXPECT_TRUE(std::isfinite(gumbel_from_uniform(1.0)));
}

TEST(Gumbel, MeanIsEulerMascheroni) {
  Generator gen(17);
  const auto g = sample_gumbel(gen, {1000000});
  double s = 0.0;
  for (double v : g.data()) s += v;
  EXPECT_NEAR(s / 1e6, 0.5772156649, 0.01);
}

TEST(GumbelSoftmax, RejectsNonPositiveTemperature) {
  auto pol = init_complete_graph(2);
  Generator gen(1);
  EXPECT_THROW(gumbel_softmax_sample(pol, 0.0, gen), std::invalid_argument);
  EXPECT_THROW(gumbel_softmax_sample(pol, -1.0, gen), std::invalid_argument);
}

TEST(GumbelSoftmax, TiedPerturbedLogitsGiveHalf) {
  auto pol = uniform_policy(2, 0.5);
  for (double tau : {0.01, 1.0, 50.0}) {
    auto s = gumbel_softmax_sample(pol, tau, Tensor::zeros({2, 2, 2}));
    EXPECT_NEAR(s.soft_sample[2], 0.5, 1e-12);
    EXPECT_NEAR(s.soft_sample[3], 0.5, 1e-12);
  }
}

TEST(GumbelSoftmax, SamplesStayInsideSimplex) {
  auto pol = init_complete_graph(4, 0.7);
  Generator gen(3);
  for (double tau : {0.3, 1.0, 5.0}) {
    auto s = gumbel_softmax_sample(pol, tau, gen);
    for (std::size_t k = 0; k < 16; ++k) {
      const double z0 = s.soft_sample[2 * k], z1 = s.soft_sample[2 * k + 1];
      EXPECT_NEAR(z0 + z1, 1.0, 1e-9);
      EXPECT_GT(z0, 0.0);
      EXPECT_GT(z1, 0.0);
    }
  }
}

TEST(GumbelSoftmax, TemperatureLimits) {
  auto pol = init_complete_graph(2, 0.7);
  Generator gen(4);
  auto cold = gumbel_softmax_sample(pol, 1e-3, gen);
  for (std::size_t k : {1u, 2u}) EXPECT_GT(std::max(cold.soft_sample[2 * k], cold.soft_sample[2 * k + 1]), 0.999);
  auto hot = gumbel_softmax_sample(pol, 1e4, gen);
  for (double z : hot.soft_sample.data()) EXPECT_NEAR(z, 0.5, 1e-2);
}

TEST(GumbelSoftmax, GradientReachesLogitsNotNoise) {
  auto pol = init_complete_graph(3, 0.6);
  Generator gen(5);
  auto noise = sample_gumbel(gen, {3, 3, 2});
  Projector proj(6);
  auto r = gradcheck([&] { return proj(gumbel_softmax_sample(pol, 0.7, noise).soft_sample); }, {pol.logits});
  EXPECT_LE(r.max_rel_error, 1e-4) << r.worst;
  GradTape::current().clear();
  backward(proj(gumbel_softmax_sample(pol, 0.7, noise).soft_sample));
  EXPECT_FALSE(noise.has_grad());
  EXPECT_FALSE(noise.requires_grad());
  pol.logits.zero_grad();
}

TEST(HardSample, ArgmaxForwardSoftBackward) {
  // Pair (0,1) leans to "edge", pair (1,0) to "no edge".
  ConnectionLogits pol{2, Tensor::from({2, 2, 2}, {0, 0, std::log(0.1), std::log(0.9), std::log(0.9), std::log(0.1), 0, 0}, true)};
  auto s = gumbel_softmax_sample(pol, 1.0, Tensor::zeros({2, 2, 2}));
  auto hard = hard_sample(s);
  EXPECT_TRUE(hard.hard);
  EXPECT_EQ(hard.weights.at(0, 1), 1.0);
  EXPECT_EQ(hard.weights.at(1, 0), 0.0);
  EXPECT_EQ(hard.weights.at(0, 0), 0.0);

  // Backward must equal that of the soft weights.
  Projector proj(7);
  backward(proj(hard.weights));
  std::vector<double> g_hard(pol.logits.grad().begin(), pol.logits.grad().end());
  pol.logits.zero_grad();
  auto s2 = gumbel_softmax_sample(pol, 1.0, Tensor::zeros({2, 2, 2}));
  backward(proj(soft_edge_weights(s2)));
  for (std::size_t k = 0; k < g_hard.size(); ++k) EXPECT_NEAR(g_hard[k], pol.logits.grad()[k], 1e-15);
}

TEST(HardSample, EdgeFrequencyMatchesProbability) {
  auto pol = uniform_policy(2, 0.3);
  Generator gen(8);
  std::size_t edges = 0, draws = 0;
  NoGradGuard guard;
  for (int k = 0; k < 50000; ++k) {
    auto adj = hard_sample(gumbel_softmax_sample(pol, 0.1, gen));
    edges += adj.edge_count();
    draws += 2;
  }
  EXPECT_NEAR(static_cast<double>(edges) / static_cast<double>(draws), 0.3, 0.02);
}

TEST(Sparsity, ClosedForms) {
  // π₁ = e^{-2} on 3 nodes: 6 pairs × −2.
  auto pol = uniform_policy(3, std::exp(-2.0));
  EXPECT_NEAR(sparsity_loss(pol).item(), -12.0, 1e-9);
  auto pol10 = init_complete_graph(10);
  EXPECT_NEAR(sparsity_loss(pol10).item(), 90.0 * std::log(0.9), 1e-9);
  // π₁ → 1 gives 0.
  std::vector<double> v(2 * 2 * 2, 0.0);
  v[3] = 50.0;
  v[5] = 50.0;
  ConnectionLogits near_one{2, Tensor::from({2, 2, 2}, v)};
  EXPECT_NEAR(sparsity_loss(near_one).item(), 0.0, 1e-9);
}

TEST(Sparsity, GradientMatchesFiniteDifferences) {
  Generator gen(9);
  ConnectionLogits pol{4, random_tensor({4, 4, 2}, gen)};
  auto r = gradcheck([&] { return sparsity_loss(pol); }, {pol.logits});
  EXPECT_LE(r.max_rel_error, 1e-4) << r.worst;
}

TEST(Sparsity, DescentLowersEdgeProbability) {
  auto pol = init_complete_graph(3);
  backward(sparsity_loss(pol));
  // d/d(l1) of log softmax_1 = 1 − π₁ > 0, so descent lowers l1.
  EXPECT_GT(pol.logits.grad()[(0 * 3 + 1) * 2 + 1], 0.0);
  EXPECT_LT(pol.logits.grad()[(0 * 3 + 1) * 2], 0.0);
  pol.logits.zero_grad();
}

TEST(Extract, ThresholdSelectsPairs) {
  EXPECT_EQ(extract_adjacency(uniform_policy(4, 0.9)).edge_count(), 12u);
  EXPECT_EQ(extract_adjacency(uniform_policy(4, 0.1)).edge_count(), 0u);
  std::vector<double> v(3 * 3 * 2, 0.0);
  const double hi = std::log(0.6 / 0.4);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      if (i != j) v[(i * 3 + j) * 2 + 1] = (i < j) ? hi : -hi;
  ConnectionLogits mixed{3, Tensor::from({3, 3, 2}, v)};
  auto adj = extract_adjacency(mixed);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(adj.weights.at(i, j), i < j ? 1.0 : 0.0);
}

TEST(Schedule, TemperatureDecaysToFloor) {
  EXPECT_DOUBLE_EQ(temperature_for_epoch(0), 1.0);
  EXPECT_NEAR(temperature_for_epoch(1), 0.9, 1e-12);
  EXPECT_NEAR(temperature_for_epoch(5), std::pow(0.9, 5), 1e-12);
  EXPECT_DOUBLE_EQ(temperature_for_epoch(22), 0.1);
  EXPECT_DOUBLE_EQ(temperature_for_epoch(200), 0.1);
}

TEST(EdgeList, RoundTripSortedBySourceThenTarget) {
  std::vector<Edge> edges{{2, 0, 0.75}, {0, 3, 0.5}, {0, 1, 0.95}};
  std::stringstream ss;
  write_edge_list(ss, edges);
  EXPECT_EQ(ss.str(), "0,1,0.95\n0,3,0.5\n2,0,0.75\n");
  std::stringstream in("# seed=3\n" + ss.str());
  auto back = read_edge_list(in);
  ASSERT_EQ(back.size(), 3u);
  EXPECT_EQ(back[0], (Edge{0, 1, 0.95}));
  EXPECT_EQ(back[2], (Edge{2, 0, 0.75}));
  auto adj = adjacency_from_edges(back, 4);
  EXPECT_EQ(adj.edge_count(), 3u);
  EXPECT_EQ(adj.weights.at(2, 0), 1.0);
  EXPECT_THROW(adjacency_from_edges({{0, 4, 1.0}}, 4), DataError);
  std::stringstream bad("0;1;0.5\n");
  EXPECT_THROW(read_edge_list(bad), DataError);
}
