#pragma once

// Planted-graph sensor simulator. Every sensor carries its own seasonal signal
// plus AR(1) noise; each planted edge i → j adds coupling · x_i(t − lag) into
// x_j(t). Anomalies are injected into the test split only and travel along the
// planted edges with the same lags and couplings.

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gta/data/series.hpp"
#include "gta/detector/detector.hpp"
#include "gta/error.hpp"
#include "gta/graph/policy.hpp"
#include "gta/random.hpp"

namespace gta::data {

struct PlantedEdge {
  std::size_t src = 0, dst = 0;
  std::size_t lag = 1;
  double coupling = 1.0;
};

enum class AnomalyType { kSpike, kStuck, kDrift };

inline std::string to_string(AnomalyType t) {
  switch (t) {
    case AnomalyType::kSpike: return "spike";
    case AnomalyType::kStuck: return "stuck";
    case AnomalyType::kDrift: return "drift";
  }
  return "";
}

inline AnomalyType parse_anomaly_type(const std::string& s) {
  if (s == "spike") return AnomalyType::kSpike;
  if (s == "stuck") return AnomalyType::kStuck;
  if (s == "drift") return AnomalyType::kDrift;
  throw UsageError("unknown anomaly type '" + s + "' (expected spike|stuck|drift)");
}

/// `start` is relative to the beginning of the test split.
struct AnomalySpec {
  AnomalyType type = AnomalyType::kSpike;
  std::size_t node = 0;
  std::size_t start = 0;
  std::size_t duration = 1;
  double magnitude = 1.0;
};

struct SyntheticSpec {
  std::size_t nodes = 10;
  std::size_t train_length = 5000;
  std::size_t test_length = 2000;
  std::vector<PlantedEdge> edges;
  double noise = 0.05;
  double ar_coefficient = 0.5;
  double root_amplitude = 1.0;
  double child_amplitude = 0.3;
  std::vector<AnomalySpec> anomalies;

  void validate() const {
    if (nodes < 2) throw UsageError("synthetic spec needs at least 2 nodes (graph learning needs M >= 2)");
    if (train_length == 0 || test_length == 0) throw UsageError("synthetic lengths must be positive");
    if (noise < 0.0) throw UsageError("noise scale must be non-negative");
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (const auto& e : edges) {
      if (e.src >= nodes || e.dst >= nodes) throw UsageError("planted edge references a node outside the graph");
      if (e.src == e.dst) throw UsageError("planted adjacency must have a zero diagonal");
      if (e.lag == 0) throw UsageError("propagation lag must be >= 1");
      if (!seen.insert({e.src, e.dst}).second) throw UsageError("duplicate planted edge");
    }
    for (const auto& a : anomalies) {
      if (a.node >= nodes) throw UsageError("anomaly targets a node outside the graph");
      if (a.duration == 0 || a.start + a.duration > test_length) {
        throw UsageError("anomaly segment lies outside the test split");
      }
    }
  }

  /// M = 10, 12 planted edges over three roots, 8 injected anomalies.
  static SyntheticSpec default_spec() {
    SyntheticSpec s;
    s.edges = {{0, 3, 1, 0.8}, {0, 4, 2, 0.7}, {1, 4, 1, 0.6}, {1, 5, 3, 0.8}, {2, 5, 1, 0.6}, {2, 6, 2, 0.8},
               {3, 7, 1, 0.7}, {4, 7, 2, 0.6}, {5, 8, 1, 0.8}, {6, 8, 2, 0.6}, {6, 9, 1, 0.7}, {7, 9, 3, 0.5}};
    const AnomalyType cycle[] = {AnomalyType::kSpike, AnomalyType::kStuck, AnomalyType::kDrift};
    const std::size_t targets[] = {0, 3, 1, 6, 2, 4, 5, 7};
    const std::size_t durations[] = {30, 40, 50, 30, 40, 50, 30, 40};
    for (std::size_t k = 0; k < 8; ++k) {
      const auto type = cycle[k % 3];
      const double magnitude = type == AnomalyType::kStuck ? 0.0 : 1.5;
      s.anomalies.push_back({type, targets[k], 120 + 230 * k, durations[k], magnitude});
    }
    return s;
  }

  graph::AdjacencySample planted_adjacency() const {
    std::vector<double> w(nodes * nodes, 0.0);
    for (const auto& e : edges) w[e.src * nodes + e.dst] = 1.0;
    return {Tensor::matrix(nodes, nodes, std::move(w)), true};
  }
};

struct SyntheticDataset {
  RawSeries train;
  RawSeries test;  // labelled
  graph::AdjacencySample planted;
};

/// Test-split steps touched by each anomaly, including lag-shifted copies on
/// every descendant reachable through edges with non-zero coupling.
inline std::vector<std::uint8_t> propagated_labels(const SyntheticSpec& spec) {
  std::vector<std::uint8_t> labels(spec.test_length, 0);
  for (const auto& a : spec.anomalies) {
    // (node, accumulated lag) frontier, bounded by M hops.
    std::set<std::pair<std::size_t, std::size_t>> reached{{a.node, 0}};
    std::vector<std::pair<std::size_t, std::size_t>> frontier{{a.node, 0}};
    for (std::size_t hop = 0; hop < spec.nodes && !frontier.empty(); ++hop) {
      std::vector<std::pair<std::size_t, std::size_t>> next;
      for (const auto& [node, lag] : frontier)
        for (const auto& e : spec.edges)
          if (e.src == node && e.coupling != 0.0 && reached.insert({e.dst, lag + e.lag}).second)
            next.emplace_back(e.dst, lag + e.lag);
      frontier = std::move(next);
    }
    for (const auto& [node, lag] : reached)
      for (std::size_t t = a.start + lag; t < std::min(spec.test_length, a.start + a.duration + lag); ++t) labels[t] = 1;
  }
  return labels;
}

inline SyntheticDataset generate_synthetic(const SyntheticSpec& spec, Generator& gen) {
  spec.validate();
  const std::size_t m = spec.nodes;
  const std::size_t total = spec.train_length + spec.test_length;
  std::vector<bool> has_parent(m, false);
  for (const auto& e : spec.edges) has_parent[e.dst] = true;

  // Per-sensor seasonal parameters are drawn before any noise so the draw
  // sequence does not depend on the edge set.
  std::vector<double> amplitude(m), period(m), phase(m);
  for (std::size_t i = 0; i < m; ++i) {
    period[i] = 17.0 + 6.3 * static_cast<double>(i) + gen.uniform(0.0, 2.0);
    phase[i] = gen.uniform(0.0, 2.0 * std::numbers::pi);
    amplitude[i] = has_parent[i] ? spec.child_amplitude : spec.root_amplitude;
  }
  std::vector<double> x(m * total, 0.0);
  std::vector<double> ar(m, 0.0);
  auto at = [&x, total](std::size_t i, std::size_t t) -> double& { return x[i * total + t]; };

  auto active = [&spec](std::size_t node, std::size_t t) -> const AnomalySpec* {
    if (t < spec.train_length) return nullptr;
    const std::size_t rel = t - spec.train_length;
    for (const auto& a : spec.anomalies)
      if (a.node == node && rel >= a.start && rel < a.start + a.duration) return &a;
    return nullptr;
  };

  for (std::size_t t = 0; t < total; ++t) {
    for (std::size_t i = 0; i < m; ++i) {
      ar[i] = spec.ar_coefficient * ar[i] + spec.noise * gen.normal();
      at(i, t) = amplitude[i] * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / period[i] + phase[i]) + ar[i];
    }
    for (const auto& e : spec.edges)
      if (t >= e.lag) at(e.dst, t) += e.coupling * at(e.src, t - e.lag);
    // Edges are applied in list order; a parent's own anomaly below is seen by
    // children only through lagged reads, so injection order within a step is irrelevant.
    for (std::size_t i = 0; i < m; ++i) {
      const AnomalySpec* a = active(i, t);
      if (!a) continue;
      const std::size_t k = t - spec.train_length - a->start;
      switch (a->type) {
        case AnomalyType::kSpike: at(i, t) += a->magnitude; break;
        case AnomalyType::kStuck: at(i, t) = at(i, t - k); break;
        case AnomalyType::kDrift:
          at(i, t) += a->magnitude * static_cast<double>(k + 1) / static_cast<double>(a->duration);
          break;
      }
    }
  }

  auto slice_series = [&](std::size_t begin, std::size_t len) {
    RawSeries s;
    for (std::size_t i = 0; i < m; ++i) s.sensors.push_back("s" + std::to_string(i));
    std::vector<double> v(m * len);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t t = 0; t < len; ++t) v[i * len + t] = at(i, begin + t);
    for (std::size_t t = 0; t < len; ++t) s.timestamps.push_back(std::to_string(begin + t));
    s.values = Tensor::matrix(m, len, std::move(v));
    return s;
  };
  SyntheticDataset ds;
  ds.train = slice_series(0, spec.train_length);
  ds.test = slice_series(spec.train_length, spec.test_length);
  ds.test.labels = propagated_labels(spec);
  ds.planted = spec.planted_adjacency();
  return ds;
}

/// Ordered off-diagonal pairs as a binary classification of learned vs planted edges.
inline detector::MetricsReport edge_recovery_metrics(const graph::AdjacencySample& learned,
                                                     const graph::AdjacencySample& planted) {
  const std::size_t m = learned.num_nodes();
  if (planted.num_nodes() != m) throw ShapeError("edge_recovery_metrics: graphs differ in node count");
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      if (i == j) continue;
      const bool l = learned.weights[i * m + j] > 0.5;
      const bool p = planted.weights[i * m + j] > 0.5;
      if (l && p) ++tp;
      else if (l) ++fp;
      else if (p) ++fn;
      else ++tn;
    }
  return detector::metrics_from_counts(tp, fp, fn, tn);
}

// ---------------------------------------------------------------------------
// Key-value parsing. Keys: nodes, length (train steps), test_length, edges
// ("0-3 0-4 …"), lags, couplings (one per edge), noise, anomalies
// ("type:node:start:duration[:magnitude] …").

namespace detail {

template <class T>
std::vector<T> parse_list(const std::string& text, const std::string& key) {
  std::string norm = text;
  std::replace(norm.begin(), norm.end(), ',', ' ');
  std::istringstream is(norm);
  std::vector<T> out;
  T v{};
  while (is >> v) out.push_back(v);
  if (!is.eof()) throw UsageError("cannot parse list for key '" + key + "'");
  return out;
}

}  // namespace detail

inline SyntheticSpec parse_synthetic_spec(const std::map<std::string, std::string>& kv) {
  SyntheticSpec s = SyntheticSpec::default_spec();
  auto get = [&kv](const char* key) -> const std::string* {
    auto it = kv.find(key);
    return it == kv.end() ? nullptr : &it->second;
  };
  try {
    if (auto v = get("nodes")) s.nodes = std::stoul(*v);
    if (auto v = get("length")) s.train_length = std::stoul(*v);
    if (auto v = get("test_length")) s.test_length = std::stoul(*v);
    if (auto v = get("noise")) s.noise = std::stod(*v);
  } catch (const std::logic_error&) {
    throw UsageError("malformed numeric value in synthetic spec");
  }
  if (auto v = get("edges")) {
    s.edges.clear();
    std::string norm = *v;
    std::replace(norm.begin(), norm.end(), ',', ' ');
    std::istringstream is(norm);
    std::string tok;
    while (is >> tok) {
      const auto dash = tok.find('-');
      if (dash == std::string::npos) throw UsageError("edge '" + tok + "' must be src-dst");
      try {
        s.edges.push_back({std::stoul(tok.substr(0, dash)), std::stoul(tok.substr(dash + 1)), 1, 1.0});
      } catch (const std::logic_error&) {
        throw UsageError("edge '" + tok + "' must be src-dst");
      }
    }
    const auto lags = get("lags") ? detail::parse_list<std::size_t>(*get("lags"), "lags")
                                  : std::vector<std::size_t>(s.edges.size(), 1);
    const auto couplings = get("couplings") ? detail::parse_list<double>(*get("couplings"), "couplings")
                                            : std::vector<double>(s.edges.size(), 1.0);
    if (lags.size() != s.edges.size() || couplings.size() != s.edges.size()) {
      throw UsageError("lags and couplings must list one value per edge");
    }
    for (std::size_t k = 0; k < s.edges.size(); ++k) {
      s.edges[k].lag = lags[k];
      s.edges[k].coupling = couplings[k];
    }
  } else if (get("lags") || get("couplings")) {
    throw UsageError("lags/couplings given without edges");
  } else if (s.nodes != 10) {
    s.edges.clear();  // the default graph only fits the default node count
  }
  if (auto v = get("anomalies")) {
    s.anomalies.clear();
    std::string norm = *v;
    std::replace(norm.begin(), norm.end(), ',', ' ');
    std::istringstream is(norm);
    std::string tok;
    while (is >> tok) {
      std::vector<std::string> parts;
      std::istringstream fs(tok);
      std::string part;
      while (std::getline(fs, part, ':')) parts.push_back(part);
      if (parts.size() < 4 || parts.size() > 5) throw UsageError("anomaly '" + tok + "' must be type:node:start:duration[:magnitude]");
      try {
        AnomalySpec a{parse_anomaly_type(parts[0]), std::stoul(parts[1]), std::stoul(parts[2]), std::stoul(parts[3]),
                      parts.size() == 5 ? std::stod(parts[4]) : 1.5};
        s.anomalies.push_back(a);
      } catch (const std::logic_error&) {
        throw UsageError("anomaly '" + tok + "' has a malformed number");
      }
    }
  } else if (s.test_length != 2000 || s.nodes != 10) {
    // Keep default anomalies only where they still fit.
    std::erase_if(s.anomalies, [&s](const AnomalySpec& a) {
      return a.node >= s.nodes || a.start + a.duration > s.test_length;
    });
  }
  s.validate();
  return s;
}

}  // namespace gta::data
