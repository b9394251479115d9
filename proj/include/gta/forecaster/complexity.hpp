#pragma once

#include <cmath>
#include <cstdint>
#include <string>

namespace gta::forecaster {

enum class AttentionKind { kScaledDotProduct, kGlobalLearned, kBranchMixing };

inline std::string to_string(AttentionKind kind) {
  switch (kind) {
    case AttentionKind::kScaledDotProduct: return "scaled-dot-product";
    case AttentionKind::kGlobalLearned: return "global-learned";
    case AttentionKind::kBranchMixing: return "branch-wise-mixing";
  }
  return "unknown";
}

struct ComplexityShape {
  std::uint64_t n = 0;   // sequence length
  std::uint64_t d = 0;   // model width
  std::uint64_t h = 0;   // heads
  std::uint64_t m = 0;   // global alignment size
  std::uint64_t d1 = 0;  // dot-product branch width
  std::uint64_t d2 = 0;  // global branch width
};

struct Complexity {
  std::uint64_t params = 0;
  std::uint64_t mult_adds = 0;
};

/// Parameter and multiply-add counts of one self-attention module (no
/// feed-forward), constants taken literally from the O(·) expressions:
///   dot-product     |θ| = 4d²               ops = 4nd² + 2n²d
///   global-learned  |θ| = m²h + 2d²         ops = 2nd² + n²d
///   branch mixing   |θ| = 4d₁² + m²h + 2d₂²  ops = 4nd₁² + n²d₁ + 2nd₂² + n²d
/// The local-convolution branch is not part of the mixing row.
inline Complexity complexity_report(AttentionKind kind, const ComplexityShape& s) {
  const std::uint64_t n = s.n, d = s.d, h = s.h, m = s.m, d1 = s.d1, d2 = s.d2;
  switch (kind) {
    case AttentionKind::kScaledDotProduct:
      return {4 * d * d, 4 * n * d * d + 2 * n * n * d};
    case AttentionKind::kGlobalLearned:
      return {m * m * h + 2 * d * d, 2 * n * d * d + n * n * d};
    case AttentionKind::kBranchMixing:
      return {4 * d1 * d1 + m * m * h + 2 * d2 * d2, 4 * n * d1 * d1 + n * n * d1 + 2 * n * d2 * d2 + n * n * d};
  }
  return {};
}

/// Largest m for which global-learned has no more parameters than dot-product: √(2/h)·d.
inline double global_crossover_m(std::uint64_t d, std::uint64_t h) {
  return std::sqrt(2.0 / static_cast<double>(h)) * static_cast<double>(d);
}

}  // namespace gta::forecaster
