#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "gta/numerics/tensor.hpp"
#include "gta/random.hpp"

namespace gta {

namespace kernels {

// c[p×r] += a[p×q] · b[q×r]
inline void gemm_nn(const double* a, const double* b, double* c, std::size_t p, std::size_t q,
                    std::size_t r) {
  for (std::size_t i = 0; i < p; ++i) {
    double* ci = c + i * r;
    const double* ai = a + i * q;
    for (std::size_t k = 0; k < q; ++k) {
      const double aik = ai[k];
      if (aik == 0.0) continue;
      const double* bk = b + k * r;
      for (std::size_t j = 0; j < r; ++j) ci[j] += aik * bk[j];
    }
  }
}

// c[p×r] += a[p×q] · b[r×q]ᵀ
inline void gemm_nt(const double* a, const double* b, double* c, std::size_t p, std::size_t q,
                    std::size_t r) {
  for (std::size_t i = 0; i < p; ++i) {
    const double* ai = a + i * q;
    for (std::size_t j = 0; j < r; ++j) {
      const double* bj = b + j * q;
      double acc = 0.0;
      for (std::size_t k = 0; k < q; ++k) acc += ai[k] * bj[k];
      c[i * r + j] += acc;
    }
  }
}

// c[q×r] += a[p×q]ᵀ · b[p×r]
inline void gemm_tn(const double* a, const double* b, double* c, std::size_t p, std::size_t q,
                    std::size_t r) {
  for (std::size_t i = 0; i < p; ++i) {
    const double* ai = a + i * q;
    const double* bi = b + i * r;
    for (std::size_t k = 0; k < q; ++k) {
      const double aik = ai[k];
      if (aik == 0.0) continue;
      double* ck = c + k * r;
      for (std::size_t j = 0; j < r; ++j) ck[j] += aik * bi[j];
    }
  }
}

}  // namespace kernels

namespace detail {

inline void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (!t.defined() || t.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     (t.defined() ? shape_str(t.shape()) : "undefined"));
  }
}

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

struct AxisSplit {
  std::size_t outer = 1, len = 1, inner = 1;
};

inline AxisSplit split_at(const Shape& shape, std::size_t axis, const char* op) {
  if (axis >= shape.size()) {
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for " +
                     shape_str(shape));
  }
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.len = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise

inline Tensor add(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return detail::make_result(a.shape(), std::move(out), {a, b}, [](detail::Node& n) {
    for (std::size_t p = 0; p < 2; ++p) {
      auto& par = n.parent(p);
      if (!par.requires_grad) continue;
      par.ensure_grad();
      for (std::size_t i = 0; i < n.grad.size(); ++i) par.grad[i] += n.grad[i];
    }
  });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return detail::make_result(a.shape(), std::move(out), {a, b}, [](detail::Node& n) {
    auto& pa = n.parent(0);
    auto& pb = n.parent(1);
    if (pa.requires_grad) {
      pa.ensure_grad();
      for (std::size_t i = 0; i < n.grad.size(); ++i) pa.grad[i] += n.grad[i];
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      for (std::size_t i = 0; i < n.grad.size(); ++i) pb.grad[i] -= n.grad[i];
    }
  });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return detail::make_result(a.shape(), std::move(out), {a, b}, [](detail::Node& n) {
    auto& pa = n.parent(0);
    auto& pb = n.parent(1);
    if (pa.requires_grad) {
      pa.ensure_grad();
      for (std::size_t i = 0; i < n.grad.size(); ++i) pa.grad[i] += n.grad[i] * pb.value[i];
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      for (std::size_t i = 0; i < n.grad.size(); ++i) pb.grad[i] += n.grad[i] * pa.value[i];
    }
  });
}

inline Tensor scale(const Tensor& a, double s) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * s;
  return detail::make_result(a.shape(), std::move(out), {a}, [s](detail::Node& n) {
    auto& pa = n.parent(0);
    pa.ensure_grad();
    for (std::size_t i = 0; i < n.grad.size(); ++i) pa.grad[i] += n.grad[i] * s;
  });
}

inline Tensor add_scalar(const Tensor& a, double s) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + s;
  return detail::make_result(a.shape(), std::move(out), {a}, [](detail::Node& n) {
    auto& pa = n.parent(0);
    pa.ensure_grad();
    for (std::size_t i = 0; i < n.grad.size(); ++i) pa.grad[i] += n.grad[i];
  });
}

/// x[R×C] + b broadcast over rows; b has C elements (any rank).
inline Tensor add_bias(const Tensor& x, const Tensor& b) {
  detail::require_rank(x, 2, "add_bias");
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  if (b.numel() != cols) throw ShapeError("add_bias: bias width mismatch");
  std::vector<double> out(x.numel());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = x[r * cols + c] + b[c];
  return detail::make_result(x.shape(), std::move(out), {x, b}, [rows, cols](detail::Node& n) {
    auto& px = n.parent(0);
    auto& pb = n.parent(1);
    if (px.requires_grad) {
      px.ensure_grad();
      for (std::size_t i = 0; i < n.grad.size(); ++i) px.grad[i] += n.grad[i];
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) pb.grad[c] += n.grad[r * cols + c];
    }
  });
}

inline Tensor relu(const Tensor& a) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] > 0.0 ? a[i] : 0.0;
  return detail::make_result(a.shape(), std::move(out), {a}, [](detail::Node& n) {
    auto& pa = n.parent(0);
    pa.ensure_grad();
    for (std::size_t i = 0; i < n.grad.size(); ++i)
      if (pa.value[i] > 0.0) pa.grad[i] += n.grad[i];
  });
}

inline Tensor exp(const Tensor& a) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(a[i]);
  return detail::make_result(a.shape(), std::move(out), {a}, [](detail::Node& n) {
    auto& pa = n.parent(0);
    pa.ensure_grad();
    for (std::size_t i = 0; i < n.grad.size(); ++i) pa.grad[i] += n.grad[i] * n.value[i];
  });
}

inline Tensor log(const Tensor& a) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!(a[i] > 0.0)) throw NumericError("log of non-positive value");
    out[i] = std::log(a[i]);
  }
  return detail::make_result(a.shape(), std::move(out), {a}, [](detail::Node& n) {
    auto& pa = n.parent(0);
    pa.ensure_grad();
    for (std::size_t i = 0; i < n.grad.size(); ++i) pa.grad[i] += n.grad[i] / pa.value[i];
  });
}

// ---------------------------------------------------------------------------
// Reductions

inline Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.data()) acc += v;
  return detail::make_result({1}, {acc}, {a}, [](detail::Node& n) {
    auto& pa = n.parent(0);
    pa.ensure_grad();
    const double g = n.grad[0];
    for (double& v : pa.grad) v += g;
  });
}

inline Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.numel())); }

/// Σ a², fused to avoid a temporary.
inline Tensor sum_squares(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.data()) acc += v * v;
  return detail::make_result({1}, {acc}, {a}, [](detail::Node& n) {
    auto& pa = n.parent(0);
    pa.ensure_grad();
    const double g = 2.0 * n.grad[0];
    for (std::size_t i = 0; i < pa.grad.size(); ++i) pa.grad[i] += g * pa.value[i];
  });
}

// ---------------------------------------------------------------------------
// Linear algebra

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  detail::require_rank(a, 2, "matmul");
  detail::require_rank(b, 2, "matmul");
  const std::size_t p = a.dim(0), q = a.dim(1), r = b.dim(1);
  if (b.dim(0) != q) {
    throw ShapeError("matmul: inner extents differ, " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  std::vector<double> out(p * r, 0.0);
  kernels::gemm_nn(a.data().data(), b.data().data(), out.data(), p, q, r);
  return detail::make_result({p, r}, std::move(out), {a, b}, [p, q, r](detail::Node& n) {
    auto& pa = n.parent(0);
    auto& pb = n.parent(1);
    if (pa.requires_grad) {
      pa.ensure_grad();
      kernels::gemm_nt(n.grad.data(), pb.value.data(), pa.grad.data(), p, r, q);
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      kernels::gemm_tn(pa.value.data(), n.grad.data(), pb.grad.data(), p, q, r);
    }
  });
}

/// a · bᵀ without materializing the transpose.
inline Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  detail::require_rank(a, 2, "matmul_nt");
  detail::require_rank(b, 2, "matmul_nt");
  const std::size_t p = a.dim(0), q = a.dim(1), r = b.dim(0);
  if (b.dim(1) != q) {
    throw ShapeError("matmul_nt: inner extents differ, " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()) + "^T");
  }
  std::vector<double> out(p * r, 0.0);
  kernels::gemm_nt(a.data().data(), b.data().data(), out.data(), p, q, r);
  return detail::make_result({p, r}, std::move(out), {a, b}, [p, q, r](detail::Node& n) {
    auto& pa = n.parent(0);
    auto& pb = n.parent(1);
    if (pa.requires_grad) {  // dA = dC · B
      pa.ensure_grad();
      kernels::gemm_nn(n.grad.data(), pb.value.data(), pa.grad.data(), p, r, q);
    }
    if (pb.requires_grad) {  // dB = dCᵀ · A
      pb.ensure_grad();
      kernels::gemm_tn(n.grad.data(), pa.value.data(), pb.grad.data(), p, r, q);
    }
  });
}

inline Tensor transpose(const Tensor& a) {
  detail::require_rank(a, 2, "transpose");
  const std::size_t rows = a.dim(0), cols = a.dim(1);
  std::vector<double> out(a.numel());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = a[r * cols + c];
  return detail::make_result({cols, rows}, std::move(out), {a}, [rows, cols](detail::Node& n) {
    auto& pa = n.parent(0);
    pa.ensure_grad();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) pa.grad[r * cols + c] += n.grad[c * rows + r];
  });
}

// ---------------------------------------------------------------------------
// Shape manipulation

inline Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw ShapeError("reshape: " + shape_str(a.shape()) + " -> " + shape_str(shape));
  }
  std::vector<double> out(a.data().begin(), a.data().end());
  return detail::make_result(std::move(shape), std::move(out), {a}, [](detail::Node& n) {
    auto& pa = n.parent(0);
    pa.ensure_grad();
    for (std::size_t i = 0; i < n.grad.size(); ++i) pa.grad[i] += n.grad[i];
  });
}

/// Concatenation along `axis`; all other extents must agree.
inline Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  Shape shape = parts.front().shape();
  const auto first = detail::split_at(shape, axis, "concat");
  std::vector<std::size_t> lens;
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.rank() != shape.size()) throw ShapeError("concat: rank mismatch");
    for (std::size_t i = 0; i < shape.size(); ++i) {
      if (i != axis && p.dim(i) != shape[i]) {
        throw ShapeError("concat: extent mismatch " + shape_str(p.shape()) + " vs " + shape_str(shape));
      }
    }
    lens.push_back(p.dim(axis));
    total += p.dim(axis);
  }
  shape[axis] = total;
  const std::size_t outer = first.outer, inner = first.inner;
  std::vector<double> out(outer * total * inner);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto src = parts[k].data();
    const std::size_t block = lens[k] * inner;
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(src.data() + o * block, block, out.data() + o * total * inner + offset * inner);
    offset += lens[k];
  }
  return detail::make_result(std::move(shape), std::move(out), parts,
                             [lens, outer, inner, total](detail::Node& n) {
                               std::size_t off = 0;
                               for (std::size_t k = 0; k < lens.size(); ++k) {
                                 auto& par = n.parent(k);
                                 const std::size_t block = lens[k] * inner;
                                 if (par.requires_grad) {
                                   par.ensure_grad();
                                   for (std::size_t o = 0; o < outer; ++o) {
                                     const double* g = n.grad.data() + o * total * inner + off * inner;
                                     double* dst = par.grad.data() + o * block;
                                     for (std::size_t i = 0; i < block; ++i) dst[i] += g[i];
                                   }
                                 }
                                 off += lens[k];
                               }
                             });
}

/// Half-open range [begin, end) along `axis`.
inline Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end) {
  const auto s = detail::split_at(a.shape(), axis, "slice");
  if (begin >= end || end > s.len) {
    throw ShapeError("slice: range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") invalid for extent " + std::to_string(s.len));
  }
  Shape shape = a.shape();
  shape[axis] = end - begin;
  const std::size_t width = (end - begin) * s.inner;
  std::vector<double> out(s.outer * width);
  const auto src = a.data();
  for (std::size_t o = 0; o < s.outer; ++o)
    std::copy_n(src.data() + (o * s.len + begin) * s.inner, width, out.data() + o * width);
  return detail::make_result(std::move(shape), std::move(out), {a}, [s, begin, width](detail::Node& n) {
    auto& pa = n.parent(0);
    pa.ensure_grad();
    for (std::size_t o = 0; o < s.outer; ++o) {
      double* dst = pa.grad.data() + (o * s.len + begin) * s.inner;
      const double* g = n.grad.data() + o * width;
      for (std::size_t i = 0; i < width; ++i) dst[i] += g[i];
    }
  });
}

// ---------------------------------------------------------------------------
// Normalizations

/// Numerically stable softmax along `axis` (max-subtracted).
inline Tensor softmax(const Tensor& a, std::size_t axis) {
  const auto s = detail::split_at(a.shape(), axis, "softmax");
  std::vector<double> out(a.numel());
  const auto x = a.data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.len * s.inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < s.len; ++k) mx = std::max(mx, x[base + k * s.inner]);
      double z = 0.0;
      for (std::size_t k = 0; k < s.len; ++k) {
        const double e = std::exp(x[base + k * s.inner] - mx);
        out[base + k * s.inner] = e;
        z += e;
      }
      for (std::size_t k = 0; k < s.len; ++k) out[base + k * s.inner] /= z;
    }
  }
  return detail::make_result(a.shape(), std::move(out), {a}, [s](detail::Node& n) {
    auto& pa = n.parent(0);
    pa.ensure_grad();
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t in = 0; in < s.inner; ++in) {
        const std::size_t base = o * s.len * s.inner + in;
        double dot = 0.0;
        for (std::size_t k = 0; k < s.len; ++k) dot += n.grad[base + k * s.inner] * n.value[base + k * s.inner];
        for (std::size_t k = 0; k < s.len; ++k) {
          const std::size_t idx = base + k * s.inner;
          pa.grad[idx] += n.value[idx] * (n.grad[idx] - dot);
        }
      }
    }
  });
}

inline Tensor log_softmax(const Tensor& a, std::size_t axis) {
  const auto s = detail::split_at(a.shape(), axis, "log_softmax");
  std::vector<double> out(a.numel());
  const auto x = a.data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.len * s.inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < s.len; ++k) mx = std::max(mx, x[base + k * s.inner]);
      double z = 0.0;
      for (std::size_t k = 0; k < s.len; ++k) z += std::exp(x[base + k * s.inner] - mx);
      const double lse = mx + std::log(z);
      for (std::size_t k = 0; k < s.len; ++k) out[base + k * s.inner] = x[base + k * s.inner] - lse;
    }
  }
  return detail::make_result(a.shape(), std::move(out), {a}, [s](detail::Node& n) {
    auto& pa = n.parent(0);
    pa.ensure_grad();
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t in = 0; in < s.inner; ++in) {
        const std::size_t base = o * s.len * s.inner + in;
        double gsum = 0.0;
        for (std::size_t k = 0; k < s.len; ++k) gsum += n.grad[base + k * s.inner];
        for (std::size_t k = 0; k < s.len; ++k) {
          const std::size_t idx = base + k * s.inner;
          pa.grad[idx] += n.grad[idx] - std::exp(n.value[idx]) * gsum;
        }
      }
    }
  });
}

/// Row softmax of a [q×k] score matrix where entry (i, j) is dropped when
/// j > i + offset. offset = k - q aligns the last query with the last key.
inline Tensor causal_softmax(const Tensor& a, std::ptrdiff_t offset = 0) {
  detail::require_rank(a, 2, "causal_softmax");
  const std::size_t rows = a.dim(0), cols = a.dim(1);
  std::vector<double> out(a.numel(), 0.0);
  const auto x = a.data();
  auto visible = [offset, cols](std::size_t i) {
    const std::ptrdiff_t last = static_cast<std::ptrdiff_t>(i) + offset;
    return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(last + 1, 1, static_cast<std::ptrdiff_t>(cols)));
  };
  for (std::size_t i = 0; i < rows; ++i) {
    const std::size_t vis = visible(i);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < vis; ++j) mx = std::max(mx, x[i * cols + j]);
    double z = 0.0;
    for (std::size_t j = 0; j < vis; ++j) {
      out[i * cols + j] = std::exp(x[i * cols + j] - mx);
      z += out[i * cols + j];
    }
    for (std::size_t j = 0; j < vis; ++j) out[i * cols + j] /= z;
  }
  return detail::make_result(a.shape(), std::move(out), {a}, [rows, cols](detail::Node& n) {
    auto& pa = n.parent(0);
    pa.ensure_grad();
    for (std::size_t i = 0; i < rows; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < cols; ++j) dot += n.grad[i * cols + j] * n.value[i * cols + j];
      for (std::size_t j = 0; j < cols; ++j) {
        const std::size_t idx = i * cols + j;
        pa.grad[idx] += n.value[idx] * (n.grad[idx] - dot);
      }
    }
  });
}

/// Per-row layer normalization with learned gain and bias (each of width C).
inline Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5) {
  detail::require_rank(x, 2, "layer_norm");
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  if (gain.numel() != cols || bias.numel() != cols) throw ShapeError("layer_norm: parameter width mismatch");
  std::vector<double> out(x.numel());
  std::vector<double> xhat(x.numel());
  std::vector<double> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double mu = 0.0;
    for (std::size_t c = 0; c < cols; ++c) mu += x[r * cols + c];
    mu /= static_cast<double>(cols);
    double var = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      const double d = x[r * cols + c] - mu;
      var += d * d;
    }
    var /= static_cast<double>(cols);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < cols; ++c) {
      const std::size_t i = r * cols + c;
      xhat[i] = (x[i] - mu) * inv_std[r];
      out[i] = xhat[i] * gain[c] + bias[c];
    }
  }
  return detail::make_result(
      x.shape(), std::move(out), {x, gain, bias},
      [rows, cols, xhat = std::move(xhat), inv_std = std::move(inv_std)](detail::Node& n) {
        auto& px = n.parent(0);
        auto& pg = n.parent(1);
        auto& pb = n.parent(2);
        if (pg.requires_grad) pg.ensure_grad();
        if (pb.requires_grad) pb.ensure_grad();
        if (px.requires_grad) px.ensure_grad();
        const double inv_c = 1.0 / static_cast<double>(cols);
        for (std::size_t r = 0; r < rows; ++r) {
          double sum_g = 0.0, sum_gx = 0.0;
          for (std::size_t c = 0; c < cols; ++c) {
            const std::size_t i = r * cols + c;
            if (pg.requires_grad) pg.grad[c] += n.grad[i] * xhat[i];
            if (pb.requires_grad) pb.grad[c] += n.grad[i];
            const double gh = n.grad[i] * pg.value[c];
            sum_g += gh;
            sum_gx += gh * xhat[i];
          }
          if (!px.requires_grad) continue;
          for (std::size_t c = 0; c < cols; ++c) {
            const std::size_t i = r * cols + c;
            const double gh = n.grad[i] * pg.value[c];
            px.grad[i] += inv_std[r] * (gh - inv_c * sum_g - xhat[i] * inv_c * sum_gx);
          }
        }
      });
}

// ---------------------------------------------------------------------------
// Stochastic and gradient-routing ops

/// Inverted dropout. Identity when p == 0 or when not training.
inline Tensor dropout(const Tensor& x, double p, Generator& gen, bool training) {
  if (!training || p <= 0.0) return x;
  if (p >= 1.0) throw std::invalid_argument("dropout: p must be < 1");
  const double keep = 1.0 / (1.0 - p);
  std::vector<double> mask(x.numel());
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    mask[i] = gen.uniform() < p ? 0.0 : keep;
    out[i] = x[i] * mask[i];
  }
  return detail::make_result(x.shape(), std::move(out), {x}, [mask = std::move(mask)](detail::Node& n) {
    auto& px = n.parent(0);
    px.ensure_grad();
    for (std::size_t i = 0; i < n.grad.size(); ++i) px.grad[i] += n.grad[i] * mask[i];
  });
}

/// Forward value of `hard`, gradient routed unchanged into `soft`.
inline Tensor straight_through(const Tensor& hard, const Tensor& soft) {
  detail::require_same_shape(hard, soft, "straight_through");
  std::vector<double> out(hard.data().begin(), hard.data().end());
  return detail::make_result(hard.shape(), std::move(out), {soft}, [](detail::Node& n) {
    auto& ps = n.parent(0);
    ps.ensure_grad();
    for (std::size_t i = 0; i < n.grad.size(); ++i) ps.grad[i] += n.grad[i];
  });
}

// ---------------------------------------------------------------------------
// Convolutions

/// Dilated 1-D convolution without padding, left-aligned:
///   out[b, o, t] = bias[o] + Σ_c Σ_k w[o, c, k] · x[b, c, t + k·dilation]
/// `x` is [batch·C_in × L] (batch-major rows); `w` is [C_out × C_in × K]; bias is
/// optional ([C_out]). Output is [batch·C_out × (L − (K−1)·dilation)].
inline Tensor conv1d_dilated(const Tensor& x, const Tensor& w, const Tensor& bias, std::size_t dilation,
                             std::size_t batch = 1) {
  detail::require_rank(x, 2, "conv1d_dilated");
  detail::require_rank(w, 3, "conv1d_dilated");
  if (dilation == 0) throw std::invalid_argument("conv1d_dilated: dilation must be positive");
  const std::size_t c_out = w.dim(0), c_in = w.dim(1), kernel = w.dim(2);
  if (batch == 0 || x.dim(0) != batch * c_in) {
    throw ShapeError("conv1d_dilated: input rows " + std::to_string(x.dim(0)) + " != batch*C_in");
  }
  const std::size_t length = x.dim(1);
  const std::size_t span = (kernel - 1) * dilation;
  if (length < span + 1) {
    throw ShapeError("conv1d_dilated: sequence length " + std::to_string(length) +
                     " shorter than receptive field " + std::to_string(span + 1));
  }
  const bool has_bias = bias.defined();
  if (has_bias && bias.numel() != c_out) throw ShapeError("conv1d_dilated: bias width mismatch");
  const std::size_t out_len = length - span;
  std::vector<double> out(batch * c_out * out_len, 0.0);
  const auto xv = x.data();
  const auto wv = w.data();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t o = 0; o < c_out; ++o) {
      double* dst = out.data() + (b * c_out + o) * out_len;
      if (has_bias) std::fill_n(dst, out_len, bias[o]);
      for (std::size_t c = 0; c < c_in; ++c) {
        const double* src = xv.data() + (b * c_in + c) * length;
        for (std::size_t k = 0; k < kernel; ++k) {
          const double wk = wv[(o * c_in + c) * kernel + k];
          if (wk == 0.0) continue;
          const double* s = src + k * dilation;
          for (std::size_t t = 0; t < out_len; ++t) dst[t] += wk * s[t];
        }
      }
    }
  }
  std::vector<Tensor> parents{x, w};
  if (has_bias) parents.push_back(bias);
  return detail::make_result(
      {batch * c_out, out_len}, std::move(out), parents,
      [=](detail::Node& n) {
        auto& px = n.parent(0);
        auto& pw = n.parent(1);
        if (px.requires_grad) px.ensure_grad();
        if (pw.requires_grad) pw.ensure_grad();
        detail::Node* pb = has_bias ? &n.parent(2) : nullptr;
        if (pb && pb->requires_grad) pb->ensure_grad();
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t o = 0; o < c_out; ++o) {
            const double* g = n.grad.data() + (b * c_out + o) * out_len;
            if (pb && pb->requires_grad) {
              double acc = 0.0;
              for (std::size_t t = 0; t < out_len; ++t) acc += g[t];
              pb->grad[o] += acc;
            }
            for (std::size_t c = 0; c < c_in; ++c) {
              const std::size_t row = (b * c_in + c) * length;
              for (std::size_t k = 0; k < kernel; ++k) {
                const std::size_t widx = (o * c_in + c) * kernel + k;
                const std::size_t shift = row + k * dilation;
                if (pw.requires_grad) {
                  double acc = 0.0;
                  for (std::size_t t = 0; t < out_len; ++t) acc += g[t] * px.value[shift + t];
                  pw.grad[widx] += acc;
                }
                if (px.requires_grad) {
                  const double wk = pw.value[widx];
                  for (std::size_t t = 0; t < out_len; ++t) px.grad[shift + t] += wk * g[t];
                }
              }
            }
          }
        }
      });
}

inline Tensor conv1d_dilated(const Tensor& x, const Tensor& w, std::size_t dilation) {
  return conv1d_dilated(x, w, Tensor{}, dilation, 1);
}

/// Depthwise sequence convolution with one kernel shared by every channel and
/// position. x is [n×c]; `kernel` holds K taps. Non-causal taps are centered
/// (offsets −K/2 … K/2); causal taps cover t−K+1 … t. Boundary reads are clamped
/// to the nearest valid position so a normalized kernel preserves constants.
inline Tensor shared_depthwise_conv(const Tensor& x, const Tensor& kernel, bool causal) {
  detail::require_rank(x, 2, "shared_depthwise_conv");
  const std::size_t n = x.dim(0), c = x.dim(1), k = kernel.numel();
  const std::ptrdiff_t first = causal ? -static_cast<std::ptrdiff_t>(k - 1) : -static_cast<std::ptrdiff_t>(k / 2);
  auto src_row = [n, first](std::size_t t, std::size_t tap) {
    const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(t) + first + static_cast<std::ptrdiff_t>(tap);
    return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(s, 0, static_cast<std::ptrdiff_t>(n) - 1));
  };
  std::vector<double> out(n * c, 0.0);
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t tap = 0; tap < k; ++tap) {
      const std::size_t s = src_row(t, tap);
      const double w = kernel[tap];
      for (std::size_t j = 0; j < c; ++j) out[t * c + j] += w * x[s * c + j];
    }
  return detail::make_result({n, c}, std::move(out), {x, kernel}, [=](detail::Node& node) {
    auto& px = node.parent(0);
    auto& pk = node.parent(1);
    if (px.requires_grad) px.ensure_grad();
    if (pk.requires_grad) pk.ensure_grad();
    for (std::size_t t = 0; t < n; ++t)
      for (std::size_t tap = 0; tap < k; ++tap) {
        const std::size_t s = src_row(t, tap);
        const double w = pk.value[tap];
        double acc = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
          const double g = node.grad[t * c + j];
          acc += g * px.value[s * c + j];
          if (px.requires_grad) px.grad[s * c + j] += w * g;
        }
        if (pk.requires_grad) pk.grad[tap] += acc;
      }
  });
}

/// Checks every stored value is finite; throws NumericError naming `what`.
inline void require_finite(const Tensor& t, const std::string& what) {
  for (double v : t.data()) {
    if (!std::isfinite(v)) throw NumericError(what + " contains a non-finite value");
  }
}

}  // namespace gta
