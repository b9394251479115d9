#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gta/error.hpp"

namespace gta {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  // Propagates this node's grad into its parents. Empty for leaves.
  std::function<void(Node&)> backward;
  std::vector<std::shared_ptr<Node>> parents;

  void ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
  }
  Node& parent(std::size_t i) { return *parents[i]; }
};

inline bool& grad_mode() {
  thread_local bool enabled = true;
  return enabled;
}

}  // namespace detail

/// Dense row-major float64 array with an optional gradient slot.
///
/// Copies are shallow: two Tensor handles may alias the same storage, which is
/// how parameters are shared between a model and its optimizer.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    const std::size_t n = shape_numel(shape);
    return from(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
  }

  static Tensor full(Shape shape, double value, bool requires_grad = false) {
    const std::size_t n = shape_numel(shape);
    return from(std::move(shape), std::vector<double>(n, value), requires_grad);
  }

  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false) {
    for (std::size_t extent : shape) {
      if (extent == 0) throw ShapeError("tensor extents must be positive, got " + shape_str(shape));
    }
    if (shape_numel(shape) != values.size()) {
      throw ShapeError("shape " + shape_str(shape) + " does not match " +
                       std::to_string(values.size()) + " values");
    }
    for (double v : values) {
      if (!std::isfinite(v)) throw NumericError("non-finite value in tensor data");
    }
    auto node = std::make_shared<detail::Node>();
    node->shape = std::move(shape);
    node->value = std::move(values);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
  }

  static Tensor scalar(double v, bool requires_grad = false) { return from({1}, {v}, requires_grad); }

  static Tensor vector(std::vector<double> values, bool requires_grad = false) {
    const std::size_t n = values.size();
    return from({n}, std::move(values), requires_grad);
  }

  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                       bool requires_grad = false) {
    return from({rows, cols}, std::move(values), requires_grad);
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t numel() const { return node_->value.size(); }

  std::span<const double> data() const { return node_->value; }
  // Direct mutation bypasses the tape; used by optimizers and initializers.
  std::span<double> mutable_data() { return node_->value; }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }

  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad() {
    node_->ensure_grad();
    return node_->grad;
  }
  void zero_grad() { node_->grad.clear(); }

  double item() const {
    if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
    return node_->value[0];
  }
  double operator[](std::size_t i) const { return node_->value[i]; }
  double at(std::size_t r, std::size_t c) const { return node_->value[r * node_->shape.back() + c]; }

  /// Fresh leaf holding a copy of the values.
  Tensor detach() const { return from(shape(), node_->value, false); }

  bool same_storage(const Tensor& other) const { return node_ == other.node_; }

  // Internal access for ops.
  const std::shared_ptr<detail::Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Disables recording for its lifetime; ops then produce plain constants.
class NoGradGuard {
 public:
  NoGradGuard() : previous_(detail::grad_mode()) { detail::grad_mode() = false; }
  ~NoGradGuard() { detail::grad_mode() = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Ordered record of differentiable operations for one execution context.
/// Nodes are appended at creation, so the list is topologically sorted.
class GradTape {
 public:
  static GradTape& current() {
    thread_local GradTape tape;
    return tape;
  }

  void record(std::shared_ptr<detail::Node> node) { nodes_.push_back(std::move(node)); }
  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

  void backward(const Tensor& loss) {
    if (!loss.defined() || loss.numel() != 1) {
      throw ShapeError("backward() requires a scalar loss");
    }
    const detail::Node* target = loss.node().get();
    std::size_t end = nodes_.size();
    while (end > 0 && nodes_[end - 1].get() != target) --end;
    if (end == 0) {
      clear();
      throw std::logic_error("backward(): loss is not on the gradient tape (detached graph)");
    }
    if (!std::isfinite(loss.item())) {
      clear();
      throw NumericError("backward(): loss is not finite");
    }
    auto& root = *nodes_[end - 1];
    root.ensure_grad();
    root.grad[0] += 1.0;
    for (std::size_t i = end; i-- > 0;) {
      auto& node = *nodes_[i];
      if (!node.grad.empty() && node.backward) node.backward(node);
    }
    clear();
  }

 private:
  std::vector<std::shared_ptr<detail::Node>> nodes_;
};

/// Populates .grad on every parameter reachable from a scalar loss, then clears the tape.
inline void backward(const Tensor& loss) { GradTape::current().backward(loss); }

namespace detail {

/// Builds an op output. When recording is on and any parent requires grad,
/// the node is attached to the tape with `rule` as its backward function.
template <class Rule>
Tensor make_result(Shape shape, std::vector<double> values, std::vector<Tensor> parents, Rule&& rule) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  bool needs = false;
  if (grad_mode()) {
    for (const auto& p : parents) needs = needs || p.requires_grad();
  }
  if (needs) {
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (auto& p : parents) node->parents.push_back(p.node());
    node->backward = std::forward<Rule>(rule);
    GradTape::current().record(node);
  }
  return Tensor(std::move(node));
}

inline Tensor make_constant(Shape shape, std::vector<double> values) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  return Tensor(std::move(node));
}

}  // namespace detail

}  // namespace gta
