#pragma once

#include <algorithm>
#include <concepts>
#include <cstddef>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace fjsp::nn {

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Recording switch for the autodiff tape (per thread).
class GradMode {
 public:
  static bool enabled() { return flag(); }
  static void set(bool on) { flag() = on; }

 private:
  static bool& flag() {
    thread_local bool on = true;
    return on;
  }
};

/// Disables graph recording for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard() : prev_(GradMode::enabled()) { GradMode::set(false); }
  ~NoGradGuard() { GradMode::set(prev_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

template <std::floating_point T>
struct Node {
  int rows = 0;
  int cols = 0;
  std::vector<T> value;
  std::vector<T> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  std::size_t size() const { return value.size(); }
  T* g() {
    if (grad.size() != value.size()) grad.assign(value.size(), T(0));
    return grad.data();
  }
};

/// Dense row-major matrix with optional reverse-mode gradient. Copies share
/// storage (handle semantics); use clone() for a deep copy.
template <std::floating_point T>
class Tensor {
 public:
  using Scalar = T;
  using NodePtr = std::shared_ptr<Node<T>>;

  Tensor() = default;
  explicit Tensor(NodePtr n) : n_(std::move(n)) {}

  static Tensor zeros(int rows, int cols, bool requires_grad = false) {
    return from(rows, cols, std::vector<T>(static_cast<std::size_t>(rows) * cols, T(0)), requires_grad);
  }
  static Tensor from(int rows, int cols, std::vector<T> data, bool requires_grad = false) {
    if (rows < 0 || cols < 0 || data.size() != static_cast<std::size_t>(rows) * cols)
      throw ShapeError("tensor data length does not match shape");
    auto n = std::make_shared<Node<T>>();
    n->rows = rows;
    n->cols = cols;
    n->value = std::move(data);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
  }
  static Tensor scalar(T v, bool requires_grad = false) { return from(1, 1, {v}, requires_grad); }
  static Tensor row(std::vector<T> v, bool requires_grad = false) {
    const int n = static_cast<int>(v.size());
    return from(1, n, std::move(v), requires_grad);
  }

  bool defined() const { return n_ != nullptr; }
  int rows() const { return n_->rows; }
  int cols() const { return n_->cols; }
  std::vector<int> shape() const { return {n_->rows, n_->cols}; }
  std::size_t size() const { return n_->value.size(); }
  T* data() { return n_->value.data(); }
  const T* data() const { return n_->value.data(); }
  std::vector<T>& values() { return n_->value; }
  const std::vector<T>& values() const { return n_->value; }
  T at(int r, int c) const { return n_->value[static_cast<std::size_t>(r) * n_->cols + c]; }
  T& at(int r, int c) { return n_->value[static_cast<std::size_t>(r) * n_->cols + c]; }
  T item() const {
    if (size() != 1) throw ShapeError("item() on a non-scalar tensor");
    return n_->value[0];
  }

  bool requires_grad() const { return n_->requires_grad; }
  /// Gradient buffer (zeros if nothing accumulated yet).
  const std::vector<T>& grad() const {
    n_->g();
    return n_->grad;
  }
  std::vector<T>& grad_mut() {
    n_->g();
    return n_->grad;
  }
  void zero_grad() { std::fill(n_->grad.begin(), n_->grad.end(), T(0)); }

  Tensor clone(bool requires_grad = false) const { return from(rows(), cols(), n_->value, requires_grad); }
  /// Same values, cut from the graph.
  Tensor detach() const { return clone(false); }

  Node<T>* node() const { return n_.get(); }
  const NodePtr& ptr() const { return n_; }

 private:
  NodePtr n_;
};

/// Creates an op result. The backward closure receives the result node; it
/// reads parents through `out.parents` and must only write to the gradients
/// of parents with requires_grad set.
template <class T, class Backward>
Tensor<T> make_op(int rows, int cols, std::vector<T> value, std::vector<Tensor<T>> parents, Backward&& backward) {
  auto t = Tensor<T>::from(rows, cols, std::move(value));
  if (!GradMode::enabled()) return t;
  bool needs = false;
  for (const auto& p : parents) needs = needs || p.requires_grad();
  if (!needs) return t;
  auto* n = t.node();
  n->requires_grad = true;
  n->parents.reserve(parents.size());
  for (auto& p : parents) n->parents.push_back(p.ptr());
  n->backward = std::forward<Backward>(backward);
  return t;
}

/// Reverse-mode sweep from a scalar loss. Leaf gradients accumulate across
/// calls; interior gradients are reset first, so the same graph may be
/// swept again (each sweep adds another copy of d loss / d leaf).
template <class T>
void backward(const Tensor<T>& loss) {
  if (loss.size() != 1) throw ShapeError("backward() requires a scalar loss");
  if (!loss.requires_grad()) return;

  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> visited;
  std::vector<std::pair<Node<T>*, std::size_t>> stack{{loss.node(), 0}};
  visited.insert(loss.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<T>* p = node->parents[next++].get();
      if (p->requires_grad && !p->parents.empty() && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  for (auto* n : order) n->grad.assign(n->value.size(), T(0));
  loss.node()->g()[0] = T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (n->backward) n->backward(*n);
  }
}

}  // namespace fjsp::nn
