#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace rtdlab {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

// One node of the reverse-mode computation graph. `backprop` pulls this
// node's grad into every parent that requires one; parents are owned through
// shared_ptr so a held output keeps its subgraph alive.
template <class S>
struct TensorNode {
  Shape shape;
  std::vector<S> value;
  std::vector<S> grad;  // empty until backward touches this node
  bool requires_grad = false;
  const char* op = "";
  std::vector<std::shared_ptr<TensorNode<S>>> parents;
  std::function<void()> backprop;

  void ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), S(0));
  }
};

// Value-semantic handle onto a shared graph node. Copies alias the same
// storage, matching how parameters are shared between models.
template <class S>
class Tensor {
 public:
  using Scalar = S;

  Tensor() = default;

  static Tensor zeros(Shape shape) { return full(std::move(shape), S(0)); }

  static Tensor full(Shape shape, S fill) {
    auto n = std::make_shared<TensorNode<S>>();
    n->value.assign(numel(shape), fill);
    n->shape = std::move(shape);
    return Tensor(std::move(n));
  }

  static Tensor from(Shape shape, std::vector<S> data) {
    if (numel(shape) != data.size()) {
      throw std::invalid_argument("Tensor::from: shape " + shape_str(shape) + " wants " +
                                  std::to_string(numel(shape)) + " values, got " +
                                  std::to_string(data.size()));
    }
    auto n = std::make_shared<TensorNode<S>>();
    n->shape = std::move(shape);
    n->value = std::move(data);
    return Tensor(std::move(n));
  }

  static Tensor scalar(S v) { return from({}, {v}); }

  // Trainable leaf.
  static Tensor param(Shape shape, std::vector<S> data) {
    Tensor t = from(std::move(shape), std::move(data));
    t.n_->requires_grad = true;
    return t;
  }

  bool defined() const { return n_ != nullptr; }
  const Shape& shape() const { return n_->shape; }
  std::size_t rank() const { return n_->shape.size(); }
  std::size_t dim(std::size_t i) const { return n_->shape.at(i); }
  std::size_t size() const { return n_->value.size(); }

  std::vector<S>& values() { return n_->value; }
  const std::vector<S>& values() const { return n_->value; }
  S* data() { return n_->value.data(); }
  const S* data() const { return n_->value.data(); }

  bool requires_grad() const { return n_->requires_grad; }
  void set_requires_grad(bool b) { n_->requires_grad = b; }

  bool has_grad() const { return !n_->grad.empty(); }
  std::vector<S>& grad() {
    n_->ensure_grad();
    return n_->grad;
  }
  const std::vector<S>& grad() const {
    n_->ensure_grad();
    return n_->grad;
  }
  void zero_grad() {
    if (!n_->grad.empty()) std::fill(n_->grad.begin(), n_->grad.end(), S(0));
  }

  S item() const {
    if (size() != 1) {
      throw std::invalid_argument("Tensor::item: tensor has " + std::to_string(size()) +
                                  " elements, expected 1");
    }
    return n_->value[0];
  }

  // Value copy with no graph attached.
  Tensor detach() const {
    auto n = std::make_shared<TensorNode<S>>();
    n->shape = n_->shape;
    n->value = n_->value;
    return Tensor(std::move(n));
  }

  std::shared_ptr<TensorNode<S>> node() const { return n_; }
  TensorNode<S>* raw() const { return n_.get(); }

 private:
  explicit Tensor(std::shared_ptr<TensorNode<S>> n) : n_(std::move(n)) {}

  std::shared_ptr<TensorNode<S>> n_;
};

namespace detail {

// Reverse topological order (loss last) over the ancestor graph.
template <class S>
void topo_visit(TensorNode<S>* root, std::vector<TensorNode<S>*>& order) {
  std::unordered_set<TensorNode<S>*> seen;
  // Iterative post-order DFS; graphs of deep models overflow the stack with
  // plain recursion.
  std::vector<std::pair<TensorNode<S>*, std::size_t>> stack;
  stack.emplace_back(root, 0);
  seen.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      TensorNode<S>* p = node->parents[next++].get();
      if (seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
}

}  // namespace detail

// Backpropagate from a scalar loss, accumulating gradients into every
// reachable node that requires them. Each node's backprop runs exactly once,
// after all of its consumers have contributed to its grad.
template <class S>
void backward(const Tensor<S>& loss) {
  if (loss.size() != 1) {
    throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                shape_str(loss.shape()));
  }
  std::vector<TensorNode<S>*> order;
  detail::topo_visit(loss.raw(), order);
  loss.raw()->ensure_grad();
  loss.raw()->grad[0] = S(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorNode<S>* node = *it;
    if (node->backprop) {
      node->ensure_grad();
      node->backprop();
    }
  }
}

}  // namespace rtdlab
