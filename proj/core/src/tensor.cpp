#include "rxnalign/tensor.hpp"

#include <algorithm>
#include <unordered_set>

namespace rxnalign::nd {

std::int64_t shape_size(const Shape& shape) {
  std::int64_t n = 1;
  for (std::int64_t d : shape) {
    if (d < 0) throw NdError("negative dimension");
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

Tensor Tensor::leaf(Shape shape, std::vector<double> data, bool requires_grad) {
  if (shape_size(shape) != static_cast<std::int64_t>(data.size()))
    throw NdError("data size does not match shape " + shape_str(shape));
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(data);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  std::vector<double> data(static_cast<std::size_t>(shape_size(shape)), 0.0);
  return leaf(std::move(shape), std::move(data), requires_grad);
}

Tensor Tensor::full(Shape shape, double fill, bool requires_grad) {
  std::vector<double> data(static_cast<std::size_t>(shape_size(shape)), fill);
  return leaf(std::move(shape), std::move(data), requires_grad);
}

Tensor Tensor::scalar(double v) { return leaf({1}, {v}, false); }

double Tensor::item() const {
  if (size() != 1) throw NdError("item() on a non-scalar tensor");
  return data()[0];
}

double Tensor::at(std::int64_t row, std::int64_t col) const {
  if (ndim() != 2) throw NdError("at(row, col) needs a 2-d tensor");
  return data()[static_cast<std::size_t>(row * dim(1) + col)];
}

const std::vector<double>& Tensor::grad() const {
  Node& n = check();
  if (!n.requires_grad) throw NdError("tensor does not track gradients");
  if (n.grad.empty())
    throw NdError("gradient not populated; run backward first");
  return n.grad;
}

void backward(const Tensor& out) {
  if (!out.defined()) throw NdError("backward on an undefined tensor");
  std::shared_ptr<Node> root = out.node();
  if (root->value.size() != 1) throw NdError("backward needs a scalar output");
  if (root->consumed) throw NdError("backward already ran on this graph");

  // Post-order over the tape, iteratively.
  std::vector<Node*> topo;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{root.get(), 0}};
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (seen.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      topo.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* node : topo) {
    if (node->backward_fn && node->consumed)
      throw NdError(std::string("graph through op '") + node->op +
                    "' was already consumed by an earlier backward");
  }

  root->ensure_grad()[0] = 1.0;
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    Node* node = *it;
    if (!node->requires_grad || !node->backward_fn) continue;
    node->ensure_grad();
    for (auto& parent : node->parents)
      if (parent->requires_grad) parent->ensure_grad();
    node->backward_fn();
    node->consumed = true;
  }
  root->consumed = true;
}

}  // namespace rxnalign::nd
