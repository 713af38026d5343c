#pragma once

// Reverse-mode automatic differentiation over dense double tensors.  Graphs
// are built dynamically by the op functions in ops.hpp; backward() walks the
// tape once and accumulates into leaf gradients.

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace rxnalign::nd {

class NdError : public std::runtime_error {
 public:
  explicit NdError(std::string message)
      : std::runtime_error(std::move(message)) {}
};

using Shape = std::vector<std::int64_t>;

std::int64_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  bool consumed = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void()> backward_fn;

  std::vector<double>& ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

class Tensor {
 public:
  Tensor() = default;

  static Tensor leaf(Shape shape, std::vector<double> data,
                     bool requires_grad = false);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double fill, bool requires_grad = false);
  static Tensor scalar(double v);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return check().shape; }
  std::int64_t size() const { return static_cast<std::int64_t>(check().value.size()); }
  std::int64_t dim(int axis) const { return check().shape.at(axis); }
  int ndim() const { return static_cast<int>(check().shape.size()); }

  const std::vector<double>& data() const { return check().value; }
  std::vector<double>& mutable_data() { return check().value; }
  double item() const;
  double at(std::int64_t row, std::int64_t col) const;

  bool requires_grad() const { return check().requires_grad; }
  const std::vector<double>& grad() const;
  void zero_grad() { check().grad.assign(check().value.size(), 0.0); }

  std::shared_ptr<Node> node() const { return node_; }
  static Tensor from_node(std::shared_ptr<Node> node) { return Tensor(std::move(node)); }

 private:
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
  Node& check() const {
    if (!node_) throw NdError("use of an undefined tensor");
    return *node_;
  }
  std::shared_ptr<Node> node_;
};

// Runs reverse accumulation from a scalar output.  Interior nodes are marked
// consumed; running backward through them twice throws.
void backward(const Tensor& out);

}  // namespace rxnalign::nd
