// Copyright 2026 The LSAN Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef LSAN_TENSOR_H_
#define LSAN_TENSOR_H_

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace lsan {

using Shape = std::vector<std::size_t>;

std::size_t NumElements(const Shape& shape);
std::string ShapeToString(const Shape& shape);

// Primitive operations recorded in the compute graph.
enum class OpKind {
  kLeaf,
  kMatmul,
  kAdd,
  kAddRow,
  kMul,
  kMulColumn,
  kRowDot,
  kScale,
  kConcat,
  kSlice,
  kIndexSelect,
  kSoftmax,
  kSilu,
  kGelu,
  kSum,
  kSumSquares,
  kCrossEntropy,
  kDepthwiseConv,
};

const char* OpName(OpKind op);

namespace internal {

template <typename Real>
struct Node {
  OpKind op = OpKind::kLeaf;
  Shape shape;
  std::vector<Real> value;
  // Empty until a backward pass (or the optimiser) touches it.
  std::vector<Real> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads this node's grad and accumulates into the inputs' grads.
  std::function<void(Node&)> backward;

  Node() = default;
  Node(const Node&) = delete;
  Node& operator=(const Node&) = delete;
  // Unlinks long chains iteratively; the default would recurse once per node.
  ~Node() {
    std::vector<std::shared_ptr<Node>> pending = std::move(inputs);
    while (!pending.empty()) {
      std::shared_ptr<Node> next = std::move(pending.back());
      pending.pop_back();
      if (next && next.use_count() == 1) {
        for (auto& in : next->inputs) pending.push_back(std::move(in));
        next->inputs.clear();
      }
    }
  }

  std::vector<Real>& EnsureGrad() {
    if (grad.size() != value.size()) grad.assign(value.size(), Real(0));
    return grad;
  }
};

}  // namespace internal

// Graph recording is on by default. While a NoGradGuard is alive on the
// current thread, operations produce plain values with no history.
bool GradEnabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Dense row-major tensor with reverse-mode autodiff. A Tensor is a cheap
// handle; copies share the underlying node. Values of non-leaf tensors are
// fixed once the producing operation returns.
//
// Real is float for training and inference, double for gradient checking.
template <typename Real>
class Tensor {
 public:
  using Node = internal::Node<Real>;

  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor Zeros(Shape shape, bool requires_grad = false);
  static Tensor FromValues(Shape shape, std::vector<Real> values,
                           bool requires_grad = false);
  static Tensor Scalar(Real value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->value.size(); }
  // Matrix view: rank-2 tensors only.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const Real> values() const& { return node_->value; }
  // A temporary hands back a copy so the values outlive it.
  std::vector<Real> values() && { return node_->value; }
  // Only leaves may be mutated in place (parameter updates, loading).
  std::span<Real> mutable_values();
  Real item() const;
  Real at(std::size_t row, std::size_t col) const;

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return node_->grad.size() == node_->value.size(); }
  std::span<const Real> grad() const { return node_->grad; }
  std::span<Real> mutable_grad() { return node_->EnsureGrad(); }
  void ZeroGrad();

  OpKind op() const { return node_->op; }
  const std::shared_ptr<Node>& node() const { return node_; }

  // Reverse pass from a single-element tensor, seeding d(self)/d(self)=seed.
  // Gradients accumulate additively into every reachable requires_grad node.
  void Backward(Real seed = Real(1)) const;

 private:
  std::shared_ptr<Node> node_;
};

// Topologically ordered view of the nodes that a root depends on. Inputs
// always precede the nodes that consume them; each node appears once.
template <typename Real>
class ComputeGraph {
 public:
  using Node = internal::Node<Real>;

  static ComputeGraph Trace(const Tensor<Real>& root);

  std::span<Node* const> nodes() const { return order_; }
  void Backward(Real seed);

 private:
  std::vector<Node*> order_;
};

// A tensor with a stable, human-readable name (parameter enumeration,
// checkpoints, gradient reports).
template <typename Real>
struct NamedTensor {
  std::string name;
  Tensor<Real> tensor;
};

extern template class Tensor<float>;
extern template class Tensor<double>;
extern template class ComputeGraph<float>;
extern template class ComputeGraph<double>;

}  // namespace lsan

#endif  // LSAN_TENSOR_H_
