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

#include "lsan/tensor.h"

#include <functional>
#include <numeric>
#include <sstream>
#include <unordered_set>
#include <utility>

#include "lsan/error.h"

namespace lsan {
namespace {

thread_local bool grad_enabled = true;

}  // namespace

std::size_t NumElements(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string ShapeToString(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

const char* OpName(OpKind op) {
  switch (op) {
    case OpKind::kLeaf: return "leaf";
    case OpKind::kMatmul: return "matmul";
    case OpKind::kAdd: return "add";
    case OpKind::kAddRow: return "add_row";
    case OpKind::kMul: return "mul";
    case OpKind::kMulColumn: return "mul_column";
    case OpKind::kRowDot: return "row_dot";
    case OpKind::kScale: return "scale";
    case OpKind::kConcat: return "concat";
    case OpKind::kSlice: return "slice";
    case OpKind::kIndexSelect: return "index_select";
    case OpKind::kSoftmax: return "softmax";
    case OpKind::kSilu: return "silu";
    case OpKind::kGelu: return "gelu";
    case OpKind::kSum: return "sum";
    case OpKind::kSumSquares: return "sum_squares";
    case OpKind::kCrossEntropy: return "cross_entropy";
    case OpKind::kDepthwiseConv: return "depthwise_conv";
  }
  return "unknown";
}

bool GradEnabled() { return grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(grad_enabled) { grad_enabled = false; }
NoGradGuard::~NoGradGuard() { grad_enabled = previous_; }

template <typename Real>
Tensor<Real> Tensor<Real>::Zeros(Shape shape, bool requires_grad) {
  std::vector<Real> values(NumElements(shape), Real(0));
  return FromValues(std::move(shape), std::move(values), requires_grad);
}

template <typename Real>
Tensor<Real> Tensor<Real>::FromValues(Shape shape, std::vector<Real> values,
                                      bool requires_grad) {
  for (std::size_t extent : shape) {
    if (extent == 0) {
      throw ContractError("tensor extents must be positive, got " +
                          ShapeToString(shape));
    }
  }
  if (NumElements(shape) != values.size()) {
    throw ContractError("shape " + ShapeToString(shape) + " needs " +
                        std::to_string(NumElements(shape)) + " values, got " +
                        std::to_string(values.size()));
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

template <typename Real>
Tensor<Real> Tensor<Real>::Scalar(Real value, bool requires_grad) {
  return FromValues({}, {value}, requires_grad);
}

template <typename Real>
std::size_t Tensor<Real>::rows() const {
  if (rank() != 2) {
    throw ContractError("rows() on rank-" + std::to_string(rank()) +
                        " tensor");
  }
  return node_->shape[0];
}

template <typename Real>
std::size_t Tensor<Real>::cols() const {
  if (rank() != 2) {
    throw ContractError("cols() on rank-" + std::to_string(rank()) +
                        " tensor");
  }
  return node_->shape[1];
}

template <typename Real>
std::span<Real> Tensor<Real>::mutable_values() {
  if (node_->op != OpKind::kLeaf) {
    throw ContractError(std::string("cannot mutate values of a '") +
                        OpName(node_->op) + "' result");
  }
  return node_->value;
}

template <typename Real>
Real Tensor<Real>::item() const {
  if (size() != 1) {
    throw ContractError("item() on tensor of shape " +
                        ShapeToString(shape()));
  }
  return node_->value[0];
}

template <typename Real>
Real Tensor<Real>::at(std::size_t row, std::size_t col) const {
  if (row >= rows() || col >= cols()) {
    throw IndexError("element (" + std::to_string(row) + "," +
                     std::to_string(col) + ") outside " +
                     ShapeToString(shape()));
  }
  return node_->value[row * cols() + col];
}

template <typename Real>
void Tensor<Real>::ZeroGrad() {
  node_->grad.assign(node_->value.size(), Real(0));
}

template <typename Real>
void Tensor<Real>::Backward(Real seed) const {
  if (!defined() || size() != 1) {
    throw ContractError("backward requires a scalar loss, got shape " +
                        (defined() ? ShapeToString(shape()) : "<undefined>"));
  }
  ComputeGraph<Real>::Trace(*this).Backward(seed);
}

template <typename Real>
ComputeGraph<Real> ComputeGraph<Real>::Trace(const Tensor<Real>& root) {
  ComputeGraph graph;
  if (!root.defined() || !root.requires_grad()) return graph;
  // Iterative post-order DFS; a node is emitted after all of its inputs.
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next_input] = stack.back();
    if (next_input < node->inputs.size()) {
      Node* input = node->inputs[next_input++].get();
      if (input->requires_grad && visited.insert(input).second) {
        stack.emplace_back(input, 0);
      }
      continue;
    }
    graph.order_.push_back(node);
    stack.pop_back();
  }
  return graph;
}

template <typename Real>
void ComputeGraph<Real>::Backward(Real seed) {
  if (order_.empty()) return;
  Node* root = order_.back();
  root->EnsureGrad()[0] += seed;
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    Node* node = *it;
    if (!node->backward) continue;
    node->EnsureGrad();
    node->backward(*node);
  }
}

template class Tensor<float>;
template class Tensor<double>;
template class ComputeGraph<float>;
template class ComputeGraph<double>;

}  // namespace lsan
