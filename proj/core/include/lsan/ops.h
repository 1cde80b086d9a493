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

#ifndef LSAN_OPS_H_
#define LSAN_OPS_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "lsan/tensor.h"

namespace lsan {

// Differentiable primitives. Unless stated otherwise matrices are rank-2
// and vectors are 1xN rows.

enum class Activation { kSilu, kGelu };

// SiLU(x) = x * sigmoid(x); GeLU(x) = x * Phi(x) with the exact erf CDF.
// Throws NumericDomainError on NaN or infinite input.
template <typename Real>
Tensor<Real> Activate(Activation kind, const Tensor<Real>& x);

template <typename Real>
Tensor<Real> Silu(const Tensor<Real>& x) {
  return Activate(Activation::kSilu, x);
}

template <typename Real>
Tensor<Real> Gelu(const Tensor<Real>& x) {
  return Activate(Activation::kGelu, x);
}

// a[m x k] * b[k x n], or a[m x k] * b[n x k]^T when transpose_b is set.
template <typename Real>
Tensor<Real> Matmul(const Tensor<Real>& a, const Tensor<Real>& b,
                    bool transpose_b = false);

// Elementwise sum of same-shape tensors.
template <typename Real>
Tensor<Real> Add(const Tensor<Real>& a, const Tensor<Real>& b);

// a[m x n] + bias broadcast over rows; bias has n elements (any rank).
template <typename Real>
Tensor<Real> AddRow(const Tensor<Real>& a, const Tensor<Real>& bias);

// Elementwise (Hadamard) product.
template <typename Real>
Tensor<Real> Mul(const Tensor<Real>& a, const Tensor<Real>& b);

// Row i of a[m x n] scaled by column[i]; column is m x 1.
template <typename Real>
Tensor<Real> MulColumn(const Tensor<Real>& a, const Tensor<Real>& column);

// Per-row inner product of two m x n matrices -> m x 1.
template <typename Real>
Tensor<Real> RowDot(const Tensor<Real>& a, const Tensor<Real>& b);

template <typename Real>
Tensor<Real> Scale(const Tensor<Real>& a, Real factor);

// Concatenation of rank-2 tensors along axis 0 (rows) or 1 (columns).
template <typename Real>
Tensor<Real> Concat(std::span<const Tensor<Real>> parts, std::size_t axis);

// Half-open [begin, end) slice of a rank-2 tensor along one axis.
template <typename Real>
Tensor<Real> Slice(const Tensor<Real>& a, std::size_t axis, std::size_t begin,
                   std::size_t end);

// Gathers rows of table[r x n]; backward scatter-adds into the table.
template <typename Real>
Tensor<Real> IndexSelect(const Tensor<Real>& table,
                         std::span<const std::int32_t> rows);

// Boolean keep-mask for Softmax. Either the full shape of the input, or a
// vector broadcast along the non-softmax axis of a rank-2 input (a column
// mask of length cols for axis 1, a row mask of length rows for axis 0).
struct Mask {
  Shape shape;
  std::vector<std::uint8_t> keep;
};

// Numerically stable softmax along `axis` (0 or 1 for rank-2, 0 for
// rank-1). Masked entries get probability exactly zero, equivalent to an
// additive -inf logit. A slice with every entry masked throws
// DegenerateSliceError.
template <typename Real>
Tensor<Real> Softmax(const Tensor<Real>& x, std::size_t axis,
                     const Mask* mask = nullptr);

// Sum of all elements -> scalar.
template <typename Real>
Tensor<Real> Sum(const Tensor<Real>& x);

// Sum of squared elements -> scalar.
template <typename Real>
Tensor<Real> SumSquares(const Tensor<Real>& x);

// -log softmax(logits)[target] over all elements of `logits`, via
// log-sum-exp. Returns a scalar.
template <typename Real>
Tensor<Real> CrossEntropy(const Tensor<Real>& logits, std::size_t target);

// Per-channel 1-D convolution over the rows of h[T x D] with
// kernels[L x D] (L odd), centred, zero padded:
//   out[i, d] = sum_j kernels[j, d] * h[i + j - (L - 1) / 2, d].
template <typename Real>
Tensor<Real> DepthwiseConv1d(const Tensor<Real>& h,
                             const Tensor<Real>& kernels);

}  // namespace lsan

#endif  // LSAN_OPS_H_
