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

#include "lsan/ops.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <utility>

#include "lsan/error.h"

namespace lsan {
namespace {

template <typename Real>
using NodePtr = std::shared_ptr<internal::Node<Real>>;

// Creates the output node; records inputs only when some input needs a
// gradient and recording is enabled.
template <typename Real>
NodePtr<Real> MakeResult(OpKind op, Shape shape, std::vector<Real> value,
                         std::initializer_list<const Tensor<Real>*> inputs) {
  auto node = std::make_shared<internal::Node<Real>>();
  node->op = op;
  node->shape = std::move(shape);
  node->value = std::move(value);
  if (GradEnabled()) {
    for (const Tensor<Real>* input : inputs) {
      if (input->requires_grad()) node->requires_grad = true;
    }
    if (node->requires_grad) {
      for (const Tensor<Real>* input : inputs) {
        node->inputs.push_back(input->node());
      }
    }
  }
  return node;
}

template <typename Real>
std::vector<Real>* GradOf(internal::Node<Real>& node, std::size_t input) {
  auto& in = *node.inputs[input];
  if (!in.requires_grad) return nullptr;
  return &in.EnsureGrad();
}

template <typename Real>
void RequireRank2(const Tensor<Real>& t, const char* op) {
  if (!t.defined() || t.rank() != 2) {
    throw ContractError(std::string(op) + " expects a rank-2 tensor, got " +
                        (t.defined() ? ShapeToString(t.shape())
                                     : std::string("<undefined>")));
  }
}

template <typename Real>
void RequireSameShape(const Tensor<Real>& a, const Tensor<Real>& b,
                      const char* op) {
  if (a.shape() != b.shape()) {
    throw ContractError(std::string(op) + " shape mismatch " +
                        ShapeToString(a.shape()) + " vs " +
                        ShapeToString(b.shape()));
  }
}

double StandardNormalCdf(double x) {
  return 0.5 * (1.0 + std::erf(x / std::sqrt(2.0)));
}

double StandardNormalPdf(double x) {
  constexpr double kInvSqrt2Pi = 0.39894228040143267794;
  return kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

double Sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

template <typename Real>
Tensor<Real> Activate(Activation kind, const Tensor<Real>& x) {
  const auto in = x.values();
  std::vector<Real> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    const double v = in[i];
    if (!std::isfinite(v)) {
      throw NumericDomainError(
          std::string(kind == Activation::kSilu ? "silu" : "gelu") +
          " received a non-finite input at element " + std::to_string(i));
    }
    out[i] = static_cast<Real>(kind == Activation::kSilu
                                   ? v * Sigmoid(v)
                                   : v * StandardNormalCdf(v));
  }
  const OpKind op =
      kind == Activation::kSilu ? OpKind::kSilu : OpKind::kGelu;
  auto node = MakeResult<Real>(op, x.shape(), std::move(out), {&x});
  if (node->requires_grad) {
    node->backward = [kind](internal::Node<Real>& self) {
      auto* gx = GradOf(self, 0);
      if (gx == nullptr) return;
      const auto& xv = self.inputs[0]->value;
      for (std::size_t i = 0; i < xv.size(); ++i) {
        const double v = xv[i];
        double d;
        if (kind == Activation::kSilu) {
          const double s = Sigmoid(v);
          d = s * (1.0 + v * (1.0 - s));
        } else {
          d = StandardNormalCdf(v) + v * StandardNormalPdf(v);
        }
        (*gx)[i] += static_cast<Real>(self.grad[i] * d);
      }
    };
  }
  return Tensor<Real>(std::move(node));
}

template <typename Real>
Tensor<Real> Matmul(const Tensor<Real>& a, const Tensor<Real>& b,
                    bool transpose_b) {
  RequireRank2(a, "matmul");
  RequireRank2(b, "matmul");
  const std::size_t m = a.rows();
  const std::size_t k = a.cols();
  const std::size_t n = transpose_b ? b.rows() : b.cols();
  const std::size_t b_inner = transpose_b ? b.cols() : b.rows();
  if (k != b_inner) {
    throw ContractError("matmul inner extents differ: " +
                        ShapeToString(a.shape()) +
                        (transpose_b ? " x T" : " x ") +
                        ShapeToString(b.shape()));
  }
  const Real* av = a.values().data();
  const Real* bv = b.values().data();
  std::vector<Real> out(m * n, Real(0));
  if (transpose_b) {
    for (std::size_t i = 0; i < m; ++i) {
      const Real* arow = av + i * k;
      for (std::size_t j = 0; j < n; ++j) {
        const Real* brow = bv + j * k;
        Real acc = 0;
        for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
        out[i * n + j] = acc;
      }
    }
  } else {
    for (std::size_t i = 0; i < m; ++i) {
      Real* orow = out.data() + i * n;
      for (std::size_t p = 0; p < k; ++p) {
        const Real aip = av[i * k + p];
        const Real* brow = bv + p * n;
        for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
      }
    }
  }
  auto node = MakeResult<Real>(OpKind::kMatmul, {m, n}, std::move(out),
                               {&a, &b});
  if (node->requires_grad) {
    node->backward = [m, k, n, transpose_b](internal::Node<Real>& self) {
      const Real* g = self.grad.data();
      const Real* av = self.inputs[0]->value.data();
      const Real* bv = self.inputs[1]->value.data();
      if (auto* ga = GradOf(self, 0)) {
        Real* gav = ga->data();
        for (std::size_t i = 0; i < m; ++i) {
          const Real* grow = g + i * n;
          Real* garow = gav + i * k;
          if (transpose_b) {
            // dA[i,:] += sum_j g[i,j] * B[j,:]
            for (std::size_t j = 0; j < n; ++j) {
              const Real gij = grow[j];
              if (gij == Real(0)) continue;
              const Real* brow = bv + j * k;
              for (std::size_t p = 0; p < k; ++p) garow[p] += gij * brow[p];
            }
          } else {
            // dA[i,p] += g[i,:] . B[p,:]
            for (std::size_t p = 0; p < k; ++p) {
              const Real* brow = bv + p * n;
              Real acc = 0;
              for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
              garow[p] += acc;
            }
          }
        }
      }
      if (auto* gb = GradOf(self, 1)) {
        Real* gbv = gb->data();
        for (std::size_t i = 0; i < m; ++i) {
          const Real* grow = g + i * n;
          const Real* arow = av + i * k;
          if (transpose_b) {
            // dB[j,:] += g[i,j] * A[i,:]
            for (std::size_t j = 0; j < n; ++j) {
              const Real gij = grow[j];
              if (gij == Real(0)) continue;
              Real* gbrow = gbv + j * k;
              for (std::size_t p = 0; p < k; ++p) gbrow[p] += gij * arow[p];
            }
          } else {
            // dB[p,:] += A[i,p] * g[i,:]
            for (std::size_t p = 0; p < k; ++p) {
              const Real aip = arow[p];
              if (aip == Real(0)) continue;
              Real* gbrow = gbv + p * n;
              for (std::size_t j = 0; j < n; ++j) gbrow[j] += aip * grow[j];
            }
          }
        }
      }
    };
  }
  return Tensor<Real>(std::move(node));
}

template <typename Real>
Tensor<Real> Add(const Tensor<Real>& a, const Tensor<Real>& b) {
  RequireSameShape(a, b, "add");
  std::vector<Real> out(a.values().begin(), a.values().end());
  const auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  auto node = MakeResult<Real>(OpKind::kAdd, a.shape(), std::move(out),
                               {&a, &b});
  if (node->requires_grad) {
    node->backward = [](internal::Node<Real>& self) {
      for (std::size_t input = 0; input < 2; ++input) {
        if (auto* g = GradOf(self, input)) {
          for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
        }
      }
    };
  }
  return Tensor<Real>(std::move(node));
}

template <typename Real>
Tensor<Real> AddRow(const Tensor<Real>& a, const Tensor<Real>& bias) {
  RequireRank2(a, "add_row");
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  if (bias.size() != n) {
    throw ContractError("add_row bias of " + std::to_string(bias.size()) +
                        " elements for " + ShapeToString(a.shape()));
  }
  std::vector<Real> out(a.values().begin(), a.values().end());
  const auto bv = bias.values();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += bv[j];
  }
  auto node = MakeResult<Real>(OpKind::kAddRow, a.shape(), std::move(out),
                               {&a, &bias});
  if (node->requires_grad) {
    node->backward = [m, n](internal::Node<Real>& self) {
      if (auto* ga = GradOf(self, 0)) {
        for (std::size_t i = 0; i < m * n; ++i) (*ga)[i] += self.grad[i];
      }
      if (auto* gb = GradOf(self, 1)) {
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < n; ++j) {
            (*gb)[j] += self.grad[i * n + j];
          }
        }
      }
    };
  }
  return Tensor<Real>(std::move(node));
}

template <typename Real>
Tensor<Real> Mul(const Tensor<Real>& a, const Tensor<Real>& b) {
  RequireSameShape(a, b, "mul");
  std::vector<Real> out(a.size());
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  auto node = MakeResult<Real>(OpKind::kMul, a.shape(), std::move(out),
                               {&a, &b});
  if (node->requires_grad) {
    node->backward = [](internal::Node<Real>& self) {
      const auto& av = self.inputs[0]->value;
      const auto& bv = self.inputs[1]->value;
      if (auto* ga = GradOf(self, 0)) {
        for (std::size_t i = 0; i < av.size(); ++i) {
          (*ga)[i] += self.grad[i] * bv[i];
        }
      }
      if (auto* gb = GradOf(self, 1)) {
        for (std::size_t i = 0; i < bv.size(); ++i) {
          (*gb)[i] += self.grad[i] * av[i];
        }
      }
    };
  }
  return Tensor<Real>(std::move(node));
}

template <typename Real>
Tensor<Real> MulColumn(const Tensor<Real>& a, const Tensor<Real>& column) {
  RequireRank2(a, "mul_column");
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  if (column.size() != m) {
    throw ContractError("mul_column needs " + std::to_string(m) +
                        " row factors, got " + std::to_string(column.size()));
  }
  std::vector<Real> out(a.values().begin(), a.values().end());
  const auto cv = column.values();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] *= cv[i];
  }
  auto node = MakeResult<Real>(OpKind::kMulColumn, a.shape(), std::move(out),
                               {&a, &column});
  if (node->requires_grad) {
    node->backward = [m, n](internal::Node<Real>& self) {
      const auto& av = self.inputs[0]->value;
      const auto& cv = self.inputs[1]->value;
      auto* ga = GradOf(self, 0);
      auto* gc = GradOf(self, 1);
      for (std::size_t i = 0; i < m; ++i) {
        Real acc = 0;
        for (std::size_t j = 0; j < n; ++j) {
          const Real g = self.grad[i * n + j];
          if (ga) (*ga)[i * n + j] += g * cv[i];
          acc += g * av[i * n + j];
        }
        if (gc) (*gc)[i] += acc;
      }
    };
  }
  return Tensor<Real>(std::move(node));
}

template <typename Real>
Tensor<Real> RowDot(const Tensor<Real>& a, const Tensor<Real>& b) {
  RequireRank2(a, "row_dot");
  RequireSameShape(a, b, "row_dot");
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<Real> out(m, Real(0));
  for (std::size_t i = 0; i < m; ++i) {
    Real acc = 0;
    for (std::size_t j = 0; j < n; ++j) acc += av[i * n + j] * bv[i * n + j];
    out[i] = acc;
  }
  auto node = MakeResult<Real>(OpKind::kRowDot, {m, 1}, std::move(out),
                               {&a, &b});
  if (node->requires_grad) {
    node->backward = [m, n](internal::Node<Real>& self) {
      const auto& av = self.inputs[0]->value;
      const auto& bv = self.inputs[1]->value;
      auto* ga = GradOf(self, 0);
      auto* gb = GradOf(self, 1);
      for (std::size_t i = 0; i < m; ++i) {
        const Real g = self.grad[i];
        for (std::size_t j = 0; j < n; ++j) {
          if (ga) (*ga)[i * n + j] += g * bv[i * n + j];
          if (gb) (*gb)[i * n + j] += g * av[i * n + j];
        }
      }
    };
  }
  return Tensor<Real>(std::move(node));
}

template <typename Real>
Tensor<Real> Scale(const Tensor<Real>& a, Real factor) {
  std::vector<Real> out(a.values().begin(), a.values().end());
  for (Real& v : out) v *= factor;
  auto node = MakeResult<Real>(OpKind::kScale, a.shape(), std::move(out), {&a});
  if (node->requires_grad) {
    node->backward = [factor](internal::Node<Real>& self) {
      if (auto* g = GradOf(self, 0)) {
        for (std::size_t i = 0; i < g->size(); ++i) {
          (*g)[i] += self.grad[i] * factor;
        }
      }
    };
  }
  return Tensor<Real>(std::move(node));
}

template <typename Real>
Tensor<Real> Concat(std::span<const Tensor<Real>> parts, std::size_t axis) {
  if (parts.empty()) throw ContractError("concat of zero tensors");
  if (axis > 1) throw ContractError("concat axis must be 0 or 1");
  for (const auto& p : parts) RequireRank2(p, "concat");
  const std::size_t other = axis == 0 ? parts[0].cols() : parts[0].rows();
  std::vector<std::size_t> extents;
  std::size_t total = 0;
  for (const auto& p : parts) {
    const std::size_t p_other = axis == 0 ? p.cols() : p.rows();
    if (p_other != other) {
      throw ContractError("concat extents differ: " +
                          ShapeToString(parts[0].shape()) + " vs " +
                          ShapeToString(p.shape()));
    }
    extents.push_back(axis == 0 ? p.rows() : p.cols());
    total += extents.back();
  }
  const std::size_t rows = axis == 0 ? total : other;
  const std::size_t cols = axis == 0 ? other : total;
  std::vector<Real> out(rows * cols);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto pv = parts[k].values();
    if (axis == 0) {
      std::copy(pv.begin(), pv.end(), out.begin() + offset * cols);
    } else {
      const std::size_t w = extents[k];
      for (std::size_t i = 0; i < rows; ++i) {
        std::copy(pv.begin() + i * w, pv.begin() + (i + 1) * w,
                  out.begin() + i * cols + offset);
      }
    }
    offset += extents[k];
  }

  auto node = std::make_shared<internal::Node<Real>>();
  node->op = OpKind::kConcat;
  node->shape = {rows, cols};
  node->value = std::move(out);
  if (GradEnabled()) {
    for (const auto& p : parts) node->requires_grad |= p.requires_grad();
    if (node->requires_grad) {
      for (const auto& p : parts) node->inputs.push_back(p.node());
      node->backward = [axis, rows, cols,
                        extents](internal::Node<Real>& self) {
        std::size_t offset = 0;
        for (std::size_t k = 0; k < extents.size(); ++k) {
          if (auto* g = GradOf(self, k)) {
            if (axis == 0) {
              for (std::size_t i = 0; i < g->size(); ++i) {
                (*g)[i] += self.grad[offset * cols + i];
              }
            } else {
              const std::size_t w = extents[k];
              for (std::size_t i = 0; i < rows; ++i) {
                for (std::size_t j = 0; j < w; ++j) {
                  (*g)[i * w + j] += self.grad[i * cols + offset + j];
                }
              }
            }
          }
          offset += extents[k];
        }
      };
    }
  }
  return Tensor<Real>(std::move(node));
}

template <typename Real>
Tensor<Real> Slice(const Tensor<Real>& a, std::size_t axis, std::size_t begin,
                   std::size_t end) {
  RequireRank2(a, "slice");
  if (axis > 1) throw ContractError("slice axis must be 0 or 1");
  const std::size_t rows = a.rows();
  const std::size_t cols = a.cols();
  const std::size_t extent = axis == 0 ? rows : cols;
  if (begin >= end || end > extent) {
    throw IndexError("slice [" + std::to_string(begin) + "," +
                     std::to_string(end) + ") outside extent " +
                     std::to_string(extent));
  }
  const std::size_t out_rows = axis == 0 ? end - begin : rows;
  const std::size_t out_cols = axis == 0 ? cols : end - begin;
  const auto av = a.values();
  std::vector<Real> out(out_rows * out_cols);
  for (std::size_t i = 0; i < out_rows; ++i) {
    for (std::size_t j = 0; j < out_cols; ++j) {
      const std::size_t src =
          axis == 0 ? (begin + i) * cols + j : i * cols + begin + j;
      out[i * out_cols + j] = av[src];
    }
  }
  auto node = MakeResult<Real>(OpKind::kSlice, {out_rows, out_cols},
                               std::move(out), {&a});
  if (node->requires_grad) {
    node->backward = [axis, begin, cols, out_rows,
                      out_cols](internal::Node<Real>& self) {
      if (auto* g = GradOf(self, 0)) {
        for (std::size_t i = 0; i < out_rows; ++i) {
          for (std::size_t j = 0; j < out_cols; ++j) {
            const std::size_t dst =
                axis == 0 ? (begin + i) * cols + j : i * cols + begin + j;
            (*g)[dst] += self.grad[i * out_cols + j];
          }
        }
      }
    };
  }
  return Tensor<Real>(std::move(node));
}

template <typename Real>
Tensor<Real> IndexSelect(const Tensor<Real>& table,
                         std::span<const std::int32_t> rows) {
  RequireRank2(table, "index_select");
  if (rows.empty()) throw ContractError("index_select with no rows");
  const std::size_t n = table.cols();
  const std::size_t r = table.rows();
  const auto tv = table.values();
  std::vector<Real> out(rows.size() * n);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || static_cast<std::size_t>(rows[i]) >= r) {
      throw IndexError("row " + std::to_string(rows[i]) + " outside table of " +
                       std::to_string(r) + " rows");
    }
    std::copy_n(tv.begin() + rows[i] * n, n, out.begin() + i * n);
  }
  auto node = MakeResult<Real>(OpKind::kIndexSelect, {rows.size(), n},
                               std::move(out), {&table});
  if (node->requires_grad) {
    std::vector<std::int32_t> picked(rows.begin(), rows.end());
    node->backward = [picked = std::move(picked),
                      n](internal::Node<Real>& self) {
      if (auto* g = GradOf(self, 0)) {
        for (std::size_t i = 0; i < picked.size(); ++i) {
          Real* dst = g->data() + picked[i] * n;
          const Real* src = self.grad.data() + i * n;
          for (std::size_t j = 0; j < n; ++j) dst[j] += src[j];
        }
      }
    };
  }
  return Tensor<Real>(std::move(node));
}

template <typename Real>
Tensor<Real> Softmax(const Tensor<Real>& x, std::size_t axis,
                     const Mask* mask) {
  if (x.rank() == 0 || x.rank() > 2) {
    throw ContractError("softmax supports rank 1 or 2, got " +
                        ShapeToString(x.shape()));
  }
  if (axis >= x.rank()) {
    throw ContractError("softmax axis " + std::to_string(axis) +
                        " invalid for " + ShapeToString(x.shape()));
  }
  const std::size_t rows = x.rank() == 2 ? x.rows() : 1;
  const std::size_t cols = x.rank() == 2 ? x.cols() : x.size();
  // Slices run along `axis`: (slice count, slice length, element stride).
  const bool along_cols = x.rank() == 1 || axis == 1;
  const std::size_t slices = along_cols ? rows : cols;
  const std::size_t length = along_cols ? cols : rows;
  auto element = [&](std::size_t s, std::size_t t) {
    return along_cols ? s * cols + t : t * cols + s;
  };

  std::vector<std::uint8_t> keep;
  if (mask != nullptr) {
    keep.assign(x.size(), 1);
    if (mask->keep.size() != NumElements(mask->shape)) {
      throw ContractError("softmax mask shape/value mismatch");
    }
    if (mask->shape == x.shape()) {
      keep = mask->keep;
    } else if (mask->keep.size() == length) {
      for (std::size_t s = 0; s < slices; ++s) {
        for (std::size_t t = 0; t < length; ++t) {
          keep[element(s, t)] = mask->keep[t];
        }
      }
    } else {
      throw ContractError("softmax mask " + ShapeToString(mask->shape) +
                          " not broadcastable to " + ShapeToString(x.shape()));
    }
  }

  const auto xv = x.values();
  std::vector<Real> out(x.size(), Real(0));
  for (std::size_t s = 0; s < slices; ++s) {
    double max_logit = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (std::size_t t = 0; t < length; ++t) {
      const std::size_t e = element(s, t);
      if (!keep.empty() && !keep[e]) continue;
      any = true;
      max_logit = std::max<double>(max_logit, xv[e]);
    }
    if (!any) {
      throw DegenerateSliceError("softmax slice " + std::to_string(s) +
                                 " has every entry masked");
    }
    double total = 0;
    for (std::size_t t = 0; t < length; ++t) {
      const std::size_t e = element(s, t);
      if (!keep.empty() && !keep[e]) continue;
      const double v = std::exp(static_cast<double>(xv[e]) - max_logit);
      out[e] = static_cast<Real>(v);
      total += v;
    }
    for (std::size_t t = 0; t < length; ++t) {
      const std::size_t e = element(s, t);
      out[e] = static_cast<Real>(out[e] / total);
    }
  }

  auto node = MakeResult<Real>(OpKind::kSoftmax, x.shape(), std::move(out),
                               {&x});
  if (node->requires_grad) {
    node->backward = [slices, length, along_cols,
                      cols](internal::Node<Real>& self) {
      auto* gx = GradOf(self, 0);
      if (gx == nullptr) return;
      const auto& y = self.value;
      for (std::size_t s = 0; s < slices; ++s) {
        auto e = [&](std::size_t t) {
          return along_cols ? s * cols + t : t * cols + s;
        };
        Real dot = 0;
        for (std::size_t t = 0; t < length; ++t) dot += self.grad[e(t)] * y[e(t)];
        for (std::size_t t = 0; t < length; ++t) {
          (*gx)[e(t)] += y[e(t)] * (self.grad[e(t)] - dot);
        }
      }
    };
  }
  return Tensor<Real>(std::move(node));
}

template <typename Real>
Tensor<Real> Sum(const Tensor<Real>& x) {
  Real total = 0;
  for (Real v : x.values()) total += v;
  auto node = MakeResult<Real>(OpKind::kSum, {}, {total}, {&x});
  if (node->requires_grad) {
    node->backward = [](internal::Node<Real>& self) {
      if (auto* g = GradOf(self, 0)) {
        for (Real& v : *g) v += self.grad[0];
      }
    };
  }
  return Tensor<Real>(std::move(node));
}

template <typename Real>
Tensor<Real> SumSquares(const Tensor<Real>& x) {
  Real total = 0;
  for (Real v : x.values()) total += v * v;
  auto node = MakeResult<Real>(OpKind::kSumSquares, {}, {total}, {&x});
  if (node->requires_grad) {
    node->backward = [](internal::Node<Real>& self) {
      if (auto* g = GradOf(self, 0)) {
        const auto& xv = self.inputs[0]->value;
        const Real scale = Real(2) * self.grad[0];
        for (std::size_t i = 0; i < xv.size(); ++i) (*g)[i] += scale * xv[i];
      }
    };
  }
  return Tensor<Real>(std::move(node));
}

template <typename Real>
Tensor<Real> CrossEntropy(const Tensor<Real>& logits, std::size_t target) {
  const auto lv = logits.values();
  if (target >= lv.size()) {
    throw IndexError("cross-entropy target " + std::to_string(target) +
                     " outside " + std::to_string(lv.size()) + " classes");
  }
  double max_logit = -std::numeric_limits<double>::infinity();
  for (Real v : lv) max_logit = std::max<double>(max_logit, v);
  double total = 0;
  for (Real v : lv) total += std::exp(static_cast<double>(v) - max_logit);
  const double log_norm = max_logit + std::log(total);
  const double loss = log_norm - static_cast<double>(lv[target]);
  if (!std::isfinite(loss)) {
    throw NumericDomainError("cross-entropy is not finite");
  }
  auto node = MakeResult<Real>(OpKind::kCrossEntropy, {},
                               {static_cast<Real>(loss)}, {&logits});
  if (node->requires_grad) {
    node->backward = [target, log_norm](internal::Node<Real>& self) {
      auto* g = GradOf(self, 0);
      if (g == nullptr) return;
      const auto& lv = self.inputs[0]->value;
      const Real seed = self.grad[0];
      for (std::size_t i = 0; i < lv.size(); ++i) {
        const double p = std::exp(static_cast<double>(lv[i]) - log_norm);
        (*g)[i] += static_cast<Real>(seed * (p - (i == target ? 1.0 : 0.0)));
      }
    };
  }
  return Tensor<Real>(std::move(node));
}

template <typename Real>
Tensor<Real> DepthwiseConv1d(const Tensor<Real>& h,
                             const Tensor<Real>& kernels) {
  RequireRank2(h, "depthwise_conv");
  RequireRank2(kernels, "depthwise_conv");
  const std::size_t t_len = h.rows();
  const std::size_t d = h.cols();
  const std::size_t l = kernels.rows();
  if (kernels.cols() != d) {
    throw ContractError("depthwise_conv kernels " +
                        ShapeToString(kernels.shape()) + " for input " +
                        ShapeToString(h.shape()));
  }
  if (l % 2 == 0) {
    throw ContractError("depthwise_conv window must be odd, got " +
                        std::to_string(l));
  }
  const std::ptrdiff_t centre = static_cast<std::ptrdiff_t>(l - 1) / 2;
  const auto hv = h.values();
  const auto kv = kernels.values();
  std::vector<Real> out(t_len * d, Real(0));
  for (std::size_t i = 0; i < t_len; ++i) {
    for (std::size_t j = 0; j < l; ++j) {
      const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(i + j) - centre;
      if (src < 0 || src >= static_cast<std::ptrdiff_t>(t_len)) continue;
      const Real* hrow = hv.data() + src * d;
      const Real* krow = kv.data() + j * d;
      Real* orow = out.data() + i * d;
      for (std::size_t c = 0; c < d; ++c) orow[c] += krow[c] * hrow[c];
    }
  }
  auto node = MakeResult<Real>(OpKind::kDepthwiseConv, {t_len, d},
                               std::move(out), {&h, &kernels});
  if (node->requires_grad) {
    node->backward = [t_len, d, l, centre](internal::Node<Real>& self) {
      const auto& hv = self.inputs[0]->value;
      const auto& kv = self.inputs[1]->value;
      auto* gh = GradOf(self, 0);
      auto* gk = GradOf(self, 1);
      for (std::size_t i = 0; i < t_len; ++i) {
        const Real* grow = self.grad.data() + i * d;
        for (std::size_t j = 0; j < l; ++j) {
          const std::ptrdiff_t src =
              static_cast<std::ptrdiff_t>(i + j) - centre;
          if (src < 0 || src >= static_cast<std::ptrdiff_t>(t_len)) continue;
          for (std::size_t c = 0; c < d; ++c) {
            if (gh) (*gh)[src * d + c] += grow[c] * kv[j * d + c];
            if (gk) (*gk)[j * d + c] += grow[c] * hv[src * d + c];
          }
        }
      }
    };
  }
  return Tensor<Real>(std::move(node));
}

#define LSAN_INSTANTIATE_OPS(Real)                                           \
  template Tensor<Real> Activate(Activation, const Tensor<Real>&);           \
  template Tensor<Real> Matmul(const Tensor<Real>&, const Tensor<Real>&,     \
                               bool);                                        \
  template Tensor<Real> Add(const Tensor<Real>&, const Tensor<Real>&);       \
  template Tensor<Real> AddRow(const Tensor<Real>&, const Tensor<Real>&);    \
  template Tensor<Real> Mul(const Tensor<Real>&, const Tensor<Real>&);       \
  template Tensor<Real> MulColumn(const Tensor<Real>&, const Tensor<Real>&); \
  template Tensor<Real> RowDot(const Tensor<Real>&, const Tensor<Real>&);    \
  template Tensor<Real> Scale(const Tensor<Real>&, Real);                    \
  template Tensor<Real> Concat(std::span<const Tensor<Real>>, std::size_t);  \
  template Tensor<Real> Slice(const Tensor<Real>&, std::size_t, std::size_t, \
                              std::size_t);                                  \
  template Tensor<Real> IndexSelect(const Tensor<Real>&,                     \
                                    std::span<const std::int32_t>);          \
  template Tensor<Real> Softmax(const Tensor<Real>&, std::size_t,            \
                                const Mask*);                                \
  template Tensor<Real> Sum(const Tensor<Real>&);                            \
  template Tensor<Real> SumSquares(const Tensor<Real>&);                     \
  template Tensor<Real> CrossEntropy(const Tensor<Real>&, std::size_t);      \
  template Tensor<Real> DepthwiseConv1d(const Tensor<Real>&,                 \
                                        const Tensor<Real>&);

LSAN_INSTANTIATE_OPS(float)
LSAN_INSTANTIATE_OPS(double)

#undef LSAN_INSTANTIATE_OPS

}  // namespace lsan
