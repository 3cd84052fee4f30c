// Copyright (c) 2026 The TimeCMA-cpp Authors. All Rights Reserved.
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

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <limits>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace timecma {

using Shape = std::vector<std::size_t>;

/// Raised when operand shapes do not conform.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an API is called outside its contract (non-scalar loss,
/// optimizer step without gradients, ...).
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << ']';
  return os.str();
}

inline std::size_t shape_numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

namespace detail {

struct Node {
  Shape shape;
  std::vector<float> data;
  std::vector<float> grad;  // empty until reached by a backward pass
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;  // pushes this->grad into inputs

  std::span<float> grad_buffer() {
    if (grad.empty()) grad.assign(data.size(), 0.0f);
    return grad;
  }
};

inline bool& grad_mode() {
  thread_local bool enabled = true;
  return enabled;
}

}  // namespace detail

/// Disables graph recording for the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard() : previous_(detail::grad_mode()) { detail::grad_mode() = false; }
  ~NoGradGuard() { detail::grad_mode() = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Dense row-major f32 tensor with reverse-mode gradient support.
///
/// Copies share storage (handle semantics); use clone() for a deep copy.
/// Results of differentiable ops keep their inputs alive until the tensor
/// is dropped, so a loss handle owns the whole recorded graph.
class Tensor {
 public:
  Tensor() = default;

  Tensor(Shape shape, std::vector<float> data, bool requires_grad = false)
      : node_(std::make_shared<detail::Node>()) {
    if (shape_numel(shape) != data.size()) {
      throw DimensionError("tensor data size " + std::to_string(data.size()) +
                           " does not match shape " + shape_str(shape));
    }
    node_->shape = std::move(shape);
    node_->data = std::move(data);
    node_->requires_grad = requires_grad;
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    const auto n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<float>(n, 0.0f), requires_grad);
  }

  static Tensor full(Shape shape, float value, bool requires_grad = false) {
    const auto n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<float>(n, value), requires_grad);
  }

  static Tensor scalar(float value, bool requires_grad = false) {
    return Tensor({}, {value}, requires_grad);
  }

  static Tensor vector(std::vector<float> values, bool requires_grad = false) {
    const auto n = values.size();
    return Tensor({n}, std::move(values), requires_grad);
  }

  static Tensor matrix(std::initializer_list<std::initializer_list<float>> rows,
                       bool requires_grad = false) {
    std::vector<float> data;
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows.begin()->size() : 0;
    for (const auto& row : rows) {
      if (row.size() != c) throw DimensionError("ragged matrix literal");
      data.insert(data.end(), row.begin(), row.end());
    }
    return Tensor({r, c}, std::move(data), requires_grad);
  }

  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<float> data,
                       bool requires_grad = false) {
    return Tensor({rows, cols}, std::move(data), requires_grad);
  }

  bool defined() const noexcept { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t numel() const { return node_->data.size(); }
  std::size_t rows() const { return rank() == 2 ? dim(0) : 1; }
  std::size_t cols() const { return rank() == 0 ? 1 : node_->shape.back(); }

  std::span<const float> data() const { return node_->data; }
  /// Writable view, used for in-place parameter updates and test perturbation.
  std::span<float> mutable_data() { return node_->data; }
  std::vector<float> to_vector() const { return node_->data; }

  float item() const {
    if (numel() != 1) throw UsageError("item() on tensor of shape " + shape_str(shape()));
    return node_->data[0];
  }
  float at(std::size_t i) const { return node_->data.at(i); }
  float at(std::size_t r, std::size_t c) const { return node_->data.at(r * cols() + c); }

  bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const float> grad() const { return node_->grad; }
  void zero_grad() {
    if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0f);
  }
  /// Drops the gradient buffer entirely (has_grad() becomes false).
  void clear_grad() { node_->grad.clear(); }

  /// Deep copy of the values, detached from any graph.
  Tensor clone() const { return Tensor(shape(), node_->data, false); }

  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  std::shared_ptr<detail::Node> node_;
};

namespace detail {

inline Tensor make_result(Shape shape, std::vector<float> data,
                          std::vector<std::shared_ptr<Node>> inputs,
                          std::function<void(Node&)> backward) {
  Tensor out(std::move(shape), std::move(data));
  if (!grad_mode()) return out;
  const bool any = std::any_of(inputs.begin(), inputs.end(),
                               [](const auto& n) { return n && n->requires_grad; });
  if (!any) return out;
  out.node()->requires_grad = true;
  out.node()->inputs = std::move(inputs);
  out.node()->backward = std::move(backward);
  return out;
}

inline void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got " + shape_str(t.shape()));
  }
}

// C[m×n] += A[m×k] · B[k×n]
inline void gemm_nn(std::size_t m, std::size_t k, std::size_t n, const float* a, const float* b,
                    float* c) {
  for (std::size_t i = 0; i < m; ++i) {
    float* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const float av = a[i * k + p];
      if (av == 0.0f) continue;
      const float* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[m×n] += A[m×k] · B[n×k]ᵀ
inline void gemm_nt(std::size_t m, std::size_t k, std::size_t n, const float* a, const float* b,
                    float* c) {
  for (std::size_t i = 0; i < m; ++i) {
    const float* arow = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const float* brow = b + j * k;
      float acc = 0.0f;
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      c[i * n + j] += acc;
    }
  }
}

// C[m×n] += A[k×m]ᵀ · B[k×n]
inline void gemm_tn(std::size_t m, std::size_t k, std::size_t n, const float* a, const float* b,
                    float* c) {
  for (std::size_t p = 0; p < k; ++p) {
    const float* arow = a + p * m;
    const float* brow = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const float av = arow[i];
      if (av == 0.0f) continue;
      float* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

inline bool wants_grad(const std::shared_ptr<Node>& n) { return n && n->requires_grad; }

template <typename F>
Tensor unary_elementwise(const Tensor& x, F&& fwd_and_deriv) {
  const auto& src = x.data();
  std::vector<float> out(src.size());
  std::vector<float> deriv(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) {
    auto [y, d] = fwd_and_deriv(src[i]);
    out[i] = y;
    deriv[i] = d;
  }
  auto xn = x.node();
  return make_result(x.shape(), std::move(out), {xn},
                     [xn, deriv = std::move(deriv)](Node& self) {
                       auto g = xn->grad_buffer();
                       for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * deriv[i];
                     });
}

}  // namespace detail

inline bool all_finite(const Tensor& t) {
  const auto d = t.data();
  return std::all_of(d.begin(), d.end(), [](float v) { return std::isfinite(v); });
}

// ---------------------------------------------------------------------------
// Linear algebra

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  detail::require_rank2(a, "matmul");
  detail::require_rank2(b, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner dimensions differ " + shape_str(a.shape()) + " · " +
                         shape_str(b.shape()));
  }
  std::vector<float> out(m * n, 0.0f);
  detail::gemm_nn(m, k, n, a.data().data(), b.data().data(), out.data());
  auto an = a.node(), bn = b.node();
  return detail::make_result({m, n}, std::move(out), {an, bn}, [an, bn, m, k, n](detail::Node& self) {
    if (detail::wants_grad(an)) {
      detail::gemm_nt(m, n, k, self.grad.data(), bn->data.data(), an->grad_buffer().data());
    }
    if (detail::wants_grad(bn)) {
      detail::gemm_tn(k, m, n, an->data.data(), self.grad.data(), bn->grad_buffer().data());
    }
  });
}

inline Tensor transpose(const Tensor& a) {
  detail::require_rank2(a, "transpose");
  const std::size_t r = a.dim(0), c = a.dim(1);
  std::vector<float> out(r * c);
  const auto src = a.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = src[i * c + j];
  auto an = a.node();
  return detail::make_result({c, r}, std::move(out), {an}, [an, r, c](detail::Node& self) {
    auto g = an->grad_buffer();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) g[i * c + j] += self.grad[j * r + i];
  });
}

/// y = x · wᵀ + b for x[rows×in], w[out×in], b[out] (b may be undefined).
inline Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b = {}) {
  detail::require_rank2(x, "linear");
  detail::require_rank2(w, "linear");
  const std::size_t m = x.dim(0), in = x.dim(1), out_dim = w.dim(0);
  if (w.dim(1) != in) {
    throw DimensionError("linear: input " + shape_str(x.shape()) + " incompatible with weight " +
                         shape_str(w.shape()));
  }
  if (b.defined() && (b.rank() != 1 || b.dim(0) != out_dim)) {
    throw DimensionError("linear: bias " + shape_str(b.shape()) + " does not match " +
                         std::to_string(out_dim) + " outputs");
  }
  std::vector<float> out(m * out_dim, 0.0f);
  if (b.defined()) {
    const auto bd = b.data();
    for (std::size_t i = 0; i < m; ++i) std::copy(bd.begin(), bd.end(), out.begin() + i * out_dim);
  }
  detail::gemm_nt(m, in, out_dim, x.data().data(), w.data().data(), out.data());
  auto xn = x.node(), wn = w.node(), bn = b.node();
  return detail::make_result(
      {m, out_dim}, std::move(out), {xn, wn, bn}, [xn, wn, bn, m, in, out_dim](detail::Node& self) {
        if (detail::wants_grad(xn)) {
          detail::gemm_nn(m, out_dim, in, self.grad.data(), wn->data.data(),
                          xn->grad_buffer().data());
        }
        if (detail::wants_grad(wn)) {
          detail::gemm_tn(out_dim, m, in, self.grad.data(), xn->data.data(),
                          wn->grad_buffer().data());
        }
        if (detail::wants_grad(bn)) {
          auto g = bn->grad_buffer();
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < out_dim; ++j) g[j] += self.grad[i * out_dim + j];
        }
      });
}

// ---------------------------------------------------------------------------
// Elementwise

inline Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("add: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  std::vector<float> out(a.numel());
  const auto ad = a.data(), bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] + bd[i];
  auto an = a.node(), bn = b.node();
  return detail::make_result(a.shape(), std::move(out), {an, bn}, [an, bn](detail::Node& self) {
    for (const auto& in : {an, bn}) {
      if (!detail::wants_grad(in)) continue;
      auto g = in->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("sub: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  std::vector<float> out(a.numel());
  const auto ad = a.data(), bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] - bd[i];
  auto an = a.node(), bn = b.node();
  return detail::make_result(a.shape(), std::move(out), {an, bn}, [an, bn](detail::Node& self) {
    if (detail::wants_grad(an)) {
      auto g = an->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (detail::wants_grad(bn)) {
      auto g = bn->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("mul: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  std::vector<float> out(a.numel());
  const auto ad = a.data(), bd = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ad[i] * bd[i];
  auto an = a.node(), bn = b.node();
  return detail::make_result(a.shape(), std::move(out), {an, bn}, [an, bn](detail::Node& self) {
    if (detail::wants_grad(an)) {
      auto g = an->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * bn->data[i];
    }
    if (detail::wants_grad(bn)) {
      auto g = bn->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * an->data[i];
    }
  });
}

inline Tensor scale(const Tensor& x, float factor) {
  return detail::unary_elementwise(x, [factor](float v) { return std::pair{v * factor, factor}; });
}

inline Tensor relu(const Tensor& x) {
  return detail::unary_elementwise(
      x, [](float v) { return v > 0.0f ? std::pair{v, 1.0f} : std::pair{0.0f, 0.0f}; });
}

inline Tensor square(const Tensor& x) {
  return detail::unary_elementwise(x, [](float v) { return std::pair{v * v, 2.0f * v}; });
}

inline Tensor abs(const Tensor& x) {
  return detail::unary_elementwise(x, [](float v) {
    return std::pair{std::fabs(v), v > 0.0f ? 1.0f : (v < 0.0f ? -1.0f : 0.0f)};
  });
}

// ---------------------------------------------------------------------------
// Reductions

inline Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (float v : x.data()) acc += v;
  auto xn = x.node();
  return detail::make_result({}, {static_cast<float>(acc)}, {xn}, [xn](detail::Node& self) {
    auto g = xn->grad_buffer();
    const float s = self.grad[0];
    for (auto& v : g) v += s;
  });
}

inline Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw UsageError("mean of empty tensor");
  return scale(sum(x), 1.0f / static_cast<float>(x.numel()));
}

inline Tensor sum_squares(const Tensor& x) {
  double acc = 0.0;
  for (float v : x.data()) acc += static_cast<double>(v) * v;
  auto xn = x.node();
  return detail::make_result({}, {static_cast<float>(acc)}, {xn}, [xn](detail::Node& self) {
    auto g = xn->grad_buffer();
    const float s = 2.0f * self.grad[0];
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += s * xn->data[i];
  });
}

/// Mean of squared differences over every entry.
inline Tensor mse(const Tensor& prediction, const Tensor& target) {
  return mean(square(sub(prediction, target)));
}

// ---------------------------------------------------------------------------
// Normalization and attention primitives

/// Softmax along `axis`, max-subtracted. Each slice along the axis sums to 1.
inline Tensor softmax(const Tensor& x, std::size_t axis) {
  if (axis >= x.rank()) {
    throw DimensionError("softmax: axis " + std::to_string(axis) + " out of range for " +
                         shape_str(x.shape()));
  }
  const auto& s = x.shape();
  const std::size_t n = s[axis];
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const auto src = x.data();
  std::vector<float> out(src.size());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * n * inner + in;
      float mx = -std::numeric_limits<float>::infinity();
      for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, src[base + j * inner]);
      double total = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const float e = std::exp(src[base + j * inner] - mx);
        out[base + j * inner] = e;
        total += e;
      }
      const float inv = static_cast<float>(1.0 / total);
      for (std::size_t j = 0; j < n; ++j) out[base + j * inner] *= inv;
    }
  }
  auto xn = x.node();
  auto y = std::make_shared<std::vector<float>>(out);
  return detail::make_result(s, std::move(out), {xn}, [xn, y, outer, inner, n](detail::Node& self) {
    auto g = xn->grad_buffer();
    const auto& yv = *y;
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t in = 0; in < inner; ++in) {
        const std::size_t base = o * n * inner + in;
        float dot = 0.0f;
        for (std::size_t j = 0; j < n; ++j) dot += self.grad[base + j * inner] * yv[base + j * inner];
        for (std::size_t j = 0; j < n; ++j) {
          const std::size_t k = base + j * inner;
          g[k] += yv[k] * (self.grad[k] - dot);
        }
      }
    }
  });
}

/// Row softmax of a square score matrix where row i only sees columns 0..i.
/// Masked entries are exactly zero and receive no gradient.
inline Tensor softmax_causal(const Tensor& x) {
  detail::require_rank2(x, "softmax_causal");
  const std::size_t r = x.dim(0), c = x.dim(1);
  const auto src = x.data();
  std::vector<float> out(src.size(), 0.0f);
  for (std::size_t i = 0; i < r; ++i) {
    const std::size_t visible = std::min(c, i + 1);
    float mx = -std::numeric_limits<float>::infinity();
    for (std::size_t j = 0; j < visible; ++j) mx = std::max(mx, src[i * c + j]);
    double total = 0.0;
    for (std::size_t j = 0; j < visible; ++j) {
      out[i * c + j] = std::exp(src[i * c + j] - mx);
      total += out[i * c + j];
    }
    const float inv = static_cast<float>(1.0 / total);
    for (std::size_t j = 0; j < visible; ++j) out[i * c + j] *= inv;
  }
  auto xn = x.node();
  auto y = std::make_shared<std::vector<float>>(out);
  return detail::make_result({r, c}, std::move(out), {xn}, [xn, y, r, c](detail::Node& self) {
    auto g = xn->grad_buffer();
    const auto& yv = *y;
    for (std::size_t i = 0; i < r; ++i) {
      const std::size_t visible = std::min(c, i + 1);
      float dot = 0.0f;
      for (std::size_t j = 0; j < visible; ++j) dot += self.grad[i * c + j] * yv[i * c + j];
      for (std::size_t j = 0; j < visible; ++j) {
        g[i * c + j] += yv[i * c + j] * (self.grad[i * c + j] - dot);
      }
    }
  });
}

inline constexpr float kLayerNormEps = 1e-5f;

/// γ ⊙ (x − μ)/√(σ² + eps) + β with μ, σ² over the last axis.
inline Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                         float eps = kLayerNormEps) {
  if (x.rank() == 0) throw DimensionError("layer_norm: scalar input");
  const std::size_t d = x.shape().back();
  const std::size_t rows = x.numel() / d;
  if (gamma.numel() != d || beta.numel() != d) {
    throw DimensionError("layer_norm: gamma/beta must have " + std::to_string(d) + " entries");
  }
  const auto src = x.data(), gd = gamma.data(), bd = beta.data();
  std::vector<float> out(src.size());
  auto xhat = std::make_shared<std::vector<float>>(src.size());
  auto inv_std = std::make_shared<std::vector<float>>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const float* row = src.data() + r * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(var + static_cast<double>(eps));
    (*inv_std)[r] = static_cast<float>(is);
    for (std::size_t j = 0; j < d; ++j) {
      const float h = static_cast<float>((row[j] - mu) * is);
      (*xhat)[r * d + j] = h;
      out[r * d + j] = gd[j] * h + bd[j];
    }
  }
  auto xn = x.node(), gn = gamma.node(), bn = beta.node();
  return detail::make_result(
      x.shape(), std::move(out), {xn, gn, bn}, [xn, gn, bn, xhat, inv_std, rows, d](detail::Node& self) {
        const auto& h = *xhat;
        if (detail::wants_grad(gn)) {
          auto g = gn->grad_buffer();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < d; ++j) g[j] += self.grad[r * d + j] * h[r * d + j];
        }
        if (detail::wants_grad(bn)) {
          auto g = bn->grad_buffer();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < d; ++j) g[j] += self.grad[r * d + j];
        }
        if (detail::wants_grad(xn)) {
          auto g = xn->grad_buffer();
          std::vector<float> dh(d);
          for (std::size_t r = 0; r < rows; ++r) {
            double mean_dh = 0.0, mean_dh_h = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
              dh[j] = self.grad[r * d + j] * gn->data[j];
              mean_dh += dh[j];
              mean_dh_h += dh[j] * h[r * d + j];
            }
            mean_dh /= static_cast<double>(d);
            mean_dh_h /= static_cast<double>(d);
            const float is = (*inv_std)[r];
            for (std::size_t j = 0; j < d; ++j) {
              g[r * d + j] += is * static_cast<float>(dh[j] - mean_dh - h[r * d + j] * mean_dh_h);
            }
          }
        }
      });
}

// ---------------------------------------------------------------------------
// Slicing

/// Columns [start, start + count) of a matrix.
inline Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t count) {
  detail::require_rank2(x, "slice_cols");
  const std::size_t r = x.dim(0), c = x.dim(1);
  if (start + count > c) throw DimensionError("slice_cols: range exceeds " + shape_str(x.shape()));
  std::vector<float> out(r * count);
  const auto src = x.data();
  for (std::size_t i = 0; i < r; ++i)
    std::copy_n(src.begin() + i * c + start, count, out.begin() + i * count);
  auto xn = x.node();
  return detail::make_result({r, count}, std::move(out), {xn}, [xn, r, c, start, count](detail::Node& self) {
    auto g = xn->grad_buffer();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < count; ++j) g[i * c + start + j] += self.grad[i * count + j];
  });
}

inline Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const std::size_t r = parts.front().rows();
  std::size_t total = 0;
  for (const auto& p : parts) {
    detail::require_rank2(p, "concat_cols");
    if (p.dim(0) != r) throw DimensionError("concat_cols: row counts differ");
    total += p.dim(1);
  }
  std::vector<float> out(r * total);
  std::vector<std::shared_ptr<detail::Node>> inputs;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t c = p.dim(1);
    const auto src = p.data();
    for (std::size_t i = 0; i < r; ++i)
      std::copy_n(src.begin() + i * c, c, out.begin() + i * total + offset);
    offset += c;
    inputs.push_back(p.node());
  }
  return detail::make_result({r, total}, std::move(out), inputs, [inputs, r, total](detail::Node& self) {
    std::size_t off = 0;
    for (const auto& in : inputs) {
      const std::size_t c = in->shape[1];
      if (detail::wants_grad(in)) {
        auto g = in->grad_buffer();
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) g[i * c + j] += self.grad[i * total + off + j];
      }
      off += c;
    }
  });
}

// ---------------------------------------------------------------------------
// Reverse pass

/// Accumulates d(loss)/d(leaf) into every reachable leaf with requires_grad.
/// Intermediate gradients are recomputed on every call; leaf gradients add up
/// until zero_grad().
inline void backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw UsageError("backward: loss must be a scalar, got " +
                     (loss.defined() ? shape_str(loss.shape()) : std::string("undefined")));
  }
  if (!loss.requires_grad()) {
    throw UsageError("backward: loss does not depend on any tensor requiring gradients");
  }
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<detail::Node*, std::size_t>> stack{{loss.node().get(), 0}};
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      detail::Node* child = node->inputs[next++].get();
      if (child && child->requires_grad && !seen.count(child)) {
        seen.insert(child);
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  for (auto* n : order) {
    if (n->backward) n->grad.assign(n->data.size(), 0.0f);
  }
  loss.node()->grad_buffer()[0] += 1.0f;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward) (*it)->backward(**it);
  }
}

}  // namespace timecma
