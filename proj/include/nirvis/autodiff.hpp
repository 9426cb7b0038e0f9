#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "nirvis/errors.hpp"
#include "nirvis/gemm.hpp"
#include "nirvis/tensor.hpp"

// Reverse-mode differentiable arrays. Ops evaluate eagerly and record a tape;
// backward() walks the tape in reverse topological order exactly once.
namespace nirvis::ad {

inline bool& grad_mode() {
  thread_local bool enabled = true;
  return enabled;
}

// Disables tape recording in a scope (frozen nets, evaluation passes).
struct NoGradGuard {
  bool prev;
  NoGradGuard() : prev(grad_mode()) { grad_mode() = false; }
  ~NoGradGuard() { grad_mode() = prev; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

template <typename T>
struct Node {
  const char* op = "leaf";
  Tensor<T> value;
  Tensor<T> grad;
  bool requires_grad = false;
  bool has_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  Tensor<T>& ensure_grad() {
    if (!has_grad) {
      grad = Tensor<T>(value.shape());
      has_grad = true;
    }
    return grad;
  }
};

template <typename T>
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node<T>> n) : node_(std::move(n)) {}

  static Var param(Tensor<T> v) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(v);
    n->requires_grad = true;
    return Var(std::move(n));
  }

  static Var constant(Tensor<T> v) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(v);
    return Var(std::move(n));
  }

  static Var scalar(T v) { return constant(Tensor<T>::scalar(v)); }

  bool defined() const { return node_ != nullptr; }
  const Tensor<T>& value() const { return node_->value; }
  Tensor<T>& value_mut() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  T item() const { return node_->value.item(); }

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return node_->has_grad; }
  const Tensor<T>& grad() const {
    if (!node_->has_grad) throw ValueError("grad accessed before backward populated it");
    return node_->grad;
  }

  void zero_grad() {
    node_->grad = Tensor<T>();
    node_->has_grad = false;
  }

  // A constant view of the same values, cut off from the tape.
  Var detach() const { return constant(node_->value); }

  std::shared_ptr<Node<T>> node() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

namespace detail {

template <typename T>
Var<T> make_op(const char* op, Tensor<T> value, std::vector<Var<T>> parents,
               std::function<void(Node<T>&)> backward) {
  if (!value.all_finite())
    throw NumericError(std::string(op) + ": non-finite values in forward output");
  auto n = std::make_shared<Node<T>>();
  n->op = op;
  n->value = std::move(value);
  bool needs = false;
  if (grad_mode())
    for (const auto& p : parents) needs = needs || p.requires_grad();
  n->requires_grad = needs;
  if (needs) {
    n->parents.reserve(parents.size());
    for (auto& p : parents) n->parents.push_back(p.node());
    n->backward = std::move(backward);
  }
  return Var<T>(std::move(n));
}

template <typename T>
void require_same_shape(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
  if (!a.same_shape(b))
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
}

template <typename T>
void accumulate(Node<T>& parent, const Tensor<T>& g) {
  if (!parent.requires_grad) return;
  Tensor<T>& dst = parent.ensure_grad();
  const std::int64_t n = dst.numel();
  for (std::int64_t i = 0; i < n; ++i) dst[i] += g[i];
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise arithmetic (same-shape only; broadcasting is limited to
// bias_add on the channel axis).

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  detail::require_same_shape("add", a.value(), b.value());
  Tensor<T> out(a.shape());
  const std::int64_t n = out.numel();
  for (std::int64_t i = 0; i < n; ++i) out[i] = a.value()[i] + b.value()[i];
  return detail::make_op<T>("add", std::move(out), {a, b}, [](Node<T>& nd) {
    detail::accumulate(*nd.parents[0], nd.grad);
    detail::accumulate(*nd.parents[1], nd.grad);
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  detail::require_same_shape("sub", a.value(), b.value());
  Tensor<T> out(a.shape());
  const std::int64_t n = out.numel();
  for (std::int64_t i = 0; i < n; ++i) out[i] = a.value()[i] - b.value()[i];
  return detail::make_op<T>("sub", std::move(out), {a, b}, [](Node<T>& nd) {
    detail::accumulate(*nd.parents[0], nd.grad);
    if (nd.parents[1]->requires_grad) {
      Tensor<T>& dst = nd.parents[1]->ensure_grad();
      for (std::int64_t i = 0; i < nd.grad.numel(); ++i) dst[i] -= nd.grad[i];
    }
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  detail::require_same_shape("mul", a.value(), b.value());
  Tensor<T> out(a.shape());
  const std::int64_t n = out.numel();
  for (std::int64_t i = 0; i < n; ++i) out[i] = a.value()[i] * b.value()[i];
  return detail::make_op<T>("mul", std::move(out), {a, b}, [](Node<T>& nd) {
    const Tensor<T>& av = nd.parents[0]->value;
    const Tensor<T>& bv = nd.parents[1]->value;
    if (nd.parents[0]->requires_grad) {
      Tensor<T>& da = nd.parents[0]->ensure_grad();
      for (std::int64_t i = 0; i < nd.grad.numel(); ++i) da[i] += nd.grad[i] * bv[i];
    }
    if (nd.parents[1]->requires_grad) {
      Tensor<T>& db = nd.parents[1]->ensure_grad();
      for (std::int64_t i = 0; i < nd.grad.numel(); ++i) db[i] += nd.grad[i] * av[i];
    }
  });
}

// out = m*x + c with compile-time constants; covers scaling and shifting
// without a broadcast rule.
template <typename T>
Var<T> affine(const Var<T>& x, T m, T c) {
  Tensor<T> out(x.shape());
  const std::int64_t n = out.numel();
  for (std::int64_t i = 0; i < n; ++i) out[i] = m * x.value()[i] + c;
  return detail::make_op<T>("affine", std::move(out), {x}, [m](Node<T>& nd) {
    if (!nd.parents[0]->requires_grad) return;
    Tensor<T>& dx = nd.parents[0]->ensure_grad();
    for (std::int64_t i = 0; i < nd.grad.numel(); ++i) dx[i] += m * nd.grad[i];
  });
}

template <typename T>
Var<T> square(const Var<T>& x) {
  Tensor<T> out(x.shape());
  const std::int64_t n = out.numel();
  for (std::int64_t i = 0; i < n; ++i) out[i] = x.value()[i] * x.value()[i];
  return detail::make_op<T>("square", std::move(out), {x}, [](Node<T>& nd) {
    if (!nd.parents[0]->requires_grad) return;
    Tensor<T>& dx = nd.parents[0]->ensure_grad();
    const Tensor<T>& xv = nd.parents[0]->value;
    for (std::int64_t i = 0; i < nd.grad.numel(); ++i) dx[i] += T(2) * xv[i] * nd.grad[i];
  });
}

// Bias broadcast over axis 1: (B,D)+(D) or (N,C,H,W)+(C).
template <typename T>
Var<T> bias_add(const Var<T>& x, const Var<T>& b) {
  if (x.value().rank() < 2 || b.value().rank() != 1 || b.value().dim(0) != x.value().dim(1))
    throw ShapeError("bias_add: bias " + shape_str(b.shape()) +
                     " does not match axis 1 of input " + shape_str(x.shape()));
  const int C = x.value().dim(1);
  std::int64_t outer = x.value().dim(0);
  std::int64_t inner = x.value().numel() / (outer * C);
  Tensor<T> out(x.shape());
  std::int64_t idx = 0;
  for (std::int64_t o = 0; o < outer; ++o)
    for (int c = 0; c < C; ++c)
      for (std::int64_t i = 0; i < inner; ++i, ++idx) out[idx] = x.value()[idx] + b.value()[c];
  return detail::make_op<T>("bias_add", std::move(out), {x, b}, [C, outer, inner](Node<T>& nd) {
    detail::accumulate(*nd.parents[0], nd.grad);
    if (!nd.parents[1]->requires_grad) return;
    Tensor<T>& db = nd.parents[1]->ensure_grad();
    std::int64_t idx = 0;
    for (std::int64_t o = 0; o < outer; ++o)
      for (int c = 0; c < C; ++c)
        for (std::int64_t i = 0; i < inner; ++i, ++idx) db[c] += nd.grad[idx];
  });
}

// ---------------------------------------------------------------------------
// Activations

template <typename T>
Var<T> leaky_relu(const Var<T>& x, T slope) {
  Tensor<T> out(x.shape());
  const std::int64_t n = out.numel();
  for (std::int64_t i = 0; i < n; ++i) {
    const T v = x.value()[i];
    out[i] = v > T(0) ? v : slope * v;
  }
  return detail::make_op<T>("leaky_relu", std::move(out), {x}, [slope](Node<T>& nd) {
    if (!nd.parents[0]->requires_grad) return;
    Tensor<T>& dx = nd.parents[0]->ensure_grad();
    const Tensor<T>& xv = nd.parents[0]->value;
    for (std::int64_t i = 0; i < nd.grad.numel(); ++i)
      dx[i] += (xv[i] > T(0) ? T(1) : slope) * nd.grad[i];
  });
}

template <typename T>
Var<T> relu(const Var<T>& x) {
  return leaky_relu(x, T(0));
}

template <typename T>
Var<T> tanh(const Var<T>& x) {
  Tensor<T> out(x.shape());
  const std::int64_t n = out.numel();
  for (std::int64_t i = 0; i < n; ++i) out[i] = std::tanh(x.value()[i]);
  return detail::make_op<T>("tanh", std::move(out), {x}, [](Node<T>& nd) {
    if (!nd.parents[0]->requires_grad) return;
    Tensor<T>& dx = nd.parents[0]->ensure_grad();
    for (std::int64_t i = 0; i < nd.grad.numel(); ++i) {
      const T y = nd.value[i];
      dx[i] += (T(1) - y * y) * nd.grad[i];
    }
  });
}

// Output is clamped into the open interval (0,1) so downstream log terms stay
// finite; the backward pass uses the clamped value, which matches the true
// derivative to within the clamp width.
template <typename T>
Var<T> sigmoid(const Var<T>& x) {
  constexpr T lo = sizeof(T) == 4 ? T(1e-6) : T(1e-12);
  const T hi = T(1) - lo;
  Tensor<T> out(x.shape());
  const std::int64_t n = out.numel();
  for (std::int64_t i = 0; i < n; ++i) {
    const T v = x.value()[i];
    const T s = v >= T(0) ? T(1) / (T(1) + std::exp(-v)) : std::exp(v) / (T(1) + std::exp(v));
    out[i] = std::min(hi, std::max(lo, s));
  }
  return detail::make_op<T>("sigmoid", std::move(out), {x}, [](Node<T>& nd) {
    if (!nd.parents[0]->requires_grad) return;
    Tensor<T>& dx = nd.parents[0]->ensure_grad();
    for (std::int64_t i = 0; i < nd.grad.numel(); ++i) {
      const T y = nd.value[i];
      dx[i] += y * (T(1) - y) * nd.grad[i];
    }
  });
}

template <typename T>
Var<T> log(const Var<T>& x) {
  Tensor<T> out(x.shape());
  const std::int64_t n = out.numel();
  for (std::int64_t i = 0; i < n; ++i) {
    if (!(x.value()[i] > T(0))) throw NumericError("log: non-positive input");
    out[i] = std::log(x.value()[i]);
  }
  return detail::make_op<T>("log", std::move(out), {x}, [](Node<T>& nd) {
    if (!nd.parents[0]->requires_grad) return;
    Tensor<T>& dx = nd.parents[0]->ensure_grad();
    const Tensor<T>& xv = nd.parents[0]->value;
    for (std::int64_t i = 0; i < nd.grad.numel(); ++i) dx[i] += nd.grad[i] / xv[i];
  });
}

// ---------------------------------------------------------------------------
// Reductions

namespace detail {

// Maps each input linear index to the output linear index with `axes` removed.
inline std::vector<std::int64_t> reduction_map(const Shape& in, const std::vector<int>& axes,
                                               Shape& out_shape, std::int64_t& count) {
  std::vector<bool> reduced(in.size(), false);
  for (int a : axes) {
    if (a < 0 || a >= static_cast<int>(in.size())) throw ShapeError("reduction axis out of range");
    reduced[static_cast<std::size_t>(a)] = true;
  }
  if (axes.empty()) std::fill(reduced.begin(), reduced.end(), true);
  out_shape.clear();
  count = 1;
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (reduced[i])
      count *= in[i];
    else
      out_shape.push_back(in[i]);
  }
  const std::int64_t n = shape_numel(in);
  std::vector<std::int64_t> map(static_cast<std::size_t>(n));
  std::vector<int> coord(in.size(), 0);
  for (std::int64_t lin = 0; lin < n; ++lin) {
    std::int64_t o = 0;
    for (std::size_t i = 0; i < in.size(); ++i)
      if (!reduced[i]) o = o * in[i] + coord[i];
    map[static_cast<std::size_t>(lin)] = o;
    for (int i = static_cast<int>(in.size()) - 1; i >= 0; --i) {
      if (++coord[static_cast<std::size_t>(i)] < in[static_cast<std::size_t>(i)]) break;
      coord[static_cast<std::size_t>(i)] = 0;
    }
  }
  return map;
}

}  // namespace detail

// Sum over the given axes; empty axes list reduces everything to a scalar.
template <typename T>
Var<T> sum(const Var<T>& x, const std::vector<int>& axes = {}) {
  Shape out_shape;
  std::int64_t count = 0;
  auto map = detail::reduction_map(x.value().shape(), axes, out_shape, count);
  Tensor<T> out(out_shape);
  for (std::int64_t i = 0; i < x.value().numel(); ++i)
    out[map[static_cast<std::size_t>(i)]] += x.value()[i];
  return detail::make_op<T>("sum", std::move(out), {x}, [map = std::move(map)](Node<T>& nd) {
    if (!nd.parents[0]->requires_grad) return;
    Tensor<T>& dx = nd.parents[0]->ensure_grad();
    for (std::int64_t i = 0; i < dx.numel(); ++i)
      dx[i] += nd.grad[map[static_cast<std::size_t>(i)]];
  });
}

template <typename T>
Var<T> mean(const Var<T>& x, const std::vector<int>& axes = {}) {
  Shape out_shape;
  std::int64_t count = 0;
  auto map = detail::reduction_map(x.value().shape(), axes, out_shape, count);
  Tensor<T> out(out_shape);
  for (std::int64_t i = 0; i < x.value().numel(); ++i)
    out[map[static_cast<std::size_t>(i)]] += x.value()[i];
  const T inv = T(1) / static_cast<T>(count);
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] *= inv;
  return detail::make_op<T>("mean", std::move(out), {x}, [map = std::move(map), inv](Node<T>& nd) {
    if (!nd.parents[0]->requires_grad) return;
    Tensor<T>& dx = nd.parents[0]->ensure_grad();
    for (std::int64_t i = 0; i < dx.numel(); ++i)
      dx[i] += inv * nd.grad[map[static_cast<std::size_t>(i)]];
  });
}

// Mean absolute difference over all elements. Subgradient of |.| at 0 is 0.
template <typename T>
Var<T> l1_mean(const Var<T>& a, const Var<T>& b) {
  detail::require_same_shape("l1_mean", a.value(), b.value());
  const std::int64_t n = a.value().numel();
  T acc = 0;
  for (std::int64_t i = 0; i < n; ++i) acc += std::abs(a.value()[i] - b.value()[i]);
  Tensor<T> out = Tensor<T>::scalar(acc / static_cast<T>(n));
  return detail::make_op<T>("l1_mean", std::move(out), {a, b}, [n](Node<T>& nd) {
    const T g = nd.grad[0] / static_cast<T>(n);
    const Tensor<T>& av = nd.parents[0]->value;
    const Tensor<T>& bv = nd.parents[1]->value;
    Tensor<T>* da = nd.parents[0]->requires_grad ? &nd.parents[0]->ensure_grad() : nullptr;
    Tensor<T>* db = nd.parents[1]->requires_grad ? &nd.parents[1]->ensure_grad() : nullptr;
    for (std::int64_t i = 0; i < n; ++i) {
      const T d = av[i] - bv[i];
      const T s = d > T(0) ? T(1) : (d < T(0) ? T(-1) : T(0));
      if (da) (*da)[i] += g * s;
      if (db) (*db)[i] -= g * s;
    }
  });
}

// Euclidean norm over the last axis; a rank-1 input yields a scalar.
template <typename T>
Var<T> l2_norm_last(const Var<T>& x) {
  if (x.value().rank() < 1) throw ShapeError("l2_norm_last: needs rank >= 1");
  const int d = x.value().dim(x.value().rank() - 1);
  const std::int64_t rows = x.value().numel() / d;
  Shape out_shape(x.value().shape().begin(), x.value().shape().end() - 1);
  Tensor<T> out(out_shape);
  for (std::int64_t r = 0; r < rows; ++r) {
    T acc = 0;
    for (int j = 0; j < d; ++j) {
      const T v = x.value()[r * d + j];
      acc += v * v;
    }
    out[r] = std::sqrt(acc);
  }
  return detail::make_op<T>("l2_norm_last", std::move(out), {x}, [d, rows](Node<T>& nd) {
    if (!nd.parents[0]->requires_grad) return;
    Tensor<T>& dx = nd.parents[0]->ensure_grad();
    const Tensor<T>& xv = nd.parents[0]->value;
    for (std::int64_t r = 0; r < rows; ++r) {
      const T norm = nd.value[r];
      if (norm == T(0)) continue;
      const T g = nd.grad[r] / norm;
      for (int j = 0; j < d; ++j) dx[r * d + j] += g * xv[r * d + j];
    }
  });
}

// Per-column population variance of a (B,D) matrix -> (D,).
template <typename T>
Var<T> var_rows(const Var<T>& x) {
  if (x.value().rank() != 2) throw ShapeError("var_rows: expected (B,D), got " + shape_str(x.shape()));
  const int B = x.value().dim(0), D = x.value().dim(1);
  if (B < 2) throw ValueError("var_rows: needs at least 2 rows");
  Tensor<T> mu({D});
  for (int i = 0; i < B; ++i)
    for (int j = 0; j < D; ++j) mu[j] += x.value().at(i, j);
  for (int j = 0; j < D; ++j) mu[j] /= static_cast<T>(B);
  Tensor<T> out({D});
  for (int i = 0; i < B; ++i)
    for (int j = 0; j < D; ++j) {
      const T d = x.value().at(i, j) - mu[j];
      out[j] += d * d;
    }
  for (int j = 0; j < D; ++j) out[j] /= static_cast<T>(B);
  return detail::make_op<T>("var_rows", std::move(out), {x},
                            [B, D, mu = std::move(mu)](Node<T>& nd) {
                              if (!nd.parents[0]->requires_grad) return;
                              Tensor<T>& dx = nd.parents[0]->ensure_grad();
                              const Tensor<T>& xv = nd.parents[0]->value;
                              const T inv = T(2) / static_cast<T>(B);
                              for (int i = 0; i < B; ++i)
                                for (int j = 0; j < D; ++j)
                                  dx.at(i, j) += nd.grad[j] * inv * (xv.at(i, j) - mu[j]);
                            });
}

// Rows rescaled to unit Euclidean length. Rows shorter than eps divide by
// eps instead, so zero rows stay zero and the gradient stays finite.
template <typename T>
Var<T> normalize_rows(const Var<T>& x) {
  if (x.value().rank() != 2)
    throw ShapeError("normalize_rows: expected (B,D), got " + shape_str(x.shape()));
  const int B = x.value().dim(0), D = x.value().dim(1);
  const T eps = T(1e-12);
  Tensor<T> norms({B});
  Tensor<T> out({B, D});
  for (int i = 0; i < B; ++i) {
    T acc = 0;
    for (int j = 0; j < D; ++j) {
      const T v = x.value().at(i, j);
      acc += v * v;
    }
    norms[i] = std::max(std::sqrt(acc), eps);
    for (int j = 0; j < D; ++j) out.at(i, j) = x.value().at(i, j) / norms[i];
  }
  return detail::make_op<T>(
      "normalize_rows", std::move(out), {x}, [B, D, norms = std::move(norms)](Node<T>& nd) {
        if (!nd.parents[0]->requires_grad) return;
        Tensor<T>& dx = nd.parents[0]->ensure_grad();
        for (int i = 0; i < B; ++i) {
          // y = x/n with unit y: dx = (g - (g.y) y) / n. Clamped rows are
          // plain scaling, so the projection term drops out.
          T dot = 0;
          for (int j = 0; j < D; ++j) dot += nd.grad.at(i, j) * nd.value.at(i, j);
          const bool clamped = norms[i] == T(1e-12);
          for (int j = 0; j < D; ++j)
            dx.at(i, j) +=
                (nd.grad.at(i, j) - (clamped ? T(0) : dot * nd.value.at(i, j))) / norms[i];
        }
      });
}

// ---------------------------------------------------------------------------
// Linear algebra

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0))
    throw ShapeError("matmul: incompatible shapes " + shape_str(av.shape()) + " x " +
                     shape_str(bv.shape()));
  const int M = av.dim(0), K = av.dim(1), N = bv.dim(1);
  Tensor<T> out({M, N});
  nirvis::detail::gemm_acc(M, N, K, av.data(), bv.data(), out.data());
  return detail::make_op<T>("matmul", std::move(out), {a, b}, [M, K, N](Node<T>& nd) {
    const Tensor<T>& av = nd.parents[0]->value;
    const Tensor<T>& bv = nd.parents[1]->value;
    if (nd.parents[0]->requires_grad) {
      // dA = dY * B^T
      std::vector<T> bt(static_cast<std::size_t>(K) * N);
      nirvis::detail::transpose(K, N, bv.data(), bt.data());
      nirvis::detail::gemm_acc(M, K, N, nd.grad.data(), bt.data(),
                               nd.parents[0]->ensure_grad().data());
    }
    if (nd.parents[1]->requires_grad) {
      // dB = A^T * dY
      std::vector<T> at(static_cast<std::size_t>(M) * K);
      nirvis::detail::transpose(M, K, av.data(), at.data());
      nirvis::detail::gemm_acc(K, N, M, at.data(), nd.grad.data(),
                               nd.parents[1]->ensure_grad().data());
    }
  });
}

namespace detail {

template <typename T>
void im2col(const T* x, int C, int H, int W, int kh, int kw, int stride, int pad, int Ho, int Wo,
            T* col) {
  for (int c = 0; c < C; ++c)
    for (int ki = 0; ki < kh; ++ki)
      for (int kj = 0; kj < kw; ++kj) {
        T* row = col + (static_cast<std::size_t>((c * kh + ki) * kw + kj)) * Ho * Wo;
        for (int oh = 0; oh < Ho; ++oh) {
          const int ih = oh * stride - pad + ki;
          for (int ow = 0; ow < Wo; ++ow) {
            const int iw = ow * stride - pad + kj;
            row[oh * Wo + ow] = (ih >= 0 && ih < H && iw >= 0 && iw < W)
                                    ? x[(static_cast<std::size_t>(c) * H + ih) * W + iw]
                                    : T(0);
          }
        }
      }
}

template <typename T>
void col2im_acc(const T* col, int C, int H, int W, int kh, int kw, int stride, int pad, int Ho,
                int Wo, T* dx) {
  for (int c = 0; c < C; ++c)
    for (int ki = 0; ki < kh; ++ki)
      for (int kj = 0; kj < kw; ++kj) {
        const T* row = col + (static_cast<std::size_t>((c * kh + ki) * kw + kj)) * Ho * Wo;
        for (int oh = 0; oh < Ho; ++oh) {
          const int ih = oh * stride - pad + ki;
          if (ih < 0 || ih >= H) continue;
          for (int ow = 0; ow < Wo; ++ow) {
            const int iw = ow * stride - pad + kj;
            if (iw < 0 || iw >= W) continue;
            dx[(static_cast<std::size_t>(c) * H + ih) * W + iw] += row[oh * Wo + ow];
          }
        }
      }
}

}  // namespace detail

// x: (N,Cin,H,W), w: (Cout,Cin,kh,kw). Zero padding, stride 1 or 2.
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, int stride, int pad) {
  const Tensor<T>& xv = x.value();
  const Tensor<T>& wv = w.value();
  if (xv.rank() != 4 || wv.rank() != 4)
    throw ShapeError("conv2d: expected 4-d input and weight, got " + shape_str(xv.shape()) +
                     " and " + shape_str(wv.shape()));
  if (xv.dim(1) != wv.dim(1))
    throw ShapeError("conv2d: input channels mismatch, input " + shape_str(xv.shape()) +
                     " weight " + shape_str(wv.shape()));
  if (stride != 1 && stride != 2) throw ValueError("conv2d: stride must be 1 or 2");
  const int N = xv.dim(0), Cin = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
  const int Cout = wv.dim(0), kh = wv.dim(2), kw = wv.dim(3);
  const int Ho = (H + 2 * pad - kh) / stride + 1;
  const int Wo = (W + 2 * pad - kw) / stride + 1;
  if (Ho <= 0 || Wo <= 0)
    throw ShapeError("conv2d: kernel " + shape_str(wv.shape()) + " too large for input " +
                     shape_str(xv.shape()));
  const int K = Cin * kh * kw;
  Tensor<T> out({N, Cout, Ho, Wo});
  std::vector<T> col(static_cast<std::size_t>(K) * Ho * Wo);
  for (int n = 0; n < N; ++n) {
    detail::im2col(xv.data() + static_cast<std::size_t>(n) * Cin * H * W, Cin, H, W, kh, kw,
                   stride, pad, Ho, Wo, col.data());
    nirvis::detail::gemm_acc(Cout, Ho * Wo, K, wv.data(), col.data(),
                             out.data() + static_cast<std::size_t>(n) * Cout * Ho * Wo);
  }
  auto bwd = [N, Cin, H, W, Cout, kh, kw, stride, pad, Ho, Wo, K](Node<T>& nd) {
    const Tensor<T>& xv = nd.parents[0]->value;
    const Tensor<T>& wv = nd.parents[1]->value;
    const bool need_dx = nd.parents[0]->requires_grad;
    const bool need_dw = nd.parents[1]->requires_grad;
    std::vector<T> col(static_cast<std::size_t>(K) * Ho * Wo);
    std::vector<T> scratch;
    std::vector<T> wt;
    if (need_dw) scratch.resize(static_cast<std::size_t>(Ho) * Wo * K);
    if (need_dx) {
      wt.resize(static_cast<std::size_t>(K) * Cout);
      nirvis::detail::transpose(Cout, K, wv.data(), wt.data());
    }
    std::vector<T> colgrad(need_dx ? static_cast<std::size_t>(K) * Ho * Wo : 0);
    for (int n = 0; n < N; ++n) {
      const T* dy = nd.grad.data() + static_cast<std::size_t>(n) * Cout * Ho * Wo;
      if (need_dw) {
        detail::im2col(xv.data() + static_cast<std::size_t>(n) * Cin * H * W, Cin, H, W, kh, kw,
                       stride, pad, Ho, Wo, col.data());
        nirvis::detail::transpose(K, Ho * Wo, col.data(), scratch.data());
        nirvis::detail::gemm_acc(Cout, K, Ho * Wo, dy, scratch.data(),
                                 nd.parents[1]->ensure_grad().data());
      }
      if (need_dx) {
        std::fill(colgrad.begin(), colgrad.end(), T(0));
        nirvis::detail::gemm_acc(K, Ho * Wo, Cout, wt.data(), dy, colgrad.data());
        detail::col2im_acc(colgrad.data(), Cin, H, W, kh, kw, stride, pad, Ho, Wo,
                           nd.parents[0]->ensure_grad().data() +
                               static_cast<std::size_t>(n) * Cin * H * W);
      }
    }
  };
  return detail::make_op<T>("conv2d", std::move(out), {x, w}, std::move(bwd));
}

// Nearest-neighbor 2x upsample on (N,C,H,W).
template <typename T>
Var<T> upsample2x(const Var<T>& x) {
  const Tensor<T>& xv = x.value();
  if (xv.rank() != 4) throw ShapeError("upsample2x: expected 4-d input, got " + shape_str(xv.shape()));
  const int N = xv.dim(0), C = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
  Tensor<T> out({N, C, 2 * H, 2 * W});
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int h = 0; h < 2 * H; ++h)
        for (int w = 0; w < 2 * W; ++w) out.at(n, c, h, w) = xv.at(n, c, h / 2, w / 2);
  return detail::make_op<T>("upsample2x", std::move(out), {x}, [N, C, H, W](Node<T>& nd) {
    if (!nd.parents[0]->requires_grad) return;
    Tensor<T>& dx = nd.parents[0]->ensure_grad();
    for (int n = 0; n < N; ++n)
      for (int c = 0; c < C; ++c)
        for (int h = 0; h < 2 * H; ++h)
          for (int w = 0; w < 2 * W; ++w) dx.at(n, c, h / 2, w / 2) += nd.grad.at(n, c, h, w);
  });
}

// 2x2 max pooling, stride 2. Ties route the gradient to the first maximum
// in scan order, which keeps backward deterministic.
template <typename T>
Var<T> maxpool2x2(const Var<T>& x) {
  const Tensor<T>& xv = x.value();
  if (xv.rank() != 4) throw ShapeError("maxpool2x2: expected 4-d input, got " + shape_str(xv.shape()));
  const int N = xv.dim(0), C = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
  if (H % 2 || W % 2)
    throw ShapeError("maxpool2x2: spatial dims must be even, got " + shape_str(xv.shape()));
  const int Ho = H / 2, Wo = W / 2;
  Tensor<T> out({N, C, Ho, Wo});
  std::vector<std::int64_t> arg(static_cast<std::size_t>(out.numel()));
  std::int64_t oi = 0;
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int oh = 0; oh < Ho; ++oh)
        for (int ow = 0; ow < Wo; ++ow, ++oi) {
          T best = xv.at(n, c, 2 * oh, 2 * ow);
          int bh = 2 * oh, bw = 2 * ow;
          for (int dh = 0; dh < 2; ++dh)
            for (int dw = 0; dw < 2; ++dw) {
              const T v = xv.at(n, c, 2 * oh + dh, 2 * ow + dw);
              if (v > best) {
                best = v;
                bh = 2 * oh + dh;
                bw = 2 * ow + dw;
              }
            }
          out[oi] = best;
          arg[static_cast<std::size_t>(oi)] =
              ((static_cast<std::int64_t>(n) * C + c) * H + bh) * W + bw;
        }
  return detail::make_op<T>("maxpool2x2", std::move(out), {x}, [arg = std::move(arg)](Node<T>& nd) {
    if (!nd.parents[0]->requires_grad) return;
    Tensor<T>& dx = nd.parents[0]->ensure_grad();
    for (std::int64_t i = 0; i < nd.grad.numel(); ++i)
      dx[arg[static_cast<std::size_t>(i)]] += nd.grad[i];
  });
}

// ---------------------------------------------------------------------------
// Shape surgery

template <typename T>
Var<T> reshape(const Var<T>& x, Shape s) {
  Tensor<T> out = x.value().reshaped(std::move(s));
  Shape orig = x.value().shape();
  return detail::make_op<T>("reshape", std::move(out), {x}, [orig = std::move(orig)](Node<T>& nd) {
    if (!nd.parents[0]->requires_grad) return;
    detail::accumulate(*nd.parents[0], nd.grad.reshaped(orig));
  });
}

// Concatenation along the channel axis (axis 1).
template <typename T>
Var<T> concat_channels(const Var<T>& a, const Var<T>& b) {
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  if (av.rank() != bv.rank() || av.rank() < 2)
    throw ShapeError("concat_channels: rank mismatch " + shape_str(av.shape()) + " vs " +
                     shape_str(bv.shape()));
  for (int i = 0; i < av.rank(); ++i)
    if (i != 1 && av.dim(i) != bv.dim(i))
      throw ShapeError("concat_channels: shape mismatch " + shape_str(av.shape()) + " vs " +
                       shape_str(bv.shape()));
  Shape out_shape = av.shape();
  out_shape[1] = av.dim(1) + bv.dim(1);
  Tensor<T> out(out_shape);
  const std::int64_t outer = av.dim(0);
  const std::int64_t ia = av.numel() / outer, ib = bv.numel() / outer;
  for (std::int64_t o = 0; o < outer; ++o) {
    std::copy_n(av.data() + o * ia, ia, out.data() + o * (ia + ib));
    std::copy_n(bv.data() + o * ib, ib, out.data() + o * (ia + ib) + ia);
  }
  return detail::make_op<T>("concat_channels", std::move(out), {a, b},
                            [outer, ia, ib](Node<T>& nd) {
                              for (std::int64_t o = 0; o < outer; ++o) {
                                if (nd.parents[0]->requires_grad) {
                                  Tensor<T>& da = nd.parents[0]->ensure_grad();
                                  const T* g = nd.grad.data() + o * (ia + ib);
                                  for (std::int64_t i = 0; i < ia; ++i) da[o * ia + i] += g[i];
                                }
                                if (nd.parents[1]->requires_grad) {
                                  Tensor<T>& db = nd.parents[1]->ensure_grad();
                                  const T* g = nd.grad.data() + o * (ia + ib) + ia;
                                  for (std::int64_t i = 0; i < ib; ++i) db[o * ib + i] += g[i];
                                }
                              }
                            });
}

// Concatenation along the leading axis; trailing dims must match.
template <typename T>
Var<T> concat_rows(const Var<T>& a, const Var<T>& b) {
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  if (av.rank() != bv.rank() || av.rank() < 1)
    throw ShapeError("concat_rows: rank mismatch " + shape_str(av.shape()) + " vs " +
                     shape_str(bv.shape()));
  for (int i = 1; i < av.rank(); ++i)
    if (av.dim(i) != bv.dim(i))
      throw ShapeError("concat_rows: shape mismatch " + shape_str(av.shape()) + " vs " +
                       shape_str(bv.shape()));
  Shape out_shape = av.shape();
  out_shape[0] = av.dim(0) + bv.dim(0);
  Tensor<T> out(out_shape);
  std::copy_n(av.data(), av.numel(), out.data());
  std::copy_n(bv.data(), bv.numel(), out.data() + av.numel());
  const std::int64_t na = av.numel();
  return detail::make_op<T>("concat_rows", std::move(out), {a, b}, [na](Node<T>& nd) {
    if (nd.parents[0]->requires_grad) {
      Tensor<T>& da = nd.parents[0]->ensure_grad();
      for (std::int64_t i = 0; i < na; ++i) da[i] += nd.grad[i];
    }
    if (nd.parents[1]->requires_grad) {
      Tensor<T>& db = nd.parents[1]->ensure_grad();
      for (std::int64_t i = 0; i < db.numel(); ++i) db[i] += nd.grad[na + i];
    }
  });
}

// Rectangular slice: out[i...] = x[starts + i...].
template <typename T>
Var<T> slice(const Var<T>& x, const std::vector<int>& starts, const Shape& sizes) {
  const Tensor<T>& xv = x.value();
  const int r = xv.rank();
  if (static_cast<int>(starts.size()) != r || static_cast<int>(sizes.size()) != r)
    throw ShapeError("slice: starts/sizes rank mismatch with input " + shape_str(xv.shape()));
  for (int i = 0; i < r; ++i)
    if (starts[static_cast<std::size_t>(i)] < 0 || sizes[static_cast<std::size_t>(i)] <= 0 ||
        starts[static_cast<std::size_t>(i)] + sizes[static_cast<std::size_t>(i)] > xv.dim(i))
      throw ShapeError("slice: window out of bounds for input " + shape_str(xv.shape()));
  Tensor<T> out(sizes);
  std::vector<int> coord(static_cast<std::size_t>(r), 0);
  std::vector<std::int64_t> map(static_cast<std::size_t>(out.numel()));
  for (std::int64_t oi = 0; oi < out.numel(); ++oi) {
    std::int64_t src = 0;
    for (int i = 0; i < r; ++i)
      src = src * xv.dim(i) + coord[static_cast<std::size_t>(i)] + starts[static_cast<std::size_t>(i)];
    out[oi] = xv[src];
    map[static_cast<std::size_t>(oi)] = src;
    for (int i = r - 1; i >= 0; --i) {
      if (++coord[static_cast<std::size_t>(i)] < sizes[static_cast<std::size_t>(i)]) break;
      coord[static_cast<std::size_t>(i)] = 0;
    }
  }
  return detail::make_op<T>("slice", std::move(out), {x}, [map = std::move(map)](Node<T>& nd) {
    if (!nd.parents[0]->requires_grad) return;
    Tensor<T>& dx = nd.parents[0]->ensure_grad();
    for (std::int64_t i = 0; i < nd.grad.numel(); ++i)
      dx[map[static_cast<std::size_t>(i)]] += nd.grad[i];
  });
}

// Horizontal mirror (reverses the last axis).
template <typename T>
Var<T> flip_w(const Var<T>& x) {
  const Tensor<T>& xv = x.value();
  if (xv.rank() < 1) throw ShapeError("flip_w: needs rank >= 1");
  const int W = xv.dim(xv.rank() - 1);
  const std::int64_t rows = xv.numel() / W;
  Tensor<T> out(xv.shape());
  for (std::int64_t r = 0; r < rows; ++r)
    for (int w = 0; w < W; ++w) out[r * W + w] = xv[r * W + (W - 1 - w)];
  return detail::make_op<T>("flip_w", std::move(out), {x}, [W, rows](Node<T>& nd) {
    if (!nd.parents[0]->requires_grad) return;
    Tensor<T>& dx = nd.parents[0]->ensure_grad();
    for (std::int64_t r = 0; r < rows; ++r)
      for (int w = 0; w < W; ++w) dx[r * W + (W - 1 - w)] += nd.grad[r * W + w];
  });
}

// out = base; out[:, :, r0:r0+ph, c0:c0+pw] += patch. Batch and channel
// extents must match.
template <typename T>
Var<T> paste_add(const Var<T>& base, const Var<T>& patch, int r0, int c0) {
  const Tensor<T>& bv = base.value();
  const Tensor<T>& pv = patch.value();
  if (bv.rank() != 4 || pv.rank() != 4 || bv.dim(0) != pv.dim(0) || bv.dim(1) != pv.dim(1))
    throw ShapeError("paste_add: base " + shape_str(bv.shape()) + " vs patch " +
                     shape_str(pv.shape()));
  const int ph = pv.dim(2), pw = pv.dim(3);
  if (r0 < 0 || c0 < 0 || r0 + ph > bv.dim(2) || c0 + pw > bv.dim(3))
    throw ShapeError("paste_add: patch window out of bounds");
  Tensor<T> out = bv;
  const int N = bv.dim(0), C = bv.dim(1);
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int i = 0; i < ph; ++i)
        for (int j = 0; j < pw; ++j) out.at(n, c, r0 + i, c0 + j) += pv.at(n, c, i, j);
  return detail::make_op<T>("paste_add", std::move(out), {base, patch},
                            [r0, c0, ph, pw, N, C](Node<T>& nd) {
                              detail::accumulate(*nd.parents[0], nd.grad);
                              if (!nd.parents[1]->requires_grad) return;
                              Tensor<T>& dp = nd.parents[1]->ensure_grad();
                              for (int n = 0; n < N; ++n)
                                for (int c = 0; c < C; ++c)
                                  for (int i = 0; i < ph; ++i)
                                    for (int j = 0; j < pw; ++j)
                                      dp.at(n, c, i, j) += nd.grad.at(n, c, r0 + i, c0 + j);
                            });
}

// Stacks equal-shape tensors along a new leading axis.
template <typename T>
Var<T> stack0(const std::vector<Var<T>>& xs) {
  if (xs.empty()) throw ValueError("stack0: empty input list");
  const Shape& s = xs[0].shape();
  for (const auto& x : xs) detail::require_same_shape("stack0", xs[0].value(), x.value());
  Shape out_shape;
  out_shape.push_back(static_cast<int>(xs.size()));
  out_shape.insert(out_shape.end(), s.begin(), s.end());
  Tensor<T> out(out_shape);
  const std::int64_t per = xs[0].value().numel();
  for (std::size_t i = 0; i < xs.size(); ++i)
    std::copy_n(xs[i].value().data(), per, out.data() + static_cast<std::int64_t>(i) * per);
  return detail::make_op<T>("stack0", std::move(out), xs, [per](Node<T>& nd) {
    for (std::size_t i = 0; i < nd.parents.size(); ++i) {
      if (!nd.parents[i]->requires_grad) continue;
      Tensor<T>& dx = nd.parents[i]->ensure_grad();
      const T* g = nd.grad.data() + static_cast<std::int64_t>(i) * per;
      for (std::int64_t j = 0; j < per; ++j) dx[j] += g[j];
    }
  });
}

// ---------------------------------------------------------------------------
// Normalization and classification heads

// Per-channel, per-sample normalization over the spatial extent with a
// learnable affine, epsilon 1e-5.
template <typename T>
Var<T> instance_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta,
                     T eps = T(1e-5)) {
  const Tensor<T>& xv = x.value();
  if (xv.rank() != 4) throw ShapeError("instance_norm: expected 4-d input, got " + shape_str(xv.shape()));
  const int N = xv.dim(0), C = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
  if (gamma.value().rank() != 1 || gamma.value().dim(0) != C || beta.value().rank() != 1 ||
      beta.value().dim(0) != C)
    throw ShapeError("instance_norm: affine params must be (C), input " + shape_str(xv.shape()));
  const std::int64_t m = static_cast<std::int64_t>(H) * W;
  Tensor<T> mu({N, C}), inv_std({N, C});
  Tensor<T> out(xv.shape());
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const T* px = &xv.at(n, c, 0, 0);
      T s = 0;
      for (std::int64_t i = 0; i < m; ++i) s += px[i];
      const T mean_v = s / static_cast<T>(m);
      T v = 0;
      for (std::int64_t i = 0; i < m; ++i) {
        const T d = px[i] - mean_v;
        v += d * d;
      }
      v /= static_cast<T>(m);
      const T is = T(1) / std::sqrt(v + eps);
      mu.at(n, c) = mean_v;
      inv_std.at(n, c) = is;
      const T g = gamma.value()[c], b = beta.value()[c];
      T* po = &out.at(n, c, 0, 0);
      for (std::int64_t i = 0; i < m; ++i) po[i] = g * (px[i] - mean_v) * is + b;
    }
  auto bwd = [N, C, m, mu = std::move(mu), inv_std = std::move(inv_std)](Node<T>& nd) {
    const Tensor<T>& xv = nd.parents[0]->value;
    const Tensor<T>& gv = nd.parents[1]->value;
    const bool need_dx = nd.parents[0]->requires_grad;
    const bool need_dg = nd.parents[1]->requires_grad;
    const bool need_db = nd.parents[2]->requires_grad;
    for (int n = 0; n < N; ++n)
      for (int c = 0; c < C; ++c) {
        const T mean_v = mu.at(n, c), is = inv_std.at(n, c);
        const std::int64_t base = (static_cast<std::int64_t>(n) * C + c) * m;
        T sum_g = 0, sum_gx = 0;
        for (std::int64_t i = 0; i < m; ++i) {
          const T xhat = (xv[base + i] - mean_v) * is;
          sum_g += nd.grad[base + i];
          sum_gx += nd.grad[base + i] * xhat;
        }
        if (need_dg) nd.parents[1]->ensure_grad()[c] += sum_gx;
        if (need_db) nd.parents[2]->ensure_grad()[c] += sum_g;
        if (need_dx) {
          Tensor<T>& dx = nd.parents[0]->ensure_grad();
          const T k = gv[c] * is;
          const T mg = sum_g / static_cast<T>(m);
          const T mgx = sum_gx / static_cast<T>(m);
          for (std::int64_t i = 0; i < m; ++i) {
            const T xhat = (xv[base + i] - mean_v) * is;
            dx[base + i] += k * (nd.grad[base + i] - mg - xhat * mgx);
          }
        }
      }
  };
  return detail::make_op<T>("instance_norm", std::move(out), {x, gamma, beta}, std::move(bwd));
}

// Mean softmax cross-entropy of (B,C) logits against integer labels.
// Numerically stable (max-shifted logsumexp).
template <typename T>
Var<T> softmax_cross_entropy(const Var<T>& logits, const std::vector<int>& labels) {
  const Tensor<T>& lv = logits.value();
  if (lv.rank() != 2) throw ShapeError("softmax_cross_entropy: expected (B,C), got " + shape_str(lv.shape()));
  const int B = lv.dim(0), C = lv.dim(1);
  if (static_cast<int>(labels.size()) != B)
    throw ShapeError("softmax_cross_entropy: batch " + std::to_string(B) + " vs " +
                     std::to_string(labels.size()) + " labels");
  for (int y : labels)
    if (y < 0 || y >= C)
      throw ValueError("softmax_cross_entropy: label " + std::to_string(y) + " outside [0," +
                       std::to_string(C) + ")");
  T total = 0;
  for (int i = 0; i < B; ++i) {
    T mx = lv.at(i, 0);
    for (int j = 1; j < C; ++j) mx = std::max(mx, lv.at(i, j));
    T lse = 0;
    for (int j = 0; j < C; ++j) lse += std::exp(lv.at(i, j) - mx);
    lse = mx + std::log(lse);
    total += lse - lv.at(i, labels[static_cast<std::size_t>(i)]);
  }
  Tensor<T> out = Tensor<T>::scalar(total / static_cast<T>(B));
  return detail::make_op<T>("softmax_cross_entropy", std::move(out), {logits},
                            [labels, B, C](Node<T>& nd) {
                              if (!nd.parents[0]->requires_grad) return;
                              const Tensor<T>& lv = nd.parents[0]->value;
                              Tensor<T>& dx = nd.parents[0]->ensure_grad();
                              const T g = nd.grad[0] / static_cast<T>(B);
                              for (int i = 0; i < B; ++i) {
                                T mx = lv.at(i, 0);
                                for (int j = 1; j < C; ++j) mx = std::max(mx, lv.at(i, j));
                                T z = 0;
                                for (int j = 0; j < C; ++j) z += std::exp(lv.at(i, j) - mx);
                                for (int j = 0; j < C; ++j) {
                                  const T p = std::exp(lv.at(i, j) - mx) / z;
                                  dx.at(i, j) +=
                                      g * (p - (j == labels[static_cast<std::size_t>(i)] ? T(1)
                                                                                         : T(0)));
                                }
                              }
                            });
}

// ---------------------------------------------------------------------------
// Backward driver

template <typename T>
void backward(const Var<T>& root) {
  if (root.value().numel() != 1)
    throw ValueError("backward: root must be scalar, got " + shape_str(root.shape()));
  if (!root.requires_grad()) return;

  // Iterative post-order DFS; reversed post-order is a topological order.
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<Node<T>*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<T>* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  root.node()->ensure_grad().fill(T(1));
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if ((*it)->backward) (*it)->backward(**it);
}

}  // namespace nirvis::ad
