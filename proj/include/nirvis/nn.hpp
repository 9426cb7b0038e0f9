#pragma once

#include <cmath>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "nirvis/autodiff.hpp"
#include "nirvis/checkpoint.hpp"
#include "nirvis/rng.hpp"
#include "nirvis/tensor.hpp"

namespace nirvis::nn {

template <typename T>
using NamedParams = std::vector<std::pair<std::string, ad::Var<T>>>;

template <typename T>
Tensor<T> normal_init(Shape s, T stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> d(0.0, static_cast<double>(stddev));
  Tensor<T> t(std::move(s));
  for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(d(rng));
  return t;
}

// Weight scale conventions: GAN-side layers use N(0, 0.02) (the common
// image-translation recipe); recognition-side layers use He scaling so deep
// stacks keep their activation variance.
template <typename T>
T he_std(int fan_in) {
  return static_cast<T>(std::sqrt(2.0 / fan_in));
}

template <typename T>
struct Conv2d {
  ad::Var<T> w, b;
  int stride = 1, pad = 0;
  bool has_bias = true;

  Conv2d() = default;
  Conv2d(int cin, int cout, int k, int stride_, int pad_, bool bias, T wstd,
         std::mt19937_64& rng)
      : stride(stride_), pad(pad_), has_bias(bias) {
    w = ad::Var<T>::param(normal_init<T>({cout, cin, k, k}, wstd, rng));
    if (bias) b = ad::Var<T>::param(Tensor<T>({cout}));
  }

  ad::Var<T> forward(const ad::Var<T>& x) const {
    auto y = ad::conv2d(x, w, stride, pad);
    return has_bias ? ad::bias_add(y, b) : y;
  }

  void params(NamedParams<T>& out, const std::string& prefix) const {
    out.emplace_back(prefix + ".w", w);
    if (has_bias) out.emplace_back(prefix + ".b", b);
  }
};

template <typename T>
struct InstanceNorm2d {
  ad::Var<T> gamma, beta;

  InstanceNorm2d() = default;
  explicit InstanceNorm2d(int channels) {
    gamma = ad::Var<T>::param(Tensor<T>({channels}, T(1)));
    beta = ad::Var<T>::param(Tensor<T>({channels}));
  }

  ad::Var<T> forward(const ad::Var<T>& x) const { return ad::instance_norm(x, gamma, beta); }

  void params(NamedParams<T>& out, const std::string& prefix) const {
    out.emplace_back(prefix + ".gamma", gamma);
    out.emplace_back(prefix + ".beta", beta);
  }
};

template <typename T>
struct Dense {
  ad::Var<T> w, b;
  bool has_bias = true;

  Dense() = default;
  Dense(int in, int out, bool bias, T wstd, std::mt19937_64& rng) : has_bias(bias) {
    w = ad::Var<T>::param(normal_init<T>({in, out}, wstd, rng));
    if (bias) b = ad::Var<T>::param(Tensor<T>({out}));
  }

  ad::Var<T> forward(const ad::Var<T>& x) const {
    auto y = ad::matmul(x, w);
    return has_bias ? ad::bias_add(y, b) : y;
  }

  void params(NamedParams<T>& out, const std::string& prefix) const {
    out.emplace_back(prefix + ".w", w);
    if (has_bias) out.emplace_back(prefix + ".b", b);
  }
};

// conv-norm-relu-conv-norm with an additive skip; no activation after the sum.
template <typename T>
struct ResBlock {
  Conv2d<T> conv1, conv2;
  InstanceNorm2d<T> norm1, norm2;

  ResBlock() = default;
  ResBlock(int channels, std::mt19937_64& rng)
      : conv1(channels, channels, 3, 1, 1, false, T(0.02), rng),
        conv2(channels, channels, 3, 1, 1, false, T(0.02), rng),
        norm1(channels),
        norm2(channels) {}

  ad::Var<T> forward(const ad::Var<T>& x) const {
    auto h = ad::relu(norm1.forward(conv1.forward(x)));
    h = norm2.forward(conv2.forward(h));
    return ad::add(x, h);
  }

  void params(NamedParams<T>& out, const std::string& prefix) const {
    conv1.params(out, prefix + ".conv1");
    norm1.params(out, prefix + ".norm1");
    conv2.params(out, prefix + ".conv2");
    norm2.params(out, prefix + ".norm2");
  }
};

// ---------------------------------------------------------------------------
// Checkpoint bridging (float weights on disk).

inline Checkpoint to_checkpoint(const NamedParams<float>& ps) {
  Checkpoint ck;
  for (const auto& [name, var] : ps) ck.add(name, var.value());
  return ck;
}

inline void load_params(const NamedParams<float>& ps, const Checkpoint& ck) {
  for (const auto& [name, var] : ps) {
    const Tensor<float>& t = ck.require(name);
    if (!t.same_shape(var.value()))
      throw CheckpointError(CheckpointError::Kind::BadData,
                            "entry '" + name + "' has shape " + shape_str(t.shape()) +
                                ", model expects " + shape_str(var.value().shape()));
    ad::Var<float> v = var;  // copies share the underlying node
    v.value_mut() = t;
  }
}

}  // namespace nirvis::nn
