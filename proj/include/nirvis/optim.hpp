#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "nirvis/autodiff.hpp"
#include "nirvis/errors.hpp"
#include "nirvis/tensor.hpp"

namespace nirvis {

// Adam with bias correction. Each optimizer owns an explicit parameter list;
// alternating-update schemes (generator vs discriminator) are enforced by
// registering disjoint lists and only stepping the side being trained.
template <typename T>
class Adam {
 public:
  explicit Adam(T lr, T beta1 = T(0.9), T beta2 = T(0.999), T eps = T(1e-8))
      : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {
    if (!(lr > T(0))) throw ValueError("Adam: learning rate must be positive");
    if (!(beta1 >= T(0) && beta1 < T(1)) || !(beta2 >= T(0) && beta2 < T(1)))
      throw ValueError("Adam: betas must lie in [0,1)");
  }

  void add_param(const ad::Var<T>& p) {
    Slot s;
    s.var = p;
    s.m = Tensor<T>(p.value().shape());
    s.v = Tensor<T>(p.value().shape());
    slots_.push_back(std::move(s));
  }

  void add_params(const std::vector<ad::Var<T>>& ps) {
    for (const auto& p : ps) add_param(p);
  }

  std::size_t size() const { return slots_.size(); }

  // For schedules; moment state is untouched.
  void set_lr(T lr) {
    if (!(lr > T(0))) throw ValueError("Adam: learning rate must be positive");
    lr_ = lr;
  }

  void zero_grad() {
    for (auto& s : slots_) s.var.zero_grad();
  }

  // Parameters without a populated gradient this round are left untouched,
  // including their moment state.
  void step() {
    for (auto& s : slots_) {
      if (!s.var.has_grad()) continue;
      ++s.t;
      const Tensor<T>& g = s.var.grad();
      Tensor<T>& p = s.var.value_mut();
      const T c1 = T(1) - std::pow(b1_, static_cast<T>(s.t));
      const T c2 = T(1) - std::pow(b2_, static_cast<T>(s.t));
      for (std::int64_t i = 0; i < p.numel(); ++i) {
        s.m[i] = b1_ * s.m[i] + (T(1) - b1_) * g[i];
        s.v[i] = b2_ * s.v[i] + (T(1) - b2_) * g[i] * g[i];
        const T mhat = s.m[i] / c1;
        const T vhat = s.v[i] / c2;
        p[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
      }
      if (!p.all_finite()) throw NumericError("Adam: parameter became non-finite after update");
    }
  }

 private:
  struct Slot {
    ad::Var<T> var;
    Tensor<T> m, v;
    std::int64_t t = 0;
  };
  std::vector<Slot> slots_;
  T lr_, b1_, b2_, eps_;
};

}  // namespace nirvis
