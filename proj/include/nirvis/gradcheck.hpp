#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "nirvis/autodiff.hpp"
#include "nirvis/features.hpp"
#include "nirvis/hallucination.hpp"
#include "nirvis/rng.hpp"
#include "nirvis/tensor.hpp"

// Central-difference gradient verification for every differentiable
// primitive. The finite-difference quotient is the oracle: analytic backward
// rules must agree with it to < 1e-4 relative error at random double points.
namespace nirvis::gradcheck {

struct CaseInstance {
  std::vector<Tensor<double>> inputs;
  // Maps the wrapped inputs to a scalar loss. Called many times with
  // perturbed values, so it must be a pure function of the inputs.
  std::function<ad::Var<double>(const std::vector<ad::Var<double>>&)> forward;
};

struct Case {
  std::string name;
  std::function<CaseInstance(std::mt19937_64&)> make;
};

struct Report {
  std::string name;
  double max_rel_err = 0.0;
  bool pass = false;
};

namespace detail {

inline Tensor<double> uniform(std::mt19937_64& rng, Shape s, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  Tensor<double> t(std::move(s));
  for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = d(rng);
  return t;
}

// Uniform values kept away from zero: safe around |x| kinks.
inline Tensor<double> uniform_off_zero(std::mt19937_64& rng, Shape s, double mag) {
  std::uniform_real_distribution<double> d(0.1, mag);
  std::bernoulli_distribution sign(0.5);
  Tensor<double> t(std::move(s));
  for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = (sign(rng) ? 1.0 : -1.0) * d(rng);
  return t;
}

// Projects a tensor output to a scalar through a fixed random functional so
// the check exercises non-uniform upstream gradients.
inline ad::Var<double> project(const ad::Var<double>& out, std::mt19937_64& rng) {
  Tensor<double> r = uniform(rng, out.shape(), -1.0, 1.0);
  return ad::sum(ad::mul(out, ad::Var<double>::constant(std::move(r))));
}

inline double run_instance(const CaseInstance& inst, double eps) {
  std::vector<ad::Var<double>> vars;
  vars.reserve(inst.inputs.size());
  for (const auto& t : inst.inputs) vars.push_back(ad::Var<double>::param(t));
  ad::Var<double> loss = inst.forward(vars);
  ad::backward(loss);

  std::vector<Tensor<double>> work = inst.inputs;
  auto eval = [&]() {
    ad::NoGradGuard g;
    std::vector<ad::Var<double>> cs;
    cs.reserve(work.size());
    for (const auto& t : work) cs.push_back(ad::Var<double>::constant(t));
    return inst.forward(cs).item();
  };

  double worst = 0.0;
  for (std::size_t vi = 0; vi < work.size(); ++vi) {
    for (std::int64_t k = 0; k < work[vi].numel(); ++k) {
      const double orig = work[vi][k];
      work[vi][k] = orig + eps;
      const double fp = eval();
      work[vi][k] = orig - eps;
      const double fm = eval();
      work[vi][k] = orig;
      const double fd = (fp - fm) / (2.0 * eps);
      const double analytic = vars[vi].has_grad() ? vars[vi].grad()[k] : 0.0;
      const double rel = std::abs(analytic - fd) / std::max(1.0, std::abs(fd));
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

}  // namespace detail

inline std::vector<Case> all_cases() {
  using ad::Var;
  using detail::project;
  using detail::uniform;
  using detail::uniform_off_zero;
  using V = std::vector<ad::Var<double>>;
  std::vector<Case> cases;
  auto add_case = [&](std::string name, std::function<CaseInstance(std::mt19937_64&)> make) {
    cases.push_back({std::move(name), std::move(make)});
  };

  add_case("add", [](std::mt19937_64& rng) {
    CaseInstance c;
    c.inputs = {uniform(rng, {3, 4}, -2, 2), uniform(rng, {3, 4}, -2, 2)};
    auto r = uniform(rng, {3, 4}, -1, 1);
    c.forward = [r](const V& v) {
      return ad::sum(ad::mul(ad::add(v[0], v[1]), Var<double>::constant(r)));
    };
    return c;
  });
  add_case("sub", [](std::mt19937_64& rng) {
    CaseInstance c;
    c.inputs = {uniform(rng, {3, 4}, -2, 2), uniform(rng, {3, 4}, -2, 2)};
    auto r = uniform(rng, {3, 4}, -1, 1);
    c.forward = [r](const V& v) {
      return ad::sum(ad::mul(ad::sub(v[0], v[1]), Var<double>::constant(r)));
    };
    return c;
  });
  add_case("mul", [](std::mt19937_64& rng) {
    CaseInstance c;
    c.inputs = {uniform(rng, {3, 4}, -2, 2), uniform(rng, {3, 4}, -2, 2)};
    auto r = uniform(rng, {3, 4}, -1, 1);
    c.forward = [r](const V& v) {
      return ad::sum(ad::mul(ad::mul(v[0], v[1]), Var<double>::constant(r)));
    };
    return c;
  });
  add_case("affine", [](std::mt19937_64& rng) {
    CaseInstance c;
    c.inputs = {uniform(rng, {5}, -2, 2)};
    auto r = uniform(rng, {5}, -1, 1);
    c.forward = [r](const V& v) {
      return ad::sum(ad::mul(ad::affine(v[0], -1.7, 0.4), Var<double>::constant(r)));
    };
    return c;
  });
  add_case("square", [](std::mt19937_64& rng) {
    CaseInstance c;
    c.inputs = {uniform(rng, {4, 3}, -2, 2)};
    auto r = uniform(rng, {4, 3}, -1, 1);
    c.forward = [r](const V& v) {
      return ad::sum(ad::mul(ad::square(v[0]), Var<double>::constant(r)));
    };
    return c;
  });
  add_case("bias_add", [](std::mt19937_64& rng) {
    CaseInstance c;
    c.inputs = {uniform(rng, {2, 3, 4, 4}, -2, 2), uniform(rng, {3}, -1, 1)};
    auto r = uniform(rng, {2, 3, 4, 4}, -1, 1);
    c.forward = [r](const V& v) {
      return ad::sum(ad::mul(ad::bias_add(v[0], v[1]), Var<double>::constant(r)));
    };
    return c;
  });
  add_case("leaky_relu", [](std::mt19937_64& rng) {
    CaseInstance c;
    c.inputs = {uniform_off_zero(rng, {4, 5}, 2.0)};
    auto r = uniform(rng, {4, 5}, -1, 1);
    c.forward = [r](const V& v) {
      return ad::sum(ad::mul(ad::leaky_relu(v[0], 0.2), Var<double>::constant(r)));
    };
    return c;
  });
  add_case("relu", [](std::mt19937_64& rng) {
    CaseInstance c;
    c.inputs = {uniform_off_zero(rng, {4, 5}, 2.0)};
    auto r = uniform(rng, {4, 5}, -1, 1);
    c.forward = [r](const V& v) {
      return ad::sum(ad::mul(ad::relu(v[0]), Var<double>::constant(r)));
    };
    return c;
  });
  add_case("tanh", [](std::mt19937_64& rng) {
    CaseInstance c;
    c.inputs = {uniform(rng, {3, 3}, -2, 2)};
    auto r = uniform(rng, {3, 3}, -1, 1);
    c.forward = [r](const V& v) {
      return ad::sum(ad::mul(ad::tanh(v[0]), Var<double>::constant(r)));
    };
    return c;
  });
  add_case("sigmoid", [](std::mt19937_64& rng) {
    CaseInstance c;
    c.inputs = {uniform(rng, {3, 3}, -4, 4)};
    auto r = uniform(rng, {3, 3}, -1, 1);
    c.forward = [r](const V& v) {
      return ad::sum(ad::mul(ad::sigmoid(v[0]), Var<double>::constant(r)));
    };
    return c;
  });
  add_case("log", [](std::mt19937_64& rng) {
    CaseInstance c;
    c.inputs = {uniform(rng, {3, 3}, 0.1, 3.0)};
    auto r = uniform(rng, {3, 3}, -1, 1);
    c.forward = [r](const V& v) {
      return ad::sum(ad::mul(ad::log(v[0]), Var<double>::constant(r)));
    };
    return c;
  });
  add_case("sum_axes", [](std::mt19937_64& rng) {
    CaseInstance c;
    c.inputs = {uniform(rng, {2, 3, 4}, -2, 2)};
    auto r = uniform(rng, {2, 4}, -1, 1);
    c.forward = [r](const V& v) {
      return ad::sum(ad::mul(ad::sum(v[0], {1}), Var<double>::constant(r)));
    };
    return c;
  });
  add_case("mean_axes", [](std::mt19937_64& rng) {
    CaseInstance c;
    c.inputs = {uniform(rng, {2, 3, 4}, -2, 2)};
    auto r = uniform(rng, {3}, -1, 1);
    c.forward = [r](const V& v) {
      return ad::sum(ad::mul(ad::mean(v[0], {0, 2}), Var<double>::constant(r)));
    };
    return c;
  });
  add_case("mean_all", [](std::mt19937_64& rng) {
    CaseInstance c;
    c.inputs = {uniform(rng, {3, 5}, -2, 2)};
    c.forward = [](const V& v) { return ad::mean(v[0]); };
    return c;
  });
  add_case("l1_mean", [](std::mt19937_64& rng) {
    CaseInstance c;
    Tensor<double> a = uniform(rng, {3, 4}, -2, 2);
    Tensor<double> off = uniform_off_zero(rng, {3, 4}, 1.0);
    Tensor<double> b(a.shape());
    for (std::int64_t i = 0; i < a.numel(); ++i) b[i] = a[i] + off[i];
    c.inputs = {std::move(a), std::move(b)};
    c.forward = [](const V& v) { return ad::l1_mean(v[0], v[1]); };
    return c;
  });
  add_case("l2_norm_last", [](std::mt19937_64& rng) {
    CaseInstance c;
    c.inputs = {uniform_off_zero(rng, {4, 6}, 2.0)};
    auto r = uniform(rng, {4}, -1, 1);
    c.forward = [r](const V& v) {
      return ad::sum(ad::mul(ad::l2_norm_last(v[0]), Var<double>::constant(r)));
    };
    return c;
  });
  add_case("var_rows", [](std::mt19937_64& rng) {
    CaseInstance c;
    c.inputs = {uniform(rng, {5, 4}, -2, 2)};
    auto r = uniform(rng, {4}, -1, 1);
    c.forward = [r](const V& v) {
      return ad::sum(ad::mul(ad::var_rows(v[0]), Var<double>::constant(r)));
    };
    return c;
  });
  add_case("normalize_rows", [](std::mt19937_64& rng) {
    CaseInstance c;
    // Entries bounded away from zero keep every row norm far above the
    // eps clamp, so the finite-difference probe never crosses that branch.
    c.inputs = {uniform_off_zero(rng, {4, 6}, 2.0)};
    auto r = uniform(rng, {4, 6}, -1, 1);
    c.forward = [r](const V& v) {
      return ad::sum(ad::mul(ad::normalize_rows(v[0]), Var<double>::constant(r)));
    };
    return c;
  });
  add_case("matmul", [](std::mt19937_64& rng) {
    CaseInstance c;
    c.inputs = {uniform(rng, {3, 4}, -1, 1), uniform(rng, {4, 5}, -1, 1)};
    auto r = uniform(rng, {3, 5}, -1, 1);
    c.forward = [r](const V& v) {
      return ad::sum(ad::mul(ad::matmul(v[0], v[1]), Var<double>::constant(r)));
    };
    return c;
  });
  add_case("conv2d_s1", [](std::mt19937_64& rng) {
    CaseInstance c;
    c.inputs = {uniform(rng, {2, 3, 5, 5}, -1, 1), uniform(rng, {4, 3, 3, 3}, -1, 1)};
    auto r = uniform(rng, {2, 4, 5, 5}, -1, 1);
    c.forward = [r](const V& v) {
      return ad::sum(ad::mul(ad::conv2d(v[0], v[1], 1, 1), Var<double>::constant(r)));
    };
    return c;
  });
  add_case("conv2d_s2", [](std::mt19937_64& rng) {
    CaseInstance c;
    c.inputs = {uniform(rng, {1, 2, 6, 6}, -1, 1), uniform(rng, {3, 2, 3, 3}, -1, 1)};
    auto r = uniform(rng, {1, 3, 3, 3}, -1, 1);
    c.forward = [r](const V& v) {
      return ad::sum(ad::mul(ad::conv2d(v[0], v[1], 2, 1), Var<double>::constant(r)));
    };
    return c;
  });
  add_case("upsample2x", [](std::mt19937_64& rng) {
    CaseInstance c;
    c.inputs = {uniform(rng, {1, 2, 3, 3}, -2, 2)};
    auto r = uniform(rng, {1, 2, 6, 6}, -1, 1);
    c.forward = [r](const V& v) {
      return ad::sum(ad::mul(ad::upsample2x(v[0]), Var<double>::constant(r)));
    };
    return c;
  });
  add_case("maxpool2x2", [](std::mt19937_64& rng) {
    CaseInstance c;
    c.inputs = {uniform(rng, {1, 2, 4, 4}, -2, 2)};
    auto r = uniform(rng, {1, 2, 2, 2}, -1, 1);
    c.forward = [r](const V& v) {
      return ad::sum(ad::mul(ad::maxpool2x2(v[0]), Var<double>::constant(r)));
    };
    return c;
  });
  add_case("reshape", [](std::mt19937_64& rng) {
    CaseInstance c;
    c.inputs = {uniform(rng, {2, 6}, -2, 2)};
    auto r = uniform(rng, {3, 4}, -1, 1);
    c.forward = [r](const V& v) {
      return ad::sum(ad::mul(ad::reshape(v[0], {3, 4}), Var<double>::constant(r)));
    };
    return c;
  });
  add_case("concat_channels", [](std::mt19937_64& rng) {
    CaseInstance c;
    c.inputs = {uniform(rng, {2, 2, 3, 3}, -2, 2), uniform(rng, {2, 3, 3, 3}, -2, 2)};
    auto r = uniform(rng, {2, 5, 3, 3}, -1, 1);
    c.forward = [r](const V& v) {
      return ad::sum(ad::mul(ad::concat_channels(v[0], v[1]), Var<double>::constant(r)));
    };
    return c;
  });
  add_case("concat_rows", [](std::mt19937_64& rng) {
    CaseInstance c;
    c.inputs = {uniform(rng, {2, 4}, -2, 2), uniform(rng, {3, 4}, -2, 2)};
    auto r = uniform(rng, {5, 4}, -1, 1);
    c.forward = [r](const V& v) {
      return ad::sum(ad::mul(ad::concat_rows(v[0], v[1]), Var<double>::constant(r)));
    };
    return c;
  });
  add_case("slice", [](std::mt19937_64& rng) {
    CaseInstance c;
    c.inputs = {uniform(rng, {1, 3, 6, 6}, -2, 2)};
    auto r = uniform(rng, {1, 2, 3, 4}, -1, 1);
    c.forward = [r](const V& v) {
      return ad::sum(
          ad::mul(ad::slice(v[0], {0, 1, 2, 1}, {1, 2, 3, 4}), Var<double>::constant(r)));
    };
    return c;
  });
  add_case("flip_w", [](std::mt19937_64& rng) {
    CaseInstance c;
    c.inputs = {uniform(rng, {1, 2, 3, 4}, -2, 2)};
    auto r = uniform(rng, {1, 2, 3, 4}, -1, 1);
    c.forward = [r](const V& v) {
      return ad::sum(ad::mul(ad::flip_w(v[0]), Var<double>::constant(r)));
    };
    return c;
  });
  add_case("paste_add", [](std::mt19937_64& rng) {
    CaseInstance c;
    c.inputs = {uniform(rng, {1, 2, 6, 6}, -2, 2), uniform(rng, {1, 2, 3, 3}, -2, 2)};
    auto r = uniform(rng, {1, 2, 6, 6}, -1, 1);
    c.forward = [r](const V& v) {
      return ad::sum(ad::mul(ad::paste_add(v[0], v[1], 2, 1), Var<double>::constant(r)));
    };
    return c;
  });
  add_case("stack0", [](std::mt19937_64& rng) {
    CaseInstance c;
    c.inputs = {uniform(rng, {2, 3}, -2, 2), uniform(rng, {2, 3}, -2, 2),
                uniform(rng, {2, 3}, -2, 2)};
    auto r = uniform(rng, {3, 2, 3}, -1, 1);
    c.forward = [r](const V& v) {
      return ad::sum(ad::mul(ad::stack0<double>({v[0], v[1], v[2]}), Var<double>::constant(r)));
    };
    return c;
  });
  add_case("instance_norm", [](std::mt19937_64& rng) {
    CaseInstance c;
    c.inputs = {uniform(rng, {2, 2, 3, 3}, -2, 2), uniform(rng, {2}, 0.5, 1.5),
                uniform(rng, {2}, -0.5, 0.5)};
    auto r = uniform(rng, {2, 2, 3, 3}, -1, 1);
    c.forward = [r](const V& v) {
      return ad::sum(ad::mul(ad::instance_norm(v[0], v[1], v[2]), Var<double>::constant(r)));
    };
    return c;
  });
  add_case("softmax_cross_entropy", [](std::mt19937_64& rng) {
    CaseInstance c;
    c.inputs = {uniform(rng, {4, 5}, -2, 2)};
    std::uniform_int_distribution<int> lab(0, 4);
    std::vector<int> labels(4);
    for (auto& y : labels) y = lab(rng);
    c.forward = [labels](const V& v) { return ad::softmax_cross_entropy(v[0], labels); };
    return c;
  });
  // A deep composite: the whole tape (conv -> norm -> activation -> pool ->
  // dense -> loss) must agree end to end, not just op by op.
  add_case("composite_net", [](std::mt19937_64& rng) {
    CaseInstance c;
    c.inputs = {uniform(rng, {1, 2, 8, 8}, -1, 1),  uniform(rng, {3, 2, 3, 3}, -0.5, 0.5),
                uniform(rng, {3}, 0.5, 1.5),        uniform(rng, {3}, -0.5, 0.5),
                uniform(rng, {3 * 4 * 4, 4}, -0.5, 0.5), uniform(rng, {4}, -0.5, 0.5)};
    c.forward = [](const V& v) {
      auto h = ad::conv2d(v[0], v[1], 1, 1);
      h = ad::instance_norm(h, v[2], v[3]);
      h = ad::leaky_relu(h, 0.2);
      h = ad::maxpool2x2(h);
      auto flat = ad::reshape(h, {1, 3 * 4 * 4});
      auto logits = ad::bias_add(ad::matmul(flat, v[4]), v[5]);
      return ad::softmax_cross_entropy(logits, {2});
    };
    return c;
  });
  // -------------------------------------------------------------------------
  // Loss-level cases: the exact training objectives, end to end. Raw inputs
  // pass through sigmoid so probabilities stay inside (0,1) under the +/- eps
  // probes; absolute-difference losses get operand gaps bounded away from the
  // kink at zero.

  // Splits a rank-1 tensor into the per-image scalar scores the adversarial
  // losses consume, squashed into (0,1).
  auto scalar_scores = [](const ad::Var<double>& x) {
    std::vector<ad::Var<double>> s;
    for (std::int64_t i = 0; i < x.shape()[0]; ++i)
      s.push_back(ad::sigmoid(ad::reshape(ad::slice(x, {static_cast<int>(i)}, {1}), {})));
    return s;
  };
  // b = a + strictly positive offset: |a-b| kinks stay > 4*eps away even after
  // channel mixing (luminance weights are positive and sum to 1).
  auto shifted_pair = [](std::mt19937_64& rng, const Shape& s,
                         std::vector<Tensor<double>>& out) {
    Tensor<double> a = uniform(rng, s, -1, 1);
    Tensor<double> off = uniform(rng, s, 0.05, 0.8);
    Tensor<double> b(s);
    for (std::int64_t i = 0; i < a.numel(); ++i) b[i] = a[i] + off[i];
    out.push_back(std::move(a));
    out.push_back(std::move(b));
  };

  add_case("loss_gen_adv", [scalar_scores](std::mt19937_64& rng) {
    CaseInstance c;
    c.inputs = {uniform(rng, {5}, -2, 2)};
    c.forward = [scalar_scores](const V& v) { return hal::loss_gen_adv(scalar_scores(v[0])); };
    return c;
  });
  add_case("loss_disc_adv", [scalar_scores](std::mt19937_64& rng) {
    CaseInstance c;
    c.inputs = {uniform(rng, {4}, -2, 2), uniform(rng, {4}, -2, 2)};
    c.forward = [scalar_scores](const V& v) {
      return hal::loss_disc_adv(scalar_scores(v[0]), scalar_scores(v[1]));
    };
    return c;
  });
  add_case("loss_cycle", [](std::mt19937_64& rng) {
    CaseInstance c;
    Tensor<double> a = uniform(rng, {1, 3, 6, 6}, -1, 1);
    Tensor<double> gap = uniform_off_zero(rng, {1, 3, 6, 6}, 0.8);
    Tensor<double> b(a.shape());
    for (std::int64_t i = 0; i < a.numel(); ++i) b[i] = a[i] + gap[i];
    c.inputs = {std::move(a), std::move(b)};
    c.forward = [](const V& v) { return hal::loss_cycle(v[0], v[1]); };
    return c;
  });
  add_case("loss_intensity", [shifted_pair](std::mt19937_64& rng) {
    CaseInstance c;
    shifted_pair(rng, {2, 3, 4, 4}, c.inputs);
    c.forward = [](const V& v) { return hal::loss_intensity(v[0], v[1]); };
    return c;
  });
  add_case("loss_gen_total", [scalar_scores, shifted_pair](std::mt19937_64& rng) {
    CaseInstance c;
    c.inputs = {uniform(rng, {4}, -2, 2)};
    Tensor<double> a = uniform(rng, {1, 3, 4, 4}, -1, 1);
    Tensor<double> gap = uniform_off_zero(rng, {1, 3, 4, 4}, 0.8);
    Tensor<double> b(a.shape());
    for (std::int64_t i = 0; i < a.numel(); ++i) b[i] = a[i] + gap[i];
    c.inputs.push_back(std::move(a));
    c.inputs.push_back(std::move(b));
    shifted_pair(rng, {1, 3, 4, 4}, c.inputs);
    c.forward = [scalar_scores](const V& v) {
      return hal::loss_gen_total(hal::loss_gen_adv(scalar_scores(v[0])),
                                 hal::loss_cycle(v[1], v[2]), hal::loss_intensity(v[3], v[4]),
                                 0.7, 0.3);
    };
    return c;
  });
  add_case("loss_feat_adv", [](std::mt19937_64& rng) {
    CaseInstance c;
    c.inputs = {uniform(rng, {4, 1}, -2, 2)};
    c.forward = [](const V& v) { return feat::loss_feat_adv(ad::sigmoid(v[0])); };
    return c;
  });
  add_case("loss_feat_disc", [](std::mt19937_64& rng) {
    CaseInstance c;
    c.inputs = {uniform(rng, {3, 1}, -2, 2), uniform(rng, {3, 1}, -2, 2)};
    c.forward = [](const V& v) {
      return feat::loss_feat_disc(ad::sigmoid(v[0]), ad::sigmoid(v[1]));
    };
    return c;
  });
  add_case("loss_cvd", [](std::mt19937_64& rng) {
    CaseInstance c;
    c.inputs = {uniform(rng, {4, 3}, -2, 2), uniform(rng, {4, 3}, -2, 2)};
    c.forward = [](const V& v) {
      std::vector<std::pair<ad::Var<double>, ad::Var<double>>> rows;
      rows.emplace_back(ad::slice(v[0], {0, 0}, {2, 3}), ad::slice(v[1], {0, 0}, {2, 3}));
      rows.emplace_back(ad::slice(v[0], {2, 0}, {2, 3}), ad::slice(v[1], {2, 0}, {2, 3}));
      return feat::loss_cvd(rows);
    };
    return c;
  });
  add_case("loss_cls", [](std::mt19937_64& rng) {
    CaseInstance c;
    c.inputs = {uniform(rng, {4, 5}, -2, 2)};
    std::uniform_int_distribution<int> lab(0, 4);
    std::vector<int> labels(4);
    for (auto& y : labels) y = lab(rng);
    c.forward = [labels](const V& v) { return feat::loss_cls(v[0], labels); };
    return c;
  });
  // Full feature objective: adversarial + weighted variance-discrepancy +
  // weighted classification, through matmul scorers like the real trainer.
  add_case("loss_feat_total", [](std::mt19937_64& rng) {
    CaseInstance c;
    c.inputs = {uniform(rng, {4, 3}, -1, 1), uniform(rng, {4, 3}, -1, 1),
                uniform(rng, {3, 1}, -1, 1), uniform(rng, {3, 4}, -1, 1)};
    c.forward = [](const V& v) {
      auto adv = feat::loss_feat_adv(ad::sigmoid(ad::matmul(v[1], v[2])));
      std::vector<std::pair<ad::Var<double>, ad::Var<double>>> rows;
      rows.emplace_back(ad::slice(v[0], {0, 0}, {2, 3}), ad::slice(v[1], {0, 0}, {2, 3}));
      rows.emplace_back(ad::slice(v[0], {2, 0}, {2, 3}), ad::slice(v[1], {2, 0}, {2, 3}));
      auto cvd = feat::loss_cvd(rows);
      auto logits = ad::matmul(ad::concat_rows(v[0], v[1]), v[3]);
      auto ce = feat::loss_cls(logits, {0, 1, 2, 3, 0, 1, 2, 3});
      return ad::add(adv, ad::add(ad::affine(cvd, 0.02, 0.0), ad::affine(ce, 0.5, 0.0)));
    };
    return c;
  });
  return cases;
}

// Runs every registered case at `points` random double points. eps sits
// inside [1e-7, 1e-4] as required for a trustworthy central difference.
inline std::vector<Report> run_all(std::uint64_t seed, int points = 10, double tol = 1e-4,
                                   double eps = 1e-5) {
  std::vector<Report> reports;
  for (const auto& c : all_cases()) {
    Report r;
    r.name = c.name;
    for (int p = 0; p < points; ++p) {
      auto rng = make_rng(split_seed(seed, "gradcheck/" + c.name, static_cast<std::uint64_t>(p)));
      CaseInstance inst = c.make(rng);
      r.max_rel_err = std::max(r.max_rel_err, detail::run_instance(inst, eps));
    }
    r.pass = r.max_rel_err < tol;
    reports.push_back(std::move(r));
  }
  return reports;
}

}  // namespace nirvis::gradcheck
