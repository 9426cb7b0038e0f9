#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nirvis/autodiff.hpp"
#include "nirvis/config.hpp"
#include "nirvis/nn.hpp"
#include "nirvis/optim.hpp"
#include "nirvis/rng.hpp"
#include "nirvis/tensor.hpp"

// Cross-spectral hallucination: a cycle-consistent pair of two-path
// generators (G_V: NIR->VIS, G_N: VIS->NIR) trained against per-domain
// discriminators, with an extra luminance-preservation term.
namespace nirvis::hal {

// Differentiable BT.601 luma of a (B,3,H,W) tensor -> (B,1,H,W).
template <typename T>
ad::Var<T> luma(const ad::Var<T>& x) {
  const int B = x.shape()[0], H = x.shape()[2], W = x.shape()[3];
  auto r = ad::slice(x, {0, 0, 0, 0}, {B, 1, H, W});
  auto g = ad::slice(x, {0, 1, 0, 0}, {B, 1, H, W});
  auto b = ad::slice(x, {0, 2, 0, 0}, {B, 1, H, W});
  return ad::add(ad::add(ad::affine(r, T(0.299), T(0)), ad::affine(g, T(0.587), T(0))),
                 ad::affine(b, T(0.114), T(0)));
}

// Top-left patch corners in a HxW frame from an eye center, clamped so the
// window always fits (only relevant on very small canvases).
inline void patch_corner(int eye_r, int eye_c, int patch, int H, int W, int& r0, int& c0) {
  auto clampi = [](int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); };
  r0 = clampi(eye_r - patch / 2, 0, H - patch);
  c0 = clampi(eye_c - patch / 2, 0, W - patch);
}

// An image plus its periocular patch geometry (top-left corners, cropped
// frame coordinates).
template <typename T>
struct GenInput {
  ad::Var<T> img;  // (1,3,H,W)
  int lr0 = 0, lc0 = 0, rr0 = 0, rc0 = 0;
};

// Two-path generator. Global path: 7x7 stem, two stride-2 downsamplers, six
// residual blocks at quarter resolution, two nearest-upsample+conv stages,
// 7x7 head squashed to [0,1]. Local path: a smaller stride-4 encoder with
// three residual blocks run on both eye patches (the right patch arrives
// mirrored into left orientation and is flipped back before fusion); its
// output is added into the global stream before the last residual block.
template <typename T>
struct Generator {
  nn::Conv2d<T> first, down1, down2, up1, up2, last;
  nn::InstanceNorm2d<T> n_first, n_d1, n_d2, n_u1, n_u2;
  std::vector<nn::ResBlock<T>> res;
  nn::Conv2d<T> loc1, loc2;
  nn::InstanceNorm2d<T> n_l1, n_l2;
  std::vector<nn::ResBlock<T>> loc_res;

  Generator() = default;
  Generator(int w, std::mt19937_64& rng)
      : first(3, w, 7, 1, 3, false, T(0.02), rng),
        down1(w, 2 * w, 3, 2, 1, false, T(0.02), rng),
        down2(2 * w, 4 * w, 3, 2, 1, false, T(0.02), rng),
        up1(4 * w, 2 * w, 3, 1, 1, false, T(0.02), rng),
        up2(2 * w, w, 3, 1, 1, false, T(0.02), rng),
        last(w, 3, 7, 1, 3, true, T(0.02), rng),
        n_first(w),
        n_d1(2 * w),
        n_d2(4 * w),
        n_u1(2 * w),
        n_u2(w),
        loc1(3, 2 * w, 3, 2, 1, false, T(0.02), rng),
        loc2(2 * w, 4 * w, 3, 2, 1, false, T(0.02), rng),
        n_l1(2 * w),
        n_l2(4 * w) {
    for (int i = 0; i < 6; ++i) res.emplace_back(4 * w, rng);
    for (int i = 0; i < 3; ++i) loc_res.emplace_back(4 * w, rng);
  }

  ad::Var<T> local_path(const ad::Var<T>& patch) const {
    auto h = ad::relu(n_l1.forward(loc1.forward(patch)));
    h = ad::relu(n_l2.forward(loc2.forward(h)));
    for (const auto& rb : loc_res) h = rb.forward(h);
    return h;
  }

  // Patches are carved out of `in.img` itself (differentiably), so cycle
  // passes propagate gradients through the translated eye regions too.
  ad::Var<T> forward(const GenInput<T>& in, int patch) const {
    auto lp = ad::slice(in.img, {0, 0, in.lr0, in.lc0}, {1, 3, patch, patch});
    auto rp = ad::flip_w(ad::slice(in.img, {0, 0, in.rr0, in.rc0}, {1, 3, patch, patch}));

    auto h = ad::relu(n_first.forward(first.forward(in.img)));
    h = ad::relu(n_d1.forward(down1.forward(h)));
    h = ad::relu(n_d2.forward(down2.forward(h)));
    for (std::size_t i = 0; i + 1 < res.size(); ++i) h = res[i].forward(h);
    h = ad::paste_add(h, local_path(lp), in.lr0 / 4, in.lc0 / 4);
    h = ad::paste_add(h, ad::flip_w(local_path(rp)), in.rr0 / 4, in.rc0 / 4);
    h = res.back().forward(h);
    h = ad::relu(n_u1.forward(up1.forward(ad::upsample2x(h))));
    h = ad::relu(n_u2.forward(up2.forward(ad::upsample2x(h))));
    return ad::affine(ad::tanh(last.forward(h)), T(0.5), T(0.5));
  }

  void params(nn::NamedParams<T>& out, const std::string& p) const {
    first.params(out, p + ".first");
    n_first.params(out, p + ".n_first");
    down1.params(out, p + ".down1");
    n_d1.params(out, p + ".n_d1");
    down2.params(out, p + ".down2");
    n_d2.params(out, p + ".n_d2");
    for (std::size_t i = 0; i < res.size(); ++i)
      res[i].params(out, p + ".res" + std::to_string(i));
    loc1.params(out, p + ".loc1");
    n_l1.params(out, p + ".n_l1");
    loc2.params(out, p + ".loc2");
    n_l2.params(out, p + ".n_l2");
    for (std::size_t i = 0; i < loc_res.size(); ++i)
      loc_res[i].params(out, p + ".locres" + std::to_string(i));
    up1.params(out, p + ".up1");
    n_u1.params(out, p + ".n_u1");
    up2.params(out, p + ".up2");
    n_u2.params(out, p + ".n_u2");
    last.params(out, p + ".last");
  }
};

// Image realness critic: three stride-2 leaky conv stages, a 1-channel map,
// spatial mean, sigmoid. Fully convolutional, so it accepts any size the
// strides divide; no normalization layers.
template <typename T>
struct Discriminator {
  nn::Conv2d<T> c1, c2, c3, head;

  Discriminator() = default;
  Discriminator(int d, std::mt19937_64& rng)
      : c1(3, d, 3, 2, 1, true, T(0.02), rng),
        c2(d, 2 * d, 3, 2, 1, true, T(0.02), rng),
        c3(2 * d, 4 * d, 3, 2, 1, true, T(0.02), rng),
        head(4 * d, 1, 3, 1, 1, true, T(0.02), rng) {}

  // Scalar probability that the image is a real sample of this domain.
  ad::Var<T> forward(const ad::Var<T>& x) const {
    auto h = ad::leaky_relu(c1.forward(x), T(0.2));
    h = ad::leaky_relu(c2.forward(h), T(0.2));
    h = ad::leaky_relu(c3.forward(h), T(0.2));
    return ad::sigmoid(ad::mean(head.forward(h)));
  }

  void params(nn::NamedParams<T>& out, const std::string& p) const {
    c1.params(out, p + ".c1");
    c2.params(out, p + ".c2");
    c3.params(out, p + ".c3");
    head.params(out, p + ".head");
  }
};

// ---------------------------------------------------------------------------
// Losses. Scores are scalar probabilities in (0,1).

// Generator adversarial term: -mean_i log D(G(I_i)).
template <typename T>
ad::Var<T> loss_gen_adv(const std::vector<ad::Var<T>>& fake_scores) {
  return ad::affine(ad::mean(ad::log(ad::stack0(fake_scores))), T(-1), T(0));
}

// Discriminator term: -[mean log D(real) + mean log(1 - D(fake))].
template <typename T>
ad::Var<T> loss_disc_adv(const std::vector<ad::Var<T>>& real_scores,
                         const std::vector<ad::Var<T>>& fake_scores) {
  auto lr = ad::mean(ad::log(ad::stack0(real_scores)));
  auto lf = ad::mean(ad::log(ad::affine(ad::stack0(fake_scores), T(-1), T(1))));
  return ad::affine(ad::add(lr, lf), T(-1), T(0));
}

// Cycle consistency: mean absolute error of the round trip.
template <typename T>
ad::Var<T> loss_cycle(const ad::Var<T>& reconstructed, const ad::Var<T>& original) {
  return ad::l1_mean(reconstructed, original);
}

// Luminance preservation: mean absolute error between the Y channels of the
// translation and its source.
template <typename T>
ad::Var<T> loss_intensity(const ad::Var<T>& translated, const ad::Var<T>& source) {
  return ad::l1_mean(luma(translated), luma(source));
}

// Full generator objective: adversarial + alpha1 * cycle + alpha2 * luminance.
template <typename T>
ad::Var<T> loss_gen_total(const ad::Var<T>& adv, const ad::Var<T>& cyc, const ad::Var<T>& intens,
                          T alpha1, T alpha2) {
  return ad::add(adv, ad::add(ad::affine(cyc, alpha1, T(0)), ad::affine(intens, alpha2, T(0))));
}

// ---------------------------------------------------------------------------
// Trainer

struct HalStepLosses {
  double g_adv = 0, cycle = 0, intensity = 0, g_total = 0, d_total = 0;
};

class HalTrainer {
 public:
  Generator<float> gv, gn;      // NIR->VIS and VIS->NIR
  Discriminator<float> dv, dn;  // VIS-domain and NIR-domain critics

  HalTrainer(const ExperimentConfig& cfg, std::uint64_t seed)
      : cfg_(cfg),
        opt_g_(static_cast<float>(cfg.lr), static_cast<float>(cfg.beta1),
               static_cast<float>(cfg.beta2)),
        opt_d_(static_cast<float>(cfg.lr), static_cast<float>(cfg.beta1),
               static_cast<float>(cfg.beta2)) {
    auto rng = make_rng(split_seed(seed, "hal/init"));
    gv = Generator<float>(cfg.gen_width, rng);
    gn = Generator<float>(cfg.gen_width, rng);
    dv = Discriminator<float>(cfg.disc_width, rng);
    dn = Discriminator<float>(cfg.disc_width, rng);
    nn::NamedParams<float> pg, pd;
    gv.params(pg, "gv");
    gn.params(pg, "gn");
    dv.params(pd, "dv");
    dn.params(pd, "dn");
    for (auto& [n, v] : pg) opt_g_.add_param(v);
    for (auto& [n, v] : pd) opt_d_.add_param(v);
  }

  // One alternating step on equal-sized NIR/VIS minibatches: discriminators
  // first (fakes detached), then both generators jointly.
  HalStepLosses step(const std::vector<GenInput<float>>& nir,
                     const std::vector<GenInput<float>>& vis) {
    if (nir.empty() || nir.size() != vis.size())
      throw ValueError("hal step: need equal nonempty NIR/VIS batches");
    const int patch = cfg_.patch_size;
    const float a1 = static_cast<float>(cfg_.alpha1), a2 = static_cast<float>(cfg_.alpha2);
    HalStepLosses out;

    std::vector<ad::Var<float>> fake_v, fake_n;
    for (std::size_t i = 0; i < nir.size(); ++i) {
      fake_v.push_back(gv.forward(nir[i], patch));
      fake_n.push_back(gn.forward(vis[i], patch));
    }

    {
      std::vector<ad::Var<float>> real_v, real_n, fk_v, fk_n;
      for (std::size_t i = 0; i < nir.size(); ++i) {
        real_v.push_back(dv.forward(vis[i].img));
        real_n.push_back(dn.forward(nir[i].img));
        fk_v.push_back(dv.forward(fake_v[i].detach()));
        fk_n.push_back(dn.forward(fake_n[i].detach()));
      }
      auto l_d = ad::add(loss_disc_adv(real_v, fk_v), loss_disc_adv(real_n, fk_n));
      opt_d_.zero_grad();
      ad::backward(l_d);
      opt_d_.step();
      out.d_total = l_d.item();
    }

    {
      std::vector<ad::Var<float>> sv, sn, cycs, ints;
      for (std::size_t i = 0; i < nir.size(); ++i) {
        sv.push_back(dv.forward(fake_v[i]));
        sn.push_back(dn.forward(fake_n[i]));
        // Round trips reuse the source geometry: the translated face keeps
        // its eye locations.
        GenInput<float> back_v{fake_v[i], nir[i].lr0, nir[i].lc0, nir[i].rr0, nir[i].rc0};
        GenInput<float> back_n{fake_n[i], vis[i].lr0, vis[i].lc0, vis[i].rr0, vis[i].rc0};
        auto rec_n = gn.forward(back_v, patch);
        auto rec_v = gv.forward(back_n, patch);
        cycs.push_back(ad::add(loss_cycle(rec_n, nir[i].img), loss_cycle(rec_v, vis[i].img)));
        ints.push_back(ad::add(loss_intensity(fake_v[i], nir[i].img),
                               loss_intensity(fake_n[i], vis[i].img)));
      }
      auto l_adv = ad::add(loss_gen_adv(sv), loss_gen_adv(sn));
      auto l_cyc = ad::mean(ad::stack0(cycs));
      auto l_int = ad::mean(ad::stack0(ints));
      auto l_g = loss_gen_total(l_adv, l_cyc, l_int, a1, a2);
      opt_g_.zero_grad();
      ad::backward(l_g);
      opt_g_.step();
      out.g_adv = l_adv.item();
      out.cycle = l_cyc.item();
      out.intensity = l_int.item();
      out.g_total = l_g.item();
    }
    return out;
  }

  nn::NamedParams<float> named_params() const {
    nn::NamedParams<float> ps;
    gv.params(ps, "gv");
    gn.params(ps, "gn");
    dv.params(ps, "dv");
    dn.params(ps, "dn");
    return ps;
  }

 private:
  ExperimentConfig cfg_;
  Adam<float> opt_g_, opt_d_;
};

}  // namespace nirvis::hal
