#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "nirvis/features.hpp"
#include "nirvis/hallucination.hpp"
#include "nirvis/image.hpp"

using namespace nirvis;
using ad::Var;

namespace {

Tensor<float> random_tensor(Shape s, std::uint64_t seed, float lo = 0.0f, float hi = 1.0f) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> d(lo, hi);
  Tensor<float> t(std::move(s));
  for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = d(rng);
  return t;
}

std::vector<Var<float>> constant_scores(int n, float p) {
  std::vector<Var<float>> s;
  for (int i = 0; i < n; ++i) s.push_back(Var<float>::scalar(p));
  return s;
}

}  // namespace

TEST_CASE("cycle loss vanishes on identity reconstruction", "[losses]") {
  auto x = Var<float>::constant(random_tensor({2, 3, 6, 6}, 1));
  REQUIRE(hal::loss_cycle(x, x).item() == 0.0);
}

TEST_CASE("intensity loss vanishes when only chroma differs", "[losses]") {
  // Two images sharing the luminance plane but with different chroma.
  const int H = 6, W = 6;
  Tensor<float> ycc_a({3, H, W}), ycc_b({3, H, W});
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<float> y(0.3f, 0.7f), c(-0.05f, 0.05f);
  for (int i = 0; i < H * W; ++i) {
    const float Y = y(rng);
    ycc_a[i] = Y;
    ycc_b[i] = Y;
    ycc_a[H * W + i] = 0.5f + c(rng);
    ycc_b[H * W + i] = 0.5f + c(rng);
    ycc_a[2 * H * W + i] = 0.5f + c(rng);
    ycc_b[2 * H * W + i] = 0.5f + c(rng);
  }
  auto a = Var<float>::constant(img::ycbcr_to_rgb(ycc_a).reshaped({1, 3, H, W}));
  auto b = Var<float>::constant(img::ycbcr_to_rgb(ycc_b).reshaped({1, 3, H, W}));
  REQUIRE(hal::loss_intensity(a, b).item() == Catch::Approx(0.0).margin(1e-6));
  // And the differentiable luminance agrees with the imaging grayscale.
  Tensor<float> rgb = img::ycbcr_to_rgb(ycc_a);
  Tensor<float> gray = img::to_gray(rgb);
  auto lum = hal::luma(Var<float>::constant(rgb.reshaped({1, 3, H, W})));
  for (int i = 0; i < H * W; ++i)
    REQUIRE(lum.value()[i] == Catch::Approx(gray[i]).margin(1e-6));
}

TEST_CASE("variance discrepancy vanishes on variance-matched classes", "[losses]") {
  // Adding one constant to every element shifts the mean, not the variance.
  Tensor<float> vis = random_tensor({4, 3}, 3, -1.0f, 1.0f);
  Tensor<float> nir = vis;
  for (std::int64_t i = 0; i < nir.numel(); ++i) nir[i] += 0.25f;
  std::vector<std::pair<Var<float>, Var<float>>> rows;
  rows.emplace_back(Var<float>::constant(vis), Var<float>::constant(nir));
  REQUIRE(feat::loss_cvd(rows).item() == Catch::Approx(0.0).margin(1e-6));
  REQUIRE_THROWS_AS(feat::loss_cvd(std::vector<std::pair<Var<float>, Var<float>>>{}),
                    ValueError);
}

TEST_CASE("adversarial losses hit ln 2 at the 0.5 equilibrium", "[losses]") {
  REQUIRE(hal::loss_gen_adv(constant_scores(4, 0.5f)).item() ==
          Catch::Approx(std::log(2.0)).margin(1e-6));
  REQUIRE(hal::loss_disc_adv(constant_scores(3, 0.5f), constant_scores(3, 0.5f)).item() ==
          Catch::Approx(2.0 * std::log(2.0)).margin(1e-6));

  auto probs = Var<float>::constant(Tensor<float>({4, 1}, {0.5f, 0.5f, 0.5f, 0.5f}));
  REQUIRE(feat::loss_feat_adv(probs).item() == Catch::Approx(std::log(2.0)).margin(1e-6));
  REQUIRE(feat::loss_feat_disc(probs, probs).item() ==
          Catch::Approx(2.0 * std::log(2.0)).margin(1e-6));
}

TEST_CASE("classification loss is ln C at uniform logits", "[losses]") {
  auto logits = Var<float>::constant(Tensor<float>({5, 7}));
  REQUIRE(feat::loss_cls(logits, {0, 1, 2, 3, 4}).item() ==
          Catch::Approx(std::log(7.0)).margin(1e-6));
}

TEST_CASE("generator objective combines its three terms linearly", "[losses]") {
  auto adv = Var<float>::scalar(0.7f);
  auto cyc = Var<float>::scalar(0.3f);
  auto intens = Var<float>::scalar(0.2f);
  REQUIRE(hal::loss_gen_total(adv, cyc, intens, 10.0f, 5.0f).item() ==
          Catch::Approx(0.7 + 3.0 + 1.0).margin(1e-6));
}

// ---------------------------------------------------------------------------
// Trainer-level behavior of the presets

namespace {

ExperimentConfig tiny_feat_config(const std::string& preset) {
  ExperimentConfig cfg;
  cfg.preset = preset;
  cfg.image_size = 20;
  cfg.crop_size = 16;
  cfg.patch_size = 4;
  cfg.feat_width = 2;
  cfg.feature_dim = 8;
  cfg.df_hidden = 4;
  cfg.classes_per_batch = 2;
  cfg.samples_per_class = 2;
  return cfg;
}

std::vector<Tensor<float>> param_snapshot(const nn::NamedParams<float>& ps) {
  std::vector<Tensor<float>> vals;
  for (const auto& [n, v] : ps) vals.push_back(v.value());
  return vals;
}

bool any_param_changed(const nn::NamedParams<float>& ps,
                       const std::vector<Tensor<float>>& before) {
  for (std::size_t i = 0; i < ps.size(); ++i)
    for (std::int64_t k = 0; k < before[i].numel(); ++k)
      if (ps[i].second.value()[k] != before[i][k]) return true;
  return false;
}

feat::FeatStepLosses run_one_step(feat::FeatTrainer& tr, const ExperimentConfig& cfg) {
  const int B = cfg.classes_per_batch * cfg.samples_per_class;
  auto vis = Var<float>::constant(random_tensor({B, 1, 16, 16}, 10));
  auto nir = Var<float>::constant(random_tensor({B, 1, 16, 16}, 11));
  std::vector<int> labels = {0, 0, 1, 1};
  std::vector<feat::FeatTrainer::ClassSlice> slices = {{0, 2, 0, 2}, {2, 4, 2, 4}};
  return tr.step(vis, nir, labels, labels, slices);
}

}  // namespace

TEST_CASE("softmax-only training is exactly the weighted classification loss", "[losses]") {
  const ExperimentConfig cfg = tiny_feat_config("softmax-only");
  feat::FeatTrainer tr(cfg, 2, 5);

  nn::NamedParams<float> df_params;
  tr.df.params(df_params, "df");
  const auto df_before = param_snapshot(df_params);

  const auto losses = run_one_step(tr, cfg);
  REQUIRE(losses.f_adv == 0.0);
  REQUIRE(losses.cvd == 0.0);
  REQUIRE(losses.d_f == 0.0);
  REQUIRE(losses.total == Catch::Approx(cfg.lambda2 * losses.cls).margin(1e-6));

  // The modality discriminator must never move under this preset.
  REQUIRE_FALSE(any_param_changed(df_params, df_before));
}

TEST_CASE("full training moves the discriminator and adds both extra terms", "[losses]") {
  const ExperimentConfig cfg = tiny_feat_config("adfl");
  feat::FeatTrainer tr(cfg, 2, 5);

  nn::NamedParams<float> df_params;
  tr.df.params(df_params, "df");
  const auto df_before = param_snapshot(df_params);

  const auto losses = run_one_step(tr, cfg);
  REQUIRE(losses.f_adv > 0.0);
  REQUIRE(losses.cvd > 0.0);
  REQUIRE(losses.d_f > 0.0);
  REQUIRE(losses.total ==
          Catch::Approx(losses.f_adv + cfg.lambda1 * losses.cvd + cfg.lambda2 * losses.cls)
              .margin(1e-5));
  REQUIRE(any_param_changed(df_params, df_before));
}

TEST_CASE("ablated presets drop exactly their term", "[losses]") {
  {
    feat::FeatTrainer tr(tiny_feat_config("adfl-no-adv"), 2, 5);
    const auto losses = run_one_step(tr, tiny_feat_config("adfl-no-adv"));
    REQUIRE(losses.f_adv == 0.0);
    REQUIRE(losses.cvd > 0.0);
  }
  {
    feat::FeatTrainer tr(tiny_feat_config("adfl-no-cvd"), 2, 5);
    const auto losses = run_one_step(tr, tiny_feat_config("adfl-no-cvd"));
    REQUIRE(losses.f_adv > 0.0);
    REQUIRE(losses.cvd == 0.0);
  }
}

TEST_CASE("balanced batches hold both modalities of every chosen class", "[sampler]") {
  // 3 classes with lopsided pool sizes; batches must still be class-major
  // with samples_per_class rows per modality.
  std::vector<std::vector<int>> vis = {{0, 1}, {2}, {3, 4, 5}};
  std::vector<std::vector<int>> nir = {{10}, {11, 12}, {13}};
  feat::BalancedSampler sampler(vis, nir, 2, 2, 99);

  for (int round = 0; round < 8; ++round) {
    const auto batch = sampler.next();
    REQUIRE(batch.size() == 8);  // 2 classes x 2 modalities x 2 samples
    for (int c = 0; c < 2; ++c) {
      const int label = batch[static_cast<std::size_t>(c * 4)].local_label;
      for (int i = 0; i < 4; ++i) {
        const auto& p = batch[static_cast<std::size_t>(c * 4 + i)];
        REQUIRE(p.local_label == label);  // class-major grouping
        REQUIRE(p.is_vis == (i < 2));     // VIS rows first within the class
        const auto& pool = p.is_vis ? vis[static_cast<std::size_t>(label)]
                                    : nir[static_cast<std::size_t>(label)];
        REQUIRE(std::find(pool.begin(), pool.end(), p.sample_index) != pool.end());
      }
      // samples_per_class > pool size wraps around rather than crashing:
      // class 1 VIS and class 0/2 NIR have a single element.
    }
  }

  REQUIRE_THROWS_AS(feat::BalancedSampler({{0}}, {{}}, 1, 2, 1), ValueError);
  REQUIRE_THROWS_AS(feat::BalancedSampler({}, {}, 1, 2, 1), ValueError);
}

TEST_CASE("sampler cycles classes before repeating", "[sampler]") {
  std::vector<std::vector<int>> vis = {{0}, {1}, {2}, {3}};
  std::vector<std::vector<int>> nir = {{4}, {5}, {6}, {7}};
  feat::BalancedSampler sampler(vis, nir, 2, 2, 7);
  std::set<int> seen;
  for (int b = 0; b < 2; ++b)
    for (const auto& p : sampler.next())
      if (p.is_vis) seen.insert(p.local_label);
  REQUIRE(seen.size() == 4);  // one epoch = every class exactly once
}
