#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <random>
#include <set>

#include "nirvis/features.hpp"
#include "nirvis/hallucination.hpp"
#include "nirvis/nn.hpp"

using namespace nirvis;
using ad::Var;

namespace {

Tensor<float> random_tensor(Shape s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> d(0.0f, 1.0f);
  Tensor<float> t(std::move(s));
  for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = d(rng);
  return t;
}

hal::GenInput<float> gen_input(int S, int patch, std::uint64_t seed) {
  hal::GenInput<float> in;
  in.img = Var<float>::constant(random_tensor({1, 3, S, S}, seed));
  hal::patch_corner(S / 3, S / 3, patch, S, S, in.lr0, in.lc0);
  hal::patch_corner(S / 3, 2 * S / 3, patch, S, S, in.rr0, in.rc0);
  return in;
}

}  // namespace

TEST_CASE("generator preserves spatial size and stays in [0,1]", "[models]") {
  std::mt19937_64 rng(3);
  hal::Generator<float> g(4, rng);
  ad::NoGradGuard ng;
  for (int S : {20, 32}) {
    auto out = g.forward(gen_input(S, 8, 17), 8);
    REQUIRE(out.shape() == Shape{1, 3, S, S});
    for (std::int64_t i = 0; i < out.value().numel(); ++i) {
      REQUIRE(out.value()[i] >= 0.0f);
      REQUIRE(out.value()[i] <= 1.0f);
    }
  }
}

TEST_CASE("generator gradients reach the input image", "[models]") {
  // The eye patches are sliced from the input, so the cycle pass needs
  // gradient flow through both the global and local paths.
  std::mt19937_64 rng(4);
  hal::Generator<float> g(2, rng);
  hal::GenInput<float> in;
  auto x = Var<float>::param(random_tensor({1, 3, 16, 16}, 5));
  in.img = x;
  hal::patch_corner(6, 5, 4, 16, 16, in.lr0, in.lc0);
  hal::patch_corner(6, 11, 4, 16, 16, in.rr0, in.rc0);
  ad::backward(ad::mean(g.forward(in, 4)));
  REQUIRE(x.has_grad());
  double total = 0;
  for (std::int64_t i = 0; i < x.grad().numel(); ++i) total += std::abs(x.grad()[i]);
  REQUIRE(total > 0.0);
}

TEST_CASE("discriminator yields one probability per image", "[models]") {
  std::mt19937_64 rng(6);
  hal::Discriminator<float> d(4, rng);
  ad::NoGradGuard ng;
  for (int S : {16, 24}) {  // fully convolutional: any size divisible by 8
    auto p = d.forward(Var<float>::constant(random_tensor({1, 3, S, S}, 8)));
    REQUIRE(p.value().numel() == 1);
    REQUIRE(p.item() > 0.0);
    REQUIRE(p.item() < 1.0);
  }
}

TEST_CASE("feature extractor emits the configured dimension", "[models]") {
  std::mt19937_64 rng(7);
  feat::FeatureExtractor<float> f(2, 24, 32, rng);
  ad::NoGradGuard ng;
  auto out = f.forward(Var<float>::constant(random_tensor({3, 1, 32, 32}, 9)));
  REQUIRE(out.shape() == Shape{3, 24});
  REQUIRE_THROWS_AS(feat::FeatureExtractor<float>(2, 24, 30, rng), ValueError);
}

TEST_CASE("model parameters round-trip through a checkpoint", "[models]") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "nirvis_models";
  fs::create_directories(dir);
  const std::string path = (dir / "gen.ckpt").string();

  std::mt19937_64 rng(10);
  hal::Generator<float> a(2, rng), b(2, rng);  // b starts with different weights
  nn::NamedParams<float> pa, pb;
  a.params(pa, "gv");
  b.params(pb, "gv");
  save_checkpoint(path, nn::to_checkpoint(pa));
  nn::load_params(pb, load_checkpoint(path));

  auto in = gen_input(16, 4, 21);
  ad::NoGradGuard ng;
  auto ya = a.forward(in, 4), yb = b.forward(in, 4);
  for (std::int64_t i = 0; i < ya.value().numel(); ++i)
    REQUIRE(ya.value()[i] == yb.value()[i]);

  // Loading into a mismatched shape is a data error.
  std::mt19937_64 rng2(11);
  hal::Generator<float> wide(4, rng2);
  nn::NamedParams<float> pw;
  wide.params(pw, "gv");
  REQUIRE_THROWS_AS(nn::load_params(pw, load_checkpoint(path)), CheckpointError);
}

TEST_CASE("parameter names are unique and prefixed", "[models]") {
  std::mt19937_64 rng(12);
  feat::FeatTrainer tr = [&] {
    ExperimentConfig cfg;
    cfg.crop_size = 16;
    cfg.feat_width = 2;
    cfg.feature_dim = 8;
    cfg.df_hidden = 4;
    return feat::FeatTrainer(cfg, 3, 1);
  }();
  const auto ps = tr.named_params();
  std::set<std::string> names;
  for (const auto& [n, v] : ps) {
    REQUIRE(names.insert(n).second);
    REQUIRE((n.rfind("f.", 0) == 0 || n.rfind("head.", 0) == 0 || n.rfind("df.", 0) == 0));
  }
}
