#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "nirvis/synth.hpp"

using namespace nirvis;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const char* tag) {
  fs::path p = fs::temp_directory_path() / (std::string("nirvis_synth_") + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("dataset plan covers identities x (vis + nir)", "[synth]") {
  synth::SynthConfig cfg;
  cfg.identities = 10;
  cfg.vis_per_id = 2;
  cfg.nir_per_id = 5;
  const auto metas = synth::plan_dataset(cfg);
  REQUIRE(metas.size() == 70);

  int vis = 0, nir = 0;
  std::set<std::string> paths;
  for (const auto& m : metas) {
    (m.modality == synth::Modality::Vis ? vis : nir)++;
    paths.insert(m.file_path);
    REQUIRE(m.identity_id >= 0);
    REQUIRE(m.identity_id < 10);
  }
  REQUIRE(vis == 20);
  REQUIRE(nir == 50);
  REQUIRE(paths.size() == 70);  // no filename collisions
}

TEST_CASE("rendering is deterministic and in range", "[synth]") {
  synth::EyeCenters eyes{};
  Tensor<float> a = synth::render_sample(7, 3, synth::Modality::Nir, 99, 36, &eyes);
  Tensor<float> b = synth::render_sample(7, 3, synth::Modality::Nir, 99, 36);
  REQUIRE(a.shape() == Shape{3, 36, 36});
  for (std::int64_t i = 0; i < a.numel(); ++i) {
    REQUIRE(a[i] == b[i]);
    REQUIRE(a[i] >= 0.0f);
    REQUIRE(a[i] <= 1.0f);
  }
  // Different nuisance draw changes pixels; same identity geometry.
  Tensor<float> c = synth::render_sample(7, 3, synth::Modality::Nir, 100, 36);
  bool any_diff = false;
  for (std::int64_t i = 0; i < a.numel(); ++i) any_diff = any_diff || a[i] != c[i];
  REQUIRE(any_diff);

  // NIR and VIS of the same sitting differ (different reflectance spectra).
  Tensor<float> v = synth::render_sample(7, 3, synth::Modality::Vis, 99, 36);
  any_diff = false;
  for (std::int64_t i = 0; i < a.numel(); ++i) any_diff = any_diff || a[i] != v[i];
  REQUIRE(any_diff);
}

TEST_CASE("identities are visually distinct", "[synth]") {
  // Mean absolute pixel gap between any two identities must clear a floor:
  // the cheek lattice guarantees differing albedo patches.
  const int S = 36;
  std::vector<Tensor<float>> faces;
  for (int id = 0; id < 8; ++id)
    faces.push_back(synth::render_sample(5, id, synth::Modality::Vis, 1, S));
  for (std::size_t i = 0; i < faces.size(); ++i)
    for (std::size_t j = i + 1; j < faces.size(); ++j) {
      double gap = 0;
      for (std::int64_t k = 0; k < faces[i].numel(); ++k)
        gap += std::abs(static_cast<double>(faces[i][k]) - faces[j][k]);
      gap /= static_cast<double>(faces[i].numel());
      INFO("identities " << i << " vs " << j);
      REQUIRE(gap > 1e-4);
    }
}

TEST_CASE("landmarks stay inside the canvas", "[synth]") {
  synth::SynthConfig cfg;
  cfg.identities = 12;
  const auto metas = synth::plan_dataset(cfg);
  for (const auto& m : metas) {
    REQUIRE(m.eye_l_row >= 0);
    REQUIRE(m.eye_l_row < cfg.image_size);
    REQUIRE(m.eye_l_col >= 0);
    REQUIRE(m.eye_l_col < cfg.image_size);
    REQUIRE(m.eye_r_col > m.eye_l_col);  // viewer-left eye is left of right
    REQUIRE(m.eye_r_col < cfg.image_size);
  }
}

TEST_CASE("manifest round-trips and rejects damage", "[synth]") {
  const fs::path dir = temp_dir("manifest");
  synth::SynthConfig cfg;
  cfg.identities = 3;
  cfg.vis_per_id = 1;
  cfg.nir_per_id = 2;
  const auto metas = synth::plan_dataset(cfg);
  const std::string path = (dir / "manifest.csv").string();
  synth::write_manifest(path, metas);
  const auto back = synth::read_manifest(path);
  REQUIRE(back.size() == metas.size());
  for (std::size_t i = 0; i < metas.size(); ++i) {
    REQUIRE(back[i].file_path == metas[i].file_path);
    REQUIRE(back[i].identity_id == metas[i].identity_id);
    REQUIRE(back[i].modality == metas[i].modality);
    REQUIRE(back[i].eye_l_row == metas[i].eye_l_row);
    REQUIRE(back[i].eye_r_col == metas[i].eye_r_col);
    REQUIRE(back[i].nuisance_seed == metas[i].nuisance_seed);
  }

  {
    std::ofstream out(dir / "bad_header.csv");
    out << "nope\n";
  }
  REQUIRE_THROWS_AS(synth::read_manifest((dir / "bad_header.csv").string()), IoError);

  {
    std::string text = slurp(path);
    text += "only,three,fields\n";
    std::ofstream out(dir / "bad_row.csv");
    out << text;
  }
  REQUIRE_THROWS_AS(synth::read_manifest((dir / "bad_row.csv").string()), IoError);
}

TEST_CASE("generated datasets are byte-identical across runs", "[synth]") {
  synth::SynthConfig cfg;
  cfg.identities = 2;
  cfg.vis_per_id = 1;
  cfg.nir_per_id = 1;
  const fs::path d1 = temp_dir("det1"), d2 = temp_dir("det2");
  const auto m1 = synth::generate_dataset(cfg, d1.string());
  const auto m2 = synth::generate_dataset(cfg, d2.string());
  REQUIRE(m1.size() == m2.size());
  REQUIRE(slurp(d1 / "manifest.csv") == slurp(d2 / "manifest.csv"));
  for (const auto& m : m1) REQUIRE(slurp(d1 / m.file_path) == slurp(d2 / m.file_path));

  // Loading restores the quantized pixels exactly.
  Tensor<float> im = synth::load_sample(d1.string(), m1[0]);
  REQUIRE(im.dim(0) == 3);
  REQUIRE(im.dim(1) == cfg.image_size);
}

TEST_CASE("folds partition identities and the gallery is one VIS per test id", "[synth]") {
  synth::SynthConfig cfg;
  cfg.identities = 9;
  cfg.vis_per_id = 2;
  cfg.nir_per_id = 3;
  const auto metas = synth::plan_dataset(cfg);
  const auto folds = synth::make_folds(metas, cfg.identities, 2, 42);
  REQUIRE(folds.size() == 2);

  std::set<int> all_test;
  for (const auto& f : folds) {
    // train/test are disjoint and cover everything
    std::set<int> train(f.train_ids.begin(), f.train_ids.end());
    for (int id : f.test_ids) {
      REQUIRE(train.count(id) == 0);
      all_test.insert(id);
    }
    REQUIRE(f.train_ids.size() + f.test_ids.size() == 9);

    REQUIRE(f.gallery.size() == f.test_ids.size());
    std::set<int> test(f.test_ids.begin(), f.test_ids.end());
    for (int g : f.gallery) {
      REQUIRE(metas[static_cast<std::size_t>(g)].modality == synth::Modality::Vis);
      REQUIRE(test.count(metas[static_cast<std::size_t>(g)].identity_id) == 1);
    }
    REQUIRE(f.probes.size() == f.test_ids.size() * 3);  // every NIR of the test ids
    for (int p : f.probes) {
      REQUIRE(metas[static_cast<std::size_t>(p)].modality == synth::Modality::Nir);
      REQUIRE(test.count(metas[static_cast<std::size_t>(p)].identity_id) == 1);
    }
  }
  REQUIRE(all_test.size() == 9);  // every identity is tested in exactly one fold

  REQUIRE_THROWS_AS(synth::make_folds(metas, cfg.identities, 0, 1), ValueError);
  REQUIRE_THROWS_AS(synth::make_folds(metas, cfg.identities, 10, 1), ValueError);
}
