#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "nirvis/config.hpp"

using namespace nirvis;
namespace fs = std::filesystem;

TEST_CASE("defaults form a valid toy-scale experiment", "[config]") {
  ExperimentConfig cfg;
  REQUIRE_NOTHROW(cfg.validate());
  REQUIRE(cfg.identities == 20);
  REQUIRE(cfg.image_size == 36);
  REQUIRE(cfg.folds == 2);
  REQUIRE(cfg.preset == "adfl");
}

TEST_CASE("file values override defaults, overrides beat the file", "[config]") {
  const std::string text =
      "# comment line\n"
      "identities = 6   # trailing comment\n"
      "\n"
      "lr = 1e-3\n"
      "preset = softmax-only\n";
  ExperimentConfig cfg = parse_config_text(text);
  REQUIRE(cfg.identities == 6);
  REQUIRE(cfg.lr == 1e-3);
  REQUIRE(cfg.preset == "softmax-only");
  REQUIRE(cfg.image_size == 36);  // untouched default

  apply_config_kv(cfg, "identities", "8", 0);  // the CLI override path
  REQUIRE(cfg.identities == 8);
}

TEST_CASE("config errors carry the offending line number", "[config]") {
  try {
    parse_config_text("identities = 5\nwhat_is_this = 1\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    REQUIRE(e.line == 2);
    REQUIRE(std::string(e.what()).find("what_is_this") != std::string::npos);
  }

  try {
    parse_config_text("lr = fast\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    REQUIRE(e.line == 1);
  }

  REQUIRE_THROWS_AS(parse_config_text("no equals sign here\n"), ConfigError);
  REQUIRE_THROWS_AS(parse_config_text("= 5\n"), ConfigError);
  REQUIRE_THROWS_AS(parse_config_text("identities = 0\n"), ConfigError);
  REQUIRE_THROWS_AS(parse_config_text("preset = bogus\n"), ConfigError);
}

TEST_CASE("validation enforces geometry and sampler floors", "[config]") {
  ExperimentConfig cfg;
  cfg.crop_size = 40;  // > image_size
  REQUIRE_THROWS_AS(cfg.validate(), ValueError);

  cfg = ExperimentConfig{};
  cfg.crop_size = 20;  // not a multiple of 16
  REQUIRE_THROWS_AS(cfg.validate(), ValueError);

  cfg = ExperimentConfig{};
  cfg.image_size = 34;  // not a multiple of 4
  REQUIRE_THROWS_AS(cfg.validate(), ValueError);

  cfg = ExperimentConfig{};
  cfg.patch_size = 6;
  REQUIRE_THROWS_AS(cfg.validate(), ValueError);

  cfg = ExperimentConfig{};
  cfg.samples_per_class = 1;  // variance needs two rows
  REQUIRE_THROWS_AS(cfg.validate(), ValueError);

  cfg = ExperimentConfig{};
  cfg.folds = 21;  // more folds than identities
  REQUIRE_THROWS_AS(cfg.validate(), ValueError);
}

TEST_CASE("serialization round-trips every field", "[config]") {
  ExperimentConfig cfg;
  cfg.identities = 7;
  cfg.alpha1 = 3.25;
  cfg.lambda2 = 0.125;
  cfg.seed = 1234567;
  cfg.preset = "hallucination+adfl";
  ExperimentConfig back = parse_config_text(serialize_config(cfg));
  REQUIRE(serialize_config(back) == serialize_config(cfg));
  REQUIRE(back.identities == 7);
  REQUIRE(back.alpha1 == 3.25);
  REQUIRE(back.lambda2 == 0.125);
  REQUIRE(back.seed == 1234567);
  REQUIRE(back.preset == "hallucination+adfl");
}

TEST_CASE("config files load from disk and report missing paths", "[config]") {
  const fs::path dir = fs::temp_directory_path() / "nirvis_cfg";
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "exp.cfg");
    out << "identities = 4\nfolds = 2\n";
  }
  ExperimentConfig cfg = load_config_file((dir / "exp.cfg").string());
  REQUIRE(cfg.identities == 4);
  REQUIRE_THROWS_AS(load_config_file((dir / "missing.cfg").string()), IoError);
}
