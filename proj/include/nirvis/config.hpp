#pragma once

#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "nirvis/errors.hpp"

namespace nirvis {

// One experiment = one config + one seed. Every field has a default; the
// default profile is the small synthetic setup used by the fast end-to-end
// runs. Resolution order: defaults, then config file, then CLI flags.
struct ExperimentConfig {
  // dataset
  int identities = 20;
  int vis_per_id = 4;
  int nir_per_id = 4;
  int image_size = 36;
  int crop_size = 32;
  int patch_size = 8;  // periocular patch edge; 32 at full 144x144 scale
  // model widths
  int gen_width = 8;
  int disc_width = 8;
  int feat_width = 4;
  int feature_dim = 64;  // 256 at full scale
  // The feature critic is deliberately small: an overparameterized critic
  // memorizes each 32-row batch and its confusion gradient degrades into
  // batch noise that scrambles the embedding instead of aligning it.
  int df_hidden = 2;
  // loss weights
  double alpha1 = 10.0;  // cycle consistency
  double alpha2 = 5.0;   // luminance preservation
  double lambda1 = 0.1;  // class-wise variance discrepancy
  double lambda2 = 1.0;  // classification
  // optimization. The shared rate suits both stages at toy scale: the
  // translation game stays at its equilibrium and the feature stage actually
  // reaches a low classification loss within the iteration budget.
  double lr = 3e-3;
  double beta1 = 0.5;
  double beta2 = 0.999;
  int batch_size = 1;         // image pairs per translation step
  int classes_per_batch = 4;  // feature stage sampler
  int samples_per_class = 4;  // per modality, per class (>= 2)
  int hal_iters = 400;
  int feat_iters = 400;
  int pretrain_iters = 80;
  // protocol
  int folds = 2;
  std::uint64_t seed = 42;
  std::string preset = "adfl";

  void validate() const {
    if (identities < 1) throw ValueError("config: identities must be >= 1");
    if (vis_per_id < 1 || nir_per_id < 1)
      throw ValueError("config: need at least one image per identity per modality");
    if (crop_size > image_size)
      throw ValueError("config: crop_size " + std::to_string(crop_size) + " exceeds image_size " +
                       std::to_string(image_size));
    if (crop_size % 16 != 0)
      throw ValueError("config: crop_size must be a multiple of 16 (four pooling stages)");
    if (image_size % 4 != 0)
      throw ValueError("config: image_size must be a multiple of 4 (translation downsampling)");
    if (patch_size % 4 != 0 || patch_size < 4 || patch_size > crop_size)
      throw ValueError("config: patch_size must be a multiple of 4 in [4, crop_size]");
    if (gen_width < 1 || disc_width < 1 || feat_width < 1 || feature_dim < 1 || df_hidden < 1)
      throw ValueError("config: model widths must be positive");
    if (lr <= 0) throw ValueError("config: lr must be positive");
    if (samples_per_class < 2)
      throw ValueError("config: samples_per_class must be >= 2 for variance matching");
    if (classes_per_batch < 2) throw ValueError("config: classes_per_batch must be >= 2");
    if (folds < 1 || folds > identities)
      throw ValueError("config: folds must lie in [1, identities]");
    if (!valid_preset(preset)) throw ValueError("config: unknown preset '" + preset + "'");
  }

  static bool valid_preset(const std::string& p) {
    return p == "softmax-only" || p == "adfl-no-adv" || p == "adfl-no-cvd" || p == "adfl" ||
           p == "hallucination+adfl";
  }
};

namespace detail {

inline bool parse_int_value(const std::string& s, long long& out) {
  std::size_t pos = 0;
  try {
    out = std::stoll(s, &pos);
  } catch (const std::exception&) {
    return false;
  }
  return pos == s.size();
}

inline bool parse_double_value(const std::string& s, double& out) {
  std::size_t pos = 0;
  try {
    out = std::stod(s, &pos);
  } catch (const std::exception&) {
    return false;
  }
  return pos == s.size();
}

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace detail

// Applies one "key = value" assignment. `line` feeds the error message; pass
// 0 for CLI overrides.
inline void apply_config_kv(ExperimentConfig& cfg, const std::string& key,
                            const std::string& value, int line) {
  auto fail = [&](const std::string& why) -> ConfigError {
    return ConfigError(why + " for key '" + key + "'", line);
  };
  auto as_int = [&](int lo, long long hi) {
    long long v;
    if (!detail::parse_int_value(value, v) || v < lo || v > hi)
      throw fail("unparsable or out-of-range integer '" + value + "'");
    return v;
  };
  auto as_double = [&]() {
    double v;
    if (!detail::parse_double_value(value, v)) throw fail("unparsable number '" + value + "'");
    return v;
  };

  if (key == "identities") cfg.identities = static_cast<int>(as_int(1, 1 << 16));
  else if (key == "vis_per_id") cfg.vis_per_id = static_cast<int>(as_int(1, 1 << 10));
  else if (key == "nir_per_id") cfg.nir_per_id = static_cast<int>(as_int(1, 1 << 10));
  else if (key == "image_size") cfg.image_size = static_cast<int>(as_int(8, 1 << 12));
  else if (key == "crop_size") cfg.crop_size = static_cast<int>(as_int(4, 1 << 12));
  else if (key == "patch_size") cfg.patch_size = static_cast<int>(as_int(4, 1 << 10));
  else if (key == "gen_width") cfg.gen_width = static_cast<int>(as_int(1, 1 << 10));
  else if (key == "disc_width") cfg.disc_width = static_cast<int>(as_int(1, 1 << 10));
  else if (key == "feat_width") cfg.feat_width = static_cast<int>(as_int(1, 1 << 10));
  else if (key == "feature_dim") cfg.feature_dim = static_cast<int>(as_int(1, 1 << 14));
  else if (key == "df_hidden") cfg.df_hidden = static_cast<int>(as_int(1, 1 << 14));
  else if (key == "alpha1") cfg.alpha1 = as_double();
  else if (key == "alpha2") cfg.alpha2 = as_double();
  else if (key == "lambda1") cfg.lambda1 = as_double();
  else if (key == "lambda2") cfg.lambda2 = as_double();
  else if (key == "lr") cfg.lr = as_double();
  else if (key == "beta1") cfg.beta1 = as_double();
  else if (key == "beta2") cfg.beta2 = as_double();
  else if (key == "batch_size") cfg.batch_size = static_cast<int>(as_int(1, 1 << 10));
  else if (key == "classes_per_batch") cfg.classes_per_batch = static_cast<int>(as_int(1, 1 << 10));
  else if (key == "samples_per_class") cfg.samples_per_class = static_cast<int>(as_int(1, 1 << 10));
  else if (key == "hal_iters") cfg.hal_iters = static_cast<int>(as_int(0, 1 << 24));
  else if (key == "feat_iters") cfg.feat_iters = static_cast<int>(as_int(0, 1 << 24));
  else if (key == "pretrain_iters") cfg.pretrain_iters = static_cast<int>(as_int(0, 1 << 24));
  else if (key == "folds") cfg.folds = static_cast<int>(as_int(1, 1 << 10));
  else if (key == "seed") {
    long long v;
    if (!detail::parse_int_value(value, v) || v < 0)
      throw fail("unparsable seed '" + value + "'");
    cfg.seed = static_cast<std::uint64_t>(v);
  } else if (key == "preset") {
    if (!ExperimentConfig::valid_preset(value)) throw fail("unknown preset '" + value + "'");
    cfg.preset = value;
  } else {
    throw ConfigError("unknown key '" + key + "'", line);
  }
}

inline ExperimentConfig parse_config_text(const std::string& text,
                                          ExperimentConfig cfg = ExperimentConfig{}) {
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::size_t hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    const std::string s = detail::trim(raw);
    if (s.empty()) continue;
    const std::size_t eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("expected 'key = value', got '" + s + "'", line);
    const std::string key = detail::trim(s.substr(0, eq));
    const std::string value = detail::trim(s.substr(eq + 1));
    if (key.empty()) throw ConfigError("empty key", line);
    apply_config_kv(cfg, key, value, line);
  }
  return cfg;
}

inline ExperimentConfig load_config_file(const std::string& path,
                                         ExperimentConfig cfg = ExperimentConfig{}) {
  std::ifstream in(path);
  if (!in) throw IoError(path + ": cannot open config file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), std::move(cfg));
}

// Canonical textual form; written into run directories so an experiment is
// reproducible from its artifacts alone.
inline std::string serialize_config(const ExperimentConfig& c) {
  std::ostringstream o;
  o << "identities = " << c.identities << '\n'
    << "vis_per_id = " << c.vis_per_id << '\n'
    << "nir_per_id = " << c.nir_per_id << '\n'
    << "image_size = " << c.image_size << '\n'
    << "crop_size = " << c.crop_size << '\n'
    << "patch_size = " << c.patch_size << '\n'
    << "gen_width = " << c.gen_width << '\n'
    << "disc_width = " << c.disc_width << '\n'
    << "feat_width = " << c.feat_width << '\n'
    << "feature_dim = " << c.feature_dim << '\n'
    << "df_hidden = " << c.df_hidden << '\n'
    << "alpha1 = " << c.alpha1 << '\n'
    << "alpha2 = " << c.alpha2 << '\n'
    << "lambda1 = " << c.lambda1 << '\n'
    << "lambda2 = " << c.lambda2 << '\n'
    << "lr = " << c.lr << '\n'
    << "beta1 = " << c.beta1 << '\n'
    << "beta2 = " << c.beta2 << '\n'
    << "batch_size = " << c.batch_size << '\n'
    << "classes_per_batch = " << c.classes_per_batch << '\n'
    << "samples_per_class = " << c.samples_per_class << '\n'
    << "hal_iters = " << c.hal_iters << '\n'
    << "feat_iters = " << c.feat_iters << '\n'
    << "pretrain_iters = " << c.pretrain_iters << '\n'
    << "folds = " << c.folds << '\n'
    << "seed = " << c.seed << '\n'
    << "preset = " << c.preset << '\n';
  return o.str();
}

}  // namespace nirvis
