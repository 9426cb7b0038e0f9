#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "nirvis/errors.hpp"
#include "nirvis/image.hpp"
#include "nirvis/rng.hpp"
#include "nirvis/tensor.hpp"

// Procedural paired-modality face corpus. Geometry and albedo are a pure
// function of (dataset seed, identity id); per-image nuisances (pose shift,
// expression jitter, illumination, sensor noise) come from a recorded
// nuisance seed so every sample can be re-rendered from its manifest row.
namespace nirvis::synth {

enum class Modality { Vis, Nir };

inline const char* modality_name(Modality m) { return m == Modality::Vis ? "vis" : "nir"; }

struct SampleMeta {
  std::string file_path;
  int identity_id = 0;
  Modality modality = Modality::Vis;
  int eye_l_row = 0, eye_l_col = 0;  // viewer-left eye center
  int eye_r_row = 0, eye_r_col = 0;
  std::uint64_t nuisance_seed = 0;
};

struct SynthConfig {
  int identities = 20;
  int vis_per_id = 4;
  int nir_per_id = 4;
  int image_size = 36;
  std::uint64_t seed = 42;
};

// ---------------------------------------------------------------------------
// Parameter sampling

struct IdentityParams {
  int id = 0;
  double face_a, face_b;        // ellipse semi-axes, fraction of size
  double eye_row, eye_spacing, eye_radius;
  double brow_drop;
  double mouth_row, mouth_halfwidth;
  double hairline;
  double skin_r, skin_g, skin_b;
  double skin_n, hair_n, mouth_n;  // per-person NIR reflectances
  double hair_v;
  double mouth_r;
  double bg_v;
  std::uint32_t lattice_bits;   // 16-cell albedo pattern, distinct per id
};

struct NuisanceParams {
  int dx = 0, dy = 0;           // pose shift, pixels
  double mouth_jitter = 0.0;    // row offset, fraction of size
  double mouth_scale = 1.0;
  double gain = 1.0;            // illumination
  double tilt = 0.0;            // lateral illumination gradient
  // NIR capture session: active-illumination exposure, lens vignetting,
  // focus (blur passes) and sensor gain (noise level) all vary per shot.
  double nir_exposure = 1.0;
  double nir_vign = 0.25;
  int nir_blur = 1;
  double nir_sigma = 0.02;
  std::uint64_t noise_seed = 0;
};

inline IdentityParams sample_identity(std::uint64_t dataset_seed, int id) {
  auto rng = make_rng(split_seed(dataset_seed, "identity", static_cast<std::uint64_t>(id)));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  IdentityParams p;
  p.id = id;
  // Ranges are wide on purpose: at the 36-px toy scale, between-identity
  // differences have to span multiple pixels or they drown in pose shift
  // and sensor noise, and nothing downstream can generalize.
  p.face_a = 0.26 + 0.12 * u(rng);
  p.face_b = 0.19 + 0.11 * u(rng);
  p.eye_row = 0.36 + 0.08 * u(rng);
  p.eye_spacing = 0.12 + 0.07 * u(rng);
  p.eye_radius = 0.030 + 0.025 * u(rng);
  p.brow_drop = 0.040 + 0.035 * u(rng);
  p.mouth_row = 0.66 + 0.08 * u(rng);
  p.mouth_halfwidth = 0.06 + 0.06 * u(rng);
  p.hairline = 0.20 + 0.14 * u(rng);
  p.skin_r = 0.55 + 0.30 * u(rng);
  p.skin_g = p.skin_r * (0.78 + 0.08 * u(rng));
  p.skin_b = p.skin_g * (0.72 + 0.10 * u(rng));
  // NIR reflectance is a material property and differs between people just
  // like visible albedo does; without this every NIR face shares one skin.
  p.skin_n = 0.68 + 0.22 * u(rng);
  p.hair_n = 0.06 + 0.16 * u(rng);
  p.mouth_n = 0.38 + 0.20 * u(rng);
  p.hair_v = 0.08 + 0.22 * u(rng);
  p.mouth_r = 0.45 + 0.20 * u(rng);
  p.bg_v = 0.25 + 0.20 * u(rng);
  // The cheek lattice encodes the id directly, so any two ids below 2^16
  // render measurably different faces even if the sampled geometry collides.
  p.lattice_bits = static_cast<std::uint32_t>(id) & 0xFFFFu;
  return p;
}

inline NuisanceParams sample_nuisance(std::uint64_t nuisance_seed, int image_size) {
  auto rng = make_rng(nuisance_seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  NuisanceParams n;
  // Small canvases get a tighter shift so landmarks stay usable.
  const int max_shift = image_size >= 96 ? 4 : 2;
  std::uniform_int_distribution<int> shift(-max_shift, max_shift);
  n.dx = shift(rng);
  n.dy = shift(rng);
  n.mouth_jitter = (u(rng) - 0.5) * 0.02;
  n.mouth_scale = 0.9 + 0.2 * u(rng);
  // Photometric nuisance stays well below the identity signal: a session
  // changes lighting by a few percent, not by a different face's worth.
  n.gain = 0.92 + 0.16 * u(rng);
  n.tilt = (u(rng) - 0.5) * 0.12;
  // The NIR rig is far less controlled than the VIS studio shot: the LED
  // bank, subject distance and sensor gain drift a lot between sessions.
  // This spread is the modality gap the feature stage has to marginalize.
  n.nir_exposure = 0.78 + 0.45 * u(rng);
  n.nir_vign = 0.10 + 0.40 * u(rng);
  n.nir_blur = u(rng) < 0.5 ? 1 : 2;
  n.nir_sigma = 0.015 + 0.020 * u(rng);
  n.noise_seed = split_seed(nuisance_seed, "noise");
  return n;
}

// ---------------------------------------------------------------------------
// Rendering

namespace detail {

struct Canvas {
  int S;
  std::vector<double> r, g, b;
  explicit Canvas(int size)
      : S(size),
        r(static_cast<std::size_t>(size) * size),
        g(r.size()),
        b(r.size()) {}
  void blend(int i, int j, double cov, double cr, double cg, double cb) {
    if (i < 0 || i >= S || j < 0 || j >= S || cov <= 0.0) return;
    cov = std::min(1.0, cov);
    const std::size_t k = static_cast<std::size_t>(i) * S + j;
    r[k] = r[k] * (1.0 - cov) + cr * cov;
    g[k] = g[k] * (1.0 - cov) + cg * cov;
    b[k] = b[k] * (1.0 - cov) + cb * cov;
  }
};

// Soft-edged ellipse coverage from the normalized quadratic distance.
inline double ellipse_cov(double di, double dj, double a, double b) {
  const double e = (di * di) / (a * a) + (dj * dj) / (b * b);
  return std::clamp((1.15 - e) / 0.30, 0.0, 1.0);
}

inline void fill_ellipse(Canvas& c, double ci, double cj, double a, double b, double cr, double cg,
                         double cb) {
  const int i0 = std::max(0, static_cast<int>(ci - a - 1)), i1 = std::min(c.S - 1, static_cast<int>(ci + a + 1));
  const int j0 = std::max(0, static_cast<int>(cj - b - 1)), j1 = std::min(c.S - 1, static_cast<int>(cj + b + 1));
  for (int i = i0; i <= i1; ++i)
    for (int j = j0; j <= j1; ++j)
      c.blend(i, j, ellipse_cov(i - ci, j - cj, a, b), cr, cg, cb);
}

inline void box_blur3(std::vector<double>& p, int S) {
  // Separable [1 2 1]/4 pass in each direction, clamped at edges.
  std::vector<double> tmp(p.size());
  auto at = [&](const std::vector<double>& v, int i, int j) {
    i = std::clamp(i, 0, S - 1);
    j = std::clamp(j, 0, S - 1);
    return v[static_cast<std::size_t>(i) * S + j];
  };
  for (int i = 0; i < S; ++i)
    for (int j = 0; j < S; ++j)
      tmp[static_cast<std::size_t>(i) * S + j] =
          0.25 * at(p, i, j - 1) + 0.5 * at(p, i, j) + 0.25 * at(p, i, j + 1);
  for (int i = 0; i < S; ++i)
    for (int j = 0; j < S; ++j)
      p[static_cast<std::size_t>(i) * S + j] =
          0.25 * at(tmp, i - 1, j) + 0.5 * at(tmp, i, j) + 0.25 * at(tmp, i + 1, j);
}

}  // namespace detail

struct EyeCenters {
  int l_row, l_col, r_row, r_col;
};

// Renders one face. VIS is a color portrait; NIR collapses materials to their
// near-infrared reflectance, then applies vignette, optical blur, and heavier
// sensor noise, replicated across three channels.
inline Tensor<float> render_face(const IdentityParams& id, const NuisanceParams& nu, int S,
                                 Modality mod, EyeCenters* eyes = nullptr) {
  detail::Canvas c(S);
  const bool nir = mod == Modality::Nir;

  // Material albedos. NIR reflectance is brighter for skin and darker for
  // hair and irises, and color contrast vanishes — but it is still a
  // per-person property, so identity survives the modality switch.
  const double skin[3] = {id.skin_r, id.skin_g, id.skin_b};
  const double skin_n = id.skin_n;
  const double hair_v = id.hair_v, hair_n = id.hair_n;
  const double eye_v = 0.06, eye_n = 0.10;
  const double mouth[3] = {id.mouth_r, 0.22, 0.20}, mouth_n = id.mouth_n;
  const double bg_v = id.bg_v, bg_n = 0.35;

  auto pick = [&](const double* rgb3, double nval, double* out) {
    if (nir) {
      out[0] = out[1] = out[2] = nval;
    } else {
      out[0] = rgb3[0];
      out[1] = rgb3[1];
      out[2] = rgb3[2];
    }
  };
  double col[3];
  const double bg3[3] = {bg_v, bg_v, bg_v};
  pick(bg3, bg_n, col);
  for (int i = 0; i < S; ++i)
    for (int j = 0; j < S; ++j) {
      const double grad = 1.0 - 0.15 * (static_cast<double>(i) / S);
      c.blend(i, j, 1.0, col[0] * grad, col[1] * grad, col[2] * grad);
    }

  const double ci = 0.52 * S + nu.dy, cj = 0.50 * S + nu.dx;
  const double fa = id.face_a * S, fb = id.face_b * S;

  pick(skin, skin_n, col);
  detail::fill_ellipse(c, ci, cj, fa, fb, col[0], col[1], col[2]);

  // Cheek/forehead lattice: 4x4 cells, each toggling the local albedo by the
  // id's bit pattern.
  {
    const double r0 = (0.50 + nu.dy / static_cast<double>(S)) * S, r1 = r0 + 0.16 * S;
    const double c0 = (0.36 + nu.dx / static_cast<double>(S)) * S, c1 = c0 + 0.28 * S;
    for (int i = static_cast<int>(r0); i < static_cast<int>(r1); ++i)
      for (int j = static_cast<int>(c0); j < static_cast<int>(c1); ++j) {
        if (i < 0 || i >= S || j < 0 || j >= S) continue;
        const int cell_r = std::min(3, static_cast<int>(4.0 * (i - r0) / (r1 - r0)));
        const int cell_c = std::min(3, static_cast<int>(4.0 * (j - c0) / (c1 - c0)));
        const int cell = cell_r * 4 + cell_c;
        const double m = (id.lattice_bits >> cell) & 1u ? 1.16 : 0.84;
        if (detail::ellipse_cov(i - ci, j - cj, fa, fb) > 0.99)
          c.blend(i, j, 1.0, col[0] * m, col[1] * m, col[2] * m);
      }
  }

  // Hair: cap above the hairline, slightly wider than the face.
  {
    const double hv3[3] = {hair_v * 1.1, hair_v, hair_v * 0.9};
    pick(hv3, hair_n, col);
    const double hairline_row = ci - fa + id.hairline * 2.0 * fa * 0.9;
    for (int i = 0; i < S; ++i)
      for (int j = 0; j < S; ++j) {
        if (i >= hairline_row) continue;
        const double cov = detail::ellipse_cov(i - ci, j - cj, fa * 1.08, fb * 1.12);
        c.blend(i, j, cov, col[0], col[1], col[2]);
      }
  }

  // Eyes, pupils, brows.
  const double er = id.eye_row * S + nu.dy;
  const double spacing = id.eye_spacing * S;
  const double ecl = 0.5 * S + nu.dx - spacing, ecr = 0.5 * S + nu.dx + spacing;
  const double eye_rad = std::max(1.0, id.eye_radius * S);
  {
    const double white3[3] = {0.85, 0.85, 0.82};
    pick(white3, 0.55, col);
    detail::fill_ellipse(c, er, ecl, eye_rad * 0.8, eye_rad * 1.3, col[0], col[1], col[2]);
    detail::fill_ellipse(c, er, ecr, eye_rad * 0.8, eye_rad * 1.3, col[0], col[1], col[2]);
    const double ev3[3] = {eye_v, eye_v, eye_v * 1.4};
    pick(ev3, eye_n, col);
    detail::fill_ellipse(c, er, ecl, eye_rad * 0.65, eye_rad * 0.65, col[0], col[1], col[2]);
    detail::fill_ellipse(c, er, ecr, eye_rad * 0.65, eye_rad * 0.65, col[0], col[1], col[2]);
    const double hv3[3] = {hair_v, hair_v * 0.95, hair_v * 0.9};
    pick(hv3, hair_n * 1.4, col);
    const double br = er - id.brow_drop * S;
    detail::fill_ellipse(c, br, ecl, 0.012 * S + 0.5, eye_rad * 1.6, col[0], col[1], col[2]);
    detail::fill_ellipse(c, br, ecr, 0.012 * S + 0.5, eye_rad * 1.6, col[0], col[1], col[2]);
  }

  // Nose: a slightly darkened wedge down the midline.
  {
    const double n3[3] = {skin[0] * 0.88, skin[1] * 0.85, skin[2] * 0.85};
    pick(n3, skin_n * 0.88, col);
    const double n_top = er + 0.04 * S, n_bot = 0.62 * S + nu.dy;
    for (int i = static_cast<int>(n_top); i <= static_cast<int>(n_bot); ++i) {
      const double w = 0.012 * S * (1.0 + (i - n_top) / std::max(1.0, n_bot - n_top));
      for (int j = static_cast<int>(cj - w); j <= static_cast<int>(cj + w); ++j)
        c.blend(i, j, 0.8, col[0], col[1], col[2]);
    }
  }

  // Mouth with nuisance jitter.
  {
    pick(mouth, mouth_n, col);
    const double mr = (id.mouth_row + nu.mouth_jitter) * S + nu.dy;
    const double mw = id.mouth_halfwidth * nu.mouth_scale * S;
    detail::fill_ellipse(c, mr, cj, 0.016 * S + 0.5, mw, col[0], col[1], col[2]);
  }

  // Illumination: global gain plus a lateral gradient.
  for (int i = 0; i < S; ++i)
    for (int j = 0; j < S; ++j) {
      const double lat = 1.0 + nu.tilt * (2.0 * j / S - 1.0);
      const std::size_t k = static_cast<std::size_t>(i) * S + j;
      c.r[k] *= nu.gain * lat;
      c.g[k] *= nu.gain * lat;
      c.b[k] *= nu.gain * lat;
    }

  if (nir) {
    // Optical blur, exposure, then radial vignette — all session-dependent.
    for (int pass = 0; pass < nu.nir_blur; ++pass) detail::box_blur3(c.r, S);
    const double cx = (S - 1) / 2.0;
    const double dmax2 = 2.0 * cx * cx;
    for (int i = 0; i < S; ++i)
      for (int j = 0; j < S; ++j) {
        const double d2 = (i - cx) * (i - cx) + (j - cx) * (j - cx);
        c.r[static_cast<std::size_t>(i) * S + j] *=
            nu.nir_exposure * (1.0 - nu.nir_vign * (d2 / dmax2));
      }
    c.g = c.r;
    c.b = c.r;
  }

  // Sensor noise; the NIR channel is noticeably noisier.
  {
    auto nrng = make_rng(nu.noise_seed);
    std::normal_distribution<double> noise(0.0, nir ? nu.nir_sigma : 0.008);
    for (std::size_t k = 0; k < c.r.size(); ++k) {
      if (nir) {
        const double n = noise(nrng);
        c.r[k] += n;
        c.g[k] += n;
        c.b[k] += n;
      } else {
        c.r[k] += noise(nrng);
        c.g[k] += noise(nrng);
        c.b[k] += noise(nrng);
      }
    }
  }

  if (eyes) {
    eyes->l_row = static_cast<int>(std::lround(er));
    eyes->l_col = static_cast<int>(std::lround(ecl));
    eyes->r_row = static_cast<int>(std::lround(er));
    eyes->r_col = static_cast<int>(std::lround(ecr));
  }

  Tensor<float> out({3, S, S});
  const std::int64_t plane = static_cast<std::int64_t>(S) * S;
  for (std::int64_t k = 0; k < plane; ++k) {
    out[k] = static_cast<float>(std::clamp(c.r[static_cast<std::size_t>(k)], 0.0, 1.0));
    out[plane + k] = static_cast<float>(std::clamp(c.g[static_cast<std::size_t>(k)], 0.0, 1.0));
    out[2 * plane + k] = static_cast<float>(std::clamp(c.b[static_cast<std::size_t>(k)], 0.0, 1.0));
  }
  return out;
}

// Renders the sample described by a manifest row (identity + nuisance seed).
inline Tensor<float> render_sample(std::uint64_t dataset_seed, int identity, Modality mod,
                                   std::uint64_t nuisance_seed, int image_size,
                                   EyeCenters* eyes = nullptr) {
  const IdentityParams id = sample_identity(dataset_seed, identity);
  const NuisanceParams nu = sample_nuisance(nuisance_seed, image_size);
  return render_face(id, nu, image_size, mod, eyes);
}

// ---------------------------------------------------------------------------
// Dataset generation and the manifest

inline std::vector<SampleMeta> plan_dataset(const SynthConfig& cfg) {
  std::vector<SampleMeta> metas;
  std::uint64_t counter = 0;
  char buf[64];
  for (int id = 0; id < cfg.identities; ++id) {
    for (int pass = 0; pass < 2; ++pass) {
      const Modality mod = pass == 0 ? Modality::Vis : Modality::Nir;
      const int count = pass == 0 ? cfg.vis_per_id : cfg.nir_per_id;
      for (int k = 0; k < count; ++k) {
        SampleMeta m;
        m.identity_id = id;
        m.modality = mod;
        m.nuisance_seed = split_seed(cfg.seed, "nuisance", counter++);
        std::snprintf(buf, sizeof buf, "%s/%04d_%02d.%s", modality_name(mod), id, k,
                      mod == Modality::Vis ? "ppm" : "pgm");
        m.file_path = buf;
        EyeCenters eyes;
        // Landmarks depend only on identity + nuisance, not on pixels.
        const NuisanceParams nu = sample_nuisance(m.nuisance_seed, cfg.image_size);
        const IdentityParams ip = sample_identity(cfg.seed, id);
        eyes.l_row = eyes.r_row = static_cast<int>(std::lround(ip.eye_row * cfg.image_size + nu.dy));
        eyes.l_col = static_cast<int>(std::lround(0.5 * cfg.image_size + nu.dx - ip.eye_spacing * cfg.image_size));
        eyes.r_col = static_cast<int>(std::lround(0.5 * cfg.image_size + nu.dx + ip.eye_spacing * cfg.image_size));
        m.eye_l_row = eyes.l_row;
        m.eye_l_col = eyes.l_col;
        m.eye_r_row = eyes.r_row;
        m.eye_r_col = eyes.r_col;
        metas.push_back(std::move(m));
      }
    }
  }
  return metas;
}

inline void write_manifest(const std::string& path, const std::vector<SampleMeta>& metas) {
  std::ofstream out(path);
  if (!out) throw IoError(path + ": cannot open for writing");
  out << "file_path,identity_id,modality,eye_l_row,eye_l_col,eye_r_row,eye_r_col,nuisance_seed\n";
  for (const auto& m : metas)
    out << m.file_path << ',' << m.identity_id << ',' << modality_name(m.modality) << ','
        << m.eye_l_row << ',' << m.eye_l_col << ',' << m.eye_r_row << ',' << m.eye_r_col << ','
        << m.nuisance_seed << '\n';
  if (!out) throw IoError(path + ": write failed");
}

inline std::vector<SampleMeta> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path + ": cannot open");
  std::string line;
  if (!std::getline(in, line) ||
      line != "file_path,identity_id,modality,eye_l_row,eye_l_col,eye_r_row,eye_r_col,nuisance_seed")
    throw IoError(path + ": unexpected manifest header");
  std::vector<SampleMeta> metas;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) f.push_back(tok);
    if (f.size() != 8)
      throw IoError(path + " line " + std::to_string(lineno) + ": expected 8 fields, got " +
                    std::to_string(f.size()));
    SampleMeta m;
    try {
      m.file_path = f[0];
      m.identity_id = std::stoi(f[1]);
      if (f[2] == "vis")
        m.modality = Modality::Vis;
      else if (f[2] == "nir")
        m.modality = Modality::Nir;
      else
        throw std::invalid_argument("modality");
      m.eye_l_row = std::stoi(f[3]);
      m.eye_l_col = std::stoi(f[4]);
      m.eye_r_row = std::stoi(f[5]);
      m.eye_r_col = std::stoi(f[6]);
      m.nuisance_seed = std::stoull(f[7]);
    } catch (const std::exception&) {
      throw IoError(path + " line " + std::to_string(lineno) + ": malformed field");
    }
    metas.push_back(std::move(m));
  }
  return metas;
}

// Renders every sample under out_dir, split by modality (vis/ as PPM, nir/
// as PGM), plus manifest.csv at the top level.
inline std::vector<SampleMeta> generate_dataset(const SynthConfig& cfg, const std::string& out_dir) {
  std::vector<SampleMeta> metas = plan_dataset(cfg);
  std::filesystem::create_directories(std::filesystem::path(out_dir) / "vis");
  std::filesystem::create_directories(std::filesystem::path(out_dir) / "nir");
  for (const auto& m : metas) {
    Tensor<float> im = render_sample(cfg.seed, m.identity_id, m.modality, m.nuisance_seed,
                                     cfg.image_size);
    const std::string path = out_dir + "/" + m.file_path;
    if (m.modality == Modality::Vis)
      img::write_ppm(path, im);
    else
      img::write_pgm(path, img::to_gray(im));
  }
  write_manifest(out_dir + "/manifest.csv", metas);
  return metas;
}

// Loads a sample image from disk; single-channel files are replicated to
// three channels so both modalities present (3,H,W).
inline Tensor<float> load_sample(const std::string& dir, const SampleMeta& m) {
  Tensor<float> im = img::read_pnm(dir + "/" + m.file_path);
  if (im.dim(0) == 3) return im;
  const int H = im.dim(1), W = im.dim(2);
  Tensor<float> out({3, H, W});
  const std::int64_t plane = static_cast<std::int64_t>(H) * W;
  for (int c = 0; c < 3; ++c) std::copy_n(im.data(), plane, out.data() + c * plane);
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation protocol: identities are partitioned into k disjoint folds.
// Fold i tests on chunk i (one random VIS gallery image per identity, every
// NIR image as a probe) and trains on the rest.

struct FoldProtocol {
  std::vector<int> train_ids, test_ids;
  std::vector<int> gallery;  // sample indices, one per test identity
  std::vector<int> probes;   // sample indices, all NIR of test identities
};

inline std::vector<FoldProtocol> make_folds(const std::vector<SampleMeta>& metas, int identities,
                                            int k, std::uint64_t seed) {
  if (k < 1 || k > identities)
    throw ValueError("make_folds: fold count " + std::to_string(k) + " invalid for " +
                     std::to_string(identities) + " identities");
  std::vector<int> ids(static_cast<std::size_t>(identities));
  std::iota(ids.begin(), ids.end(), 0);
  auto rng = make_rng(split_seed(seed, "folds"));
  std::shuffle(ids.begin(), ids.end(), rng);

  std::vector<FoldProtocol> folds(static_cast<std::size_t>(k));
  for (int f = 0; f < k; ++f) {
    const int lo = f * identities / k, hi = (f + 1) * identities / k;
    auto& fold = folds[static_cast<std::size_t>(f)];
    for (int i = 0; i < identities; ++i)
      (i >= lo && i < hi ? fold.test_ids : fold.train_ids).push_back(ids[static_cast<std::size_t>(i)]);
    std::sort(fold.test_ids.begin(), fold.test_ids.end());
    std::sort(fold.train_ids.begin(), fold.train_ids.end());
    for (int id : fold.test_ids) {
      std::vector<int> vis;
      for (std::size_t s = 0; s < metas.size(); ++s) {
        if (metas[s].identity_id != id) continue;
        if (metas[s].modality == Modality::Vis)
          vis.push_back(static_cast<int>(s));
        else
          fold.probes.push_back(static_cast<int>(s));
      }
      if (vis.empty())
        throw ValueError("make_folds: identity " + std::to_string(id) + " has no VIS images");
      auto grng = make_rng(split_seed(seed, "gallery",
                                      (static_cast<std::uint64_t>(f) << 32) |
                                          static_cast<std::uint64_t>(id)));
      std::uniform_int_distribution<std::size_t> pick(0, vis.size() - 1);
      fold.gallery.push_back(vis[pick(grng)]);
    }
  }
  return folds;
}

}  // namespace nirvis::synth
