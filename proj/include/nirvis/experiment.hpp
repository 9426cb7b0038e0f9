#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "nirvis/checkpoint.hpp"
#include "nirvis/config.hpp"
#include "nirvis/eval.hpp"
#include "nirvis/features.hpp"
#include "nirvis/hallucination.hpp"
#include "nirvis/image.hpp"
#include "nirvis/synth.hpp"

// Experiment orchestration: dataset loading, the two training stages, fold
// evaluation, and the ablation driver. Every artifact (CSV, checkpoint,
// image) is a pure function of (config, seed), so reruns are byte-identical.
namespace nirvis::exp {

namespace fs = std::filesystem;

struct LoadedDataset {
  std::vector<synth::SampleMeta> metas;
  std::vector<Tensor<float>> images;  // full-size RGB, (3,S,S)
  int identities = 0;
  int image_size = 0;
};

inline LoadedDataset load_dataset(const std::string& dir) {
  LoadedDataset ds;
  ds.metas = synth::read_manifest(dir + "/manifest.csv");
  if (ds.metas.empty()) throw ValueError(dir + ": manifest has no samples");
  ds.images.reserve(ds.metas.size());
  for (const auto& m : ds.metas) {
    Tensor<float> im = synth::load_sample(dir, m);
    if (ds.image_size == 0) ds.image_size = im.dim(1);
    if (im.dim(1) != ds.image_size || im.dim(2) != ds.image_size)
      throw ValueError(m.file_path + ": inconsistent image size in dataset");
    ds.images.push_back(std::move(im));
    ds.identities = std::max(ds.identities, m.identity_id + 1);
  }
  return ds;
}

namespace detail {

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError(path + ": cannot open for writing");
  out << text;
  if (!out) throw IoError(path + ": write failed");
}

inline std::string fmt9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

// Crops an image, remaps the eye centers into the cropped frame, and clamps
// the patch windows inside it.
inline hal::GenInput<float> make_gen_input(const Tensor<float>& full,
                                           const synth::SampleMeta& meta, int crop, int patch,
                                           bool random, std::mt19937_64& rng) {
  int r0 = 0, c0 = 0;
  Tensor<float> im = random ? img::random_crop(full, crop, rng, &r0, &c0)
                            : img::center_crop(full, crop, &r0, &c0);
  hal::GenInput<float> in;
  hal::patch_corner(meta.eye_l_row - r0, meta.eye_l_col - c0, patch, crop, crop, in.lr0, in.lc0);
  hal::patch_corner(meta.eye_r_row - r0, meta.eye_r_col - c0, patch, crop, crop, in.rr0, in.rc0);
  in.img = ad::Var<float>::constant(im.reshaped({1, 3, crop, crop}));
  return in;
}

}  // namespace detail

// Runs a full-size image through a frozen generator; patch geometry comes
// from the manifest landmarks.
inline Tensor<float> translate_image(const hal::Generator<float>& gv, const Tensor<float>& full,
                                     const synth::SampleMeta& meta, int patch) {
  ad::NoGradGuard ng;
  const int S = full.dim(1);
  hal::GenInput<float> in;
  hal::patch_corner(meta.eye_l_row, meta.eye_l_col, patch, S, S, in.lr0, in.lc0);
  hal::patch_corner(meta.eye_r_row, meta.eye_r_col, patch, S, S, in.rr0, in.rc0);
  in.img = ad::Var<float>::constant(full.reshaped({1, 3, S, S}));
  return gv.forward(in, patch).value().reshaped({3, S, S});
}

// ---------------------------------------------------------------------------
// Stage 1: cross-spectral hallucination

struct HalResult {
  std::unique_ptr<hal::HalTrainer> trainer;
  std::vector<hal::HalStepLosses> history;
};

// id_filter empty trains on every identity; otherwise only on the listed
// ones (the fold protocol's training split). When run_dir is nonempty,
// writes config.txt, loss_hal.csv and hal.ckpt there.
inline HalResult train_hal(const ExperimentConfig& cfg, const LoadedDataset& ds,
                           const std::vector<int>& id_filter, const std::string& run_dir) {
  cfg.validate();
  auto allowed = [&](int id) {
    return id_filter.empty() ||
           std::find(id_filter.begin(), id_filter.end(), id) != id_filter.end();
  };
  std::vector<int> nir_pool, vis_pool;
  for (std::size_t i = 0; i < ds.metas.size(); ++i) {
    if (!allowed(ds.metas[i].identity_id)) continue;
    (ds.metas[i].modality == synth::Modality::Nir ? nir_pool : vis_pool)
        .push_back(static_cast<int>(i));
  }
  if (nir_pool.empty() || vis_pool.empty())
    throw ValueError("train_hal: training split lacks a modality");

  HalResult res;
  res.trainer = std::make_unique<hal::HalTrainer>(cfg, cfg.seed);
  auto rng_pick = make_rng(split_seed(cfg.seed, "hal/pick"));
  auto rng_crop = make_rng(split_seed(cfg.seed, "hal/crop"));
  std::uniform_int_distribution<std::size_t> dn(0, nir_pool.size() - 1), dv(0, vis_pool.size() - 1);

  for (int it = 0; it < cfg.hal_iters; ++it) {
    std::vector<hal::GenInput<float>> nb, vb;
    for (int b = 0; b < cfg.batch_size; ++b) {
      const int ni = nir_pool[dn(rng_pick)], vi = vis_pool[dv(rng_pick)];
      nb.push_back(detail::make_gen_input(ds.images[static_cast<std::size_t>(ni)],
                                          ds.metas[static_cast<std::size_t>(ni)], cfg.crop_size,
                                          cfg.patch_size, true, rng_crop));
      vb.push_back(detail::make_gen_input(ds.images[static_cast<std::size_t>(vi)],
                                          ds.metas[static_cast<std::size_t>(vi)], cfg.crop_size,
                                          cfg.patch_size, true, rng_crop));
    }
    res.history.push_back(res.trainer->step(nb, vb));
  }

  if (!run_dir.empty()) {
    fs::create_directories(run_dir);
    detail::write_text(run_dir + "/config.txt", serialize_config(cfg));
    std::string csv = "iter,loss_g_adv,loss_cycle,loss_intensity,loss_g_total,loss_d\n";
    for (std::size_t i = 0; i < res.history.size(); ++i) {
      const auto& h = res.history[i];
      csv += std::to_string(i + 1) + ',' + detail::fmt9(h.g_adv) + ',' + detail::fmt9(h.cycle) +
             ',' + detail::fmt9(h.intensity) + ',' + detail::fmt9(h.g_total) + ',' +
             detail::fmt9(h.d_total) + '\n';
    }
    detail::write_text(run_dir + "/loss_hal.csv", csv);
    save_checkpoint(run_dir + "/hal.ckpt", nn::to_checkpoint(res.trainer->named_params()));
  }
  return res;
}

// ---------------------------------------------------------------------------
// Stage 2: feature learning on one fold

struct FeatFoldResult {
  std::unique_ptr<feat::FeatTrainer> trainer;
  eval::FoldMetrics metrics;
  std::vector<std::pair<double, double>> roc;
  std::string loss_csv;
};

// Grayscale training view of one sample: NIR goes through the frozen G_V
// first under the hallucination preset (translations are cached; G_V is
// frozen, so each sample translates identically every epoch).
class SampleFeed {
 public:
  SampleFeed(const LoadedDataset& ds, const hal::Generator<float>* gv, int patch)
      : ds_(ds), gv_(gv), patch_(patch), cache_(ds.images.size()) {}

  const Tensor<float>& full_rgb(int idx) {
    const auto& meta = ds_.metas[static_cast<std::size_t>(idx)];
    if (!gv_ || meta.modality == synth::Modality::Vis)
      return ds_.images[static_cast<std::size_t>(idx)];
    auto& slot = cache_[static_cast<std::size_t>(idx)];
    if (!slot)
      slot = std::make_unique<Tensor<float>>(
          translate_image(*gv_, ds_.images[static_cast<std::size_t>(idx)], meta, patch_));
    return *slot;
  }

  // (1,S,S) grayscale crop; random window for training, centered otherwise.
  Tensor<float> gray_crop(int idx, int crop, bool random, std::mt19937_64& rng) {
    Tensor<float> c = random ? img::random_crop(full_rgb(idx), crop, rng)
                             : img::center_crop(full_rgb(idx), crop);
    return img::to_gray(c);
  }

 private:
  const LoadedDataset& ds_;
  const hal::Generator<float>* gv_;
  int patch_;
  std::vector<std::unique_ptr<Tensor<float>>> cache_;
};

namespace detail {

inline Tensor<float> stack_gray(const std::vector<Tensor<float>>& grays, int crop) {
  Tensor<float> batch({static_cast<int>(grays.size()), 1, crop, crop});
  const std::int64_t per = static_cast<std::int64_t>(crop) * crop;
  for (std::size_t i = 0; i < grays.size(); ++i)
    std::copy_n(grays[i].data(), per, batch.data() + static_cast<std::int64_t>(i) * per);
  return batch;
}

inline std::vector<double> feature_of(const feat::FeatureExtractor<float>& f,
                                      const Tensor<float>& gray, int crop) {
  ad::NoGradGuard ng;
  auto out = f.forward(ad::Var<float>::constant(gray.reshaped({1, 1, crop, crop})));
  std::vector<double> v(static_cast<std::size_t>(out.value().numel()));
  for (std::int64_t i = 0; i < out.value().numel(); ++i) v[static_cast<std::size_t>(i)] = out.value()[i];
  return v;
}

}  // namespace detail

inline eval::FoldMetrics evaluate_fold(const ExperimentConfig& cfg, const LoadedDataset& ds,
                                       const synth::FoldProtocol& fold,
                                       const feat::FeatureExtractor<float>& f,
                                       const hal::Generator<float>* gv,
                                       std::vector<std::pair<double, double>>* roc_out) {
  SampleFeed feed(ds, gv, cfg.patch_size);
  std::mt19937_64 unused(0);
  std::vector<std::vector<double>> gfeats, pfeats;
  std::vector<int> gids, pids;
  for (int idx : fold.gallery) {
    gfeats.push_back(detail::feature_of(f, feed.gray_crop(idx, cfg.crop_size, false, unused),
                                        cfg.crop_size));
    gids.push_back(ds.metas[static_cast<std::size_t>(idx)].identity_id);
  }
  for (int idx : fold.probes) {
    pfeats.push_back(detail::feature_of(f, feed.gray_crop(idx, cfg.crop_size, false, unused),
                                        cfg.crop_size));
    pids.push_back(ds.metas[static_cast<std::size_t>(idx)].identity_id);
  }
  const eval::ScoreMatrix scores = eval::build_scores(gfeats, gids, pfeats, pids);
  const eval::RocVr rv = eval::roc_and_vr(scores);
  if (roc_out) *roc_out = rv.roc;
  eval::FoldMetrics m;
  m.rank1 = eval::rank1(scores);
  m.vr = rv.vr;
  return m;
}

inline FeatFoldResult train_feat_fold(const ExperimentConfig& cfg, const LoadedDataset& ds,
                                      const synth::FoldProtocol& fold, int fold_index,
                                      const hal::Generator<float>* gv) {
  cfg.validate();
  const bool hall = cfg.preset == "hallucination+adfl";
  if (hall && !gv) throw ValueError("preset hallucination+adfl needs a trained G_V checkpoint");
  if (!hall) gv = nullptr;  // other presets feed raw NIR

  // Local labels: position in the sorted train-identity list.
  const int classes = static_cast<int>(fold.train_ids.size());
  std::map<int, int> label_of;
  for (int i = 0; i < classes; ++i) label_of[fold.train_ids[static_cast<std::size_t>(i)]] = i;

  std::vector<std::vector<int>> vis_by_class(static_cast<std::size_t>(classes)),
      nir_by_class(static_cast<std::size_t>(classes));
  std::vector<std::pair<int, int>> vis_all;  // (sample idx, label)
  for (std::size_t i = 0; i < ds.metas.size(); ++i) {
    auto it = label_of.find(ds.metas[i].identity_id);
    if (it == label_of.end()) continue;
    if (ds.metas[i].modality == synth::Modality::Vis) {
      vis_by_class[static_cast<std::size_t>(it->second)].push_back(static_cast<int>(i));
      vis_all.emplace_back(static_cast<int>(i), it->second);
    } else {
      nir_by_class[static_cast<std::size_t>(it->second)].push_back(static_cast<int>(i));
    }
  }

  FeatFoldResult res;
  const std::uint64_t fold_seed =
      split_seed(cfg.seed, "feat/fold", static_cast<std::uint64_t>(fold_index));
  res.trainer = std::make_unique<feat::FeatTrainer>(cfg, classes, fold_seed);
  SampleFeed feed(ds, gv, cfg.patch_size);
  auto rng_crop = make_rng(split_seed(fold_seed, "feat/crop"));
  auto rng_pre = make_rng(split_seed(fold_seed, "feat/pretrain"));

  std::string csv = "iter,phase,loss_f_adv,loss_cvd,loss_cls,loss_total,loss_df\n";

  // Softmax-only warmup on VIS images.
  const int pre_batch = std::min<int>(cfg.classes_per_batch * cfg.samples_per_class,
                                      static_cast<int>(vis_all.size()));
  std::vector<std::size_t> pre_order(vis_all.size());
  std::iota(pre_order.begin(), pre_order.end(), 0);
  std::size_t pre_cursor = pre_order.size();
  for (int it = 0; it < cfg.pretrain_iters; ++it) {
    std::vector<Tensor<float>> grays;
    std::vector<int> labels;
    for (int b = 0; b < pre_batch; ++b) {
      if (pre_cursor >= pre_order.size()) {
        std::shuffle(pre_order.begin(), pre_order.end(), rng_pre);
        pre_cursor = 0;
      }
      const auto& [idx, label] = vis_all[pre_order[pre_cursor++]];
      grays.push_back(feed.gray_crop(idx, cfg.crop_size, true, rng_crop));
      labels.push_back(label);
    }
    const double ce = res.trainer->pretrain_step(
        ad::Var<float>::constant(detail::stack_gray(grays, cfg.crop_size)), labels);
    csv += std::to_string(it + 1) + ",pretrain,0,0," + detail::fmt9(ce) + ',' +
           detail::fmt9(cfg.lambda2 * ce) + ",0\n";
  }

  // Main alternating phase on class-balanced two-modality batches.
  feat::BalancedSampler sampler(vis_by_class, nir_by_class, cfg.classes_per_batch,
                                cfg.samples_per_class, split_seed(fold_seed, "feat/sampler"));
  for (int it = 0; it < cfg.feat_iters; ++it) {
    const auto picks = sampler.next();
    std::vector<Tensor<float>> vg, ng;
    std::vector<int> vlab, nlab;
    std::vector<feat::FeatTrainer::ClassSlice> slices;
    for (const auto& p : picks) {
      Tensor<float> g = feed.gray_crop(p.sample_index, cfg.crop_size, true, rng_crop);
      if (p.is_vis) {
        vg.push_back(std::move(g));
        vlab.push_back(p.local_label);
      } else {
        ng.push_back(std::move(g));
        nlab.push_back(p.local_label);
      }
    }
    // The sampler emits class-major order: samples_per_class rows per class
    // in each modality.
    for (int c = 0; c * cfg.samples_per_class < static_cast<int>(vlab.size()); ++c)
      slices.push_back({c * cfg.samples_per_class, (c + 1) * cfg.samples_per_class,
                        c * cfg.samples_per_class, (c + 1) * cfg.samples_per_class});
    const auto losses = res.trainer->step(
        ad::Var<float>::constant(detail::stack_gray(vg, cfg.crop_size)),
        ad::Var<float>::constant(detail::stack_gray(ng, cfg.crop_size)), vlab, nlab, slices);
    csv += std::to_string(it + 1) + ",main," + detail::fmt9(losses.f_adv) + ',' +
           detail::fmt9(losses.cvd) + ',' + detail::fmt9(losses.cls) + ',' +
           detail::fmt9(losses.total) + ',' + detail::fmt9(losses.d_f) + '\n';
  }
  res.loss_csv = std::move(csv);
  res.metrics = evaluate_fold(cfg, ds, fold, res.trainer->f, gv, &res.roc);
  return res;
}

// ---------------------------------------------------------------------------
// Whole-protocol runs and artifact layout

// Loads just the NIR->VIS generator from a stage-1 checkpoint.
inline hal::Generator<float> load_gv(const ExperimentConfig& cfg, const std::string& ckpt_path) {
  auto rng = make_rng(0);  // immediately overwritten by the checkpoint
  hal::Generator<float> gv(cfg.gen_width, rng);
  nn::NamedParams<float> ps;
  gv.params(ps, "gv");
  nn::load_params(ps, load_checkpoint(ckpt_path));
  return gv;
}

// Trains every fold, writes run artifacts (config.txt, per-fold loss CSVs,
// per-fold checkpoints, eval_report.csv, ROC CSV/SVG), returns the report.
inline eval::EvalReport train_feat_all(const ExperimentConfig& cfg, const LoadedDataset& ds,
                                       const std::string& run_dir,
                                       const std::string& hal_ckpt_path) {
  cfg.validate();
  const bool hall = cfg.preset == "hallucination+adfl";
  if (hall && hal_ckpt_path.empty())
    throw ValueError("preset hallucination+adfl requires --hal <checkpoint>");
  std::unique_ptr<hal::Generator<float>> gv;
  if (hall) gv = std::make_unique<hal::Generator<float>>(load_gv(cfg, hal_ckpt_path));

  const auto folds = synth::make_folds(ds.metas, ds.identities, cfg.folds, cfg.seed);
  if (!run_dir.empty()) fs::create_directories(run_dir);
  eval::EvalReport report;
  for (std::size_t fi = 0; fi < folds.size(); ++fi) {
    FeatFoldResult fr =
        train_feat_fold(cfg, ds, folds[fi], static_cast<int>(fi), gv.get());
    report.folds.push_back(fr.metrics);
    report.rocs.push_back(fr.roc);
    if (!run_dir.empty()) {
      const std::string tag = std::to_string(fi);
      detail::write_text(run_dir + "/loss_feat_fold" + tag + ".csv", fr.loss_csv);
      save_checkpoint(run_dir + "/feat_fold" + tag + ".ckpt",
                      nn::to_checkpoint(fr.trainer->named_params()));
      eval::write_roc_csv(run_dir + "/roc_fold" + tag + ".csv", fr.roc);
      eval::write_roc_svg(run_dir + "/roc_fold" + tag + ".svg", fr.roc);
    }
  }
  eval::aggregate_folds(report);
  if (!run_dir.empty()) {
    detail::write_text(run_dir + "/config.txt", serialize_config(cfg));
    eval::write_eval_csv(run_dir + "/eval_report.csv", report);
  }
  return report;
}

// Re-evaluates a finished run from its checkpoints alone.
inline eval::EvalReport eval_from_checkpoints(const ExperimentConfig& cfg, const LoadedDataset& ds,
                                              const std::string& run_dir,
                                              const std::string& hal_ckpt_path,
                                              const std::string& out_dir) {
  cfg.validate();
  const bool hall = cfg.preset == "hallucination+adfl";
  if (hall && hal_ckpt_path.empty())
    throw ValueError("preset hallucination+adfl requires --hal <checkpoint>");
  std::unique_ptr<hal::Generator<float>> gv;
  if (hall) gv = std::make_unique<hal::Generator<float>>(load_gv(cfg, hal_ckpt_path));

  const auto folds = synth::make_folds(ds.metas, ds.identities, cfg.folds, cfg.seed);
  eval::EvalReport report;
  for (std::size_t fi = 0; fi < folds.size(); ++fi) {
    auto rng = make_rng(0);
    feat::FeatureExtractor<float> f(cfg.feat_width, cfg.feature_dim, cfg.crop_size, rng);
    nn::NamedParams<float> ps;
    f.params(ps, "f");
    nn::load_params(ps, load_checkpoint(run_dir + "/feat_fold" + std::to_string(fi) + ".ckpt"));
    std::vector<std::pair<double, double>> roc;
    report.folds.push_back(evaluate_fold(cfg, ds, folds[fi], f, gv.get(), &roc));
    report.rocs.push_back(std::move(roc));
  }
  eval::aggregate_folds(report);
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    eval::write_eval_csv(out_dir + "/eval_report.csv", report);
    for (std::size_t fi = 0; fi < report.rocs.size(); ++fi) {
      eval::write_roc_csv(out_dir + "/roc_fold" + std::to_string(fi) + ".csv", report.rocs[fi]);
      eval::write_roc_svg(out_dir + "/roc_fold" + std::to_string(fi) + ".svg", report.rocs[fi]);
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Ablation driver: presets x seeds on freshly synthesized data, folds trained
// hygienically (stage 1 sees only each fold's training identities).

struct AblationRow {
  std::string preset;
  double mean_rank1 = 0;
  std::vector<double> mean_vr = std::vector<double>(3, 0.0);
  int runs = 0;
};

inline std::vector<AblationRow> run_ablation(ExperimentConfig base,
                                             const std::vector<std::uint64_t>& seeds,
                                             const std::vector<std::string>& presets,
                                             const std::string& work_dir) {
  std::vector<AblationRow> rows;
  for (const auto& preset : presets) rows.push_back({preset, 0.0, std::vector<double>(3, 0.0), 0});

  for (std::uint64_t seed : seeds) {
    ExperimentConfig cfg = base;
    cfg.seed = seed;
    cfg.validate();
    const std::string data_dir = work_dir + "/data-s" + std::to_string(seed);
    fs::create_directories(data_dir);
    synth::SynthConfig sc{cfg.identities, cfg.vis_per_id, cfg.nir_per_id, cfg.image_size,
                          cfg.seed};
    synth::generate_dataset(sc, data_dir);
    const LoadedDataset ds = load_dataset(data_dir);
    const auto folds = synth::make_folds(ds.metas, ds.identities, cfg.folds, cfg.seed);

    // Per-fold stage-1 generators, shared by every preset that needs them.
    std::vector<std::unique_ptr<hal::Generator<float>>> gvs;
    const bool any_hall = std::find(presets.begin(), presets.end(),
                                    std::string("hallucination+adfl")) != presets.end();
    if (any_hall)
      for (std::size_t fi = 0; fi < folds.size(); ++fi) {
        HalResult hr = train_hal(cfg, ds, folds[fi].train_ids, "");
        gvs.push_back(std::make_unique<hal::Generator<float>>(std::move(hr.trainer->gv)));
      }

    for (std::size_t pi = 0; pi < presets.size(); ++pi) {
      ExperimentConfig pc = cfg;
      pc.preset = presets[pi];
      const std::string run_dir = work_dir + "/run-" + presets[pi] + "-s" + std::to_string(seed);
      fs::create_directories(run_dir);
      eval::EvalReport report;
      for (std::size_t fi = 0; fi < folds.size(); ++fi) {
        const hal::Generator<float>* gv =
            pc.preset == "hallucination+adfl" ? gvs[fi].get() : nullptr;
        FeatFoldResult fr = train_feat_fold(pc, ds, folds[fi], static_cast<int>(fi), gv);
        report.folds.push_back(fr.metrics);
        report.rocs.push_back(fr.roc);
        detail::write_text(run_dir + "/loss_feat_fold" + std::to_string(fi) + ".csv",
                           fr.loss_csv);
        rows[pi].mean_rank1 += fr.metrics.rank1;
        for (std::size_t v = 0; v < fr.metrics.vr.size(); ++v)
          rows[pi].mean_vr[v] += fr.metrics.vr[v];
        rows[pi].runs += 1;
      }
      eval::aggregate_folds(report);
      detail::write_text(run_dir + "/config.txt", serialize_config(pc));
      eval::write_eval_csv(run_dir + "/eval_report.csv", report);
    }
  }

  std::string csv = "preset,mean_rank1,mean_vr_far_1e-2,mean_vr_far_1e-3,mean_vr_far_1e-4,runs\n";
  for (auto& r : rows) {
    r.mean_rank1 /= r.runs;
    for (auto& v : r.mean_vr) v /= r.runs;
    csv += r.preset + ',' + detail::fmt9(r.mean_rank1) + ',' + detail::fmt9(r.mean_vr[0]) + ',' +
           detail::fmt9(r.mean_vr[1]) + ',' + detail::fmt9(r.mean_vr[2]) + ',' +
           std::to_string(r.runs) + '\n';
  }
  detail::write_text(work_dir + "/ablation.csv", csv);
  return rows;
}

// ---------------------------------------------------------------------------
// Qualitative output: side-by-side NIR / hallucinated-VIS grids.

inline Tensor<float> tile_pairs(const std::vector<std::pair<Tensor<float>, Tensor<float>>>& pairs) {
  if (pairs.empty()) throw ValueError("tile_pairs: nothing to tile");
  const int S = pairs[0].first.dim(1);
  const int cols = static_cast<int>(pairs.size());
  Tensor<float> grid({3, 2 * S, cols * S});
  for (int k = 0; k < cols; ++k) {
    const auto& [top, bottom] = pairs[static_cast<std::size_t>(k)];
    for (int c = 0; c < 3; ++c)
      for (int i = 0; i < S; ++i)
        for (int j = 0; j < S; ++j) {
          grid[(static_cast<std::int64_t>(c) * 2 * S + i) * (cols * S) + k * S + j] =
              top[(static_cast<std::int64_t>(c) * S + i) * S + j];
          grid[(static_cast<std::int64_t>(c) * 2 * S + S + i) * (cols * S) + k * S + j] =
              bottom[(static_cast<std::int64_t>(c) * S + i) * S + j];
        }
  }
  return grid;
}

// Translates every NIR image in the dataset through G_V and writes PPM grids
// (input row on top, translation below), at most `per_grid` columns each.
inline int write_hallucination_grids(const ExperimentConfig& cfg, const LoadedDataset& ds,
                                     const hal::Generator<float>& gv, const std::string& out_dir,
                                     int per_grid = 8) {
  fs::create_directories(out_dir);
  std::vector<std::pair<Tensor<float>, Tensor<float>>> pending;
  int grids = 0;
  auto flush = [&]() {
    if (pending.empty()) return;
    char name[32];
    std::snprintf(name, sizeof name, "grid_%03d.ppm", grids++);
    img::write_ppm(out_dir + "/" + name, tile_pairs(pending));
    pending.clear();
  };
  for (std::size_t i = 0; i < ds.metas.size(); ++i) {
    if (ds.metas[i].modality != synth::Modality::Nir) continue;
    pending.emplace_back(ds.images[i],
                         translate_image(gv, ds.images[i], ds.metas[i], cfg.patch_size));
    if (static_cast<int>(pending.size()) == per_grid) flush();
  }
  flush();
  if (grids == 0) throw ValueError("no NIR images found to hallucinate");
  return grids;
}

// ---------------------------------------------------------------------------
// Feature dumps for external analysis: one CSV per fold, one row per gallery
// or probe sample: identity_id, modality, then the embedding coordinates.

inline void dump_features(const ExperimentConfig& cfg, const LoadedDataset& ds,
                          const std::string& run_dir, const std::string& hal_ckpt_path,
                          const std::string& out_dir) {
  cfg.validate();
  const bool hall = cfg.preset == "hallucination+adfl";
  if (hall && hal_ckpt_path.empty())
    throw ValueError("preset hallucination+adfl requires --hal <checkpoint>");
  std::unique_ptr<hal::Generator<float>> gv;
  if (hall) gv = std::make_unique<hal::Generator<float>>(load_gv(cfg, hal_ckpt_path));

  const auto folds = synth::make_folds(ds.metas, ds.identities, cfg.folds, cfg.seed);
  fs::create_directories(out_dir);
  for (std::size_t fi = 0; fi < folds.size(); ++fi) {
    auto rng = make_rng(0);
    feat::FeatureExtractor<float> f(cfg.feat_width, cfg.feature_dim, cfg.crop_size, rng);
    nn::NamedParams<float> ps;
    f.params(ps, "f");
    nn::load_params(ps, load_checkpoint(run_dir + "/feat_fold" + std::to_string(fi) + ".ckpt"));

    SampleFeed feed(ds, gv.get(), cfg.patch_size);
    std::mt19937_64 unused(0);
    std::string csv = "identity_id,modality";
    for (int d = 0; d < cfg.feature_dim; ++d) csv += ",f" + std::to_string(d);
    csv += '\n';
    auto emit = [&](int idx) {
      const auto& m = ds.metas[static_cast<std::size_t>(idx)];
      const auto v =
          detail::feature_of(f, feed.gray_crop(idx, cfg.crop_size, false, unused), cfg.crop_size);
      csv += std::to_string(m.identity_id);
      csv += ',';
      csv += synth::modality_name(m.modality);
      for (double x : v) {
        csv += ',';
        csv += detail::fmt9(x);
      }
      csv += '\n';
    };
    for (int idx : folds[fi].gallery) emit(idx);
    for (int idx : folds[fi].probes) emit(idx);
    detail::write_text(out_dir + "/features_fold" + std::to_string(fi) + ".csv", csv);
  }
}

// ---------------------------------------------------------------------------
// Run-directory collation: rebuilds the preset-by-metric comparison table
// from finished run artifacts alone (config.txt + eval_report.csv).

struct RunSummary {
  std::string run_dir;
  std::string preset;
  double rank1_mean = 0, rank1_std = 0;
  std::vector<double> vr_mean, vr_std;
};

inline RunSummary read_run_summary(const std::string& run_dir) {
  RunSummary s;
  s.run_dir = run_dir;
  s.preset = load_config_file(run_dir + "/config.txt").preset;

  std::ifstream in(run_dir + "/eval_report.csv");
  if (!in) throw IoError(run_dir + "/eval_report.csv: cannot open");
  std::string line, agg;
  while (std::getline(in, line))
    if (line.rfind("aggregate,", 0) == 0) agg = line;
  if (agg.empty()) throw IoError(run_dir + "/eval_report.csv: no aggregate row");

  // Cells look like "mean±std"; the separator is the two-byte UTF-8 sign.
  std::vector<std::pair<double, double>> cells;
  std::size_t pos = agg.find(',') + 1;
  while (pos <= agg.size()) {
    std::size_t comma = agg.find(',', pos);
    const std::string cell =
        agg.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    const std::size_t pm = cell.find("±");
    if (pm == std::string::npos)
      throw IoError(run_dir + "/eval_report.csv: malformed aggregate cell '" + cell + "'");
    cells.emplace_back(std::stod(cell.substr(0, pm)), std::stod(cell.substr(pm + 2)));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (cells.size() != 1 + eval::kFarTargets.size())
    throw IoError(run_dir + "/eval_report.csv: expected rank1 plus " +
                  std::to_string(eval::kFarTargets.size()) + " VR cells");
  s.rank1_mean = cells[0].first;
  s.rank1_std = cells[0].second;
  for (std::size_t i = 1; i < cells.size(); ++i) {
    s.vr_mean.push_back(cells[i].first);
    s.vr_std.push_back(cells[i].second);
  }
  return s;
}

// Rows = presets (in first-seen order), columns = Rank-1 / VR at the fixed
// FAR targets; runs of the same preset are averaged.
inline std::string format_report_csv(const std::vector<RunSummary>& runs) {
  if (runs.empty()) throw ValueError("report: no run directories given");
  std::vector<std::string> order;
  std::map<std::string, std::vector<const RunSummary*>> by_preset;
  for (const auto& r : runs) {
    if (!by_preset.count(r.preset)) order.push_back(r.preset);
    by_preset[r.preset].push_back(&r);
  }
  std::string csv = "preset,rank1,vr_far_1e-2,vr_far_1e-3,vr_far_1e-4,runs\n";
  for (const auto& p : order) {
    const auto& rs = by_preset[p];
    double r1 = 0;
    std::vector<double> vr(eval::kFarTargets.size(), 0.0);
    for (const auto* r : rs) {
      r1 += r->rank1_mean;
      for (std::size_t i = 0; i < vr.size(); ++i) vr[i] += r->vr_mean[i];
    }
    r1 /= static_cast<double>(rs.size());
    csv += p + ',' + detail::fmt9(r1);
    for (double v : vr) csv += ',' + detail::fmt9(v / static_cast<double>(rs.size()));
    csv += ',' + std::to_string(rs.size()) + '\n';
  }
  return csv;
}

}  // namespace nirvis::exp
