// Command-line front end: every stage of the pipeline (data synthesis,
// translation training, feature training, evaluation, reporting) as one
// subcommand each, all driving the header library.
//
// Exit codes: 0 success, 1 usage error, 2 data/config error, 3 numerical
// failure (NaN in a forward pass, gradient check over tolerance).

#include <cstdio>
#include <cstdlib>
#include <exception>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nirvis/config.hpp"
#include "nirvis/errors.hpp"
#include "nirvis/experiment.hpp"
#include "nirvis/gradcheck.hpp"
#include "nirvis/synth.hpp"

namespace {

using namespace nirvis;

// Output directory precedence: --out flag, then $NIRVIS_OUT_DIR, then the
// given fallback (current directory unless a subcommand has a better one).
std::string resolve_out(const std::string& flag, const std::string& fallback = ".") {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("NIRVIS_OUT_DIR"); env && *env) return env;
  return fallback;
}

// Defaults <- config file <- repeated --set key=value overrides.
ExperimentConfig build_config(const std::string& config_path,
                              const std::vector<std::string>& overrides) {
  ExperimentConfig cfg;
  if (!config_path.empty()) cfg = load_config_file(config_path);
  for (const auto& kv : overrides) {
    const std::size_t eq = kv.find('=');
    if (eq == std::string::npos)
      throw ConfigError("override must look like key=value, got '" + kv + "'");
    apply_config_kv(cfg, detail::trim(kv.substr(0, eq)), detail::trim(kv.substr(eq + 1)), 0);
  }
  return cfg;
}

void print_report(const eval::EvalReport& r) {
  std::printf("rank-1 %.4f +- %.4f", r.mean.rank1, r.stddev.rank1);
  for (std::size_t i = 0; i < r.mean.vr.size(); ++i)
    std::printf("  vr@%g %.4f +- %.4f", eval::kFarTargets[i], r.mean.vr[i], r.stddev.vr[i]);
  std::printf("  (%zu folds)\n", r.folds.size());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adversarial NIR->VIS face recognition pipeline"};
  app.require_subcommand(1);

  std::string config_path, out_dir, data_dir, run_dir, hal_ckpt;
  std::vector<std::string> overrides, report_dirs;
  int fold = -1, per_grid = 8;
  int identities = -1, vis_per_id = -1, nir_per_id = -1, image_size = -1;
  long long seed_flag = -1;
  bool dump = false;
  std::uint64_t gc_seed = 42;
  int gc_points = 10;
  double gc_tol = 1e-4;

  auto add_config_opts = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "config file (key = value lines)");
    cmd->add_option("--set", overrides, "override a config key, e.g. --set seed=7")
        ->take_all();
  };

  auto* c_synth = app.add_subcommand("synth", "render a synthetic paired NIR/VIS dataset");
  add_config_opts(c_synth);
  c_synth->add_option("--out", out_dir, "dataset directory");
  c_synth->add_option("--identities", identities, "number of identities");
  c_synth->add_option("--vis", vis_per_id, "VIS images per identity");
  c_synth->add_option("--nir", nir_per_id, "NIR images per identity");
  c_synth->add_option("--image-size", image_size, "square image edge in pixels");
  c_synth->add_option("--seed", seed_flag, "dataset seed");

  auto* c_hal = app.add_subcommand("train-hal", "train the NIR<->VIS translation stage");
  add_config_opts(c_hal);
  c_hal->add_option("--data", data_dir, "dataset directory (with manifest.csv)")->required();
  c_hal->add_option("--out", out_dir, "run directory for checkpoint + loss CSV");
  c_hal->add_option("--fold", fold, "train only on this fold's training identities");
  c_hal->add_option("--seed", seed_flag, "experiment seed");

  auto* c_feat = app.add_subcommand("train-feat", "train features on every fold and evaluate");
  add_config_opts(c_feat);
  c_feat->add_option("--data", data_dir, "dataset directory")->required();
  c_feat->add_option("--out", out_dir, "run directory for checkpoints, losses, report");
  c_feat->add_option("--hal", hal_ckpt, "translation checkpoint (hallucination+adfl preset)");
  c_feat->add_option("--seed", seed_flag, "experiment seed");

  auto* c_gen = app.add_subcommand("hallucinate",
                                   "translate every NIR image through a trained generator");
  add_config_opts(c_gen);
  c_gen->add_option("--data", data_dir, "dataset directory")->required();
  c_gen->add_option("--hal", hal_ckpt, "translation checkpoint")->required();
  c_gen->add_option("--out", out_dir, "directory for PPM grids");
  c_gen->add_option("--per-grid", per_grid, "image pairs per grid")->check(CLI::PositiveNumber);

  auto* c_eval = app.add_subcommand("eval", "re-evaluate a finished run from its checkpoints");
  add_config_opts(c_eval);
  c_eval->add_option("--data", data_dir, "dataset directory")->required();
  c_eval->add_option("--run", run_dir, "run directory holding feat_fold*.ckpt")->required();
  c_eval->add_option("--hal", hal_ckpt, "translation checkpoint (hallucination+adfl preset)");
  c_eval->add_option("--out", out_dir, "where to write the report (default: the run dir)");
  c_eval->add_flag("--dump-features", dump, "also write per-fold feature CSVs");

  auto* c_gc = app.add_subcommand("gradcheck", "finite-difference check of every gradient");
  c_gc->add_option("--seed", gc_seed, "random point seed");
  c_gc->add_option("--points", gc_points, "points per case")->check(CLI::PositiveNumber);
  c_gc->add_option("--tol", gc_tol, "max relative error")->check(CLI::PositiveNumber);

  auto* c_rep = app.add_subcommand("report", "collate finished runs into one comparison table");
  c_rep->add_option("dirs", report_dirs, "run directories")->required()->expected(-1);
  c_rep->add_option("--out", out_dir, "where to write report.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "%s\n\n%s", e.what(), app.help().c_str());
    return 1;
  }

  try {
    if (app.got_subcommand(c_synth)) {
      ExperimentConfig cfg = build_config(config_path, overrides);
      if (identities >= 0) cfg.identities = identities;
      if (vis_per_id >= 0) cfg.vis_per_id = vis_per_id;
      if (nir_per_id >= 0) cfg.nir_per_id = nir_per_id;
      if (image_size >= 0) cfg.image_size = image_size;
      if (seed_flag >= 0) cfg.seed = static_cast<std::uint64_t>(seed_flag);
      cfg.validate();
      const std::string dir = resolve_out(out_dir);
      synth::SynthConfig sc{cfg.identities, cfg.vis_per_id, cfg.nir_per_id, cfg.image_size,
                            cfg.seed};
      const auto metas = synth::generate_dataset(sc, dir);
      std::printf("wrote %zu samples (%d identities) to %s\n", metas.size(), cfg.identities,
                  dir.c_str());
    } else if (app.got_subcommand(c_hal)) {
      ExperimentConfig cfg = build_config(config_path, overrides);
      if (seed_flag >= 0) cfg.seed = static_cast<std::uint64_t>(seed_flag);
      cfg.validate();
      const exp::LoadedDataset ds = exp::load_dataset(data_dir);
      std::vector<int> id_filter;
      if (fold >= 0) {
        const auto folds = synth::make_folds(ds.metas, ds.identities, cfg.folds, cfg.seed);
        if (fold >= static_cast<int>(folds.size()))
          throw ValueError("--fold " + std::to_string(fold) + " out of range (folds = " +
                           std::to_string(folds.size()) + ")");
        id_filter = folds[static_cast<std::size_t>(fold)].train_ids;
      }
      const std::string dir = resolve_out(out_dir);
      const exp::HalResult res = exp::train_hal(cfg, ds, id_filter, dir);
      if (res.history.empty()) {
        std::printf("trained 0 iterations -> %s\n", dir.c_str());
      } else {
        const auto& last = res.history.back();
        std::printf("trained %zu iterations; final cycle %.4f intensity %.4f -> %s\n",
                    res.history.size(), last.cycle, last.intensity, dir.c_str());
      }
    } else if (app.got_subcommand(c_feat)) {
      ExperimentConfig cfg = build_config(config_path, overrides);
      if (seed_flag >= 0) cfg.seed = static_cast<std::uint64_t>(seed_flag);
      cfg.validate();
      const exp::LoadedDataset ds = exp::load_dataset(data_dir);
      const std::string dir = resolve_out(out_dir);
      const eval::EvalReport report = exp::train_feat_all(cfg, ds, dir, hal_ckpt);
      print_report(report);
      std::printf("artifacts in %s\n", dir.c_str());
    } else if (app.got_subcommand(c_gen)) {
      ExperimentConfig cfg = build_config(config_path, overrides);
      cfg.validate();
      const exp::LoadedDataset ds = exp::load_dataset(data_dir);
      const hal::Generator<float> gv = exp::load_gv(cfg, hal_ckpt);
      const std::string dir = resolve_out(out_dir);
      const int grids = exp::write_hallucination_grids(cfg, ds, gv, dir, per_grid);
      std::printf("wrote %d grid(s) to %s\n", grids, dir.c_str());
    } else if (app.got_subcommand(c_eval)) {
      ExperimentConfig cfg = build_config(config_path, overrides);
      cfg.validate();
      const exp::LoadedDataset ds = exp::load_dataset(data_dir);
      const std::string dir = resolve_out(out_dir, run_dir);
      const eval::EvalReport report =
          exp::eval_from_checkpoints(cfg, ds, run_dir, hal_ckpt, dir);
      print_report(report);
      if (dump) {
        exp::dump_features(cfg, ds, run_dir, hal_ckpt, dir);
        std::printf("feature CSVs in %s\n", dir.c_str());
      }
    } else if (app.got_subcommand(c_gc)) {
      const auto reports = gradcheck::run_all(gc_seed, gc_points, gc_tol);
      bool all_pass = true;
      for (const auto& r : reports) {
        std::printf("%-22s %.3e  %s\n", r.name.c_str(), r.max_rel_err, r.pass ? "ok" : "FAIL");
        all_pass = all_pass && r.pass;
      }
      std::printf("%zu cases, tolerance %g: %s\n", reports.size(), gc_tol,
                  all_pass ? "all passed" : "FAILURES");
      if (!all_pass) return 3;
    } else if (app.got_subcommand(c_rep)) {
      std::vector<exp::RunSummary> runs;
      runs.reserve(report_dirs.size());
      for (const auto& d : report_dirs) runs.push_back(exp::read_run_summary(d));
      const std::string csv = exp::format_report_csv(runs);
      std::fputs(csv.c_str(), stdout);
      const std::string dir = resolve_out(out_dir, "");
      if (!dir.empty()) {
        exp::detail::write_text(dir + "/report.csv", csv);
        std::printf("wrote %s/report.csv\n", dir.c_str());
      }
    }
    return 0;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
