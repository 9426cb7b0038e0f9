#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

// NIRVIS_CLI_PATH is injected by the build: the real installed binary.

using namespace std::string_literals;
namespace fs = std::filesystem;

namespace {

fs::path work_root() {
  static const fs::path p = [] {
    fs::path root = fs::temp_directory_path() / "nirvis_cli_tests";
    fs::remove_all(root);
    fs::create_directories(root);
    return root;
  }();
  return p;
}

// Runs the CLI with the given arguments (optionally under an env prefix)
// and returns its exit code. Output is captured to a log for debugging.
int run_cli(const std::string& args, const std::string& env_prefix = "") {
  const std::string log = (work_root() / "cli.log").string();
  const std::string cmd =
      env_prefix + (env_prefix.empty() ? "" : " ") + NIRVIS_CLI_PATH + " " + args + " >>" + log +
      " 2>&1";
  const int rc = std::system(cmd.c_str());
  REQUIRE(rc != -1);
  REQUIRE(WIFEXITED(rc));
  return WEXITSTATUS(rc);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

long line_count(const fs::path& p) {
  const std::string text = slurp(p);
  return std::count(text.begin(), text.end(), '\n');
}

// Settings small enough that training subcommands finish in seconds.
const std::string kTinyOverrides =
    "--set identities=4 --set vis_per_id=2 --set nir_per_id=2 --set image_size=20 "
    "--set crop_size=16 --set patch_size=4 --set gen_width=2 --set disc_width=2 "
    "--set feat_width=2 --set feature_dim=8 --set df_hidden=4 --set classes_per_batch=2 "
    "--set samples_per_class=2 --set hal_iters=2 --set feat_iters=2 --set pretrain_iters=1 "
    "--set folds=2";

}  // namespace

TEST_CASE("usage errors exit with code 1", "[cli]") {
  REQUIRE(run_cli("") == 1);
  REQUIRE(run_cli("frobnicate") == 1);
  REQUIRE(run_cli("synth --no-such-flag") == 1);
  REQUIRE(run_cli("--help") == 0);
}

TEST_CASE("synth writes identities x (vis + nir) manifest rows", "[cli]") {
  const fs::path dir = work_root() / "synth70";
  REQUIRE(run_cli("synth --identities 10 --vis 2 --nir 5 --out " + dir.string()) == 0);
  REQUIRE(line_count(dir / "manifest.csv") == 71);  // header + 70 samples
}

TEST_CASE("identical invocations produce byte-identical artifacts", "[cli]") {
  const fs::path d1 = work_root() / "rep1", d2 = work_root() / "rep2";
  const std::string args = "synth --identities 2 --vis 1 --nir 1 --seed 9 --out ";
  REQUIRE(run_cli(args + d1.string()) == 0);
  REQUIRE(run_cli(args + d2.string()) == 0);
  REQUIRE(slurp(d1 / "manifest.csv") == slurp(d2 / "manifest.csv"));
  // Every rendered image too, not just the manifest.
  for (const auto& entry : fs::recursive_directory_iterator(d1))
    if (entry.is_regular_file() && entry.path().extension() != ".csv")
      REQUIRE(slurp(entry.path()) == slurp(d2 / fs::relative(entry.path(), d1)));
}

TEST_CASE("the output directory honors the environment variable", "[cli]") {
  const fs::path dir = work_root() / "env_out";
  fs::create_directories(dir);
  REQUIRE(run_cli("synth --identities 2 --vis 1 --nir 1",
                  "NIRVIS_OUT_DIR=" + dir.string()) == 0);
  REQUIRE(fs::exists(dir / "manifest.csv"));
}

TEST_CASE("config and data failures exit with code 2", "[cli]") {
  REQUIRE(run_cli("synth --set no_such_key=1") == 2);
  REQUIRE(run_cli("synth --set identities=zero") == 2);
  REQUIRE(run_cli("train-hal --data " + (work_root() / "missing").string()) == 2);
  REQUIRE(run_cli("eval --data " + (work_root() / "missing").string() + " --run x") == 2);
}

TEST_CASE("gradcheck passes and reports per-case errors", "[cli]") {
  REQUIRE(run_cli("gradcheck --points 1 --seed 3") == 0);
}

TEST_CASE("train, evaluate, hallucinate and report round-trip", "[cli]") {
  const fs::path data = work_root() / "data";
  const fs::path run = work_root() / "run";
  const fs::path hal = work_root() / "hal";
  const fs::path grids = work_root() / "grids";
  const fs::path evald = work_root() / "evald";

  REQUIRE(run_cli("synth " + kTinyOverrides + " --out " + data.string()) == 0);

  REQUIRE(run_cli("train-hal " + kTinyOverrides + " --data " + data.string() + " --out " +
                  hal.string()) == 0);
  REQUIRE(fs::exists(hal / "hal.ckpt"));
  REQUIRE(fs::exists(hal / "loss_hal.csv"));

  REQUIRE(run_cli("train-feat " + kTinyOverrides + " --set preset=softmax-only --data " +
                  data.string() + " --out " + run.string()) == 0);
  REQUIRE(fs::exists(run / "eval_report.csv"));
  REQUIRE(fs::exists(run / "feat_fold0.ckpt"));
  REQUIRE(fs::exists(run / "feat_fold1.ckpt"));
  REQUIRE(fs::exists(run / "roc_fold0.svg"));

  REQUIRE(run_cli("eval " + kTinyOverrides + " --set preset=softmax-only --data " +
                  data.string() + " --run " + run.string() + " --out " + evald.string() +
                  " --dump-features") == 0);
  // Re-evaluating the checkpoints reproduces the training-time report.
  REQUIRE(slurp(evald / "eval_report.csv") == slurp(run / "eval_report.csv"));
  REQUIRE(fs::exists(evald / "features_fold0.csv"));
  // identity_id, modality, then one column per feature dimension.
  const std::string header = slurp(evald / "features_fold0.csv").substr(0, 64);
  REQUIRE(header.rfind("identity_id,modality,f0,", 0) == 0);

  REQUIRE(run_cli("hallucinate " + kTinyOverrides + " --data " + data.string() + " --hal " +
                  hal.string() + "/hal.ckpt --out " + grids.string()) == 0);
  REQUIRE(fs::exists(grids / "grid_000.ppm"));

  const fs::path rep = work_root() / "rep_out";
  fs::create_directories(rep);
  REQUIRE(run_cli("report " + run.string() + " --out " + rep.string()) == 0);
  const std::string table = slurp(rep / "report.csv");
  REQUIRE(table.rfind("preset,rank1,", 0) == 0);
  REQUIRE(table.find("softmax-only,") != std::string::npos);

  // A fold index past the protocol is a data error, not a crash.
  REQUIRE(run_cli("train-hal " + kTinyOverrides + " --data " + data.string() +
                  " --fold 7 --out " + (work_root() / "x").string()) == 2);
}
