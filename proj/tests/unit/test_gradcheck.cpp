#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "nirvis/gradcheck.hpp"

using namespace nirvis;

// The exhaustive 10-point sweep lives in the acceptance suite; here a
// 2-point pass keeps the unit run quick while still exercising every case.
TEST_CASE("finite differences agree with analytic gradients", "[gradcheck]") {
  const auto reports = gradcheck::run_all(/*seed=*/7, /*points=*/2);
  REQUIRE_FALSE(reports.empty());
  for (const auto& r : reports) {
    INFO(r.name << " max relative error " << r.max_rel_err);
    CHECK(r.pass);
  }
}

TEST_CASE("the registry covers every primitive and loss", "[gradcheck]") {
  std::set<std::string> names;
  for (const auto& c : gradcheck::all_cases()) names.insert(c.name);
  REQUIRE(names.size() == gradcheck::all_cases().size());  // no duplicates
  for (const char* required :
       {"add", "sub", "mul", "affine", "square", "bias_add", "matmul", "conv2d_s1", "conv2d_s2",
        "instance_norm", "maxpool2x2", "upsample2x", "softmax_cross_entropy", "tanh", "sigmoid",
        "leaky_relu", "relu", "log", "sum_axes", "mean_axes", "mean_all", "l1_mean",
        "l2_norm_last", "var_rows", "normalize_rows", "reshape", "concat_channels", "concat_rows", "slice",
        "flip_w", "paste_add", "stack0", "composite_net", "loss_gen_adv", "loss_disc_adv",
        "loss_cycle", "loss_intensity", "loss_gen_total", "loss_feat_adv", "loss_feat_disc",
        "loss_cvd", "loss_cls", "loss_feat_total"}) {
    INFO("missing case: " << required);
    REQUIRE(names.count(required) == 1);
  }
}
