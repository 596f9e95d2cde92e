#include <catch2/catch.hpp>

#include "helpers.hpp"
#include "votrans/mc_study.hpp"

using namespace votrans;

namespace {
FitOptions study_options() {
  FitOptions opt;
  opt.max_iterations = 500;
  return opt;
}
}  // namespace

TEST_CASE("a small study produces a complete report") {
  const auto cfg = testutil::two_option_scenario(-1.0, 0.5, 2024, 0.12, 0.88, 12.0);
  const McReport rep = run_mc_study(cfg, 30, study_options());
  CHECK(rep.replicates == 30);
  CHECK(rep.failures + static_cast<int>(rep.replicate_ids.size()) == 30);
  REQUIRE(rep.params.size() == 5);
  CHECK(rep.params[0].name == "alpha_11");
  CHECK(rep.params[4].name == "tau");
  REQUIRE(rep.z_thresholds.size() == 4);
  CHECK(rep.z_thresholds[2] == Approx(1.96));
  for (const auto& p : rep.params) {
    CHECK(std::isfinite(p.bias));
    CHECK(p.mean_se > 0.0);
    CHECK(p.sd_estimates > 0.0);
    for (double e : p.exceedance) {
      CHECK(e >= 0.0);
      CHECK(e <= 1.0);
    }
    // exceedance proportions shrink as the threshold grows
    for (std::size_t z = 1; z < p.exceedance.size(); ++z)
      CHECK(p.exceedance[z] <= p.exceedance[z - 1] + 1e-12);
  }
}

TEST_CASE("the report does not depend on the thread count") {
  const auto cfg = testutil::two_option_scenario(1.0, 0.5, 7, 0.12, 0.88, 12.0);
  const McReport serial = run_mc_study(cfg, 12, study_options(), 1);
  const McReport parallel = run_mc_study(cfg, 12, study_options(), 3);
  REQUIRE(serial.replicate_ids == parallel.replicate_ids);
  CHECK((serial.estimates - parallel.estimates).cwiseAbs().maxCoeff() == 0.0);
  CHECK((serial.reported_se - parallel.reported_se).cwiseAbs().maxCoeff() == 0.0);
  for (std::size_t a = 0; a < serial.params.size(); ++a) {
    CHECK(serial.params[a].bias == parallel.params[a].bias);
    CHECK(serial.params[a].se_ratio == parallel.params[a].se_ratio);
  }
}

TEST_CASE("failed fits are counted and excluded") {
  const auto cfg = testutil::two_option_scenario(-1.0, 0.5, 77, 0.12, 0.88, 12.0);
  FitOptions strangled;
  strangled.max_iterations = 1;  // nothing converges in one step
  strangled.gradient_tolerance = 1e-12;
  CHECK_THROWS_WITH(run_mc_study(cfg, 5, strangled), Catch::Contains("every replicate"));

  // with a sane cap everything converges again
  const McReport rep = run_mc_study(cfg, 5, study_options());
  CHECK(rep.failures == 0);
}

TEST_CASE("bigger stations mean tighter estimates") {
  auto small = testutil::two_option_scenario(-1.0, 0.5, 5, 0.12, 0.88, 12.0);
  auto big = small;
  big.electorate_low = 2400;
  big.electorate_high = 3200;
  const McReport rs = run_mc_study(small, 40, study_options());
  const McReport rb = run_mc_study(big, 40, study_options());
  for (int a = 0; a < 2; ++a) {
    INFO(rs.params[a].name);
    CHECK(rb.params[a].mean_se < rs.params[a].mean_se);
  }
}

TEST_CASE("extra z thresholds are appended") {
  const auto cfg = testutil::plain_scenario(3);
  const McReport rep = run_mc_study(cfg, 5, study_options(), 0, {3.0});
  REQUIRE(rep.z_thresholds.size() == 5);
  CHECK(rep.z_thresholds.back() == 3.0);
  CHECK(rep.params[0].exceedance.size() == 5);
}
