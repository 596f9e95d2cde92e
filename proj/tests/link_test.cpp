#include <catch2/catch.hpp>

#include "votrans/model.hpp"
#include "votrans/rng.hpp"

using namespace votrans;

TEST_CASE("logits_to_probs basic values") {
  Eigen::VectorXd zero(2);
  zero << 0.0, 0.0;
  const Eigen::VectorXd p = logits_to_probs(zero);
  REQUIRE(p.size() == 3);
  CHECK(p(0) == Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(p(1) == Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(p(2) == Approx(1.0 / 3.0).epsilon(1e-12));

  Eigen::VectorXd l1(1);
  l1 << std::log(0.7 / 0.3);
  const Eigen::VectorXd p1 = logits_to_probs(l1);
  CHECK(p1(0) == Approx(0.7).epsilon(1e-12));
  CHECK(p1(1) == Approx(0.3).epsilon(1e-12));

  Eigen::VectorXd l2(1);
  l2 << std::log(0.2 / 0.8);
  const Eigen::VectorXd p2 = logits_to_probs(l2);
  CHECK(p2(0) == Approx(0.2).epsilon(1e-12));
  CHECK(p2(1) == Approx(0.8).epsilon(1e-12));
}

TEST_CASE("logits_to_probs guards") {
  Eigen::VectorXd big(2);
  big << 600.0, 300.0;  // would overflow exp without the shift
  const Eigen::VectorXd p = logits_to_probs(big);
  CHECK(p(0) == Approx(1.0).margin(1e-12));
  CHECK(std::abs(p.sum() - 1.0) < 1e-12);

  Eigen::VectorXd bad(2);
  bad << 1.0, std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(logits_to_probs(bad), std::invalid_argument);
}

TEST_CASE("probs_to_logits inverts the link") {
  Eigen::VectorXd p(2);
  p << 0.7, 0.3;
  const Eigen::VectorXd l = probs_to_logits(p);
  CHECK(l(0) == Approx(0.8473).margin(5e-5));

  Eigen::VectorXd uniform(3);
  uniform << 1.0 / 3, 1.0 / 3, 1.0 / 3;
  CHECK(probs_to_logits(uniform).cwiseAbs().maxCoeff() < 1e-14);

  Eigen::VectorXd boundary(2);
  boundary << 0.0, 1.0;
  CHECK_THROWS_WITH(probs_to_logits(boundary), Catch::Contains("entry 1"));
}

TEST_CASE("link round trip on random interior points") {
  Rng rng(17);
  for (int t = 0; t < 200; ++t) {
    const int c = 2 + static_cast<int>(rng.uniform_int(0, 3));
    Eigen::VectorXd lambda(c - 1);
    for (int j = 0; j < c - 1; ++j) lambda(j) = rng.uniform(-30.0, 30.0);
    const Eigen::VectorXd p = logits_to_probs(lambda);
    CHECK((p.array() > 0.0).all());
    CHECK(std::abs(p.sum() - 1.0) < 1e-12);
    const Eigen::VectorXd back = probs_to_logits(p);
    for (int j = 0; j < c - 1; ++j) CHECK(back(j) == Approx(lambda(j)).margin(1e-10));
  }
}

TEST_CASE("station_probs applies the sparse covariate design") {
  ModelSpec spec;
  spec.dims = Dimensions{2, 2, 1};
  ParameterVector params;
  params.alpha.resize(2, 1);
  params.alpha << std::log(0.7 / 0.3), std::log(0.2 / 0.8);
  params.beta.resize(0);
  params.tau = Eigen::VectorXd::Constant(2, logit(0.1));

  SECTION("empty design ignores the covariate value") {
    Eigen::VectorXd v(1);
    v << 2.5;
    const Eigen::MatrixXd probs = station_probs(spec, params, v);
    CHECK(probs(0, 0) == Approx(0.7).epsilon(1e-12));
    CHECK(probs(1, 0) == Approx(0.2).epsilon(1e-12));
  }

  SECTION("slope at covariate zero equals the baseline") {
    spec.design.effects = {{0, 0, 0}};
    spec.design.n_covariates = 1;
    params.beta.resize(1);
    params.beta << 1.0;
    Eigen::VectorXd v = Eigen::VectorXd::Zero(1);
    const Eigen::MatrixXd probs = station_probs(spec, params, v);
    CHECK(probs(0, 0) == Approx(0.7).epsilon(1e-12));
    CHECK(probs(1, 0) == Approx(0.2).epsilon(1e-12));
  }

  SECTION("slopes shift the logits cell by cell") {
    spec.design.effects = {{0, 0, 0}, {1, 0, 0}};
    spec.design.n_covariates = 1;
    params.beta.resize(2);
    params.beta << -1.0, 0.5;
    Eigen::VectorXd v(1);
    v << 1.0;
    const Eigen::MatrixXd probs = station_probs(spec, params, v);
    Eigen::VectorXd l1(1), l2(1);
    l1 << std::log(7.0 / 3.0) - 1.0;
    l2 << std::log(2.0 / 8.0) + 0.5;
    CHECK(probs(0, 0) == Approx(logits_to_probs(l1)(0)).epsilon(1e-12));
    CHECK(probs(1, 0) == Approx(logits_to_probs(l2)(0)).epsilon(1e-12));
  }
}

TEST_CASE("parameter packing is a bijection") {
  ModelSpec spec;
  spec.dims = Dimensions{3, 3, 10};
  spec.design.effects = {{0, 0, 0}, {2, 1, 1}};
  spec.design.n_covariates = 2;
  Rng rng(5);
  ParameterVector p;
  p.alpha.resize(3, 2);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 2; ++j) p.alpha(i, j) = rng.normal();
  p.beta.resize(2);
  p.beta << rng.normal(), rng.normal();
  p.tau.resize(3);
  p.tau << rng.normal(), rng.normal(), rng.normal();

  const Eigen::VectorXd flat = pack(p);
  REQUIRE(flat.size() == spec.n_params());
  const ParameterVector back = unpack(spec, flat);
  CHECK((back.alpha - p.alpha).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.beta - p.beta).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.tau - p.tau).cwiseAbs().maxCoeff() == 0.0);
  CHECK((pack(back) - flat).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("theta stays inside the unit interval across the box") {
  ParameterVector p;
  p.tau = Eigen::VectorXd::Constant(1, 15.0);  // the box keeps |tau| <= 15
  CHECK(p.theta(0) < 1.0);
  CHECK(p.theta(0) > 0.0);
  p.tau(0) = -15.0;
  CHECK(p.theta(0) > 0.0);
  CHECK(p.theta(0) < 1.0);
}

TEST_CASE("dimension and design validation") {
  CHECK_THROWS_AS((Dimensions{0, 2, 1}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((Dimensions{1, 1, 1}.validate()), std::invalid_argument);

  Dimensions dims{2, 3, 5};
  CovariateDesign design;
  design.n_covariates = 1;
  design.effects = {{0, 2, 0}};  // column 2 is the reference for c = 3
  CHECK_THROWS_WITH(design.validate(dims), Catch::Contains("reference"));
  design.effects = {{0, 0, 0}, {0, 0, 0}};
  CHECK_THROWS_WITH(design.validate(dims), Catch::Contains("duplicate"));

  ModelSpec spec;
  spec.dims = Dimensions{4, 2, 3};  // 4 mean parameters, 3 stacked observations
  CHECK_FALSE(spec.identified());
  spec.dims.n_stations = 4;
  CHECK(spec.identified());
}

TEST_CASE("parameter names follow the packing order") {
  ModelSpec spec;
  spec.dims = Dimensions{2, 2, 10};
  spec.design.effects = {{0, 0, 0}, {1, 0, 0}};
  spec.design.n_covariates = 1;
  spec.tied_overdispersion = true;
  const auto names = parameter_names(spec);
  REQUIRE(names.size() == 5);
  CHECK(names[0] == "alpha_11");
  CHECK(names[1] == "alpha_21");
  CHECK(names[2] == "beta_11");
  CHECK(names[3] == "beta_21");
  CHECK(names[4] == "tau");
}

TEST_CASE("centered logit shares") {
  const auto constant = centered_logit_shares({0.4, 0.4, 0.4});
  for (double v : constant) CHECK(v == Approx(0.0).margin(1e-14));

  const auto pair = centered_logit_shares({0.7, 0.3});
  CHECK(pair[0] == Approx(0.8473).margin(5e-5));
  CHECK(pair[1] == Approx(-0.8473).margin(5e-5));

  const auto clamped = centered_logit_shares({0.0, 0.5, 1.0});
  for (double v : clamped) CHECK(std::isfinite(v));
}
