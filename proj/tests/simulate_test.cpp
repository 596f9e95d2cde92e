#include <catch2/catch.hpp>

#include "helpers.hpp"
#include "votrans/moments.hpp"
#include "votrans/simulate.hpp"

using namespace votrans;

TEST_CASE("dirichlet concentrations from mean and precision") {
  Eigen::VectorXd mean(2);
  mean << 0.5, 0.5;
  CHECK(dirichlet_from_mean_precision(mean, 0.5).sum() == Approx(1.0).epsilon(1e-12));

  mean << 0.7, 0.3;
  const Eigen::VectorXd conc = dirichlet_from_mean_precision(mean, 0.1);
  CHECK(conc(0) == Approx(6.3).epsilon(1e-12));
  CHECK(conc(1) == Approx(2.7).epsilon(1e-12));

  CHECK_THROWS_AS(dirichlet_from_mean_precision(mean, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(dirichlet_from_mean_precision(mean, 1.0), std::invalid_argument);
}

TEST_CASE("dirichlet draws have the stated covariance") {
  Eigen::VectorXd mean(2);
  mean << 0.7, 0.3;
  const double theta = 0.1;
  const Eigen::VectorXd conc = dirichlet_from_mean_precision(mean, theta);
  Rng rng(101);
  const int reps = 100000;
  double sum = 0.0, sumsq = 0.0;
  for (int t = 0; t < reps; ++t) {
    const double x = rng.dirichlet(conc)(0);
    sum += x;
    sumsq += x * x;
  }
  const double m = sum / reps;
  const double var = sumsq / reps - m * m;
  const double target = theta * 0.7 * 0.3;
  // MC s.e. for the variance of a bounded variable, rough upper bound
  const double mc_se = target * std::sqrt(3.0 / reps) * 3.0;
  CHECK(std::abs(m - 0.7) < 3.0 * std::sqrt(target / reps));
  CHECK(std::abs(var - target) < 3.0 * mc_se);
}

TEST_CASE("generated datasets conserve the electorate") {
  for (std::uint64_t seed : {1ull, 9ull, 77ull}) {
    const auto cfg = testutil::two_option_scenario(-1.0, 0.5, seed);
    const auto sim = generate_dataset(cfg);
    REQUIRE(sim.records.size() == 200);
    for (std::size_t s = 0; s < sim.records.size(); ++s) {
      const auto& rec = sim.records[s];
      CHECK(rec.total_first() == rec.total_second());
      CHECK(rec.total_first() >= 600);
      CHECK(rec.total_first() <= 800);
      // latent cells are consistent with both margins
      const Eigen::MatrixXi& cells = sim.latent_cells[s];
      for (int i = 0; i < 2; ++i) CHECK(cells.row(i).sum() == rec.first_votes(i));
      for (int j = 0; j < 2; ++j) CHECK(cells.col(j).sum() == rec.second_votes(j));
    }
  }
}

TEST_CASE("identical configurations generate identical data") {
  const auto cfg = testutil::two_option_scenario(1.0, 0.5, 31415);
  const auto a = generate_dataset(cfg);
  const auto b = generate_dataset(cfg);
  for (std::size_t s = 0; s < a.records.size(); ++s) {
    CHECK(a.records[s].first_votes == b.records[s].first_votes);
    CHECK(a.records[s].second_votes == b.records[s].second_votes);
    CHECK(a.records[s].covariates == b.records[s].covariates);
  }
}

TEST_CASE("covariates are centered and share-logit covariates match the builder") {
  const auto cfg = testutil::two_option_scenario(0.0, 0.0, 8);
  const auto sim = generate_dataset(cfg);
  double mean = 0.0;
  for (const auto& rec : sim.records) mean += rec.covariates(0);
  CHECK(mean / sim.records.size() == Approx(0.0).margin(1e-10));
  // v_s equals the centered logit of the option-1 share
  std::vector<double> shares;
  for (const auto& rec : sim.records)
    shares.push_back(static_cast<double>(rec.first_votes(0)) / rec.total_first());
  const auto direct = centered_logit_shares(shares, 1e-4);
  for (std::size_t s = 0; s < shares.size(); ++s)
    CHECK(sim.records[s].covariates(0) == Approx(direct[s]).margin(1e-12));
}

TEST_CASE("theta = 0 generation collapses to plain multinomial dispersion") {
  Eigen::VectorXd pi(2);
  pi << 0.7, 0.3;
  const auto oracle = variance_oracle(pi, 0.0, 50.0, 500, 20000, 5);
  CHECK(std::abs(oracle.covariance(0, 0) - 500.0 * 0.21) <= 3.0 * oracle.mc_se(0, 0));
}

TEST_CASE("a single cluster reproduces the compound-multinomial variance") {
  Eigen::VectorXd pi(2);
  pi << 0.7, 0.3;
  const long long n = 300;
  const auto oracle = variance_oracle(pi, 0.1, static_cast<double>(n), n, 30000, 6);
  const Eigen::MatrixXd bp = brown_payne_variance(pi, 0.1, n);
  CHECK(std::abs(oracle.covariance(0, 0) - bp(0, 0)) <= 3.0 * oracle.mc_se(0, 0));
}

TEST_CASE("concordant confounding steepens the aggregate regression") {
  int steeper = 0;
  const int seeds = 20;
  for (std::uint64_t seed = 1; seed <= seeds; ++seed) {
    const auto none = generate_dataset(testutil::two_option_scenario(0.0, 0.0, seed));
    const auto conc = generate_dataset(testutil::two_option_scenario(1.0, 0.5, seed));
    if (testutil::share_slope(conc.records) > testutil::share_slope(none.records)) ++steeper;
  }
  CHECK(steeper >= 19);
}

TEST_CASE("scenario validation rejects broken configurations") {
  auto cfg = testutil::two_option_scenario(0.0, 0.0, 1);
  cfg.electorate_low = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

  cfg = testutil::two_option_scenario(0.0, 0.0, 1);
  cfg.theta_true(1) = 0.2;  // tied overdispersion needs equal entries
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

  cfg = testutil::two_option_scenario(0.0, 0.0, 1);
  cfg.first_prob_bounds = {{0.7, 0.3}};
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

  cfg = testutil::two_option_scenario(0.0, 0.0, 1);
  cfg.theta_true << 0.0, 0.0;
  CHECK_THROWS_AS(cfg.true_params(), std::invalid_argument);

  CHECK_THROWS_AS(variance_oracle(Eigen::VectorXd::Constant(2, 0.5), 0.1, 50.0, 100, 100, 1),
                  std::invalid_argument);
}
