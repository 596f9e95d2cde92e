// Shared fixtures for the test suites: the two-option simulation scenarios,
// a finite-difference gradient, an exhaustive extended-hypergeometric
// expectation and a share-vs-share OLS slope.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <vector>

#include "votrans/model.hpp"
#include "votrans/simulate.hpp"

namespace testutil {

using votrans::ScenarioConfig;
using votrans::CovariateSource;
using votrans::StationRecord;

// two options in both elections, covariate = centered logit of the
// first-election share of option 1
inline ScenarioConfig two_option_scenario(double beta_11, double beta_21, std::uint64_t seed,
                                          double bound_low = 0.3, double bound_high = 0.7,
                                          double cluster_size = 50.0, double theta = 0.1) {
  ScenarioConfig cfg;
  cfg.stations = 200;
  cfg.electorate_low = 600;
  cfg.electorate_high = 800;
  cfg.first_prob_bounds = {{bound_low, bound_high}};
  cfg.alpha_true.resize(2, 1);
  cfg.alpha_true << std::log(0.7 / 0.3), std::log(0.2 / 0.8);
  cfg.design.effects = {{0, 0, 0}, {1, 0, 0}};
  cfg.design.n_covariates = 1;
  cfg.beta_true.resize(2);
  cfg.beta_true << beta_11, beta_21;
  cfg.theta_true.resize(2);
  cfg.theta_true << theta, theta;
  cfg.tied_overdispersion = true;
  cfg.cluster_size = cluster_size;
  cfg.covariates = {CovariateSource{CovariateSource::Kind::CenteredLogitShare, 0, 1.0, 1e-4}};
  cfg.seed = seed;
  return cfg;
}

// no covariates at all; useful for well-conditioned recovery checks
inline ScenarioConfig plain_scenario(std::uint64_t seed, double theta = 0.1,
                                     double cluster_size = 50.0) {
  ScenarioConfig cfg = two_option_scenario(0.0, 0.0, seed);
  cfg.design.effects.clear();
  cfg.design.n_covariates = 0;
  cfg.covariates.clear();
  cfg.beta_true.resize(0);
  cfg.theta_true << theta, theta;
  cfg.cluster_size = cluster_size;
  return cfg;
}

inline Eigen::VectorXd finite_difference(const std::function<double(const Eigen::VectorXd&)>& f,
                                         const Eigen::VectorXd& x, double step = 1e-5) {
  Eigen::VectorXd g(x.size());
  for (int a = 0; a < x.size(); ++a) {
    Eigen::VectorXd hi = x, lo = x;
    hi(a) += step;
    lo(a) -= step;
    g(a) = (f(hi) - f(lo)) / (2.0 * step);
  }
  return g;
}

// Exact conditional expectation of the latent table given both margins under
// product-multinomial rows, by enumeration. Only viable for tiny totals.
inline Eigen::MatrixXd extended_hypergeometric_expectation(const Eigen::MatrixXd& probs,
                                                           const Eigen::VectorXi& row_margin,
                                                           const Eigen::VectorXi& col_margin) {
  const int r = static_cast<int>(probs.rows());
  const int c = static_cast<int>(probs.cols());
  Eigen::MatrixXd log_probs(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) log_probs(i, j) = std::log(probs(i, j));

  long double total_weight = 0.0L;
  Eigen::MatrixXd accum = Eigen::MatrixXd::Zero(r, c);
  Eigen::MatrixXi table = Eigen::MatrixXi::Zero(r, c);
  Eigen::VectorXi col_left = col_margin;

  // recursive enumeration over rows, each row a composition of its margin
  std::function<void(int)> walk_rows = [&](int i) {
    if (i == r - 1) {
      // last row forced by the remaining column margins
      if (col_left.sum() != row_margin(i)) return;
      for (int j = 0; j < c; ++j) table(i, j) = col_left(j);
      long double log_w = 0.0L;
      for (int a = 0; a < r; ++a) {
        log_w += std::lgamma(static_cast<double>(row_margin(a)) + 1.0);
        for (int j = 0; j < c; ++j)
          log_w += table(a, j) * log_probs(a, j) -
                   std::lgamma(static_cast<double>(table(a, j)) + 1.0);
      }
      const long double w = std::exp(static_cast<long double>(log_w));
      total_weight += w;
      for (int a = 0; a < r; ++a)
        for (int j = 0; j < c; ++j) accum(a, j) += static_cast<double>(w) * table(a, j);
      return;
    }
    std::function<void(int, int)> walk_cells = [&](int j, int left) {
      if (j == c - 1) {
        if (left > col_left(j)) return;
        table(i, j) = left;
        col_left(j) -= left;
        walk_rows(i + 1);
        col_left(j) += left;
        return;
      }
      const int cap = std::min(left, col_left(j));
      for (int v = 0; v <= cap; ++v) {
        table(i, j) = v;
        col_left(j) -= v;
        walk_cells(j + 1, left - v);
        col_left(j) += v;
      }
    };
    walk_cells(0, row_margin(i));
  };
  walk_rows(0);
  if (total_weight <= 0.0L) return Eigen::MatrixXd::Zero(r, c);
  return accum / static_cast<double>(total_weight);
}

// slope of second-election option-1 share on first-election option-1 share
inline double share_slope(const std::vector<StationRecord>& records) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double k = static_cast<double>(records.size());
  for (const auto& rec : records) {
    const double x = static_cast<double>(rec.first_votes(0)) / rec.total_first();
    const double y = static_cast<double>(rec.second_votes(0)) / rec.total_second();
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (sxy - sx * sy / k) / (sxx - sx * sx / k);
}

}  // namespace testutil
