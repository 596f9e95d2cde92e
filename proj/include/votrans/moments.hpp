// First and second moments of the aggregated second-election counts under the
// cluster overdispersion model, and the compound-multinomial variance kept
// only for comparison.
#pragma once

#include <Eigen/Dense>

#include <stdexcept>

#include "votrans/model.hpp"

namespace votrans {

// Probabilities entering variance assembly are clamped to this floor so the
// covariance stays invertible; events are counted and surfaced in fit output.
inline constexpr double kVarianceProbFloor = 1e-12;

struct ClampCounter {
  long long count = 0;
};

// Expected counts (reference column dropped) and their covariance.
struct StationMoments {
  Eigen::VectorXd mu;  // length c-1
  Eigen::MatrixXd V;   // (c-1) x (c-1), symmetric
};

namespace detail {

// diag(p) - p p' restricted to the first c-1 categories, with entries clamped
// into [floor, 1-floor].
inline Eigen::MatrixXd multinomial_kernel(const Eigen::VectorXd& pi, ClampCounter* clamps) {
  const int m = static_cast<int>(pi.size()) - 1;
  Eigen::VectorXd p(m);
  for (int j = 0; j < m; ++j) {
    double q = pi(j);
    if (q < kVarianceProbFloor || q > 1.0 - kVarianceProbFloor) {
      q = std::min(1.0 - kVarianceProbFloor, std::max(kVarianceProbFloor, q));
      if (clamps) ++clamps->count;
    }
    p(j) = q;
  }
  Eigen::MatrixXd K = -p * p.transpose();
  K.diagonal() += p;
  return K;
}

// n [1 + theta C (n-1)/n] written without the n in the denominator.
inline double cluster_variance_factor(long long n, double theta, double cluster_size) {
  if (n <= 0) return 0.0;
  return static_cast<double>(n) + theta * cluster_size * static_cast<double>(n - 1);
}

}  // namespace detail

// Covariance of one row's aggregated counts (reference column dropped):
//   n [1 + theta C (n-1)/n] [diag(p) - p p'].
// theta = 0 is the no-overdispersion limit; n = 0 gives the zero matrix.
inline Eigen::MatrixXd row_variance(const Eigen::VectorXd& pi, double theta, double cluster_size,
                                    long long n, ClampCounter* clamps = nullptr) {
  if (!(theta >= 0.0 && theta < 1.0))
    throw std::invalid_argument("row_variance: theta must lie in [0, 1)");
  if (!(cluster_size > 0.0))
    throw std::invalid_argument("row_variance: cluster size must be positive");
  if (n < 0) throw std::invalid_argument("row_variance: negative count");
  const int m = static_cast<int>(pi.size()) - 1;
  if (n == 0) return Eigen::MatrixXd::Zero(m, m);
  return detail::cluster_variance_factor(n, theta, cluster_size) *
         detail::multinomial_kernel(pi, clamps);
}

// Compound-multinomial (single draw per station) variance, quadratic in n:
//   n [1 + theta (n-1)] [diag(p) - p p'].
// Comparison formula only; never used when fitting.
inline Eigen::MatrixXd brown_payne_variance(const Eigen::VectorXd& pi, double theta, long long n,
                                            ClampCounter* clamps = nullptr) {
  if (!(theta >= 0.0 && theta < 1.0))
    throw std::invalid_argument("brown_payne_variance: theta must lie in [0, 1)");
  if (n < 0) throw std::invalid_argument("brown_payne_variance: negative count");
  const int m = static_cast<int>(pi.size()) - 1;
  if (n == 0) return Eigen::MatrixXd::Zero(m, m);
  const double factor = static_cast<double>(n) * (1.0 + theta * static_cast<double>(n - 1));
  return factor * detail::multinomial_kernel(pi, clamps);
}

// Rows are independent given the station, so means and covariances add.
inline StationMoments station_moments(const ModelSpec& spec, const ParameterVector& params,
                                      const StationRecord& rec, ClampCounter* clamps = nullptr) {
  const int m = spec.dims.n_second - 1;
  const Eigen::MatrixXd probs = station_probs(spec, params, rec.covariates);
  StationMoments out;
  out.mu = Eigen::VectorXd::Zero(m);
  out.V = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < spec.dims.n_first; ++i) {
    const long long n = rec.first_votes(i);
    if (n == 0) continue;
    const Eigen::VectorXd pi = probs.row(i).transpose();
    out.mu += static_cast<double>(n) * pi.head(m);
    out.V += row_variance(pi, params.theta(i), spec.cluster_size, n, clamps);
  }
  return out;
}

}  // namespace votrans
