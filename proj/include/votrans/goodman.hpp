// Goodman's ecological regression: ordinary least squares on the stacked
// expected-margin system, one regression per non-reference column. Unbiased
// under constant transition probabilities but blind to the covariance
// structure, and free to leave the [0,1] interval.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "votrans/model.hpp"

namespace votrans {

struct GoodmanResult {
  Eigen::MatrixXd transitions;       // r x c, rows sum to 1 by construction
  Eigen::MatrixXd se;                // r x c, NaN when residual dof <= 0
  std::vector<std::vector<bool>> out_of_range;  // estimate outside [0,1]
  double rss = 0.0;
};

inline GoodmanResult goodman_fit(std::span<const StationRecord> data, const Dimensions& dims) {
  dims.validate();
  const int r = dims.n_first;
  const int c = dims.n_second;
  const int m = c - 1;
  const int k = static_cast<int>(data.size());
  if (k < r)
    throw std::invalid_argument("goodman_fit: fewer stations than first-election options; "
                                "the linear system is unidentified");

  Eigen::MatrixXd N(k, r);
  Eigen::MatrixXd Y(k, m);
  for (int s = 0; s < k; ++s) {
    validate_station(data[s], dims);
    N.row(s) = data[s].first_votes.cast<double>().transpose();
    Y.row(s) = data[s].second_votes.head(m).cast<double>().transpose();
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(N);
  if (qr.rank() < r)
    throw std::invalid_argument("goodman_fit: rank-deficient design "
                                "(first-election count vectors are collinear across stations)");
  const Eigen::MatrixXd B = qr.solve(Y);  // r x m
  const Eigen::MatrixXd E = Y - N * B;

  GoodmanResult out;
  out.transitions.resize(r, c);
  out.transitions.leftCols(m) = B;
  out.transitions.col(m) = Eigen::VectorXd::Ones(r) - B.rowwise().sum();
  out.rss = E.squaredNorm();

  out.se = Eigen::MatrixXd::Constant(r, c, std::numeric_limits<double>::quiet_NaN());
  if (k > r) {
    // residual covariance across columns, same regressors in every equation
    const Eigen::MatrixXd sigma = E.transpose() * E / static_cast<double>(k - r);
    const Eigen::MatrixXd xtx_inv =
        (N.transpose() * N).ldlt().solve(Eigen::MatrixXd::Identity(r, r));
    for (int i = 0; i < r; ++i) {
      for (int j = 0; j < m; ++j) out.se(i, j) = std::sqrt(sigma(j, j) * xtx_inv(i, i));
      out.se(i, m) = std::sqrt(sigma.sum() * xtx_inv(i, i));  // complement via 1'sigma 1
    }
  }

  out.out_of_range.assign(r, std::vector<bool>(c, false));
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j)
      out.out_of_range[i][j] = out.transitions(i, j) < 0.0 || out.transitions(i, j) > 1.0;
  return out;
}

}  // namespace votrans
