// Iterative proportional fitting of one station's expected cell counts,
// starting from the model seed n_i * pi_ij and matching both observed
// margins. Approximates the conditional (extended hypergeometric)
// expectation of the latent table.
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace votrans {

inline Eigen::MatrixXd expected_cells_ipf(const Eigen::MatrixXd& probs,
                                          const Eigen::VectorXi& row_margin,
                                          const Eigen::VectorXi& col_margin, double tol = 1e-8,
                                          int max_iter = 1000) {
  const int r = static_cast<int>(probs.rows());
  const int c = static_cast<int>(probs.cols());
  if (row_margin.size() != r || col_margin.size() != c)
    throw std::invalid_argument("expected_cells_ipf: margin length mismatch");
  if ((row_margin.array() < 0).any() || (col_margin.array() < 0).any())
    throw std::invalid_argument("expected_cells_ipf: negative margin");
  if (row_margin.cast<long long>().sum() != col_margin.cast<long long>().sum())
    throw std::invalid_argument("expected_cells_ipf: margins have different totals");
  if ((probs.array() < 0.0).any())
    throw std::invalid_argument("expected_cells_ipf: negative seed probability");

  Eigen::MatrixXd cells = Eigen::MatrixXd::Zero(r, c);
  for (int i = 0; i < r; ++i)
    if (row_margin(i) > 0) cells.row(i) = static_cast<double>(row_margin(i)) * probs.row(i);
  // rows/columns with a zero margin stay zero and are excluded from scaling
  for (int j = 0; j < c; ++j)
    if (col_margin(j) == 0) cells.col(j).setZero();

  // structural feasibility: a positive margin must see some seed mass
  for (int i = 0; i < r; ++i)
    if (row_margin(i) > 0 && cells.row(i).sum() <= 0.0)
      throw std::invalid_argument("expected_cells_ipf: row " + std::to_string(i + 1) +
                                  " has a positive margin but an all-zero seed row");
  for (int j = 0; j < c; ++j)
    if (col_margin(j) > 0 && cells.col(j).sum() <= 0.0)
      throw std::invalid_argument("expected_cells_ipf: column " + std::to_string(j + 1) +
                                  " has a positive margin but an all-zero seed column");

  auto discrepancy = [&]() {
    double d = 0.0;
    for (int i = 0; i < r; ++i)
      d = std::max(d, std::abs(cells.row(i).sum() - static_cast<double>(row_margin(i))));
    for (int j = 0; j < c; ++j)
      d = std::max(d, std::abs(cells.col(j).sum() - static_cast<double>(col_margin(j))));
    return d;
  };

  if (discrepancy() < tol) return cells;  // seed already margin-consistent

  for (int it = 0; it < max_iter; ++it) {
    for (int i = 0; i < r; ++i) {
      if (row_margin(i) == 0) continue;
      const double rs = cells.row(i).sum();
      if (rs <= 0.0)
        throw std::runtime_error("expected_cells_ipf: row " + std::to_string(i + 1) +
                                 " lost all mass during scaling");
      cells.row(i) *= static_cast<double>(row_margin(i)) / rs;
    }
    for (int j = 0; j < c; ++j) {
      if (col_margin(j) == 0) continue;
      const double cs = cells.col(j).sum();
      if (cs <= 0.0)
        throw std::runtime_error("expected_cells_ipf: column " + std::to_string(j + 1) +
                                 " lost all mass during scaling");
      cells.col(j) *= static_cast<double>(col_margin(j)) / cs;
    }
    if (discrepancy() < tol) return cells;
  }
  throw std::runtime_error("expected_cells_ipf: margins not matched within tolerance after " +
                           std::to_string(max_iter) + " iterations");
}

}  // namespace votrans
