// Core model types: dimensions, station data, the logit parameterization of
// transition probabilities and the sparse covariate design.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <set>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

namespace votrans {

inline double logit(double p) { return std::log(p / (1.0 - p)); }

inline double expit(double x) {
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Rows index first-election options, columns index second-election options.
// The last column is the reference category of the logit link.
struct Dimensions {
  int n_first = 0;
  int n_second = 0;
  int n_stations = 0;

  void validate() const {
    if (n_first < 1)
      throw std::invalid_argument("Dimensions: at least one first-election option required");
    if (n_second < 2)
      throw std::invalid_argument("Dimensions: at least two second-election options required");
    if (n_stations < 1)
      throw std::invalid_argument("Dimensions: at least one polling station required");
  }
};

// One polling station: counts for both elections plus covariate values.
struct StationRecord {
  std::string id;
  Eigen::VectorXi first_votes;   // length n_first
  Eigen::VectorXi second_votes;  // length n_second
  Eigen::VectorXd covariates;    // may be empty

  long long total_first() const { return first_votes.cast<long long>().sum(); }
  long long total_second() const { return second_votes.cast<long long>().sum(); }
  bool balanced() const { return total_first() == total_second(); }
};

inline void validate_station(const StationRecord& rec, const Dimensions& dims) {
  if (rec.first_votes.size() != dims.n_first || rec.second_votes.size() != dims.n_second)
    throw std::invalid_argument("station '" + rec.id + "': count vector length mismatch");
  if ((rec.first_votes.array() < 0).any() || (rec.second_votes.array() < 0).any())
    throw std::invalid_argument("station '" + rec.id + "': negative vote count");
}

// One free slope: covariate `covariate` acts on the logit of cell (row, col).
// `col` never names the reference column.
struct CovariateEffect {
  int row = 0;
  int col = 0;
  int covariate = 0;

  friend bool operator==(const CovariateEffect&, const CovariateEffect&) = default;
};

struct CovariateDesign {
  std::vector<CovariateEffect> effects;
  int n_covariates = 0;

  void validate(const Dimensions& dims) const {
    std::set<std::tuple<int, int, int>> seen;
    for (const auto& e : effects) {
      if (e.row < 0 || e.row >= dims.n_first)
        throw std::invalid_argument("covariate effect: row index out of range");
      if (e.col < 0 || e.col >= dims.n_second - 1)
        throw std::invalid_argument(
            "covariate effect: column index out of range (the reference column cannot carry an effect)");
      if (e.covariate < 0 || e.covariate >= n_covariates)
        throw std::invalid_argument("covariate effect: covariate index out of range");
      if (!seen.insert({e.row, e.col, e.covariate}).second)
        throw std::invalid_argument("covariate effect: duplicate (row, column, covariate) entry");
    }
  }
};

// Model layout: dimensions, covariate design, cluster size C and whether a
// single overdispersion parameter is shared across rows.
struct ModelSpec {
  Dimensions dims;
  CovariateDesign design;
  double cluster_size = 50.0;
  bool tied_overdispersion = false;

  int n_alpha() const { return dims.n_first * (dims.n_second - 1); }
  int n_beta() const { return static_cast<int>(design.effects.size()); }
  int n_tau() const { return tied_overdispersion ? 1 : dims.n_first; }
  int n_mean_params() const { return n_alpha() + n_beta(); }
  int n_params() const { return n_mean_params() + n_tau(); }

  // The stacked mean system offers n_stations * (n_second - 1) observations.
  bool identified() const {
    return n_mean_params() <= dims.n_stations * (dims.n_second - 1);
  }

  void validate() const {
    dims.validate();
    design.validate(dims);
    if (!(cluster_size > 0.0))
      throw std::invalid_argument("ModelSpec: cluster size must be positive");
  }
};

// Free parameters on the logit scale. tau has one entry per row, or a single
// entry when overdispersion is tied across rows.
struct ParameterVector {
  Eigen::MatrixXd alpha;  // n_first x (n_second - 1)
  Eigen::VectorXd beta;   // one entry per design effect
  Eigen::VectorXd tau;

  double theta(int row) const {
    return expit(tau(tau.size() == 1 ? 0 : row));
  }
};

inline Eigen::VectorXd pack(const ParameterVector& p) {
  Eigen::VectorXd flat(p.alpha.size() + p.beta.size() + p.tau.size());
  int at = 0;
  for (int i = 0; i < p.alpha.rows(); ++i)
    for (int j = 0; j < p.alpha.cols(); ++j) flat(at++) = p.alpha(i, j);
  for (int b = 0; b < p.beta.size(); ++b) flat(at++) = p.beta(b);
  for (int t = 0; t < p.tau.size(); ++t) flat(at++) = p.tau(t);
  return flat;
}

inline ParameterVector unpack(const ModelSpec& spec, const Eigen::VectorXd& flat) {
  if (flat.size() != spec.n_params())
    throw std::invalid_argument("unpack: flat parameter vector has wrong length");
  ParameterVector p;
  p.alpha.resize(spec.dims.n_first, spec.dims.n_second - 1);
  p.beta.resize(spec.n_beta());
  p.tau.resize(spec.n_tau());
  int at = 0;
  for (int i = 0; i < p.alpha.rows(); ++i)
    for (int j = 0; j < p.alpha.cols(); ++j) p.alpha(i, j) = flat(at++);
  for (int b = 0; b < p.beta.size(); ++b) p.beta(b) = flat(at++);
  for (int t = 0; t < p.tau.size(); ++t) p.tau(t) = flat(at++);
  return p;
}

// Display names in packing order: alpha_11 ... beta_11 ... tau.
inline std::vector<std::string> parameter_names(const ModelSpec& spec,
                                                const std::vector<std::string>& covariate_names = {}) {
  std::vector<std::string> names;
  names.reserve(spec.n_params());
  for (int i = 0; i < spec.dims.n_first; ++i)
    for (int j = 0; j < spec.dims.n_second - 1; ++j)
      names.push_back("alpha_" + std::to_string(i + 1) + std::to_string(j + 1));
  for (const auto& e : spec.design.effects) {
    std::string name = "beta_" + std::to_string(e.row + 1) + std::to_string(e.col + 1);
    if (spec.design.n_covariates > 1) {
      name += "_";
      name += (e.covariate < static_cast<int>(covariate_names.size()))
                  ? covariate_names[e.covariate]
                  : "v" + std::to_string(e.covariate + 1);
    }
    names.push_back(name);
  }
  if (spec.tied_overdispersion) {
    names.push_back("tau");
  } else {
    for (int i = 0; i < spec.dims.n_first; ++i) names.push_back("tau_" + std::to_string(i + 1));
  }
  return names;
}

// Inverse multinomial-logit link with the last category as reference:
// p_j = exp(l_j) / (1 + sum_m exp(l_m)), p_c = 1 - sum_{j<c} p_j.
// Exponentials are guarded by max-subtraction.
inline Eigen::VectorXd logits_to_probs(const Eigen::VectorXd& lambda) {
  if (!lambda.allFinite())
    throw std::invalid_argument("logits_to_probs: non-finite logit");
  const int c = static_cast<int>(lambda.size()) + 1;
  const double shift = std::max(0.0, lambda.maxCoeff());
  Eigen::VectorXd p(c);
  p(c - 1) = std::exp(-shift);  // reference category, logit 0
  double total = p(c - 1);
  for (int j = 0; j + 1 < c; ++j) {
    p(j) = std::exp(lambda(j) - shift);
    total += p(j);
  }
  // dividing every term by the common total keeps the sum at 1 to machine
  // precision without cancelling the small reference entry
  p /= total;
  return p;
}

inline Eigen::VectorXd probs_to_logits(const Eigen::VectorXd& p) {
  const int c = static_cast<int>(p.size());
  if (c < 2) throw std::invalid_argument("probs_to_logits: need at least two categories");
  for (int j = 0; j < c; ++j)
    if (!(p(j) > 0.0 && p(j) < 1.0))
      throw std::invalid_argument("probs_to_logits: entry " + std::to_string(j + 1) +
                                  " is outside the open interval (0,1)");
  if (std::abs(p.sum() - 1.0) > 1e-8)
    throw std::invalid_argument("probs_to_logits: probabilities do not sum to 1");
  Eigen::VectorXd lambda(c - 1);
  const double log_ref = std::log(p(c - 1));
  for (int j = 0; j + 1 < c; ++j) lambda(j) = std::log(p(j)) - log_ref;
  return lambda;
}

// Per-row logits at covariate value v: alpha_ij plus the design-masked slopes.
inline Eigen::MatrixXd station_logits(const ModelSpec& spec, const ParameterVector& params,
                                      const Eigen::VectorXd& v) {
  if (v.size() < spec.design.n_covariates)
    throw std::invalid_argument("station_logits: covariate vector shorter than the design requires");
  Eigen::MatrixXd lambda = params.alpha;
  for (std::size_t e = 0; e < spec.design.effects.size(); ++e) {
    const auto& eff = spec.design.effects[e];
    lambda(eff.row, eff.col) += params.beta(static_cast<int>(e)) * v(eff.covariate);
  }
  return lambda;
}

// Transition probability matrix of one station, rows on the simplex.
inline Eigen::MatrixXd station_probs(const ModelSpec& spec, const ParameterVector& params,
                                     const Eigen::VectorXd& v) {
  const Eigen::MatrixXd lambda = station_logits(spec, params, v);
  Eigen::MatrixXd probs(spec.dims.n_first, spec.dims.n_second);
  for (int i = 0; i < lambda.rows(); ++i)
    probs.row(i) = logits_to_probs(lambda.row(i).transpose()).transpose();
  return probs;
}

// Centered logit of a share, the covariate transform used for vote shares.
// Shares are clamped away from 0 and 1 before taking logits.
inline std::vector<double> centered_logit_shares(const std::vector<double>& shares,
                                                 double epsilon = 1e-4) {
  std::vector<double> v(shares.size());
  double mean = 0.0;
  for (std::size_t s = 0; s < shares.size(); ++s) {
    const double clamped = std::min(1.0 - epsilon, std::max(epsilon, shares[s]));
    v[s] = logit(clamped);
    mean += v[s];
  }
  if (!shares.empty()) mean /= static_cast<double>(shares.size());
  for (double& x : v) x -= mean;
  return v;
}

}  // namespace votrans
