// Generative mechanism for artificial electoral data: uniform electorate and
// first-election probabilities, voters split into clusters of average size C,
// one Dirichlet transition-probability draw per cluster, multinomial votes
// within clusters. Also the brute-force covariance oracle built on the same
// mechanism.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "votrans/model.hpp"
#include "votrans/rng.hpp"

namespace votrans {

// Dirichlet concentrations with mean `mean` and covariance
// theta [diag(mean) - mean mean']: a_j = mean_j (1 - theta) / theta.
inline Eigen::VectorXd dirichlet_from_mean_precision(const Eigen::VectorXd& mean, double theta) {
  if (!(theta > 0.0 && theta < 1.0))
    throw std::invalid_argument("dirichlet_from_mean_precision: theta must lie in (0, 1)");
  for (int j = 0; j < mean.size(); ++j)
    if (!(mean(j) > 0.0))
      throw std::invalid_argument("dirichlet_from_mean_precision: mean entries must be positive");
  return mean * ((1.0 - theta) / theta);
}

// How one generated covariate is produced.
struct CovariateSource {
  enum class Kind { CenteredLogitShare, Normal };
  Kind kind = Kind::CenteredLogitShare;
  int option = 0;       // first-election option whose share is used
  double sd = 1.0;      // for Normal
  double epsilon = 1e-4;
};

struct ScenarioConfig {
  int stations = 200;
  long long electorate_low = 600;
  long long electorate_high = 800;
  // per-option uniform bounds for the first r-1 options; the last option
  // takes the complement
  std::vector<std::pair<double, double>> first_prob_bounds;
  Eigen::MatrixXd alpha_true;  // r x (c-1)
  CovariateDesign design;
  Eigen::VectorXd beta_true;
  Eigen::VectorXd theta_true;  // length r; 0 means the no-overdispersion limit
  bool tied_overdispersion = true;
  double cluster_size = 50.0;
  std::vector<CovariateSource> covariates;
  std::uint64_t seed = 1;

  int n_first() const { return static_cast<int>(alpha_true.rows()); }
  int n_second() const { return static_cast<int>(alpha_true.cols()) + 1; }

  void validate() const {
    if (stations < 1) throw std::invalid_argument("scenario: need at least one station");
    if (electorate_low < 1 || electorate_low > electorate_high)
      throw std::invalid_argument("scenario: electorate bounds must satisfy 1 <= low <= high");
    const int r = n_first();
    if (alpha_true.cols() < 1) throw std::invalid_argument("scenario: alpha needs c >= 2");
    if (static_cast<int>(first_prob_bounds.size()) != r - 1)
      throw std::invalid_argument(
          "scenario: first-election probability bounds must cover the first r-1 options");
    double high_sum = 0.0;
    for (const auto& [lo, hi] : first_prob_bounds) {
      if (!(lo > 0.0 && lo <= hi && hi < 1.0))
        throw std::invalid_argument("scenario: probability bounds must satisfy 0 < low <= high < 1");
      high_sum += hi;
    }
    if (r > 1 && high_sum >= 1.0)
      throw std::invalid_argument(
          "scenario: probability upper bounds must leave mass for the last option");
    if (theta_true.size() != r)
      throw std::invalid_argument("scenario: theta must have one entry per first-election option");
    for (int i = 0; i < r; ++i)
      if (!(theta_true(i) >= 0.0 && theta_true(i) < 1.0))
        throw std::invalid_argument("scenario: theta entries must lie in [0, 1)");
    if (tied_overdispersion)
      for (int i = 1; i < r; ++i)
        if (theta_true(i) != theta_true(0))
          throw std::invalid_argument("scenario: tied overdispersion requires a constant theta");
    if (beta_true.size() != static_cast<Eigen::Index>(design.effects.size()))
      throw std::invalid_argument("scenario: one true slope per design effect required");
    Dimensions dims{n_first(), n_second(), stations};
    CovariateDesign d = design;
    d.n_covariates = static_cast<int>(covariates.size());
    d.validate(dims);
    for (const auto& cov : covariates)
      if (cov.kind == CovariateSource::Kind::CenteredLogitShare &&
          (cov.option < 0 || cov.option >= r))
        throw std::invalid_argument("scenario: covariate share option out of range");
    if (!(cluster_size > 0.0)) throw std::invalid_argument("scenario: cluster size must be positive");
  }

  ModelSpec model_spec() const {
    ModelSpec spec;
    spec.dims = Dimensions{n_first(), n_second(), stations};
    spec.design = design;
    spec.design.n_covariates = static_cast<int>(covariates.size());
    spec.cluster_size = cluster_size;
    spec.tied_overdispersion = tied_overdispersion;
    return spec;
  }

  // Generating parameters on the fitting scale; requires theta > 0.
  ParameterVector true_params() const {
    ParameterVector p;
    p.alpha = alpha_true;
    p.beta = beta_true;
    p.tau.resize(tied_overdispersion ? 1 : n_first());
    for (int t = 0; t < p.tau.size(); ++t) {
      const double th = theta_true(t);
      if (!(th > 0.0))
        throw std::invalid_argument("scenario: true tau undefined in the theta = 0 limit");
      p.tau(t) = logit(th);
    }
    return p;
  }
};

struct SimulatedData {
  std::vector<StationRecord> records;
  std::vector<Eigen::MatrixXi> latent_cells;  // per station, r x c transitions
  std::vector<std::string> covariate_names;
};

namespace detail {

// clusters of average size C: floor(n/C) of them, at least one
inline int cluster_count(long long n, double cluster_size) {
  if (n <= 0) return 0;
  const long long h = static_cast<long long>(std::floor(static_cast<double>(n) / cluster_size));
  return static_cast<int>(std::max<long long>(1, h));
}

// second-election votes of one station row under the cluster mechanism
inline Eigen::VectorXi draw_row_votes(Rng& rng, long long n, const Eigen::VectorXd& pi,
                                      double theta, double cluster_size) {
  Eigen::VectorXi votes = Eigen::VectorXi::Zero(pi.size());
  if (n <= 0) return votes;
  const int clusters = cluster_count(n, cluster_size);
  const auto sizes = rng.uniform_multinomial(n, clusters);
  Eigen::VectorXd concentration;
  if (theta > 0.0) concentration = dirichlet_from_mean_precision(pi, theta);
  for (int h = 0; h < clusters; ++h) {
    if (sizes[static_cast<std::size_t>(h)] == 0) continue;
    const Eigen::VectorXd p = theta > 0.0 ? rng.dirichlet(concentration) : pi;
    votes += rng.multinomial(sizes[static_cast<std::size_t>(h)], p);
  }
  return votes;
}

}  // namespace detail

inline SimulatedData generate_dataset(const ScenarioConfig& cfg, Rng& rng) {
  cfg.validate();
  const int r = cfg.n_first();
  const int c = cfg.n_second();
  const int k = cfg.stations;
  const int n_cov = static_cast<int>(cfg.covariates.size());

  SimulatedData out;
  out.records.resize(static_cast<std::size_t>(k));
  out.latent_cells.assign(static_cast<std::size_t>(k), Eigen::MatrixXi::Zero(r, c));
  for (int v = 0; v < n_cov; ++v) out.covariate_names.push_back("v" + std::to_string(v + 1));

  // first election
  for (int s = 0; s < k; ++s) {
    auto& rec = out.records[static_cast<std::size_t>(s)];
    rec.id = "s" + std::to_string(s + 1);
    const long long electorate = rng.uniform_int(cfg.electorate_low, cfg.electorate_high);
    Eigen::VectorXd q(r);
    double head = 0.0;
    for (int i = 0; i + 1 < r; ++i) {
      q(i) = rng.uniform(cfg.first_prob_bounds[static_cast<std::size_t>(i)].first,
                         cfg.first_prob_bounds[static_cast<std::size_t>(i)].second);
      head += q(i);
    }
    q(r - 1) = 1.0 - head;
    rec.first_votes = rng.multinomial(electorate, q);
    rec.second_votes = Eigen::VectorXi::Zero(c);
    rec.covariates = Eigen::VectorXd::Zero(n_cov);
  }

  // covariates, centered over the realized dataset
  for (int v = 0; v < n_cov; ++v) {
    const auto& src = cfg.covariates[static_cast<std::size_t>(v)];
    if (src.kind == CovariateSource::Kind::CenteredLogitShare) {
      std::vector<double> shares(static_cast<std::size_t>(k));
      for (int s = 0; s < k; ++s) {
        const auto& rec = out.records[static_cast<std::size_t>(s)];
        const double total = static_cast<double>(rec.total_first());
        shares[static_cast<std::size_t>(s)] =
            total > 0.0 ? rec.first_votes(src.option) / total : 0.5;
      }
      const auto values = centered_logit_shares(shares, src.epsilon);
      for (int s = 0; s < k; ++s)
        out.records[static_cast<std::size_t>(s)].covariates(v) = values[static_cast<std::size_t>(s)];
    } else {
      double mean = 0.0;
      std::vector<double> values(static_cast<std::size_t>(k));
      for (int s = 0; s < k; ++s) {
        values[static_cast<std::size_t>(s)] = src.sd * rng.normal();
        mean += values[static_cast<std::size_t>(s)];
      }
      mean /= static_cast<double>(k);
      for (int s = 0; s < k; ++s)
        out.records[static_cast<std::size_t>(s)].covariates(v) =
            values[static_cast<std::size_t>(s)] - mean;
    }
  }

  // second election through the cluster mechanism
  const ModelSpec spec = cfg.model_spec();
  ParameterVector gen;
  gen.alpha = cfg.alpha_true;
  gen.beta = cfg.beta_true;
  gen.tau = Eigen::VectorXd::Zero(cfg.tied_overdispersion ? 1 : r);  // unused below
  for (int s = 0; s < k; ++s) {
    auto& rec = out.records[static_cast<std::size_t>(s)];
    const Eigen::MatrixXd lambda = station_logits(spec, gen, rec.covariates);
    for (int i = 0; i < r; ++i) {
      const Eigen::VectorXd pi = logits_to_probs(lambda.row(i).transpose());
      const Eigen::VectorXi votes =
          detail::draw_row_votes(rng, rec.first_votes(i), pi, cfg.theta_true(i), cfg.cluster_size);
      out.latent_cells[static_cast<std::size_t>(s)].row(i) = votes.transpose();
      rec.second_votes += votes;
    }
  }
  return out;
}

inline SimulatedData generate_dataset(const ScenarioConfig& cfg) {
  Rng rng = Rng::stream(cfg.seed, 0);
  return generate_dataset(cfg, rng);
}

struct VarianceOracleResult {
  Eigen::MatrixXd covariance;  // empirical, reference column dropped
  Eigen::MatrixXd mc_se;       // Monte Carlo standard error of each entry
};

// Empirical covariance of the cluster mechanism for a single row; validates
// the linear-in-n variance formula.
inline VarianceOracleResult variance_oracle(const Eigen::VectorXd& pi, double theta,
                                            double cluster_size, long long n, int reps,
                                            std::uint64_t seed) {
  if (reps < 10000)
    throw std::invalid_argument("variance_oracle: at least 10^4 replicates required");
  const int m = static_cast<int>(pi.size()) - 1;
  Rng rng = Rng::stream(seed, 0);
  Eigen::MatrixXd draws(reps, m);
  for (int t = 0; t < reps; ++t)
    draws.row(t) =
        detail::draw_row_votes(rng, n, pi, theta, cluster_size).head(m).cast<double>().transpose();

  const Eigen::RowVectorXd mean = draws.colwise().mean();
  Eigen::MatrixXd centered = draws.rowwise() - mean;
  VarianceOracleResult out;
  out.covariance = centered.transpose() * centered / static_cast<double>(reps - 1);
  out.mc_se.resize(m, m);
  for (int a = 0; a < m; ++a) {
    for (int b = 0; b < m; ++b) {
      // var of a sample covariance entry: (E[x^2 y^2] - cov^2) / reps
      const double fourth =
          (centered.col(a).array().square() * centered.col(b).array().square()).mean();
      const double var_hat =
          (fourth - out.covariance(a, b) * out.covariance(a, b)) / static_cast<double>(reps);
      out.mc_se(a, b) = std::sqrt(std::max(0.0, var_hat));
    }
  }
  return out;
}

}  // namespace votrans
