// Fisher scoring for the Gaussian-approximation likelihood: iterate
// phi <- phi + I(phi)^{-1} s(phi) with step halving, a box on the baseline
// logits and a ridge fallback when the information factorization fails.
#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "votrans/goodman.hpp"
#include "votrans/likelihood.hpp"
#include "votrans/model.hpp"

namespace votrans {

struct FitOptions {
  int max_iterations = 100;
  double gradient_tolerance = 1e-6;  // on max |score|
  int step_halving_max = 10;
  double ridge = 1e-8;               // added to the information diagonal on failure
  double logit_box = 15.0;           // box on |alpha| and |tau|
  double max_step = 2.0;             // per-coordinate cap on one scoring step
  bool quasi = false;                // block quasi-likelihood estimating equations

  void validate() const {
    if (max_iterations <= 0 || gradient_tolerance <= 0.0 || step_halving_max <= 0 ||
        ridge <= 0.0 || logit_box <= 0.0 || max_step <= 0.0)
      throw std::invalid_argument("FitOptions: all settings must be positive");
  }
};

struct FitResult {
  ParameterVector params;
  double loglik = std::numeric_limits<double>::quiet_NaN();
  Eigen::MatrixXd information;
  Eigen::VectorXd se;            // NaN where unavailable (non-positive-definite information)
  int iterations = 0;
  bool converged = false;
  long long clamp_count = 0;
  std::vector<int> at_boundary;  // packed indices of alpha/tau coordinates on the box
  std::vector<std::string> param_names;
};

// Goodman-based starting point: clamp the regression estimate into
// [0.02, 0.98], map to logits; zero slopes; theta = 0.05.
inline ParameterVector default_init(const ModelSpec& spec, std::span<const StationRecord> data) {
  const GoodmanResult g = goodman_fit(data, spec.dims);
  ParameterVector init;
  const int m = spec.dims.n_second - 1;
  init.alpha.resize(spec.dims.n_first, m);
  for (int i = 0; i < spec.dims.n_first; ++i) {
    Eigen::VectorXd row = g.transitions.row(i).transpose();
    for (int j = 0; j < row.size(); ++j) row(j) = std::min(0.98, std::max(0.02, row(j)));
    for (int j = 0; j < m; ++j) init.alpha(i, j) = std::log(row(j) / row(m));
  }
  init.beta = Eigen::VectorXd::Zero(spec.n_beta());
  init.tau = Eigen::VectorXd::Constant(spec.n_tau(), logit(0.05));
  return init;
}

namespace detail {

// baseline logits and overdispersion logits are boxed; slopes are free
inline void clamp_logit_box(Eigen::VectorXd& flat, const ModelSpec& spec, double box) {
  for (int a = 0; a < spec.n_alpha(); ++a) flat(a) = std::min(box, std::max(-box, flat(a)));
  for (int t = spec.n_mean_params(); t < spec.n_params(); ++t)
    flat(t) = std::min(box, std::max(-box, flat(t)));
}

// Solve I d = s restricted to the active coordinates, ridging the diagonal
// when the factorization fails.
inline Eigen::VectorXd solve_step(const Eigen::MatrixXd& info, const Eigen::VectorXd& grad,
                                  const std::vector<int>& active, double ridge) {
  const int q = static_cast<int>(active.size());
  Eigen::MatrixXd J(q, q);
  Eigen::VectorXd g(q);
  for (int a = 0; a < q; ++a) {
    g(a) = grad(active[a]);
    for (int b = 0; b < q; ++b) J(a, b) = info(active[a], active[b]);
  }
  Eigen::LLT<Eigen::MatrixXd> llt(J);
  if (llt.info() != Eigen::Success) {
    J.diagonal().array() += ridge;
    llt.compute(J);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("fit: singular expected information matrix");
  }
  return llt.solve(g);
}

}  // namespace detail

inline FitResult fit(const ModelSpec& spec, std::span<const StationRecord> data,
                     const FitOptions& options = {},
                     const std::optional<ParameterVector>& init = std::nullopt) {
  options.validate();
  ModelSpec model = spec;
  model.dims.n_stations = static_cast<int>(data.size());
  model.validate();
  if (!model.identified())
    throw std::invalid_argument(
        "fit: model is unidentified (more free mean parameters than stacked observations)");

  FitResult result;
  result.param_names = parameter_names(model);
  ClampCounter clamps;

  Eigen::VectorXd phi;
  if (init) {
    phi = pack(*init);
    if (phi.size() != model.n_params())
      throw std::invalid_argument("fit: init has the wrong number of parameters");
  } else {
    phi = pack(default_init(model, data));
  }
  detail::clamp_logit_box(phi, model, options.logit_box);

  double ll = log_likelihood(model, unpack(model, phi), data, &clamps);
  if (!std::isfinite(ll))
    throw std::runtime_error(
        "fit: log-likelihood is not finite at the starting point; supply an explicit init");

  const auto boxed = [&](int a) {
    return a < model.n_alpha() || a >= model.n_mean_params();
  };
  bool converged = false;
  int iterations = 0;
  for (int it = 0; it < options.max_iterations; ++it) {
    const ScoreInfo si =
        score_and_information(model, unpack(model, phi), data, options.quasi, &clamps);
    // coordinates pinned at the box with an outward gradient satisfy their
    // constraint and drop out of the step and the convergence test
    std::vector<int> active;
    for (int a = 0; a < model.n_params(); ++a) {
      const bool at_low = boxed(a) && phi(a) <= -options.logit_box + 1e-12;
      const bool at_high = boxed(a) && phi(a) >= options.logit_box - 1e-12;
      if ((at_low && si.score(a) < 0.0) || (at_high && si.score(a) > 0.0)) continue;
      active.push_back(a);
    }
    double max_score = 0.0;
    for (int a : active) max_score = std::max(max_score, std::abs(si.score(a)));
    if (max_score < options.gradient_tolerance) {
      converged = true;
      break;
    }
    Eigen::VectorXd step =
        detail::solve_step(si.information, si.score, active, options.ridge);
    // cap the move per coordinate; keeps the variance parameters from
    // running away while the mean parameters are still far off
    for (int a = 0; a < step.size(); ++a)
      step(a) = std::min(options.max_step, std::max(-options.max_step, step(a)));
    // predicted quadratic gain; below the floating-point resolution of the
    // log-likelihood no step can be accepted, so the maximum is reached
    double predicted_gain = 0.0;
    for (std::size_t a = 0; a < active.size(); ++a)
      predicted_gain += si.score(active[a]) * step(static_cast<int>(a));
    if (!options.quasi && 0.5 * predicted_gain < 1e-13 * (1.0 + std::abs(ll))) {
      converged = true;
      break;
    }

    bool accepted = false;
    double scale = 1.0;
    for (int h = 0; h <= options.step_halving_max; ++h, scale *= 0.5) {
      Eigen::VectorXd candidate = phi;
      for (std::size_t a = 0; a < active.size(); ++a)
        candidate(active[a]) += scale * step(static_cast<int>(a));
      detail::clamp_logit_box(candidate, model, options.logit_box);
      if (options.quasi) {
        // quasi steps do not climb the Gaussian likelihood; damp on the
        // norm of the estimating equations instead
        const Eigen::VectorXd cs =
            score(model, unpack(model, candidate), data, true, &clamps);
        if (cs.allFinite() && cs.cwiseAbs().maxCoeff() < max_score) {
          phi = std::move(candidate);
          ll = log_likelihood(model, unpack(model, phi), data, &clamps);
          accepted = true;
          break;
        }
      } else {
        const double cll = log_likelihood(model, unpack(model, candidate), data, &clamps);
        if (std::isfinite(cll) && cll > ll) {
          phi = std::move(candidate);
          ll = cll;
          accepted = true;
          break;
        }
      }
    }
    ++iterations;
    if (!accepted) break;  // no acceptable step left at this resolution
  }

  result.params = unpack(model, phi);
  result.loglik = ll;
  result.iterations = iterations;
  result.converged = converged;
  result.information = expected_information(model, result.params, data, options.quasi, &clamps);
  result.clamp_count = clamps.count;

  const int p = model.n_params();
  result.se = Eigen::VectorXd::Constant(p, std::numeric_limits<double>::quiet_NaN());
  Eigen::LLT<Eigen::MatrixXd> llt(result.information);
  if (llt.info() == Eigen::Success) {
    const Eigen::MatrixXd cov = llt.solve(Eigen::MatrixXd::Identity(p, p));
    for (int a = 0; a < p; ++a)
      if (cov(a, a) > 0.0) result.se(a) = std::sqrt(cov(a, a));
  }
  for (int a = 0; a < model.n_params(); ++a) {
    const bool boxed = a < model.n_alpha() || a >= model.n_mean_params();
    if (boxed && std::abs(std::abs(phi(a)) - options.logit_box) < 1e-9)
      result.at_boundary.push_back(a);
  }
  return result;
}

// Transition probabilities averaged across stations, with delta-method
// standard errors through the inverse expected information.
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> average_transition_matrix(
    const ModelSpec& spec, const FitResult& result, std::span<const StationRecord> data) {
  if (!result.converged)
    throw std::invalid_argument("average_transition_matrix: fit did not converge");
  const int r = spec.dims.n_first;
  const int c = spec.dims.n_second;
  const int m = c - 1;
  const int p = spec.n_params();
  const int k = static_cast<int>(data.size());
  if (k == 0) throw std::invalid_argument("average_transition_matrix: empty dataset");
  const auto cell_map = detail::cell_parameter_map(spec);

  Eigen::MatrixXd avg = Eigen::MatrixXd::Zero(r, c);
  // gradient of every averaged cell w.r.t. the packed parameters
  std::vector<Eigen::VectorXd> grad(static_cast<std::size_t>(r * c),
                                    Eigen::VectorXd::Zero(p));
  for (const auto& rec : data) {
    const Eigen::MatrixXd probs = station_probs(spec, result.params, rec.covariates);
    avg += probs;
    for (int i = 0; i < r; ++i) {
      for (int l = 0; l < m; ++l) {
        for (const auto& cp : cell_map[static_cast<std::size_t>(i * m + l)]) {
          const double w = cp.covariate < 0 ? 1.0 : rec.covariates(cp.covariate);
          if (w == 0.0) continue;
          for (int j = 0; j < c; ++j) {
            const double d = probs(i, j) * ((j == l ? 1.0 : 0.0) - probs(i, l));
            grad[static_cast<std::size_t>(i * c + j)](cp.param) += w * d;
          }
        }
      }
    }
  }
  avg /= static_cast<double>(k);

  Eigen::MatrixXd se = Eigen::MatrixXd::Constant(r, c, std::numeric_limits<double>::quiet_NaN());
  Eigen::LLT<Eigen::MatrixXd> llt(result.information);
  if (llt.info() == Eigen::Success) {
    for (int i = 0; i < r; ++i) {
      for (int j = 0; j < c; ++j) {
        const Eigen::VectorXd g = grad[static_cast<std::size_t>(i * c + j)] / static_cast<double>(k);
        const double var = g.dot(llt.solve(g));
        se(i, j) = var > 0.0 ? std::sqrt(var) : 0.0;
      }
    }
  }
  return {avg, se};
}

}  // namespace votrans
