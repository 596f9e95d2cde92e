// Gaussian-approximation log-likelihood of the aggregated counts, with the
// analytic score and expected information. Both the mean and the covariance
// depend on the parameters; the score therefore carries a mean channel and a
// variance channel. The quasi flag switches to block quasi-likelihood
// estimating equations: mean parameters keep only the mean channel (a GLS
// step), the overdispersion logits keep only their variance-channel equation,
// and the information is block diagonal.
#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "votrans/model.hpp"
#include "votrans/moments.hpp"

namespace votrans {
namespace detail {

// Compensated (Neumaier) summation so accumulation order barely matters.
struct CompensatedSum {
  double sum = 0.0;
  double comp = 0.0;
  void add(double x) {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x))
      comp += (sum - t) + x;
    else
      comp += (x - t) + sum;
    sum = t;
  }
  double value() const { return sum + comp; }
};

struct StationEval {
  bool empty = false;
  Eigen::MatrixXd probs;                  // r x c
  Eigen::MatrixXd pi_clamped;             // r x (c-1), rows with counts only
  std::vector<Eigen::MatrixXd> kernels;   // per row, empty matrix when n_i = 0
  Eigen::VectorXd factors;                // n_i + theta_i C (n_i - 1)
  Eigen::VectorXd mu;
  Eigen::VectorXd resid;
  Eigen::MatrixXd V;
  Eigen::LLT<Eigen::MatrixXd> llt;
  double logdet = 0.0;
};

inline StationEval evaluate_station(const ModelSpec& spec, const ParameterVector& params,
                                    const StationRecord& rec, ClampCounter* clamps) {
  const int r = spec.dims.n_first;
  const int m = spec.dims.n_second - 1;
  StationEval ev;
  if (rec.total_first() == 0) {
    if (rec.second_votes.head(m).cast<long long>().sum() != 0)
      throw std::runtime_error("station '" + rec.id +
                               "': no first-election votes but nonzero second-election counts");
    ev.empty = true;
    return ev;
  }
  ev.probs = station_probs(spec, params, rec.covariates);
  ev.pi_clamped.resize(r, m);
  ev.kernels.assign(r, Eigen::MatrixXd());
  ev.factors = Eigen::VectorXd::Zero(r);
  ev.mu = Eigen::VectorXd::Zero(m);
  ev.V = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < r; ++i) {
    const long long n = rec.first_votes(i);
    if (n == 0) continue;
    for (int j = 0; j < m; ++j) {
      double q = ev.probs(i, j);
      if (q < kVarianceProbFloor || q > 1.0 - kVarianceProbFloor) {
        q = std::min(1.0 - kVarianceProbFloor, std::max(kVarianceProbFloor, q));
        if (clamps) ++clamps->count;
      }
      ev.pi_clamped(i, j) = q;
    }
    Eigen::VectorXd ph = ev.pi_clamped.row(i).transpose();
    ev.kernels[i] = -ph * ph.transpose();
    ev.kernels[i].diagonal() += ph;
    ev.factors(i) = cluster_variance_factor(n, params.theta(i), spec.cluster_size);
    ev.mu += static_cast<double>(n) * ev.probs.row(i).head(m).transpose();
    ev.V += ev.factors(i) * ev.kernels[i];
  }
  ev.resid = rec.second_votes.head(m).cast<double>() - ev.mu;
  ev.llt.compute(ev.V);
  if (ev.llt.info() != Eigen::Success) {
    const double ridge = 1e-8 * std::max(1.0, ev.V.diagonal().maxCoeff());
    Eigen::MatrixXd repaired = ev.V;
    repaired.diagonal().array() += ridge;
    ev.llt.compute(repaired);
    if (ev.llt.info() != Eigen::Success)
      throw std::runtime_error("station '" + rec.id + "': singular covariance matrix");
  }
  ev.logdet = 2.0 * ev.llt.matrixLLT().diagonal().array().log().sum();
  return ev;
}

// d/dl_l of [diag(p) - p p'] over the first c-1 categories.
inline Eigen::MatrixXd kernel_derivative(const Eigen::Ref<const Eigen::VectorXd>& p, int l) {
  const int m = static_cast<int>(p.size());
  Eigen::MatrixXd D(m, m);
  const double pl = p(l);
  for (int j = 0; j < m; ++j) {
    for (int k = 0; k <= j; ++k) {
      double val = -p(j) * p(k) * ((j == l ? 1.0 : 0.0) + (k == l ? 1.0 : 0.0) - 2.0 * pl);
      if (j == k) val += p(j) * ((j == l ? 1.0 : 0.0) - pl);
      D(j, k) = val;
      D(k, j) = val;
    }
  }
  return D;
}

// Parameters sharing a logit cell (row, col): the alpha itself plus any
// design effects. covariate < 0 marks the alpha entry (unit weight).
struct CellParam {
  int param;
  int covariate;
};

inline std::vector<std::vector<CellParam>> cell_parameter_map(const ModelSpec& spec) {
  const int m = spec.dims.n_second - 1;
  std::vector<std::vector<CellParam>> map(static_cast<std::size_t>(spec.n_alpha()));
  for (int i = 0; i < spec.dims.n_first; ++i)
    for (int l = 0; l < m; ++l) map[i * m + l].push_back({i * m + l, -1});
  for (int b = 0; b < spec.n_beta(); ++b) {
    const auto& eff = spec.design.effects[static_cast<std::size_t>(b)];
    map[eff.row * m + eff.col].push_back({spec.n_alpha() + b, eff.covariate});
  }
  return map;
}

}  // namespace detail

inline double log_likelihood(const ModelSpec& spec, const ParameterVector& params,
                             std::span<const StationRecord> data,
                             ClampCounter* clamps = nullptr) {
  if (data.empty()) throw std::invalid_argument("log_likelihood: empty dataset");
  detail::CompensatedSum ll;
  for (const auto& rec : data) {
    const auto ev = detail::evaluate_station(spec, params, rec, clamps);
    if (ev.empty) continue;
    const Eigen::VectorXd u = ev.llt.solve(ev.resid);
    ll.add(-0.5 * (ev.logdet + ev.resid.dot(u)));
  }
  return ll.value();
}

struct ScoreInfo {
  Eigen::VectorXd score;
  Eigen::MatrixXd information;
};

// Score and expected information accumulated in one pass. Per station:
//   score_a = dmu_a' V^{-1} e - tr(V^{-1} dV_a)/2 + e' V^{-1} dV_a V^{-1} e / 2
//   info_ab = dmu_a' V^{-1} dmu_b + tr(V^{-1} dV_a V^{-1} dV_b)/2
inline ScoreInfo score_and_information(const ModelSpec& spec, const ParameterVector& params,
                                       std::span<const StationRecord> data, bool quasi = false,
                                       ClampCounter* clamps = nullptr) {
  if (data.empty()) throw std::invalid_argument("score: empty dataset");
  const int r = spec.dims.n_first;
  const int m = spec.dims.n_second - 1;
  const int p = spec.n_params();
  const int tau_offset = spec.n_mean_params();
  const auto cell_map = detail::cell_parameter_map(spec);

  ScoreInfo out;
  out.score = Eigen::VectorXd::Zero(p);
  out.information = Eigen::MatrixXd::Zero(p, p);

  Eigen::MatrixXd dmu(m, p);
  std::vector<Eigen::MatrixXd> dV(static_cast<std::size_t>(p));
  std::vector<Eigen::MatrixXd> W(static_cast<std::size_t>(p));
  std::vector<char> active(static_cast<std::size_t>(p));
  std::vector<char> has_dV(static_cast<std::size_t>(p));

  for (const auto& rec : data) {
    const auto ev = detail::evaluate_station(spec, params, rec, clamps);
    if (ev.empty) continue;
    dmu.setZero();
    std::fill(active.begin(), active.end(), 0);
    std::fill(has_dV.begin(), has_dV.end(), 0);

    for (int i = 0; i < r; ++i) {
      const long long n = rec.first_votes(i);
      if (n == 0) continue;
      const Eigen::VectorXd pi_head = ev.probs.row(i).head(m).transpose();
      for (int l = 0; l < m; ++l) {
        const auto& cell = cell_map[static_cast<std::size_t>(i * m + l)];
        // mean derivative along this logit, unit weight
        Eigen::VectorXd dmu_base = -pi_head(l) * pi_head;
        dmu_base(l) += pi_head(l);
        dmu_base *= static_cast<double>(n);
        Eigen::MatrixXd dV_base;
        if (!quasi)
          dV_base = ev.factors(i) * detail::kernel_derivative(ev.pi_clamped.row(i).transpose(), l);
        for (const auto& cp : cell) {
          const double w = cp.covariate < 0 ? 1.0 : rec.covariates(cp.covariate);
          if (w == 0.0) continue;
          const auto a = static_cast<std::size_t>(cp.param);
          if (!active[a]) {
            dmu.col(cp.param).setZero();
            if (!quasi) dV[a] = Eigen::MatrixXd::Zero(m, m);
            active[a] = 1;
          }
          dmu.col(cp.param) += w * dmu_base;
          if (!quasi) {
            dV[a] += w * dV_base;
            has_dV[a] = 1;
          }
        }
      }
    }
    {
      // overdispersion: dV/dtau = sum_i C (n_i - 1) theta_i (1 - theta_i) kernel_i
      for (int t = 0; t < spec.n_tau(); ++t) {
        const auto a = static_cast<std::size_t>(tau_offset + t);
        Eigen::MatrixXd d = Eigen::MatrixXd::Zero(m, m);
        bool any = false;
        for (int i = 0; i < r; ++i) {
          if (!spec.tied_overdispersion && i != t) continue;
          const long long n = rec.first_votes(i);
          if (n <= 1) continue;
          const double th = params.theta(i);
          d += spec.cluster_size * static_cast<double>(n - 1) * th * (1.0 - th) * ev.kernels[i];
          any = true;
        }
        if (any) {
          dV[a] = std::move(d);
          dmu.col(tau_offset + t).setZero();
          active[a] = 1;
          has_dV[a] = 1;
        }
      }
    }

    const Eigen::VectorXd u = ev.llt.solve(ev.resid);
    // in quasi mode the variance channel applies only to the tau block
    auto keeps_variance_channel = [&](int a) {
      return !quasi || a >= tau_offset;
    };
    for (int a = 0; a < p; ++a) {
      if (!active[static_cast<std::size_t>(a)]) continue;
      double s = dmu.col(a).dot(u);
      if (has_dV[static_cast<std::size_t>(a)] && keeps_variance_channel(a)) {
        W[static_cast<std::size_t>(a)] = ev.llt.solve(dV[static_cast<std::size_t>(a)]);
        s += -0.5 * W[static_cast<std::size_t>(a)].trace() +
             0.5 * u.dot(dV[static_cast<std::size_t>(a)] * u);
      }
      out.score(a) += s;
    }
    for (int a = 0; a < p; ++a) {
      if (!active[static_cast<std::size_t>(a)]) continue;
      const Eigen::VectorXd sa = ev.llt.solve(dmu.col(a));
      for (int b = a; b < p; ++b) {
        if (!active[static_cast<std::size_t>(b)]) continue;
        double inc = 0.0;
        const bool cross_block = (a < tau_offset) != (b < tau_offset);
        if (!quasi || !cross_block) inc += dmu.col(b).dot(sa);
        if (has_dV[static_cast<std::size_t>(a)] && has_dV[static_cast<std::size_t>(b)] &&
            keeps_variance_channel(a) && keeps_variance_channel(b) && !(quasi && cross_block))
          inc += 0.5 * (W[static_cast<std::size_t>(a)].array() *
                        W[static_cast<std::size_t>(b)].transpose().array())
                           .sum();
        out.information(a, b) += inc;
        if (b != a) out.information(b, a) += inc;
      }
    }
  }
  return out;
}

inline Eigen::VectorXd score(const ModelSpec& spec, const ParameterVector& params,
                             std::span<const StationRecord> data, bool quasi = false,
                             ClampCounter* clamps = nullptr) {
  return score_and_information(spec, params, data, quasi, clamps).score;
}

inline Eigen::MatrixXd expected_information(const ModelSpec& spec, const ParameterVector& params,
                                            std::span<const StationRecord> data, bool quasi = false,
                                            ClampCounter* clamps = nullptr) {
  return score_and_information(spec, params, data, quasi, clamps).information;
}

}  // namespace votrans
