// Monte Carlo study over repeated generate/fit cycles: per-parameter bias,
// ratio of mean information-based standard error to the sampling standard
// deviation, and tail exceedance proportions. Replicates run on independent
// RNG streams, so the report is identical for any thread count.
#pragma once

#include <Eigen/Dense>

#include <atomic>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "votrans/fit.hpp"
#include "votrans/model.hpp"
#include "votrans/simulate.hpp"

namespace votrans {

struct McParameterStat {
  std::string name;
  double truth = 0.0;
  double bias = 0.0;
  double mean_se = 0.0;
  double sd_estimates = 0.0;
  double se_ratio = 0.0;               // mean reported s.e. / sampling s.d.
  std::vector<double> exceedance;      // one proportion per z threshold
};

struct McReport {
  std::vector<double> z_thresholds;
  std::vector<McParameterStat> params;
  int replicates = 0;
  int failures = 0;                    // non-converged or failed fits, excluded
  std::vector<int> replicate_ids;      // successful replicates, ascending
  Eigen::MatrixXd estimates;           // successes x p
  Eigen::MatrixXd reported_se;         // successes x p
};

inline McReport run_mc_study(const ScenarioConfig& cfg, int replicates,
                             const FitOptions& fit_options = {}, int threads = 0,
                             const std::vector<double>& extra_z = {}) {
  if (replicates < 1) throw std::invalid_argument("run_mc_study: need at least one replicate");
  cfg.validate();
  const ModelSpec spec = cfg.model_spec();
  const Eigen::VectorXd truth = pack(cfg.true_params());
  const int p = spec.n_params();

  std::vector<std::optional<std::pair<Eigen::VectorXd, Eigen::VectorXd>>> slots(
      static_cast<std::size_t>(replicates));

  if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
  threads = std::max(1, std::min(threads, replicates));

  auto worker = [&](int first) {
    for (int rep = first; rep < replicates; rep += threads) {
      try {
        Rng rng = Rng::stream(cfg.seed, static_cast<std::uint64_t>(rep));
        const SimulatedData sim = generate_dataset(cfg, rng);
        const FitResult res = fit(spec, sim.records, fit_options);
        if (res.converged)
          slots[static_cast<std::size_t>(rep)] = std::make_pair(pack(res.params), res.se);
      } catch (const std::exception&) {
        // counted as a failed replicate
      }
    }
  };
  if (threads == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker, t);
    for (auto& th : pool) th.join();
  }

  McReport report;
  report.replicates = replicates;
  report.z_thresholds = {1.2815, 1.6449, 1.9600, 2.576};
  for (double z : extra_z) report.z_thresholds.push_back(z);

  int successes = 0;
  for (const auto& slot : slots)
    if (slot) ++successes;
  report.failures = replicates - successes;
  if (successes == 0) throw std::runtime_error("run_mc_study: every replicate failed to fit");

  report.estimates.resize(successes, p);
  report.reported_se.resize(successes, p);
  int row = 0;
  for (int rep = 0; rep < replicates; ++rep) {
    if (!slots[static_cast<std::size_t>(rep)]) continue;
    report.replicate_ids.push_back(rep);
    report.estimates.row(row) = slots[static_cast<std::size_t>(rep)]->first.transpose();
    report.reported_se.row(row) = slots[static_cast<std::size_t>(rep)]->second.transpose();
    ++row;
  }

  const auto names = parameter_names(spec);
  for (int a = 0; a < p; ++a) {
    McParameterStat stat;
    stat.name = names[static_cast<std::size_t>(a)];
    stat.truth = truth(a);
    const Eigen::VectorXd est = report.estimates.col(a);
    const Eigen::VectorXd se = report.reported_se.col(a);
    const double mean_est = est.mean();
    stat.bias = mean_est - stat.truth;
    stat.mean_se = se.mean();
    stat.sd_estimates =
        successes > 1
            ? std::sqrt((est.array() - mean_est).square().sum() / static_cast<double>(successes - 1))
            : 0.0;
    stat.se_ratio = stat.sd_estimates > 0.0 ? stat.mean_se / stat.sd_estimates : 0.0;
    for (double z : report.z_thresholds) {
      int count = 0;
      for (int t = 0; t < successes; ++t)
        if (std::abs(est(t) - stat.truth) > z * se(t)) ++count;
      stat.exceedance.push_back(static_cast<double>(count) / static_cast<double>(successes));
    }
    report.params.push_back(std::move(stat));
  }
  return report;
}

}  // namespace votrans
