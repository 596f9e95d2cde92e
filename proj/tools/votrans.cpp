// Command-line workflow around the library: fit a transition model, simulate
// electoral data, run Monte Carlo studies, compare against the Goodman
// baseline, reconstruct latent cells and sweep the cluster-size constant.
#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "votrans/votrans.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace votrans;

namespace {

struct CommonArgs {
  std::string data_path;
  std::string config_path;
  std::string out_dir = ".";
  std::vector<std::string> exclude;
  bool allow_unbalanced = false;
  bool quasi = false;
  std::optional<std::uint64_t> seed;
};

std::string out_path(const CommonArgs& args, const std::string& name) {
  fs::create_directories(args.out_dir);
  return (fs::path(args.out_dir) / name).string();
}

ModelConfig load_config(const CommonArgs& args) {
  ModelConfig cfg = load_model_config(args.config_path);
  if (args.allow_unbalanced) cfg.allow_unbalanced = true;
  if (args.quasi) cfg.fit_options.quasi = true;
  if (args.seed) cfg.seed = *args.seed;
  return cfg;
}

// scenario file: generation truth plus option names, indices are 1-based
struct ScenarioFile {
  ScenarioConfig scenario;
  std::vector<std::string> first_names;
  std::vector<std::string> second_names;
  FitOptions fit_options;
};

ScenarioFile load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  json j;
  in >> j;

  ScenarioFile out;
  ScenarioConfig& cfg = out.scenario;
  cfg.stations = j.at("stations").get<int>();
  const auto bounds = j.at("electorate_bounds").get<std::vector<long long>>();
  if (bounds.size() != 2) throw std::invalid_argument("scenario: electorate_bounds needs [low, high]");
  cfg.electorate_low = bounds[0];
  cfg.electorate_high = bounds[1];
  for (const auto& pair : j.at("first_prob_bounds")) {
    const auto p = pair.get<std::vector<double>>();
    if (p.size() != 2) throw std::invalid_argument("scenario: probability bounds need [low, high]");
    cfg.first_prob_bounds.emplace_back(p[0], p[1]);
  }
  const auto alpha_rows = j.at("alpha_true").get<std::vector<std::vector<double>>>();
  const int r = static_cast<int>(alpha_rows.size());
  const int m = r > 0 ? static_cast<int>(alpha_rows[0].size()) : 0;
  cfg.alpha_true.resize(r, m);
  for (int i = 0; i < r; ++i) {
    if (static_cast<int>(alpha_rows[i].size()) != m)
      throw std::invalid_argument("scenario: ragged alpha_true");
    for (int l = 0; l < m; ++l) cfg.alpha_true(i, l) = alpha_rows[i][l];
  }
  if (j.contains("covariates")) {
    for (const auto& jc : j.at("covariates")) {
      CovariateSource src;
      const std::string kind = jc.at("source").get<std::string>();
      if (kind == "centered_logit_share") {
        src.kind = CovariateSource::Kind::CenteredLogitShare;
        src.option = jc.at("option").get<int>() - 1;
        src.epsilon = jc.value("epsilon", 1e-4);
      } else if (kind == "normal") {
        src.kind = CovariateSource::Kind::Normal;
        src.sd = jc.value("sd", 1.0);
      } else {
        throw std::invalid_argument("scenario: unknown covariate source '" + kind + "'");
      }
      cfg.covariates.push_back(src);
    }
  }
  cfg.design.n_covariates = static_cast<int>(cfg.covariates.size());
  std::vector<double> betas;
  if (j.contains("effects_true")) {
    for (const auto& je : j.at("effects_true")) {
      CovariateEffect eff;
      eff.row = je.at("row").get<int>() - 1;
      eff.col = je.at("col").get<int>() - 1;
      eff.covariate = je.value("covariate", 1) - 1;
      cfg.design.effects.push_back(eff);
      betas.push_back(je.at("value").get<double>());
    }
  }
  cfg.beta_true = Eigen::Map<const Eigen::VectorXd>(betas.data(), static_cast<Eigen::Index>(betas.size()));
  const auto thetas = j.at("theta_true").get<std::vector<double>>();
  cfg.theta_true =
      Eigen::Map<const Eigen::VectorXd>(thetas.data(), static_cast<Eigen::Index>(thetas.size()));
  cfg.tied_overdispersion = j.value("tied_overdispersion", true);
  cfg.cluster_size = j.value("cluster_size", 50.0);
  cfg.seed = j.value("seed", static_cast<std::uint64_t>(1));
  cfg.validate();

  out.first_names = j.value("first_option_names", std::vector<std::string>{});
  out.second_names = j.value("second_option_names", std::vector<std::string>{});
  for (int i = static_cast<int>(out.first_names.size()); i < r; ++i)
    out.first_names.push_back("X" + std::to_string(i + 1));
  for (int jname = static_cast<int>(out.second_names.size()); jname < m + 1; ++jname)
    out.second_names.push_back("Y" + std::to_string(jname + 1));
  if (j.contains("fit")) {
    const auto& jf = j.at("fit");
    out.fit_options.max_iterations = jf.value("max_iterations", 500);
    out.fit_options.gradient_tolerance = jf.value("gradient_tolerance", 1e-6);
    out.fit_options.step_halving_max = jf.value("step_halving_max", 10);
    out.fit_options.quasi = jf.value("quasi", false);
  } else {
    out.fit_options.max_iterations = 500;
  }
  return out;
}

void write_transition_csv(const std::string& path, const std::vector<std::string>& first,
                          const std::vector<std::string>& second, const Eigen::MatrixXd& est,
                          const Eigen::MatrixXd& se) {
  std::vector<std::vector<std::string>> rows;
  for (int i = 0; i < est.rows(); ++i)
    for (int j = 0; j < est.cols(); ++j)
      rows.push_back({first[static_cast<std::size_t>(i)], second[static_cast<std::size_t>(j)],
                      format_full(est(i, j)), format_full(se(i, j))});
  write_csv(path, {"from", "to", "estimate", "se"}, rows);
}

int run_fit(const CommonArgs& args) {
  const ModelConfig cfg = load_config(args);
  const LoadedDataset data = load_dataset(args.data_path, cfg, args.exclude);
  for (const auto& warning : data.warnings) std::cerr << "warning: " << warning << "\n";
  const ModelSpec spec = cfg.spec(data.dims.n_stations);
  FitResult result = fit(spec, data.records, cfg.fit_options);
  result.param_names = parameter_names(spec, cfg.covariate_names());
  const auto [avg, se] = average_transition_matrix(spec, result, data.records);

  std::cout << "stations: " << data.dims.n_stations << "  log-likelihood: " << result.loglik
            << "  iterations: " << result.iterations
            << (result.converged ? "" : "  (NOT CONVERGED)") << "\n";
  if (result.clamp_count > 0)
    std::cout << "probability clamps during variance assembly: " << result.clamp_count << "\n";
  std::cout << "\nparameters\n" << parameter_table_text(result);
  std::cout << "\naveraged transition probabilities\n"
            << transition_table_text(cfg.first_options, cfg.second_options, avg, se);
  if (!result.converged)
    std::cerr << "warning: Fisher scoring did not reach the gradient tolerance\n";

  std::ofstream js(out_path(args, "fit_result.json"));
  js << fit_result_to_json(result).dump(2) << "\n";
  write_transition_csv(out_path(args, "transition_matrix.csv"), cfg.first_options,
                       cfg.second_options, avg, se);
  return 0;
}

int run_goodman(const CommonArgs& args) {
  const ModelConfig cfg = load_config(args);
  const LoadedDataset data = load_dataset(args.data_path, cfg, args.exclude);
  const GoodmanResult g = goodman_fit(data.records, data.dims);
  std::cout << "Goodman ecological regression (unweighted least squares)\n"
            << transition_table_text(cfg.first_options, cfg.second_options, g.transitions, g.se)
            << "residual sum of squares: " << g.rss << "\n";
  bool any = false;
  for (int i = 0; i < data.dims.n_first; ++i)
    for (int j = 0; j < data.dims.n_second; ++j)
      if (g.out_of_range[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]) {
        std::cout << "out of [0,1]: " << cfg.first_options[static_cast<std::size_t>(i)] << " -> "
                  << cfg.second_options[static_cast<std::size_t>(j)] << " = "
                  << format_fixed(g.transitions(i, j)) << "\n";
        any = true;
      }
  if (!any) std::cout << "all estimates inside [0,1]\n";

  std::vector<std::vector<std::string>> rows;
  for (int i = 0; i < data.dims.n_first; ++i)
    for (int j = 0; j < data.dims.n_second; ++j)
      rows.push_back({cfg.first_options[static_cast<std::size_t>(i)],
                      cfg.second_options[static_cast<std::size_t>(j)],
                      format_full(g.transitions(i, j)), format_full(g.se(i, j)),
                      g.out_of_range[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]
                          ? "1"
                          : "0"});
  write_csv(out_path(args, "goodman.csv"), {"from", "to", "estimate", "se", "out_of_range"}, rows);
  return 0;
}

int run_simulate(const CommonArgs& args) {
  ScenarioFile sf = load_scenario(args.config_path);
  if (args.seed) sf.scenario.seed = *args.seed;
  const SimulatedData sim = generate_dataset(sf.scenario);

  write_dataset(out_path(args, "dataset.csv"), sim.records, sf.first_names, sf.second_names,
                sim.covariate_names);

  std::vector<std::vector<std::string>> cells;
  for (std::size_t s = 0; s < sim.records.size(); ++s)
    for (int i = 0; i < sim.latent_cells[s].rows(); ++i)
      for (int j = 0; j < sim.latent_cells[s].cols(); ++j)
        cells.push_back({sim.records[s].id, sf.first_names[static_cast<std::size_t>(i)],
                         sf.second_names[static_cast<std::size_t>(j)],
                         std::to_string(sim.latent_cells[s](i, j))});
  write_csv(out_path(args, "truth_cells.csv"), {"station", "from", "to", "count"}, cells);

  std::vector<std::string> header{"station"};
  for (const auto& name : sf.first_names) header.push_back("first_share_" + name);
  for (const auto& name : sf.second_names) header.push_back("second_share_" + name);
  std::vector<std::vector<std::string>> scatter;
  for (const auto& rec : sim.records) {
    std::vector<std::string> row{rec.id};
    const double nt = static_cast<double>(rec.total_first());
    const double yt = static_cast<double>(rec.total_second());
    for (int i = 0; i < rec.first_votes.size(); ++i)
      row.push_back(format_full(rec.first_votes(i) / nt));
    for (int j = 0; j < rec.second_votes.size(); ++j)
      row.push_back(format_full(rec.second_votes(j) / yt));
    scatter.push_back(std::move(row));
  }
  write_csv(out_path(args, "scatter.csv"), header, scatter);

  // a model config ready to refit the simulated file; covariate columns hold
  // the final (already centered) values, so they are read back verbatim
  json model;
  model["first_options"] = sf.first_names;
  model["second_options"] = sf.second_names;
  json covs = json::array();
  for (const auto& name : sim.covariate_names)
    covs.push_back(json{{"name", name}, {"source", "column"}, {"column", name}});
  model["covariates"] = covs;
  json effects = json::array();
  for (std::size_t e = 0; e < sf.scenario.design.effects.size(); ++e) {
    const auto& eff = sf.scenario.design.effects[e];
    effects.push_back(json{{"row", sf.first_names[static_cast<std::size_t>(eff.row)]},
                           {"col", sf.second_names[static_cast<std::size_t>(eff.col)]},
                           {"covariate", sim.covariate_names[static_cast<std::size_t>(eff.covariate)]}});
  }
  model["effects"] = effects;
  model["cluster_size"] = sf.scenario.cluster_size;
  model["tied_overdispersion"] = sf.scenario.tied_overdispersion;
  model["seed"] = sf.scenario.seed;
  model["fit"] = json{{"max_iterations", sf.fit_options.max_iterations}};
  std::ofstream mj(out_path(args, "model.json"));
  mj << model.dump(2) << "\n";

  std::cout << "wrote dataset.csv, truth_cells.csv, scatter.csv and model.json under "
            << args.out_dir << "\n";
  return 0;
}

int run_mc_study(const CommonArgs& args, int replicates, int threads) {
  ScenarioFile sf = load_scenario(args.config_path);
  if (args.seed) sf.scenario.seed = *args.seed;
  if (args.quasi) sf.fit_options.quasi = true;
  const McReport report = ::votrans::run_mc_study(sf.scenario, replicates, sf.fit_options, threads);

  const std::string text = mc_report_text(report);
  std::cout << text;
  std::ofstream txt(out_path(args, "mc_report.txt"));
  txt << text;

  std::vector<std::vector<std::string>> brows;
  for (const auto& p : report.params)
    brows.push_back({p.name, format_full(p.truth), format_full(p.bias), format_full(p.mean_se),
                     format_full(p.sd_estimates), format_full(p.se_ratio)});
  write_csv(out_path(args, "mc_bias.csv"),
            {"parameter", "truth", "bias", "mean_se", "sd_estimates", "se_ratio"}, brows);

  std::vector<std::vector<std::string>> xrows;
  for (const auto& p : report.params)
    for (std::size_t z = 0; z < report.z_thresholds.size(); ++z)
      xrows.push_back({p.name, format_full(report.z_thresholds[z]), format_full(p.exceedance[z])});
  write_csv(out_path(args, "mc_exceedance.csv"), {"parameter", "z", "proportion"}, xrows);

  std::vector<std::vector<std::string>> erows;
  const auto names = parameter_names(sf.scenario.model_spec());
  for (int t = 0; t < report.estimates.rows(); ++t)
    for (int a = 0; a < report.estimates.cols(); ++a)
      erows.push_back({std::to_string(report.replicate_ids[static_cast<std::size_t>(t)]),
                       names[static_cast<std::size_t>(a)], format_full(report.estimates(t, a)),
                       format_full(report.reported_se(t, a))});
  write_csv(out_path(args, "mc_estimates.csv"), {"replicate", "parameter", "estimate", "se"},
            erows);
  return 0;
}

int run_reconstruct(const CommonArgs& args, const std::string& params_path) {
  const ModelConfig cfg = load_config(args);
  const LoadedDataset data = load_dataset(args.data_path, cfg, args.exclude);
  const ModelSpec spec = cfg.spec(data.dims.n_stations);

  FitResult result;
  if (params_path.empty()) {
    result = fit(spec, data.records, cfg.fit_options);
    if (!result.converged) std::cerr << "warning: internal fit did not converge\n";
  } else {
    std::ifstream in(params_path);
    if (!in) throw std::runtime_error("cannot open '" + params_path + "'");
    json j;
    in >> j;
    result = fit_result_from_json(j);
  }

  std::vector<std::vector<std::string>> rows;
  for (const auto& rec : data.records) {
    if (rec.total_first() == 0 && rec.total_second() == 0) continue;
    const Eigen::MatrixXd probs = station_probs(spec, result.params, rec.covariates);
    const Eigen::MatrixXd cells =
        expected_cells_ipf(probs, rec.first_votes, rec.second_votes);
    for (int i = 0; i < cells.rows(); ++i)
      for (int j = 0; j < cells.cols(); ++j)
        rows.push_back({rec.id, cfg.first_options[static_cast<std::size_t>(i)],
                        cfg.second_options[static_cast<std::size_t>(j)],
                        format_full(cells(i, j))});
  }
  write_csv(out_path(args, "cells.csv"), {"station", "from", "to", "expected_count"}, rows);
  std::cout << "wrote expected cell counts for " << data.records.size() << " stations to "
            << out_path(args, "cells.csv") << "\n";
  return 0;
}

int run_sensitivity(const CommonArgs& args, std::vector<double> c_values) {
  const ModelConfig cfg = load_config(args);
  const LoadedDataset data = load_dataset(args.data_path, cfg, args.exclude);
  if (c_values.empty()) c_values = cfg.c_values;
  if (c_values.empty()) throw std::invalid_argument("sensitivity: no C values configured");

  std::vector<std::vector<std::string>> rows;
  std::vector<std::vector<std::string>> param_rows;
  Eigen::MatrixXd reference;
  double max_drift = 0.0;
  for (double C : c_values) {
    ModelSpec spec = cfg.spec(data.dims.n_stations);
    spec.cluster_size = C;
    FitResult result = fit(spec, data.records, cfg.fit_options);
    result.param_names = parameter_names(spec, cfg.covariate_names());
    const auto [avg, se] = average_transition_matrix(spec, result, data.records);
    if (reference.size() == 0)
      reference = avg;
    else
      max_drift = std::max(max_drift, (avg - reference).cwiseAbs().maxCoeff());
    std::cout << "C = " << C << (result.converged ? "" : "  (NOT CONVERGED)") << "\n"
              << transition_table_text(cfg.first_options, cfg.second_options, avg, se) << "\n";
    for (int i = 0; i < avg.rows(); ++i)
      for (int j = 0; j < avg.cols(); ++j)
        rows.push_back({format_full(C), cfg.first_options[static_cast<std::size_t>(i)],
                        cfg.second_options[static_cast<std::size_t>(j)], format_full(avg(i, j)),
                        format_full(se(i, j))});
    const Eigen::VectorXd flat = pack(result.params);
    for (int a = 0; a < flat.size(); ++a)
      param_rows.push_back({format_full(C), result.param_names[static_cast<std::size_t>(a)],
                            format_full(flat(a)), format_full(result.se(a))});
  }
  std::cout << "max change in any averaged transition probability across C values: "
            << format_fixed(max_drift, 6) << "\n";
  write_csv(out_path(args, "sensitivity.csv"), {"C", "from", "to", "estimate", "se"}, rows);
  write_csv(out_path(args, "sensitivity_params.csv"), {"C", "parameter", "estimate", "se"},
            param_rows);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"voting transition estimation from aggregated polling-station counts"};
  app.require_subcommand(1);

  CommonArgs args;
  int replicates = 100;
  int threads = 0;
  std::string params_path;
  std::vector<double> c_values;

  auto add_common = [&](CLI::App* cmd, bool needs_data) {
    if (needs_data) cmd->add_option("--data", args.data_path, "dataset CSV")->required();
    cmd->add_option("--config", args.config_path, "configuration file")->required();
    cmd->add_option("--out-dir", args.out_dir, "output directory");
    cmd->add_option("--seed", args.seed, "override the configured seed");
    cmd->add_option("--exclude-stations", args.exclude, "station ids to drop")->delimiter(',');
    cmd->add_flag("--allow-unbalanced", args.allow_unbalanced,
                  "keep stations whose electorates differ between elections");
    cmd->add_flag("--quasi", args.quasi, "block quasi-likelihood estimating equations");
  };

  CLI::App* cmd_fit = app.add_subcommand("fit", "maximum likelihood fit of the cluster model");
  add_common(cmd_fit, true);
  CLI::App* cmd_sim = app.add_subcommand("simulate", "generate an artificial dataset");
  add_common(cmd_sim, false);
  CLI::App* cmd_mc = app.add_subcommand("mc-study", "Monte Carlo bias and coverage study");
  add_common(cmd_mc, false);
  cmd_mc->add_option("--replicates", replicates, "number of replicates")->required();
  cmd_mc->add_option("--threads", threads, "worker threads (0 = all cores)");
  CLI::App* cmd_good = app.add_subcommand("goodman", "Goodman linear-regression baseline");
  add_common(cmd_good, true);
  CLI::App* cmd_rec =
      app.add_subcommand("reconstruct", "expected latent cells given both margins");
  add_common(cmd_rec, true);
  cmd_rec->add_option("--params", params_path, "fit_result.json from a previous fit");
  CLI::App* cmd_sens =
      app.add_subcommand("sensitivity", "refit over a list of cluster-size constants");
  add_common(cmd_sens, true);
  cmd_sens->add_option("--c-values", c_values, "cluster sizes to sweep")->delimiter(',');

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_fit->parsed()) return run_fit(args);
    if (cmd_sim->parsed()) return run_simulate(args);
    if (cmd_mc->parsed()) return run_mc_study(args, replicates, threads);
    if (cmd_good->parsed()) return run_goodman(args);
    if (cmd_rec->parsed()) return run_reconstruct(args, params_path);
    if (cmd_sens->parsed()) return run_sensitivity(args, c_values);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
