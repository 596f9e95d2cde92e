// Dataset ingestion and model configuration: CSV parsing against declared
// option columns, balance validation, station exclusions and covariate
// construction (raw columns or centered logits of first-election shares).
#pragma once

#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "votrans/csv.hpp"
#include "votrans/fit.hpp"
#include "votrans/model.hpp"

namespace votrans {

struct CovariateConfig {
  enum class Source { Column, CenteredLogitShare };
  std::string name;
  Source source = Source::Column;
  std::string column;                    // for Column
  std::string option;                    // for CenteredLogitShare: first-election option
  std::vector<std::string> denominator;  // share denominator options; empty = all first options
  double epsilon = 1e-4;
};

struct EffectConfig {
  std::string row;        // first-election option name
  std::string col;        // second-election option name (not the reference)
  std::string covariate;  // covariate name
};

struct ModelConfig {
  std::vector<std::string> first_options;
  std::vector<std::string> second_options;  // last entry is the reference category
  std::string station_column = "station";
  std::vector<CovariateConfig> covariates;
  std::vector<EffectConfig> effects;
  double cluster_size = 50.0;
  std::vector<double> c_values{10.0, 50.0, 100.0};
  bool tied_overdispersion = false;
  bool allow_unbalanced = false;
  std::vector<std::string> exclude_stations;
  std::uint64_t seed = 0;
  FitOptions fit_options;

  int option_index(const std::vector<std::string>& options, const std::string& name,
                   const char* what) const {
    for (std::size_t i = 0; i < options.size(); ++i)
      if (options[i] == name) return static_cast<int>(i);
    throw std::invalid_argument(std::string("config: unknown ") + what + " option '" + name + "'");
  }

  int covariate_index(const std::string& name) const {
    for (std::size_t i = 0; i < covariates.size(); ++i)
      if (covariates[i].name == name) return static_cast<int>(i);
    throw std::invalid_argument("config: unknown covariate '" + name + "'");
  }

  CovariateDesign design() const {
    CovariateDesign d;
    d.n_covariates = static_cast<int>(covariates.size());
    for (const auto& e : effects) {
      CovariateEffect eff;
      eff.row = option_index(first_options, e.row, "first-election");
      eff.col = option_index(second_options, e.col, "second-election");
      eff.covariate = covariate_index(e.covariate);
      d.effects.push_back(eff);
    }
    return d;
  }

  void validate() const {
    if (first_options.size() < 1 || second_options.size() < 2)
      throw std::invalid_argument("config: need at least 1 first- and 2 second-election options");
    std::set<std::string> names;
    for (const auto& o : first_options)
      if (!names.insert("f:" + o).second)
        throw std::invalid_argument("config: duplicate first-election option '" + o + "'");
    for (const auto& o : second_options)
      if (!names.insert("s:" + o).second)
        throw std::invalid_argument("config: duplicate second-election option '" + o + "'");
    std::set<std::string> cov_names;
    for (const auto& cv : covariates) {
      if (!cov_names.insert(cv.name).second)
        throw std::invalid_argument("config: duplicate covariate '" + cv.name + "'");
      if (cv.source == CovariateConfig::Source::CenteredLogitShare) {
        for (const auto& second : second_options)
          if (cv.option == second &&
              std::find(first_options.begin(), first_options.end(), cv.option) ==
                  first_options.end())
            throw std::invalid_argument(
                "config: covariate '" + cv.name + "' is built from second-election option '" +
                cv.option +
                "'; covariates must come from margins observed jointly with the first election "
                "(shares of the second election would require joint data that aggregation "
                "destroys)");
        option_index(first_options, cv.option, "first-election");
        for (const auto& d : cv.denominator) option_index(first_options, d, "first-election");
      }
    }
    Dimensions dims{static_cast<int>(first_options.size()),
                    static_cast<int>(second_options.size()), 1};
    design().validate(dims);
    if (!(cluster_size > 0.0)) throw std::invalid_argument("config: cluster size must be positive");
    fit_options.validate();
  }

  ModelSpec spec(int n_stations) const {
    ModelSpec s;
    s.dims = Dimensions{static_cast<int>(first_options.size()),
                        static_cast<int>(second_options.size()), n_stations};
    s.design = design();
    s.cluster_size = cluster_size;
    s.tied_overdispersion = tied_overdispersion;
    return s;
  }

  std::vector<std::string> covariate_names() const {
    std::vector<std::string> out;
    for (const auto& cv : covariates) out.push_back(cv.name);
    return out;
  }
};

inline ModelConfig parse_model_config(const nlohmann::json& j) {
  ModelConfig cfg;
  cfg.first_options = j.at("first_options").get<std::vector<std::string>>();
  cfg.second_options = j.at("second_options").get<std::vector<std::string>>();
  cfg.station_column = j.value("station_column", std::string("station"));
  if (j.contains("covariates")) {
    for (const auto& jc : j.at("covariates")) {
      CovariateConfig cv;
      cv.name = jc.at("name").get<std::string>();
      const std::string source = jc.value("source", std::string("column"));
      if (source == "column") {
        cv.source = CovariateConfig::Source::Column;
        cv.column = jc.value("column", cv.name);
      } else if (source == "centered_logit_share") {
        cv.source = CovariateConfig::Source::CenteredLogitShare;
        cv.option = jc.at("option").get<std::string>();
        if (jc.contains("denominator"))
          cv.denominator = jc.at("denominator").get<std::vector<std::string>>();
        cv.epsilon = jc.value("epsilon", 1e-4);
      } else {
        throw std::invalid_argument("config: unknown covariate source '" + source + "'");
      }
      cfg.covariates.push_back(std::move(cv));
    }
  }
  if (j.contains("effects")) {
    for (const auto& je : j.at("effects"))
      cfg.effects.push_back(EffectConfig{je.at("row").get<std::string>(),
                                         je.at("col").get<std::string>(),
                                         je.at("covariate").get<std::string>()});
  }
  cfg.cluster_size = j.value("cluster_size", 50.0);
  if (j.contains("c_values")) cfg.c_values = j.at("c_values").get<std::vector<double>>();
  cfg.tied_overdispersion = j.value("tied_overdispersion", false);
  cfg.allow_unbalanced = j.value("allow_unbalanced", false);
  if (j.contains("exclude_stations"))
    cfg.exclude_stations = j.at("exclude_stations").get<std::vector<std::string>>();
  cfg.seed = j.value("seed", static_cast<std::uint64_t>(0));
  if (j.contains("fit")) {
    const auto& jf = j.at("fit");
    cfg.fit_options.max_iterations = jf.value("max_iterations", 100);
    cfg.fit_options.gradient_tolerance = jf.value("gradient_tolerance", 1e-6);
    cfg.fit_options.step_halving_max = jf.value("step_halving_max", 10);
    cfg.fit_options.ridge = jf.value("ridge", 1e-8);
    cfg.fit_options.logit_box = jf.value("logit_box", 15.0);
    cfg.fit_options.quasi = jf.value("quasi", false);
  }
  cfg.validate();
  return cfg;
}

inline ModelConfig load_model_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  nlohmann::json j;
  in >> j;
  return parse_model_config(j);
}

// Centered logit of per-station shares; shares are clamped away from {0,1}.
inline Eigen::VectorXd build_covariate(const std::vector<double>& shares, double epsilon = 1e-4) {
  for (double s : shares)
    if (!(s >= 0.0 && s <= 1.0))
      throw std::invalid_argument("build_covariate: share outside [0, 1]");
  const auto v = centered_logit_shares(shares, epsilon);
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

struct LoadedDataset {
  std::vector<StationRecord> records;
  Dimensions dims;
  std::vector<std::string> covariate_names;
  std::vector<std::string> warnings;  // e.g. unbalanced stations kept by waiver
};

namespace detail {

inline long long parse_count(const std::string& text, int row, const std::string& column) {
  std::size_t pos = 0;
  long long value = 0;
  try {
    value = std::stoll(text, &pos);
  } catch (const std::exception&) {
    throw std::runtime_error("row " + std::to_string(row) + ", column '" + column +
                             "': '" + text + "' is not an integer count");
  }
  if (pos != text.size())
    throw std::runtime_error("row " + std::to_string(row) + ", column '" + column + "': '" + text +
                             "' is not an integer count");
  if (value < 0)
    throw std::runtime_error("row " + std::to_string(row) + ", column '" + column +
                             "': negative count " + text);
  return value;
}

inline double parse_real(const std::string& text, int row, const std::string& column) {
  std::size_t pos = 0;
  double value = 0;
  try {
    value = std::stod(text, &pos);
  } catch (const std::exception&) {
    throw std::runtime_error("row " + std::to_string(row) + ", column '" + column + "': '" + text +
                             "' is not a number");
  }
  if (pos != text.size())
    throw std::runtime_error("row " + std::to_string(row) + ", column '" + column + "': '" + text +
                             "' is not a number");
  return value;
}

}  // namespace detail

// Rows are numbered from 1, header excluded, matching error messages.
inline LoadedDataset load_dataset(const std::string& path, const ModelConfig& cfg,
                                  const std::vector<std::string>& extra_exclusions = {}) {
  cfg.validate();
  const CsvTable table = read_csv(path);
  const int r = static_cast<int>(cfg.first_options.size());
  const int c = static_cast<int>(cfg.second_options.size());

  const int id_col = table.column(cfg.station_column);
  std::vector<int> first_cols, second_cols;
  for (const auto& o : cfg.first_options) first_cols.push_back(table.column(o));
  for (const auto& o : cfg.second_options) second_cols.push_back(table.column(o));
  std::vector<int> raw_cov_cols;
  for (const auto& cv : cfg.covariates)
    raw_cov_cols.push_back(cv.source == CovariateConfig::Source::Column ? table.column(cv.column)
                                                                        : -1);

  std::set<std::string> excluded(cfg.exclude_stations.begin(), cfg.exclude_stations.end());
  excluded.insert(extra_exclusions.begin(), extra_exclusions.end());

  LoadedDataset out;
  out.covariate_names = cfg.covariate_names();
  std::set<std::string> seen_ids;
  std::vector<int> source_rows;
  std::vector<std::string> balance_errors;
  for (std::size_t t = 0; t < table.rows.size(); ++t) {
    const int row_no = static_cast<int>(t) + 1;
    const auto& fields = table.rows[t];
    StationRecord rec;
    rec.id = fields[static_cast<std::size_t>(id_col)];
    if (excluded.count(rec.id)) continue;
    if (!seen_ids.insert(rec.id).second)
      throw std::runtime_error("row " + std::to_string(row_no) + ": duplicate station id '" +
                               rec.id + "'");
    rec.first_votes.resize(r);
    rec.second_votes.resize(c);
    for (int i = 0; i < r; ++i)
      rec.first_votes(i) = static_cast<int>(detail::parse_count(
          fields[static_cast<std::size_t>(first_cols[static_cast<std::size_t>(i)])], row_no,
          cfg.first_options[static_cast<std::size_t>(i)]));
    for (int j = 0; j < c; ++j)
      rec.second_votes(j) = static_cast<int>(detail::parse_count(
          fields[static_cast<std::size_t>(second_cols[static_cast<std::size_t>(j)])], row_no,
          cfg.second_options[static_cast<std::size_t>(j)]));
    if (!rec.balanced()) {
      const std::string msg = "row " + std::to_string(row_no) + " (station '" + rec.id +
                              "'): first-election total " + std::to_string(rec.total_first()) +
                              " != second-election total " + std::to_string(rec.total_second());
      if (cfg.allow_unbalanced)
        out.warnings.push_back("kept unbalanced " + msg);
      else
        balance_errors.push_back(msg);
    }
    rec.covariates = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(cfg.covariates.size()));
    for (std::size_t v = 0; v < cfg.covariates.size(); ++v)
      if (raw_cov_cols[v] >= 0)
        rec.covariates(static_cast<Eigen::Index>(v)) = detail::parse_real(
            fields[static_cast<std::size_t>(raw_cov_cols[v])], row_no, cfg.covariates[v].column);
    out.records.push_back(std::move(rec));
    source_rows.push_back(row_no);
  }
  if (!balance_errors.empty()) {
    std::string msg = "dataset has unbalanced stations (pass --allow-unbalanced to keep them):";
    for (const auto& e : balance_errors) msg += "\n  " + e;
    throw std::runtime_error(msg);
  }
  if (out.records.empty()) throw std::runtime_error("'" + path + "': no stations left after exclusions");

  // share-based covariates, centered over the loaded stations
  for (std::size_t v = 0; v < cfg.covariates.size(); ++v) {
    const auto& cv = cfg.covariates[v];
    if (cv.source != CovariateConfig::Source::CenteredLogitShare) continue;
    const int opt = cfg.option_index(cfg.first_options, cv.option, "first-election");
    std::vector<int> denom;
    if (cv.denominator.empty()) {
      for (int i = 0; i < r; ++i) denom.push_back(i);
    } else {
      for (const auto& d : cv.denominator)
        denom.push_back(cfg.option_index(cfg.first_options, d, "first-election"));
    }
    std::vector<double> shares(out.records.size());
    for (std::size_t s = 0; s < out.records.size(); ++s) {
      double total = 0.0;
      for (int i : denom) total += out.records[s].first_votes(i);
      shares[s] = total > 0.0 ? out.records[s].first_votes(opt) / total : 0.0;
      shares[s] = std::min(1.0, std::max(0.0, shares[s]));
    }
    const Eigen::VectorXd values = build_covariate(shares, cv.epsilon);
    for (std::size_t s = 0; s < out.records.size(); ++s)
      out.records[s].covariates(static_cast<Eigen::Index>(v)) =
          values(static_cast<Eigen::Index>(s));
  }

  out.dims = Dimensions{r, c, static_cast<int>(out.records.size())};
  for (const auto& rec : out.records) validate_station(rec, out.dims);
  return out;
}

// Writes a dataset in the same layout load_dataset reads.
inline void write_dataset(const std::string& path, const std::vector<StationRecord>& records,
                          const std::vector<std::string>& first_options,
                          const std::vector<std::string>& second_options,
                          const std::vector<std::string>& covariate_names,
                          const std::string& station_column = "station") {
  std::vector<std::string> header{station_column};
  header.insert(header.end(), first_options.begin(), first_options.end());
  header.insert(header.end(), second_options.begin(), second_options.end());
  header.insert(header.end(), covariate_names.begin(), covariate_names.end());
  std::vector<std::vector<std::string>> rows;
  for (const auto& rec : records) {
    std::vector<std::string> row{rec.id};
    for (int i = 0; i < rec.first_votes.size(); ++i)
      row.push_back(std::to_string(rec.first_votes(i)));
    for (int j = 0; j < rec.second_votes.size(); ++j)
      row.push_back(std::to_string(rec.second_votes(j)));
    for (int v = 0; v < rec.covariates.size(); ++v) row.push_back(format_full(rec.covariates(v)));
    rows.push_back(std::move(row));
  }
  write_csv(path, header, rows);
}

}  // namespace votrans
