// Human-readable tables (4 decimals, like the published ones) and lossless
// JSON round-trips for fit results.
#pragma once

#include <json.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "votrans/csv.hpp"
#include "votrans/fit.hpp"
#include "votrans/mc_study.hpp"

namespace votrans {

namespace detail {

inline nlohmann::json json_real(double x) {
  if (!std::isfinite(x)) return nullptr;
  return x;
}

inline double real_from_json(const nlohmann::json& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  return j.get<double>();
}

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(json_real(m(i, j)));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const int rows = static_cast<int>(j.size());
  const int cols = rows > 0 ? static_cast<int>(j.at(0).size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int k = 0; k < cols; ++k) m(i, k) = real_from_json(j.at(i).at(k));
  return m;
}

inline nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  nlohmann::json out = nlohmann::json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(json_real(v(i)));
  return out;
}

inline Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i)
    v(i) = real_from_json(j.at(static_cast<std::size_t>(i)));
  return v;
}

}  // namespace detail

inline nlohmann::json fit_result_to_json(const FitResult& r) {
  nlohmann::json j;
  j["alpha"] = detail::matrix_to_json(r.params.alpha);
  j["beta"] = detail::vector_to_json(r.params.beta);
  j["tau"] = detail::vector_to_json(r.params.tau);
  j["loglik"] = detail::json_real(r.loglik);
  j["information"] = detail::matrix_to_json(r.information);
  j["se"] = detail::vector_to_json(r.se);
  j["iterations"] = r.iterations;
  j["converged"] = r.converged;
  j["clamp_count"] = r.clamp_count;
  j["at_boundary"] = r.at_boundary;
  j["param_names"] = r.param_names;
  return j;
}

inline FitResult fit_result_from_json(const nlohmann::json& j) {
  FitResult r;
  r.params.alpha = detail::matrix_from_json(j.at("alpha"));
  r.params.beta = detail::vector_from_json(j.at("beta"));
  r.params.tau = detail::vector_from_json(j.at("tau"));
  r.loglik = detail::real_from_json(j.at("loglik"));
  r.information = detail::matrix_from_json(j.at("information"));
  r.se = detail::vector_from_json(j.at("se"));
  r.iterations = j.at("iterations").get<int>();
  r.converged = j.at("converged").get<bool>();
  r.clamp_count = j.at("clamp_count").get<long long>();
  r.at_boundary = j.at("at_boundary").get<std::vector<int>>();
  r.param_names = j.at("param_names").get<std::vector<std::string>>();
  return r;
}

// Right-aligned plain-text table; first column left-aligned.
inline std::string text_table(const std::vector<std::string>& header,
                              const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t j = 0; j < header.size(); ++j) width[j] = header[j].size();
  for (const auto& row : rows)
    for (std::size_t j = 0; j < row.size() && j < width.size(); ++j)
      width[j] = std::max(width[j], row[j].size());
  std::ostringstream out;
  auto emit = [&](const std::vector<std::string>& row) {
    for (std::size_t j = 0; j < width.size(); ++j) {
      const std::string& cell = j < row.size() ? row[j] : std::string();
      if (j == 0) {
        out << cell << std::string(width[j] - cell.size(), ' ');
      } else {
        out << "  " << std::string(width[j] - cell.size(), ' ') << cell;
      }
    }
    out << "\n";
  };
  emit(header);
  for (const auto& row : rows) emit(row);
  return out.str();
}

// Estimates with standard errors underneath, the published layout.
inline std::string transition_table_text(const std::vector<std::string>& first_options,
                                         const std::vector<std::string>& second_options,
                                         const Eigen::MatrixXd& probs, const Eigen::MatrixXd& se) {
  std::vector<std::string> header{""};
  header.insert(header.end(), second_options.begin(), second_options.end());
  std::vector<std::vector<std::string>> rows;
  for (int i = 0; i < probs.rows(); ++i) {
    std::vector<std::string> est{first_options[static_cast<std::size_t>(i)]};
    std::vector<std::string> ses{"  s.e."};
    for (int j = 0; j < probs.cols(); ++j) {
      est.push_back(format_fixed(probs(i, j)));
      ses.push_back(format_fixed(se(i, j)));
    }
    rows.push_back(std::move(est));
    rows.push_back(std::move(ses));
  }
  return text_table(header, rows);
}

inline std::string parameter_table_text(const FitResult& r) {
  std::vector<std::vector<std::string>> rows;
  const Eigen::VectorXd flat = pack(r.params);
  for (int a = 0; a < flat.size(); ++a) {
    std::string name = r.param_names[static_cast<std::size_t>(a)];
    for (int idx : r.at_boundary)
      if (idx == a) name += " *";  // at the box; s.e. unreliable
    rows.push_back({name, format_fixed(flat(a)), format_fixed(r.se(a))});
  }
  return text_table({"parameter", "estimate", "s.e."}, rows);
}

inline std::string mc_report_text(const McReport& rep) {
  std::ostringstream out;
  std::vector<std::vector<std::string>> rows;
  for (const auto& p : rep.params)
    rows.push_back({p.name, format_fixed(p.truth), format_fixed(p.bias), format_fixed(p.mean_se),
                    format_fixed(p.sd_estimates), format_fixed(p.se_ratio)});
  out << text_table({"parameter", "truth", "bias", "mean s.e.", "sd(est)", "s.e. ratio"}, rows);
  out << "\n";
  std::vector<std::string> header{"parameter"};
  for (double z : rep.z_thresholds) header.push_back(format_fixed(z));
  std::vector<std::vector<std::string>> xrows;
  for (const auto& p : rep.params) {
    std::vector<std::string> row{p.name};
    for (double e : p.exceedance) row.push_back(format_fixed(e));
    xrows.push_back(std::move(row));
  }
  out << "proportion of |error| exceeding z * reported s.e.\n";
  out << text_table(header, xrows);
  out << "\nreplicates: " << rep.replicates << "  failed fits: " << rep.failures << "\n";
  return out.str();
}

}  // namespace votrans
