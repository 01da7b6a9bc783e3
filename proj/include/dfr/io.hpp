#pragma once

#include <Eigen/Dense>
#include <cerrno>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dfr/basis.hpp"
#include "dfr/dataset.hpp"
#include "dfr/errors.hpp"
#include "dfr/fit.hpp"
#include "dfr/mstep.hpp"

namespace dfr {

using json = nlohmann::json;

namespace detail {

inline std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  size_t start = 0;
  for (;;) {
    size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      out.push_back(trim(line.substr(start)));
      return out;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
}

inline double parse_double(const std::string& s, const std::string& file, int line_no,
                           const char* what) {
  errno = 0;
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE)
    throw ValidationError(file + ":" + std::to_string(line_no) + ": invalid " + what + " '" +
                          s + "'");
  return v;
}

inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

}  // namespace detail

/// Shortest decimal form that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw NumericalError("format_double: conversion failed");
  return std::string(buf, ptr);
}

/// Writes via a temp file in the same directory, then renames into place.
inline void write_text_atomic(const std::string& path, const std::string& content) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp);
    out << content;
    if (!out.flush()) throw IoError("write failed for " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp + " to " + path + ": " + ec.message());
}

struct IngestResult {
  ObservedDataset data;
  double time_offset = 0.0;
  double time_scale = 1.0;
  std::vector<std::string> covariate_names;
  std::vector<std::string> warnings;
};

/// Reads the long-format observation file and the per-subject covariate
/// file. Subjects keep the covariate-file order; an intercept column is
/// prepended. Times are mapped affinely onto [0,1] only if they fall outside
/// it, and the map is reported so predictions can be expressed on the
/// original scale.
inline IngestResult ingest_csv(const std::string& obs_path, const std::string& cov_path) {
  IngestResult res;

  auto cov_lines = detail::read_lines(cov_path);
  if (cov_lines.empty()) throw ValidationError(cov_path + ": empty file");
  auto cov_header = detail::split_csv(cov_lines[0]);
  if (cov_header.empty() || cov_header[0] != "subject_id")
    throw ValidationError(cov_path + ":1: header must start with 'subject_id'");
  const int q_extra = static_cast<int>(cov_header.size()) - 1;
  res.covariate_names.assign(cov_header.begin() + 1, cov_header.end());
  std::map<std::string, int> index;
  std::vector<Subject> subjects;
  for (size_t ln = 1; ln < cov_lines.size(); ++ln) {
    if (detail::trim(cov_lines[ln]).empty()) continue;
    auto f = detail::split_csv(cov_lines[ln]);
    int line_no = static_cast<int>(ln) + 1;
    if (static_cast<int>(f.size()) != q_extra + 1)
      throw ValidationError(cov_path + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(q_extra + 1) + " fields, got " +
                            std::to_string(f.size()));
    if (f[0].empty())
      throw ValidationError(cov_path + ":" + std::to_string(line_no) + ": empty subject_id");
    if (index.count(f[0]))
      throw ValidationError(cov_path + ":" + std::to_string(line_no) + ": duplicate subject '" +
                            f[0] + "'");
    Subject s;
    s.id = f[0];
    s.x.resize(q_extra + 1);
    s.x[0] = 1.0;
    for (int c = 0; c < q_extra; ++c)
      s.x[c + 1] = detail::parse_double(f[c + 1], cov_path, line_no,
                                        res.covariate_names[c].c_str());
    index[s.id] = static_cast<int>(subjects.size());
    subjects.push_back(std::move(s));
  }
  if (subjects.empty()) throw ValidationError(cov_path + ": no subjects");

  auto obs_lines = detail::read_lines(obs_path);
  if (obs_lines.empty()) throw ValidationError(obs_path + ": empty file");
  auto obs_header = detail::split_csv(obs_lines[0]);
  if (obs_header.size() != 3 || obs_header[0] != "subject_id" || obs_header[1] != "time" ||
      obs_header[2] != "y")
    throw ValidationError(obs_path + ":1: header must be 'subject_id,time,y'");
  std::vector<std::vector<double>> times(subjects.size());
  std::vector<std::vector<int>> ys(subjects.size());
  for (size_t ln = 1; ln < obs_lines.size(); ++ln) {
    if (detail::trim(obs_lines[ln]).empty()) continue;
    auto f = detail::split_csv(obs_lines[ln]);
    int line_no = static_cast<int>(ln) + 1;
    if (f.size() != 3)
      throw ValidationError(obs_path + ":" + std::to_string(line_no) +
                            ": expected 3 fields, got " + std::to_string(f.size()));
    auto it = index.find(f[0]);
    if (it == index.end())
      throw ValidationError(obs_path + ":" + std::to_string(line_no) + ": subject '" + f[0] +
                            "' not present in " + cov_path);
    double t = detail::parse_double(f[1], obs_path, line_no, "time");
    for (double seen : times[it->second])
      if (seen == t)
        throw ValidationError(obs_path + ":" + std::to_string(line_no) + ": duplicate time " +
                              f[1] + " for subject '" + f[0] + "'");
    if (f[2] != "0" && f[2] != "1")
      throw ValidationError(obs_path + ":" + std::to_string(line_no) + ": y must be 0 or 1, got '" +
                            f[2] + "'");
    times[it->second].push_back(t);
    ys[it->second].push_back(f[2] == "1" ? 1 : 0);
  }

  double tmin = std::numeric_limits<double>::infinity();
  double tmax = -std::numeric_limits<double>::infinity();
  for (const auto& tv : times)
    for (double t : tv) {
      tmin = std::min(tmin, t);
      tmax = std::max(tmax, t);
    }
  if (!(tmin <= tmax)) throw ValidationError(obs_path + ": no observations");
  if (tmin < 0.0 || tmax > 1.0) {
    if (!(tmax > tmin))
      throw ValidationError(obs_path + ": all times equal; cannot rescale to [0,1]");
    res.time_offset = tmin;
    res.time_scale = tmax - tmin;
  }

  for (size_t i = 0; i < subjects.size(); ++i) {
    if (times[i].empty()) {
      res.warnings.push_back("subject '" + subjects[i].id +
                             "' has no observations and was dropped");
      continue;
    }
    Subject s = std::move(subjects[i]);
    const int m = static_cast<int>(times[i].size());
    s.times.resize(m);
    s.y.resize(m);
    for (int j = 0; j < m; ++j) {
      s.times[j] = (times[i][j] - res.time_offset) / res.time_scale;
      s.y[j] = ys[i][j];
    }
    res.data.subjects.push_back(std::move(s));
  }
  res.data.validate();
  return res;
}

namespace detail {

inline json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Eigen::MatrixXd matrix_from_json(const json& j, const char* what) {
  if (!j.is_array() || j.empty() || !j[0].is_array())
    throw ValidationError(std::string("params: ") + what + " must be a 2-d array");
  Eigen::MatrixXd m(j.size(), j[0].size());
  for (size_t r = 0; r < j.size(); ++r) {
    if (j[r].size() != j[0].size())
      throw ValidationError(std::string("params: ragged rows in ") + what);
    for (size_t c = 0; c < j[r].size(); ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

inline json basis_to_json(const BasisSystem& basis) {
  json b;
  if (basis.kind() == BasisSystem::Kind::fourier) {
    b["kind"] = "fourier";
    b["J"] = basis.size();
  } else {
    b["kind"] = "bspline";
    b["J"] = basis.size();
    b["degree"] = basis.degree();
    json knots = json::array();
    for (double k : basis.knots()) knots.push_back(k);
    b["knots"] = std::move(knots);
  }
  return b;
}

inline BasisSystem basis_from_json(const json& b) {
  if (!b.contains("kind")) throw ValidationError("params: basis missing 'kind'");
  std::string kind = b.at("kind").get<std::string>();
  if (kind == "fourier") return BasisSystem::fourier(b.at("J").get<int>());
  if (kind == "bspline") {
    int degree = b.at("degree").get<int>();
    if (b.contains("knots")) {
      std::vector<double> knots = b.at("knots").get<std::vector<double>>();
      return BasisSystem::bspline(degree, knots);
    }
    return BasisSystem::bspline(degree, b.at("J").get<int>());
  }
  throw ValidationError("params: unknown basis kind '" + kind + "'");
}

}  // namespace detail

struct ParamsFile {
  ModelParams params;
  BasisSystem basis = BasisSystem::fourier(1);
  int penalty_order = 2;
  json metadata;
};

inline void write_params_json(const std::string& path, const FitResult& fit,
                              const json& extra_metadata = json::object()) {
  json doc;
  doc["model"]["B"] = detail::matrix_to_json(fit.params.B);
  doc["model"]["sigma_theta"] = detail::matrix_to_json(fit.params.sigma_theta);
  doc["model"]["sigma2"] = fit.params.sigma2;
  doc["basis"] = detail::basis_to_json(fit.basis);
  doc["penalty_order"] = fit.penalty_order;
  json meta = extra_metadata;
  meta["converged"] = fit.converged;
  meta["iterations"] = fit.iterations;
  meta["forced_accepts"] = fit.forced_accepts;
  if (!fit.xi_trace.empty()) meta["xi_final"] = fit.xi_trace.back();
  if (!fit.delta_trace.empty()) meta["delta_final"] = fit.delta_trace.back();
  doc["metadata"] = std::move(meta);
  write_text_atomic(path, doc.dump(2) + "\n");
}

inline ParamsFile load_params_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ValidationError(path + ": invalid JSON: " + e.what());
  }
  ParamsFile pf;
  try {
    pf.params.B = detail::matrix_from_json(doc.at("model").at("B"), "B");
    pf.params.sigma_theta =
        detail::matrix_from_json(doc.at("model").at("sigma_theta"), "sigma_theta");
    pf.params.sigma2 = doc.at("model").at("sigma2").get<double>();
    pf.basis = detail::basis_from_json(doc.at("basis"));
    pf.penalty_order = doc.value("penalty_order", 2);
    pf.metadata = doc.value("metadata", json::object());
  } catch (const json::exception& e) {
    throw ValidationError(path + ": " + e.what());
  }
  if (pf.params.B.cols() != static_cast<Eigen::Index>(pf.basis.size()) ||
      pf.params.sigma_theta.rows() != pf.params.sigma_theta.cols() ||
      pf.params.sigma_theta.rows() != static_cast<Eigen::Index>(pf.basis.size()))
    throw ValidationError(path + ": dimension mismatch between model and basis");
  pf.params.validate();
  return pf;
}

/// Wide per-grid-point table of the standardized fit: alpha curves, the
/// standardized eigenfunctions, their (constant) eigenvalues, and the
/// standardized kernel diagonal.
inline void write_standardized_csv(const std::string& path, const StandardizedEstimate& est,
                                   const BasisSystem& basis) {
  const int G = static_cast<int>(est.grid.size());
  const int q = static_cast<int>(est.alpha.rows());
  const int J = static_cast<int>(basis.size());
  Eigen::MatrixXd Eg = basis.evaluate(est.grid);  // J x G
  std::string out = "t";
  for (int l = 0; l < q; ++l) out += ",alpha_" + std::to_string(l);
  for (int j = 1; j <= J; ++j) out += ",phi_" + std::to_string(j);
  for (int j = 1; j <= J; ++j) out += ",rho_" + std::to_string(j);
  out += ",kstar\n";
  Eigen::MatrixXd alpha_curves = est.alpha * Eg;  // q x G
  Eigen::MatrixXd phi_curves(J, G);
  for (int j = 0; j < J; ++j)
    phi_curves.row(j) = (Eg.transpose() * est.eigenpairs[j].phi).transpose();
  for (int g = 0; g < G; ++g) {
    out += format_double(est.grid[g]);
    for (int l = 0; l < q; ++l) out += "," + format_double(alpha_curves(l, g));
    for (int j = 0; j < J; ++j) out += "," + format_double(phi_curves(j, g));
    for (int j = 0; j < J; ++j) out += "," + format_double(est.eigenpairs[j].rho);
    out += "," + format_double(est.kernel_diag[g]);
    out += "\n";
  }
  write_text_atomic(path, out);
}

inline void write_trace_csv(const std::string& path, const FitResult& fit) {
  std::string out = "iteration,sigma2,xi,delta,lambda_mean\n";
  for (size_t i = 0; i < fit.sigma2_trace.size(); ++i) {
    out += std::to_string(i + 1);
    out += "," + format_double(fit.sigma2_trace[i]);
    out += "," + format_double(fit.xi_trace[i]);
    out += "," + format_double(fit.delta_trace[i]);
    out += "," + format_double(fit.lambda_trace[i].mean());
    out += "\n";
  }
  write_text_atomic(path, out);
}

inline void write_observations_csv(const std::string& path, const ObservedDataset& data) {
  std::string out = "subject_id,time,y\n";
  for (const auto& s : data.subjects)
    for (Eigen::Index j = 0; j < s.times.size(); ++j)
      out += s.id + "," + format_double(s.times[j]) + "," + std::to_string(s.y[j]) + "\n";
  write_text_atomic(path, out);
}

inline void write_covariates_csv(const std::string& path, const ObservedDataset& data,
                                 const std::vector<std::string>& names = {}) {
  const int q = data.subjects.empty() ? 1 : static_cast<int>(data.subjects[0].x.size());
  std::string out = "subject_id";
  for (int c = 1; c < q; ++c)
    out += "," + (c - 1 < static_cast<int>(names.size()) ? names[c - 1]
                                                         : "x" + std::to_string(c));
  out += "\n";
  for (const auto& s : data.subjects) {
    out += s.id;
    for (Eigen::Index c = 1; c < s.x.size(); ++c) out += "," + format_double(s.x[c]);
    out += "\n";
  }
  write_text_atomic(path, out);
}

}  // namespace dfr
