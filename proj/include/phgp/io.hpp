#pragma once

// File formats: trajectory CSV with a JSON metadata sidecar (path + ".meta.json")
// and the pH-DAE system JSON document. All doubles are written with 17
// significant digits so a read-back is bit-exact.

#include <phgp/phdae.hpp>
#include <phgp/trajectory.hpp>

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace phgp {

namespace detail {

inline std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, ',')) out.push_back(trim(cur));
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

inline double parse_double(const std::string& tok, const std::string& path, std::size_t line_no) {
  const char* begin = tok.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0') {
    std::ostringstream msg;
    msg << path << ":" << line_no << ": not a number: '" << tok << "'";
    throw std::runtime_error(msg.str());
  }
  return v;
}

inline nlohmann::json matrix_to_json(const MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline MatrixXd matrix_from_json(const nlohmann::json& j, const std::string& name) {
  if (!j.is_array() || j.empty() || !j[0].is_array())
    throw std::runtime_error("system json: '" + name + "' must be a nested array");
  const Index r = static_cast<Index>(j.size());
  const Index c = static_cast<Index>(j[0].size());
  MatrixXd m(r, c);
  for (Index i = 0; i < r; ++i) {
    if (static_cast<Index>(j[i].size()) != c)
      throw std::runtime_error("system json: ragged rows in '" + name + "'");
    for (Index k = 0; k < c; ++k) m(i, k) = j[i][k].get<double>();
  }
  return m;
}

}  // namespace detail

inline std::string sidecar_path(const std::string& csv_path) { return csv_path + ".meta.json"; }

// Header t,x1..xd,u1..um[,dx1..dxd]; one row per sample; metadata goes to the
// sidecar.
inline void write_trajectory_csv(const std::string& path, const Trajectory& traj) {
  validate_trajectory(traj);
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);

  const Index d = traj.state_dim(), m = traj.input_dim();
  f << "t";
  for (Index j = 0; j < d; ++j) f << ",x" << (j + 1);
  for (Index j = 0; j < m; ++j) f << ",u" << (j + 1);
  if (traj.derivs)
    for (Index j = 0; j < d; ++j) f << ",dx" << (j + 1);
  f << "\n";

  for (Index i = 0; i < traj.n_samples(); ++i) {
    f << detail::fmt17(traj.times[i]);
    for (Index j = 0; j < d; ++j) f << ',' << detail::fmt17(traj.states(i, j));
    for (Index j = 0; j < m; ++j) f << ',' << detail::fmt17(traj.inputs(i, j));
    if (traj.derivs)
      for (Index j = 0; j < d; ++j) f << ',' << detail::fmt17((*traj.derivs)(i, j));
    f << "\n";
  }
  if (!f) throw std::runtime_error("write failed: " + path);

  nlohmann::json meta(traj.metadata);
  std::ofstream mf(sidecar_path(path));
  if (!mf) throw std::runtime_error("cannot open for writing: " + sidecar_path(path));
  mf << meta.dump(2) << "\n";
}

inline Trajectory read_trajectory_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open: " + path);

  std::string line;
  if (!std::getline(f, line)) throw std::runtime_error(path + ":1: empty file");
  std::vector<std::string> head = detail::split_csv(line);
  if (head.empty() || head[0] != "t")
    throw std::runtime_error(path + ":1: header must start with 't'");

  std::size_t pos = 1;
  auto count_prefix = [&](const std::string& prefix) {
    Index n = 0;
    while (pos < head.size() && head[pos] == prefix + std::to_string(n + 1)) {
      ++n;
      ++pos;
    }
    return n;
  };
  const Index d = count_prefix("x");
  const Index m = count_prefix("u");
  const Index dd = count_prefix("dx");
  if (d == 0 || pos != head.size() || (dd != 0 && dd != d))
    throw std::runtime_error(path + ":1: malformed header");
  const std::size_t n_fields = head.size();

  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(f, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    std::vector<std::string> toks = detail::split_csv(line);
    if (toks.size() != n_fields) {
      std::ostringstream msg;
      msg << path << ":" << line_no << ": expected " << n_fields << " fields, got " << toks.size();
      throw std::runtime_error(msg.str());
    }
    std::vector<double> row(n_fields);
    for (std::size_t k = 0; k < n_fields; ++k) row[k] = detail::parse_double(toks[k], path, line_no);
    rows.push_back(std::move(row));
  }

  Trajectory traj;
  const Index n = static_cast<Index>(rows.size());
  traj.times.resize(n);
  traj.states.resize(n, d);
  traj.inputs.resize(n, m);
  if (dd > 0) traj.derivs.emplace(MatrixXd(n, d));
  for (Index i = 0; i < n; ++i) {
    const auto& row = rows[static_cast<std::size_t>(i)];
    traj.times[i] = row[0];
    for (Index j = 0; j < d; ++j) traj.states(i, j) = row[1 + j];
    for (Index j = 0; j < m; ++j) traj.inputs(i, j) = row[1 + d + j];
    if (dd > 0)
      for (Index j = 0; j < d; ++j) (*traj.derivs)(i, j) = row[1 + d + m + j];
  }

  std::ifstream mf(sidecar_path(path));
  if (mf) {
    nlohmann::json meta = nlohmann::json::parse(mf);
    for (auto& [k, v] : meta.items()) traj.metadata[k] = v.get<std::string>();
  }
  validate_trajectory(traj);
  return traj;
}

inline void write_system_json(const std::string& path, const PhDaeSystem& sys) {
  validate_system(sys);
  nlohmann::json doc;
  doc["E"] = detail::matrix_to_json(sys.E);
  doc["J"] = detail::matrix_to_json(sys.J);
  doc["R"] = detail::matrix_to_json(sys.R);
  doc["B"] = detail::matrix_to_json(sys.B);
  doc["labels"] = sys.state_labels;
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << doc.dump(2) << "\n";
}

// Oracles do not survive serialization; effort labels regenerate as z1..zd.
inline PhDaeSystem read_system_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open: " + path);
  nlohmann::json doc = nlohmann::json::parse(f);
  PhDaeSystem sys;
  sys.E = detail::matrix_from_json(doc.at("E"), "E");
  sys.J = detail::matrix_from_json(doc.at("J"), "J");
  sys.R = detail::matrix_from_json(doc.at("R"), "R");
  sys.B = detail::matrix_from_json(doc.at("B"), "B");
  if (doc.contains("labels")) sys.state_labels = doc["labels"].get<std::vector<std::string>>();
  for (Index j = 0; j < sys.E.rows(); ++j) sys.effort_labels.push_back("z" + std::to_string(j + 1));
  validate_system(sys);
  return sys;
}

}  // namespace phgp
