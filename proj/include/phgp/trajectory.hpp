#pragma once

// Sampled trajectory container shared by generators, derivative construction,
// identification, and the experiment harness. One row per sample.

#include <Eigen/Dense>

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace phgp {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Trajectory {
  VectorXd times;
  MatrixXd states;                // N x d
  MatrixXd inputs;                // N x m
  std::optional<MatrixXd> derivs;  // N x d, filled by a generator oracle or build_derivatives
  std::map<std::string, std::string> metadata;

  Index n_samples() const { return times.size(); }
  Index state_dim() const { return states.cols(); }
  Index input_dim() const { return inputs.cols(); }
};

inline void validate_trajectory(const Trajectory& t) {
  if (t.times.size() == 0) throw std::invalid_argument("trajectory: no samples");
  if (t.states.rows() != t.times.size() || t.inputs.rows() != t.times.size())
    throw std::invalid_argument("trajectory: row counts disagree");
  if (t.derivs && (t.derivs->rows() != t.times.size() || t.derivs->cols() != t.states.cols()))
    throw std::invalid_argument("trajectory: derivative block shape disagrees");
  for (Index i = 0; i + 1 < t.times.size(); ++i)
    if (!(t.times[i] < t.times[i + 1]))
      throw std::invalid_argument("trajectory: times must be strictly increasing");
}

// Row subset in the given order; indices must keep times strictly increasing
// if the result is to pass validate_trajectory.
inline Trajectory select_rows(const Trajectory& t, const std::vector<Index>& rows) {
  Trajectory out;
  out.metadata = t.metadata;
  const Index n = static_cast<Index>(rows.size());
  out.times.resize(n);
  out.states.resize(n, t.states.cols());
  out.inputs.resize(n, t.inputs.cols());
  if (t.derivs) out.derivs.emplace(MatrixXd(n, t.states.cols()));
  for (Index i = 0; i < n; ++i) {
    const Index r = rows[static_cast<std::size_t>(i)];
    if (r < 0 || r >= t.times.size()) throw std::out_of_range("trajectory: row index out of range");
    out.times[i] = t.times[r];
    out.states.row(i) = t.states.row(r);
    out.inputs.row(i) = t.inputs.row(r);
    if (t.derivs) out.derivs->row(i) = t.derivs->row(r);
  }
  return out;
}

}  // namespace phgp
