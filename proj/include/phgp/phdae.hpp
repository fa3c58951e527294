#pragma once

// pH-DAE system representation, output-data assembly, the end-to-end effort
// identification pipeline, conditioning-based effort recovery, subsystem
// coupling, and the structural validators.
//
// The system class is E xdot = (J - R) z(x) + B u with constant E, J, R, B,
// y = B^T z, and E similar to diag(D_reg, 0) by a simultaneous row/column
// permutation.

#include <phgp/deriv.hpp>
#include <phgp/gp.hpp>
#include <phgp/kernels.hpp>
#include <phgp/optim.hpp>
#include <phgp/trajectory.hpp>

#include <Eigen/Dense>

#include <functional>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace phgp {

struct PhDaeSystem {
  MatrixXd E, J, R;  // d x d
  MatrixXd B;        // d x m
  std::vector<std::string> state_labels;
  std::vector<std::string> effort_labels;

  // analytic oracles, empty when the system is not a benchmark
  std::function<double(const VectorXd&)> hamiltonian;
  std::function<VectorXd(const VectorXd&)> hamiltonian_gradient;
  std::function<VectorXd(const VectorXd&)> effort;

  Index state_dim() const { return E.rows(); }
  Index input_dim() const { return B.cols(); }
  Index effort_dim() const { return E.rows(); }
};

// Rows of E that are not identically zero; these are the components whose
// derivative samples are consumed by build_outputs.
inline std::vector<bool> differential_mask(const PhDaeSystem& sys) {
  std::vector<bool> mask(static_cast<std::size_t>(sys.E.rows()));
  for (Index i = 0; i < sys.E.rows(); ++i)
    mask[static_cast<std::size_t>(i)] = sys.E.row(i).cwiseAbs().maxCoeff() > 0.0;
  return mask;
}

inline void validate_system(const PhDaeSystem& sys) {
  const Index d = sys.E.rows();
  if (d == 0) throw std::invalid_argument("system: empty");
  if (sys.E.cols() != d || sys.J.rows() != d || sys.J.cols() != d || sys.R.rows() != d ||
      sys.R.cols() != d || sys.B.rows() != d)
    throw std::invalid_argument("system: matrix shapes disagree");

  if ((sys.J + sys.J.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw std::invalid_argument("system: J must be skew-symmetric");
  if ((sys.R - sys.R.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw std::invalid_argument("system: R must be symmetric");
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sys.R);
  const double lmax = es.eigenvalues().cwiseAbs().maxCoeff();
  if (es.eigenvalues().minCoeff() < -1e-10 * std::max(lmax, 1.0))
    throw std::invalid_argument("system: R must be positive semidefinite");

  // E = diag(D_reg, 0) up to a simultaneous row/column permutation: zero rows
  // and zero columns must select the same index set and the complement block
  // must be regular.
  std::vector<Index> live;
  for (Index i = 0; i < d; ++i) {
    const bool row_zero = sys.E.row(i).cwiseAbs().maxCoeff() == 0.0;
    const bool col_zero = sys.E.col(i).cwiseAbs().maxCoeff() == 0.0;
    if (row_zero != col_zero)
      throw std::invalid_argument("system: E zero rows and zero columns must coincide");
    if (!row_zero) live.push_back(i);
  }
  if (!live.empty()) {
    MatrixXd D_reg(static_cast<Index>(live.size()), static_cast<Index>(live.size()));
    for (std::size_t a = 0; a < live.size(); ++a)
      for (std::size_t b = 0; b < live.size(); ++b)
        D_reg(static_cast<Index>(a), static_cast<Index>(b)) = sys.E(live[a], live[b]);
    Eigen::FullPivLU<MatrixXd> lu(D_reg);
    if (!lu.isInvertible())
      throw std::invalid_argument("system: regular block of E is singular");
  }
}

struct OutputData {
  MatrixXd X;  // N x d training inputs (the sampled states)
  VectorXd Y;  // N*D stacked task-major targets
};

// y_i = E xdot(t_i) - B u(t_i). Only columns of E that are nonzero consume
// derivative entries, so algebraic derivative columns may hold anything.
inline OutputData build_outputs(const Trajectory& traj, const PhDaeSystem& sys) {
  validate_trajectory(traj);
  if (traj.state_dim() != sys.state_dim() || traj.input_dim() != sys.input_dim())
    throw std::invalid_argument("build_outputs: trajectory and system dimensions disagree");
  if (!traj.derivs)
    throw std::invalid_argument(
        "build_outputs: trajectory has no derivative samples, run build_derivatives first");

  const Index n = traj.n_samples(), d = sys.state_dim();
  std::vector<Index> live_cols;
  for (Index j = 0; j < d; ++j)
    if (sys.E.col(j).cwiseAbs().maxCoeff() > 0.0) live_cols.push_back(j);

  MatrixXd Ymat(n, d);
  Ymat.noalias() = -traj.inputs * sys.B.transpose();
  for (Index j : live_cols) Ymat.noalias() += traj.derivs->col(j) * sys.E.col(j).transpose();

  OutputData out;
  out.X = traj.states;
  out.Y = Eigen::Map<const VectorXd>(Ymat.data(), n * d);
  return out;
}

struct IdentifyConfig {
  DerivativeMethod derivative;
  AdamConfig adam;
  // vv^T + diag(tau) intertask covariance; without the diagonal the posterior
  // mean components are proportional and multi-directional targets cannot fit
  bool intertask_diag = true;
};

struct EffortModel {
  MtGpModel gp;  // transform = J - R
  PhDaeSystem system;
  OptimTrace trace;
  std::map<std::string, std::string> metadata;
};

namespace detail {

inline double condition_estimate(const MatrixXd& A) {
  Eigen::JacobiSVD<MatrixXd> svd(A);
  const double smin = svd.singularValues().minCoeff();
  if (smin <= 0.0) return std::numeric_limits<double>::infinity();
  return svd.singularValues().maxCoeff() / smin;
}

inline ObjectiveFn mt_objective(const MtGpModel& base) {
  return [&base](const VectorXd& theta) {
    ObjectiveEval e;
    try {
      MtGpModel trial = base;
      unpack_params(theta, trial);
      fit_cache(trial);
      e.value = log_marginal_likelihood(trial);
      e.gradient = lml_gradient(trial);
    } catch (const std::exception&) {
      e.value = -std::numeric_limits<double>::infinity();
      e.gradient = VectorXd::Zero(theta.size());
    }
    return e;
  };
}

}  // namespace detail

// Steps 1-4: derivative construction, X/Y assembly, hyperparameter
// optimization of the transformed multi-task GP. Derivative samples already
// on the trajectory are reused when their recorded method matches the
// requested one (the gp_full method must be computed on the full data set
// before subsetting, so a subset cannot recompute it).
inline EffortModel identify_effort(const Trajectory& trajectory, const PhDaeSystem& sys,
                                   const IdentifyConfig& config = {}) {
  validate_system(sys);
  validate_trajectory(trajectory);

  MatrixXd A = sys.J - sys.R;
  const double cond = detail::condition_estimate(A);
  if (!(cond < 1e12)) {
    std::ostringstream msg;
    msg << "effort not identifiable: J - R is singular or near-singular (cond " << cond << ")";
    throw std::runtime_error(msg.str());
  }

  Trajectory traj = trajectory;
  const char* requested = deriv_kind_name(config.derivative.kind);
  auto recorded = traj.metadata.find("derivative_method");
  if (!(traj.derivs && recorded != traj.metadata.end() && recorded->second == requested)) {
    std::vector<bool> mask = differential_mask(sys);
    build_derivatives(traj, config.derivative, &mask);
  }

  OutputData data = build_outputs(traj, sys);
  const Index N = traj.n_samples(), D = sys.effort_dim();

  EffortModel model;
  model.system = sys;
  model.gp.inputs = data.X;
  model.gp.stacked_targets = data.Y;
  model.gp.transform = A;
  model.gp.tasks.v = VectorXd::Ones(D);
  if (config.intertask_diag) model.gp.tasks.tau = VectorXd::Ones(D);
  model.gp.scalar.phi = N >= 2 ? std::max(median_pairwise_distance(data.X), 1e-8) : 1.0;
  model.gp.noise_vars.resize(D);
  for (Index j = 0; j < D; ++j) {
    VectorXd yj = data.Y.segment(j * N, N);
    const double var = (yj.array() - yj.mean()).square().sum() / static_cast<double>(N);
    model.gp.noise_vars[j] = std::max(1e-2 * var, 1e-8);
  }

  auto [best, trace] = maximize(detail::mt_objective(model.gp), pack_params(model.gp), config.adam);
  unpack_params(best, model.gp);
  fit_cache(model.gp);
  model.trace = std::move(trace);

  model.metadata["n_train"] = std::to_string(N);
  model.metadata["derivative_method"] = traj.metadata.count("derivative_method")
                                            ? traj.metadata.at("derivative_method")
                                            : requested;
  model.metadata["jitter"] = std::to_string(model.gp.jitter);
  model.metadata["final_lml"] = std::to_string(log_marginal_likelihood(model.gp));
  return model;
}

// Posterior of the transformed outputs, stacked task-major over eval rows.
inline PosteriorSummary predict_transformed(const EffortModel& model, const MatrixXd& eval_points,
                                            bool want_covariance = false) {
  return posterior(model.gp, eval_points, want_covariance);
}

// Mean effort via the pointwise solve A z = y, row per evaluation point. For
// a constant regular transform this equals the kernel-conditioning route
// (recover_effort_via_kernel) exactly.
inline MatrixXd recover_effort(const EffortModel& model, const MatrixXd& eval_points) {
  if (eval_points.rows() == 0) throw std::invalid_argument("recover_effort: empty evaluation set");
  PosteriorSummary post = predict_transformed(model, eval_points);
  const Index n = eval_points.rows(), D = model.gp.n_tasks();
  Eigen::Map<const MatrixXd> Ymat(post.mean.data(), n, D);
  Eigen::PartialPivLU<MatrixXd> lu(model.gp.transform);
  return lu.solve(Ymat.transpose()).transpose();
}

// z(X_*) = k_{I,JR}(X_*, X_*) k_JR(X_*, X_*)^{-1} Ybar_*, with the jitter
// policy of fit_cache applied to the k_JR factorization.
inline MatrixXd recover_effort_via_kernel(const EffortModel& model, const MatrixXd& eval_points) {
  if (eval_points.rows() == 0) throw std::invalid_argument("recover_effort: empty evaluation set");
  PosteriorSummary post = predict_transformed(model, eval_points);
  const Index n = eval_points.rows(), D = model.gp.n_tasks();
  const MatrixXd& A = model.gp.transform;
  MatrixXd T = model.gp.tasks.task_matrix();

  MatrixXd K_jr = assemble_separable(eval_points, eval_points, model.gp.scalar,
                                     MatrixXd(A * T * A.transpose()))
                      .entries;
  detail::CholFactor chol = detail::jittered_llt(K_jr);
  VectorXd w = chol.L.triangularView<Eigen::Lower>().solve(post.mean);
  chol.L.triangularView<Eigen::Lower>().transpose().solveInPlace(w);

  MatrixXd K_mix =
      assemble_separable(eval_points, eval_points, model.gp.scalar, MatrixXd(T * A.transpose()))
          .entries;
  VectorXd z = K_mix * w;
  return Eigen::Map<const MatrixXd>(z.data(), n, D);
}

struct CouplingSpec {
  std::vector<PhDaeSystem> subsystems;
  MatrixXd C_hat;                      // skew, over the stacked coupling ports
  std::vector<Index> coupling_widths;  // leading columns of each B that couple
};

// Condensation to one pH-DAE: block-diagonal E, R, B_bar and
// J_tilde = blockdiag(J_k) - B_hat C_hat B_hat^T.
inline PhDaeSystem couple(const CouplingSpec& spec) {
  if (spec.subsystems.empty()) throw std::invalid_argument("couple: no subsystems");
  if (spec.coupling_widths.size() != spec.subsystems.size())
    throw std::invalid_argument("couple: one coupling width per subsystem required");
  if (spec.C_hat.size() > 0 &&
      (spec.C_hat + spec.C_hat.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw std::invalid_argument("couple: coupling matrix must be skew-symmetric");

  Index d_total = 0, b_total = 0, m_total = 0;
  for (std::size_t k = 0; k < spec.subsystems.size(); ++k) {
    const PhDaeSystem& s = spec.subsystems[k];
    validate_system(s);
    const Index w = spec.coupling_widths[k];
    if (w < 0 || w > s.input_dim())
      throw std::invalid_argument("couple: coupling width exceeds input dimension");
    d_total += s.state_dim();
    b_total += w;
    m_total += s.input_dim() - w;
  }
  if (spec.C_hat.rows() != b_total || spec.C_hat.cols() != b_total)
    throw std::invalid_argument("couple: coupling matrix size disagrees with port count");

  PhDaeSystem out;
  out.E = MatrixXd::Zero(d_total, d_total);
  out.J = MatrixXd::Zero(d_total, d_total);
  out.R = MatrixXd::Zero(d_total, d_total);
  out.B = MatrixXd::Zero(d_total, m_total);
  MatrixXd B_hat = MatrixXd::Zero(d_total, b_total);

  Index dr = 0, br = 0, mr = 0;
  std::vector<Index> state_offsets;
  for (std::size_t k = 0; k < spec.subsystems.size(); ++k) {
    const PhDaeSystem& s = spec.subsystems[k];
    const Index d = s.state_dim(), w = spec.coupling_widths[k];
    state_offsets.push_back(dr);
    out.E.block(dr, dr, d, d) = s.E;
    out.J.block(dr, dr, d, d) = s.J;
    out.R.block(dr, dr, d, d) = s.R;
    B_hat.block(dr, br, d, w) = s.B.leftCols(w);
    out.B.block(dr, mr, d, s.input_dim() - w) = s.B.rightCols(s.input_dim() - w);
    for (const auto& l : s.state_labels) out.state_labels.push_back(l);
    for (const auto& l : s.effort_labels) out.effort_labels.push_back(l);
    dr += d;
    br += w;
    mr += s.input_dim() - w;
  }
  out.J -= B_hat * spec.C_hat * B_hat.transpose();

  bool all_effort = true, all_ham = true, all_grad = true;
  for (const auto& s : spec.subsystems) {
    all_effort = all_effort && bool(s.effort);
    all_ham = all_ham && bool(s.hamiltonian);
    all_grad = all_grad && bool(s.hamiltonian_gradient);
  }
  auto subsystems = spec.subsystems;
  if (all_effort)
    out.effort = [subsystems, state_offsets, d_total](const VectorXd& x) {
      VectorXd z(d_total);
      for (std::size_t k = 0; k < subsystems.size(); ++k) {
        const Index d = subsystems[k].state_dim();
        z.segment(state_offsets[k], d) = subsystems[k].effort(x.segment(state_offsets[k], d));
      }
      return z;
    };
  if (all_ham)
    out.hamiltonian = [subsystems, state_offsets](const VectorXd& x) {
      double h = 0.0;
      for (std::size_t k = 0; k < subsystems.size(); ++k)
        h += subsystems[k].hamiltonian(x.segment(state_offsets[k], subsystems[k].state_dim()));
      return h;
    };
  if (all_grad)
    out.hamiltonian_gradient = [subsystems, state_offsets, d_total](const VectorXd& x) {
      VectorXd g(d_total);
      for (std::size_t k = 0; k < subsystems.size(); ++k) {
        const Index d = subsystems[k].state_dim();
        g.segment(state_offsets[k], d) =
            subsystems[k].hamiltonian_gradient(x.segment(state_offsets[k], d));
      }
      return g;
    };

  validate_system(out);
  return out;
}

struct DissipativityReport {
  double max_violation = 0.0;     // max over the grid of dH/dt - y^T u
  double max_abs_residual = 0.0;  // max |dH/dt - y^T u|, the lossless balance
  double tol = 0.0;
  bool pass = false;
};

// Discrete dissipativity check: difference quotients of the Hamiltonian
// oracle against y^T u with y = B^T z at the left sample. Efforts come from
// the system oracle unless an override matrix (row per sample) is supplied.
inline DissipativityReport check_dissipativity(const Trajectory& traj, const PhDaeSystem& sys,
                                               const MatrixXd* efforts = nullptr,
                                               double tol_factor = 10.0) {
  validate_trajectory(traj);
  if (!sys.hamiltonian) throw std::invalid_argument("check_dissipativity: missing Hamiltonian oracle");
  if (!efforts && !sys.effort)
    throw std::invalid_argument("check_dissipativity: missing effort oracle");
  if (efforts && (efforts->rows() != traj.n_samples() || efforts->cols() != sys.effort_dim()))
    throw std::invalid_argument("check_dissipativity: effort override shape disagrees");
  if (traj.n_samples() < 2)
    throw std::invalid_argument("check_dissipativity: need at least 2 samples");

  DissipativityReport rep;
  double h_max = 0.0;
  double H_prev = sys.hamiltonian(traj.states.row(0).transpose());
  for (Index i = 0; i + 1 < traj.n_samples(); ++i) {
    const double dt = traj.times[i + 1] - traj.times[i];
    h_max = std::max(h_max, dt);
    const double H_next = sys.hamiltonian(traj.states.row(i + 1).transpose());
    VectorXd z = efforts ? VectorXd(efforts->row(i).transpose())
                         : sys.effort(traj.states.row(i).transpose());
    const double supply = (sys.B.transpose() * z).dot(traj.inputs.row(i).transpose());
    const double r = (H_next - H_prev) / dt - supply;
    rep.max_violation = std::max(rep.max_violation, r);
    rep.max_abs_residual = std::max(rep.max_abs_residual, std::abs(r));
    H_prev = H_next;
  }
  rep.tol = tol_factor * h_max;
  rep.pass = rep.max_violation <= rep.tol;
  return rep;
}

// Max over points of the compatibility residual ||E^T z(x) - grad H(x)||_inf.
inline double check_compatibility(const PhDaeSystem& sys, const MatrixXd& points) {
  if (!sys.effort || !sys.hamiltonian_gradient)
    throw std::invalid_argument("check_compatibility: missing effort or gradient oracle");
  if (points.rows() == 0) throw std::invalid_argument("check_compatibility: no points");
  double worst = 0.0;
  for (Index i = 0; i < points.rows(); ++i) {
    VectorXd x = points.row(i).transpose();
    VectorXd r = sys.E.transpose() * sys.effort(x) - sys.hamiltonian_gradient(x);
    worst = std::max(worst, r.cwiseAbs().maxCoeff());
  }
  return worst;
}

}  // namespace phgp
