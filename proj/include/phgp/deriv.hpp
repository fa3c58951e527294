#pragma once

// Derivative sample construction: three-point non-uniform finite differences,
// analytic differentiation of per-component scalar GP fits over time, or the
// exact oracle a benchmark generator attached to the trajectory.

#include <phgp/gp.hpp>
#include <phgp/optim.hpp>
#include <phgp/trajectory.hpp>

#include <algorithm>
#include <limits>
#include <string>
#include <vector>

namespace phgp {

enum class DerivKind { finite_difference, gp_full, gp_train_only, exact_oracle };

inline const char* deriv_kind_name(DerivKind k) {
  switch (k) {
    case DerivKind::finite_difference: return "finite_difference";
    case DerivKind::gp_full: return "gp_full";
    case DerivKind::gp_train_only: return "gp_train_only";
    case DerivKind::exact_oracle: return "exact_oracle";
  }
  throw std::logic_error("deriv: unknown kind");
}

inline DerivKind deriv_kind_from_name(const std::string& name) {
  if (name == "finite_difference" || name == "fd") return DerivKind::finite_difference;
  if (name == "gp_full" || name == "gp-full") return DerivKind::gp_full;
  if (name == "gp_train_only" || name == "gp-train") return DerivKind::gp_train_only;
  if (name == "exact_oracle" || name == "exact") return DerivKind::exact_oracle;
  throw std::invalid_argument(
      "deriv: unknown method name '" + name +
      "' (expected finite_difference|gp_full|gp_train_only|exact_oracle"
      " or fd|gp-full|gp-train|exact)");
}

struct DerivativeMethod {
  DerivKind kind = DerivKind::finite_difference;
  GaussianKernelParams kernel_init{0.0};  // phi <= 0 selects the median-distance heuristic
  AdamConfig adam;                        // 200 steps at lr 0.1 for the gp_* kinds
};

// Three-point Lagrange stencils, exact for quadratics on any grid; one-sided
// at both ends.
inline VectorXd finite_difference(const VectorXd& times, const VectorXd& values) {
  const Index n = times.size();
  if (n < 3) throw std::invalid_argument("finite_difference: need at least 3 samples");
  if (values.size() != n) throw std::invalid_argument("finite_difference: length mismatch");
  for (Index i = 0; i + 1 < n; ++i)
    if (!(times[i] < times[i + 1]))
      throw std::invalid_argument("finite_difference: times must be strictly increasing");

  VectorXd d(n);
  for (Index i = 1; i + 1 < n; ++i) {
    const double h1 = times[i] - times[i - 1], h2 = times[i + 1] - times[i];
    d[i] = -h2 / (h1 * (h1 + h2)) * values[i - 1] + (h2 - h1) / (h1 * h2) * values[i] +
           h1 / (h2 * (h1 + h2)) * values[i + 1];
  }
  {
    const double h1 = times[1] - times[0], h2 = times[2] - times[1];
    d[0] = -(2 * h1 + h2) / (h1 * (h1 + h2)) * values[0] + (h1 + h2) / (h1 * h2) * values[1] -
           h1 / (h2 * (h1 + h2)) * values[2];
  }
  {
    const double h1 = times[n - 2] - times[n - 3], h2 = times[n - 1] - times[n - 2];
    d[n - 1] = h2 / (h1 * (h1 + h2)) * values[n - 3] - (h1 + h2) / (h1 * h2) * values[n - 2] +
               (h1 + 2 * h2) / (h2 * (h1 + h2)) * values[n - 1];
  }
  return d;
}

struct DerivativeGpFit {
  ScalarGpModel model;
  OptimTrace trace;
};

// Scalar GP over (t, value) with phi and sigma^2 maximized by ADAM; a failed
// factorization or likelihood mid-search counts as a non-finite proposal.
// The evidence is searched on a uniform thinning of the samples (at most
// tune_cap points) and the returned model conditions on all of them with the
// winning hyperparameters. Without an explicit phi init the search starts from
// both the median pairwise distance and an eighth of it and keeps the higher
// evidence: on long records the median alone strands the optimizer in a
// noise-inflated basin that flattens the derivative estimates.
inline DerivativeGpFit fit_derivative_gp(const VectorXd& times, const VectorXd& values,
                                         const DerivativeMethod& method) {
  const Index n = times.size();
  if (n < 2) throw std::invalid_argument("gp_derivative: need at least 2 samples");
  if (values.size() != n) throw std::invalid_argument("gp_derivative: length mismatch");

  constexpr Index tune_cap = 640;
  ScalarGpModel tune;
  if (n > tune_cap) {
    const Index stride = (n + tune_cap - 1) / tune_cap;
    const Index m = (n + stride - 1) / stride;
    tune.inputs.resize(m, 1);
    tune.targets.resize(m);
    for (Index i = 0; i < m; ++i) {
      tune.inputs(i, 0) = times[i * stride];
      tune.targets[i] = values[i * stride];
    }
  } else {
    tune.inputs = times;
    tune.targets = values;
  }
  const double var = (tune.targets.array() - tune.targets.mean()).square().sum() /
                     static_cast<double>(tune.targets.size());
  tune.noise_var = std::max(1e-2 * var, 1e-8);

  auto objective = [&tune](const VectorXd& theta) {
    ObjectiveEval e;
    try {
      ScalarGpModel trial = tune;
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

  std::vector<double> phi_starts;
  if (method.kernel_init.phi > 0.0) {
    phi_starts = {method.kernel_init.phi};
  } else {
    const double med = median_pairwise_distance(tune.inputs);
    phi_starts = {med, med / 8.0};
  }

  VectorXd best_theta;
  OptimTrace best_trace;
  double best_value = -std::numeric_limits<double>::infinity();
  for (double phi0 : phi_starts) {
    tune.kernel.phi = phi0;
    auto [theta, trace] = maximize(objective, pack_params(tune), method.adam);
    const double value = *std::max_element(trace.objectives.begin(), trace.objectives.end());
    if (best_theta.size() == 0 || value > best_value) {
      best_value = value;
      best_theta = std::move(theta);
      best_trace = std::move(trace);
    }
  }

  ScalarGpModel m;
  m.inputs = times;
  m.targets = values;
  unpack_params(best_theta, m);
  fit_cache(m);
  return {std::move(m), std::move(best_trace)};
}

// d/dt of the posterior mean: sum_i alpha_i (-(t - t_i)/phi^2) k(t, t_i).
inline VectorXd gp_derivative_eval(const ScalarGpModel& m, const VectorXd& eval_times) {
  detail::require_fitted(m.fitted);
  MatrixXd K = gaussian_gram(eval_times, m.inputs, m.kernel);
  const double inv_phi2 = 1.0 / (m.kernel.phi * m.kernel.phi);
  MatrixXd diff = eval_times.replicate(1, m.inputs.rows()) -
                  m.inputs.transpose().replicate(eval_times.size(), 1);
  return (K.array() * (-inv_phi2) * diff.array()).matrix() * m.alpha;
}

inline VectorXd gp_derivative(const VectorXd& times, const VectorXd& values,
                              const DerivativeMethod& method, const VectorXd& eval_times) {
  DerivativeGpFit fit = fit_derivative_gp(times, values, method);
  return gp_derivative_eval(fit.model, eval_times);
}

inline VectorXd gp_derivative(const VectorXd& times, const VectorXd& values,
                              const DerivativeMethod& method) {
  return gp_derivative(times, values, method, times);
}

// Fills trajectory.derivs per state component and records the method in
// metadata["derivative_method"]. When a mask is given only the flagged
// components are differentiated and the rest are zero-filled (algebraic rows
// of E never consume their derivative columns). exact_oracle keeps the
// generator-attached derivative columns and requires them to be present.
inline void build_derivatives(Trajectory& traj, const DerivativeMethod& method,
                              const std::vector<bool>* mask = nullptr) {
  validate_trajectory(traj);
  const Index n = traj.n_samples(), d = traj.state_dim();
  if (mask && static_cast<Index>(mask->size()) != d)
    throw std::invalid_argument("build_derivatives: mask length disagrees with state dimension");

  if (method.kind == DerivKind::exact_oracle) {
    auto it = traj.metadata.find("derivative_method");
    if (!traj.derivs || it == traj.metadata.end() || it->second != "exact_oracle")
      throw std::invalid_argument("build_derivatives: trajectory carries no derivative oracle");
    return;
  }

  MatrixXd D = MatrixXd::Zero(n, d);
  for (Index j = 0; j < d; ++j) {
    if (mask && !(*mask)[static_cast<std::size_t>(j)]) continue;
    if (method.kind == DerivKind::finite_difference)
      D.col(j) = finite_difference(traj.times, traj.states.col(j));
    else
      D.col(j) = gp_derivative(traj.times, traj.states.col(j), method);
  }
  traj.derivs = std::move(D);
  traj.metadata["derivative_method"] = deriv_kind_name(method.kind);
}

}  // namespace phgp
