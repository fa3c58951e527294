#pragma once

// The two benchmark systems: an index-1 electrical network driven by a
// sinusoidal voltage source and an index-3 constrained pendulum, both
// integrated by explicit Euler, both carrying exact effort, Hamiltonian, and
// derivative oracles.

#include <phgp/phdae.hpp>
#include <phgp/trajectory.hpp>

#include <cmath>
#include <sstream>
#include <string>

namespace phgp {

struct CircuitParams {
  double G = 1.0;      // conductance
  double a = 1.0;      // input amplitude
  double omega = 1.0;  // input angular frequency
  double x1_0 = 2.0;   // initial charge
  Index n_steps = 3000;
  double t_end() const { return 10.0 * M_PI / omega; }
  double input(double t) const { return a * (1.0 + std::sin(omega * t)); }
};

struct PendulumParams {
  double m = 1.0;
  double l = 1.0;
  double g_tilde = 1.0;
  double tau = 1.0;   // input period
  double beta = 1.0;  // input amplitude factor
  double alpha_0 = M_PI / 4.0;
  double alpha_dot_0 = 0.0;
  double h = 0.01;
  double t_end = 30.0;
  double input(double t) const { return beta * g_tilde * std::cos(2.0 * M_PI * t / tau); }
};

namespace detail {

inline std::string fmt_param(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace detail

inline PhDaeSystem circuit_system(const CircuitParams& params = {}) {
  if (params.G == 0.0) throw std::invalid_argument("circuit: G must be nonzero");
  if (params.n_steps < 1) throw std::invalid_argument("circuit: n_steps must be >= 1");
  const double G = params.G;

  PhDaeSystem s;
  s.E = MatrixXd::Zero(3, 3);
  s.E(0, 0) = 1.0;
  s.J = MatrixXd::Zero(3, 3);
  s.J(1, 2) = 1.0;
  s.J(2, 1) = -1.0;
  s.R = MatrixXd::Zero(3, 3);
  s.R.block(0, 0, 2, 2) << G, -G, -G, G;
  s.B = MatrixXd::Zero(3, 1);
  s.B(2, 0) = 1.0;
  s.state_labels = {"x1", "x2", "x3"};
  s.effort_labels = {"z1", "z2", "z3"};

  s.effort = [](const VectorXd& x) {
    VectorXd z(3);
    z << std::sqrt(2.0 * x[0]), x[1], x[2];
    return z;
  };
  s.hamiltonian = [](const VectorXd& x) {
    return (2.0 / 3.0) * std::sqrt(2.0) * std::pow(x[0], 1.5);
  };
  s.hamiltonian_gradient = [](const VectorXd& x) {
    VectorXd g(3);
    g << std::sqrt(2.0 * x[0]), 0.0, 0.0;
    return g;
  };
  validate_system(s);
  return s;
}

// Explicit Euler on x1dot = G (u - sqrt(2 x1)); x2 is the input, x3 the
// DAE-consistent algebraic value G (u - sqrt(2 x1)) = x1dot. Oracle
// derivative rows for the algebraic components are zero (never consumed).
inline Trajectory generate_circuit(const CircuitParams& params = {}) {
  if (params.G == 0.0) throw std::invalid_argument("circuit: G must be nonzero");
  if (params.n_steps < 1) throw std::invalid_argument("circuit: n_steps must be >= 1");
  const Index n = params.n_steps + 1;
  const double h = params.t_end() / static_cast<double>(params.n_steps);

  Trajectory traj;
  traj.times.resize(n);
  traj.states.resize(n, 3);
  traj.inputs.resize(n, 1);
  MatrixXd D = MatrixXd::Zero(n, 3);

  double x1 = params.x1_0;
  for (Index i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) * h;
    if (x1 < 0.0) {
      std::ostringstream msg;
      msg << "circuit: x1 left the square-root domain at t = " << t << " (x1 = " << x1 << ")";
      throw std::runtime_error(msg.str());
    }
    const double u = params.input(t);
    const double x1dot = params.G * (u - std::sqrt(2.0 * x1));
    traj.times[i] = t;
    traj.states(i, 0) = x1;
    traj.states(i, 1) = u;
    traj.states(i, 2) = x1dot;
    traj.inputs(i, 0) = u;
    D(i, 0) = x1dot;
    x1 += h * x1dot;
  }
  traj.derivs = D;
  traj.metadata["benchmark"] = "circuit";
  traj.metadata["integrator"] = "explicit_euler";
  traj.metadata["step"] = detail::fmt_param(h);
  traj.metadata["derivative_method"] = "exact_oracle";
  traj.metadata["G"] = detail::fmt_param(params.G);
  traj.metadata["a"] = detail::fmt_param(params.a);
  traj.metadata["omega"] = detail::fmt_param(params.omega);
  traj.metadata["x1_0"] = detail::fmt_param(params.x1_0);
  traj.metadata["n_steps"] = std::to_string(params.n_steps);
  return traj;
}

inline PhDaeSystem pendulum_system(const PendulumParams& params = {}) {
  if (params.m <= 0.0 || params.l <= 0.0)
    throw std::invalid_argument("pendulum: m and l must be positive");
  const double m = params.m, l = params.l, gt = params.g_tilde;

  PhDaeSystem s;
  s.E = MatrixXd::Zero(5, 5);
  s.E.diagonal().head(4).setOnes();
  s.J = MatrixXd::Zero(5, 5);
  s.J.block(0, 2, 2, 2) = MatrixXd::Identity(2, 2);
  s.J.block(2, 0, 2, 2) = -MatrixXd::Identity(2, 2);
  s.R = MatrixXd::Zero(5, 5);
  s.R(4, 4) = 1.0;
  s.B = MatrixXd::Zero(5, 1);
  s.B(3, 0) = m;
  s.state_labels = {"q1", "q2", "p1", "p2", "lambda"};
  s.effort_labels = {"z1", "z2", "z3", "z4", "z5"};

  auto constraint = [l](const VectorXd& x) { return x[0] * x[0] + x[1] * x[1] - l * l; };
  s.effort = [m, gt, constraint](const VectorXd& x) {
    VectorXd z(5);
    z[0] = -2.0 * x[0] * x[4];
    z[1] = gt * m - 2.0 * x[1] * x[4];
    z[2] = x[2] / m;
    z[3] = x[3] / m;
    z[4] = -constraint(x);
    return z;
  };
  s.hamiltonian = [m, gt, constraint](const VectorXd& x) {
    return 0.5 * (x[2] * x[2] + x[3] * x[3]) / m + gt * m * x[1] - constraint(x) * x[4];
  };
  s.hamiltonian_gradient = [m, gt, constraint](const VectorXd& x) {
    VectorXd g(5);
    g[0] = -2.0 * x[0] * x[4];
    g[1] = gt * m - 2.0 * x[1] * x[4];
    g[2] = x[2] / m;
    g[3] = x[3] / m;
    g[4] = -constraint(x);
    return g;
  };
  validate_system(s);
  return s;
}

// Explicit Euler on the angle form alphaddot = -(1/l)(g_tilde - u) sin alpha,
// mapped to DAE coordinates q = l (sin a, -cos a), p = m l adot (cos a, sin a),
// lambda = (m/2l)(cos a (u - g_tilde) - l adot^2); the mapping is exactly
// on-manifold. Oracle derivatives: qdot = p/m, pdot = (0,-m g~) + 2 q lambda
// + (0, m) u; the algebraic row is zero.
inline Trajectory generate_pendulum(const PendulumParams& params = {}) {
  if (params.m <= 0.0 || params.l <= 0.0)
    throw std::invalid_argument("pendulum: m and l must be positive");
  if (params.h <= 0.0) throw std::invalid_argument("pendulum: h must be positive");
  const double m = params.m, l = params.l, gt = params.g_tilde, h = params.h;
  const Index n_steps = static_cast<Index>(std::llround(params.t_end / h));
  const Index n = n_steps + 1;

  Trajectory traj;
  traj.times.resize(n);
  traj.states.resize(n, 5);
  traj.inputs.resize(n, 1);
  MatrixXd D = MatrixXd::Zero(n, 5);

  double alpha = params.alpha_0, alpha_dot = params.alpha_dot_0;
  for (Index i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) * h;
    const double u = params.input(t);
    if (!std::isfinite(alpha) || !std::isfinite(alpha_dot))
      throw std::runtime_error("pendulum: integration produced a non-finite state");

    const double sa = std::sin(alpha), ca = std::cos(alpha);
    const double q1 = l * sa, q2 = -l * ca;
    const double p1 = m * l * alpha_dot * ca, p2 = m * l * alpha_dot * sa;
    const double lambda = (m / (2.0 * l)) * (ca * (u - gt) - l * alpha_dot * alpha_dot);

    traj.times[i] = t;
    traj.states.row(i) << q1, q2, p1, p2, lambda;
    traj.inputs(i, 0) = u;
    D(i, 0) = p1 / m;
    D(i, 1) = p2 / m;
    D(i, 2) = 2.0 * q1 * lambda;
    D(i, 3) = -m * gt + 2.0 * q2 * lambda + m * u;

    const double alpha_ddot = -(1.0 / l) * (gt - u) * sa;
    alpha += h * alpha_dot;
    alpha_dot += h * alpha_ddot;
  }
  traj.derivs = D;
  traj.metadata["benchmark"] = "pendulum";
  traj.metadata["integrator"] = "explicit_euler";
  traj.metadata["step"] = detail::fmt_param(h);
  traj.metadata["derivative_method"] = "exact_oracle";
  traj.metadata["m"] = detail::fmt_param(m);
  traj.metadata["l"] = detail::fmt_param(l);
  traj.metadata["g_tilde"] = detail::fmt_param(gt);
  traj.metadata["tau"] = detail::fmt_param(params.tau);
  traj.metadata["beta"] = detail::fmt_param(params.beta);
  traj.metadata["alpha_0"] = detail::fmt_param(params.alpha_0);
  traj.metadata["alpha_dot_0"] = detail::fmt_param(params.alpha_dot_0);
  traj.metadata["t_end"] = detail::fmt_param(params.t_end);
  return traj;
}

// Rebuilds the generating system (with its oracles) from trajectory
// metadata; empty benchmark tag yields a system-free nullopt.
inline std::optional<PhDaeSystem> system_for_trajectory(const Trajectory& traj) {
  auto it = traj.metadata.find("benchmark");
  if (it == traj.metadata.end()) return std::nullopt;
  if (it->second == "circuit") {
    CircuitParams p;
    if (traj.metadata.count("G")) p.G = std::stod(traj.metadata.at("G"));
    if (traj.metadata.count("a")) p.a = std::stod(traj.metadata.at("a"));
    if (traj.metadata.count("omega")) p.omega = std::stod(traj.metadata.at("omega"));
    return circuit_system(p);
  }
  if (it->second == "pendulum") {
    PendulumParams p;
    if (traj.metadata.count("m")) p.m = std::stod(traj.metadata.at("m"));
    if (traj.metadata.count("l")) p.l = std::stod(traj.metadata.at("l"));
    if (traj.metadata.count("g_tilde")) p.g_tilde = std::stod(traj.metadata.at("g_tilde"));
    return pendulum_system(p);
  }
  return std::nullopt;
}

}  // namespace phgp
