#include <catch2/catch_amalgamated.hpp>

#include <phgp/benchmarks.hpp>

#include <cmath>

using namespace phgp;
using Catch::Approx;

TEST_CASE("circuit system matrices and oracles") {
  PhDaeSystem s = circuit_system();
  CHECK_NOTHROW(validate_system(s));

  MatrixXd A = s.J - s.R;
  MatrixXd expect(3, 3);
  expect << -1, 1, 0, 1, -1, 1, 0, -1, 0;
  CHECK((A - expect).cwiseAbs().maxCoeff() == 0.0);
  CHECK(A.determinant() == Approx(-1.0).epsilon(1e-14));

  VectorXd x(3);
  x << 2.0, 1.0, -1.0;
  VectorXd z = s.effort(x);
  CHECK(z[0] == Approx(2.0).epsilon(1e-15));
  CHECK(z[1] == 1.0);
  CHECK(z[2] == -1.0);
  CHECK(s.hamiltonian(x) == Approx(8.0 / 3.0).epsilon(1e-14));

  CircuitParams bad;
  bad.G = 0.0;
  CHECK_THROWS_AS(circuit_system(bad), std::invalid_argument);
}

TEST_CASE("circuit effort solve reproduces the stated point") {
  PhDaeSystem s = circuit_system();
  VectorXd y(3);
  y << -1.0, 0.0, -1.0;
  VectorXd z = (s.J - s.R).partialPivLu().solve(y);
  CHECK(z[0] == Approx(2.0).margin(1e-12));
  CHECK(z[1] == Approx(1.0).margin(1e-12));
  CHECK(z[2] == Approx(-1.0).margin(1e-12));
}

TEST_CASE("circuit trajectory generation") {
  Trajectory traj = generate_circuit();
  CHECK_NOTHROW(validate_trajectory(traj));
  REQUIRE(traj.n_samples() == 3001);
  CHECK(traj.times[0] == 0.0);
  CHECK(traj.times[3000] == Approx(10.0 * M_PI).epsilon(1e-12));

  CHECK(traj.states(0, 0) == 2.0);
  CHECK(traj.states(0, 1) == 1.0);
  CHECK(traj.states(0, 2) == Approx(-1.0).epsilon(1e-15));
  REQUIRE(traj.derivs.has_value());
  CHECK((*traj.derivs)(0, 0) == Approx(-1.0).epsilon(1e-15));

  // x2 is the input and x3 the algebraic constraint value, both exactly
  CHECK((traj.states.col(1) - traj.inputs.col(0)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((traj.states.col(2) - traj.derivs->col(0)).cwiseAbs().maxCoeff() == 0.0);
  CHECK(traj.derivs->col(1).cwiseAbs().maxCoeff() == 0.0);
  CHECK(traj.derivs->col(2).cwiseAbs().maxCoeff() == 0.0);

  PhDaeSystem s = circuit_system();
  MatrixXd A = s.J - s.R;
  double worst = 0.0;
  for (Index i = 0; i < traj.n_samples(); ++i) {
    VectorXd z = s.effort(traj.states.row(i).transpose());
    VectorXd resid = s.E * traj.derivs->row(i).transpose() - A * z -
                     s.B * traj.inputs.row(i).transpose();
    worst = std::max(worst, resid.cwiseAbs().maxCoeff());
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("pendulum system matrices and oracles") {
  PhDaeSystem s = pendulum_system();
  CHECK_NOTHROW(validate_system(s));
  CHECK((s.J - s.R).determinant() == Approx(-1.0).epsilon(1e-14));

  VectorXd x(5);
  x << std::sqrt(2.0) / 2.0, -std::sqrt(2.0) / 2.0, 0.0, 0.0, 0.0;
  VectorXd z = s.effort(x);
  CHECK(z[0] == 0.0);
  CHECK(z[1] == 1.0);
  CHECK(z[2] == 0.0);
  CHECK(z[3] == 0.0);
  CHECK(z[4] == Approx(0.0).margin(1e-15));

  PendulumParams bad;
  bad.l = 0.0;
  CHECK_THROWS_AS(pendulum_system(bad), std::invalid_argument);
}

TEST_CASE("pendulum effort solve reproduces the stated point") {
  PhDaeSystem s = pendulum_system();
  VectorXd y(5);
  y << 0.0, 0.0, 0.0, -1.0, 0.0;
  VectorXd z = (s.J - s.R).partialPivLu().solve(y);
  VectorXd expect(5);
  expect << 0.0, 1.0, 0.0, 0.0, 0.0;
  CHECK((z - expect).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("pendulum trajectory generation") {
  Trajectory traj = generate_pendulum();
  CHECK_NOTHROW(validate_trajectory(traj));
  REQUIRE(traj.n_samples() == 3001);
  CHECK(traj.times[3000] == Approx(30.0).epsilon(1e-12));

  const double r2 = std::sqrt(2.0) / 2.0;
  CHECK(traj.states(0, 0) == Approx(r2).epsilon(1e-15));
  CHECK(traj.states(0, 1) == Approx(-r2).epsilon(1e-15));
  CHECK(traj.states(0, 2) == 0.0);
  CHECK(traj.states(0, 3) == 0.0);
  CHECK(traj.states(0, 4) == Approx(0.0).margin(1e-15));

  PhDaeSystem s = pendulum_system();
  MatrixXd A = s.J - s.R;
  double worst_constraint = 0.0, worst_resid = 0.0;
  for (Index i = 0; i < traj.n_samples(); ++i) {
    VectorXd x = traj.states.row(i).transpose();
    worst_constraint = std::max(worst_constraint, std::abs(x[0] * x[0] + x[1] * x[1] - 1.0));
    VectorXd resid =
        s.E * traj.derivs->row(i).transpose() - A * s.effort(x) - s.B * traj.inputs.row(i).transpose();
    worst_resid = std::max(worst_resid, resid.cwiseAbs().maxCoeff());
  }
  CHECK(worst_constraint <= 1e-12);
  CHECK(worst_resid <= 1e-10);
}

TEST_CASE("compatibility holds along both benchmark trajectories") {
  Trajectory c = generate_circuit();
  CHECK(check_compatibility(circuit_system(), c.states) <= 1e-10);
  Trajectory p = generate_pendulum();
  CHECK(check_compatibility(pendulum_system(), p.states) <= 1e-10);
}

TEST_CASE("dissipativity holds at the discretization tolerance") {
  Trajectory c = generate_circuit();
  DissipativityReport rc = check_dissipativity(c, circuit_system());
  CHECK(rc.max_violation <= 0.15);
  CHECK(rc.pass);

  Trajectory p = generate_pendulum();
  DissipativityReport rp = check_dissipativity(p, pendulum_system());
  CHECK(rp.pass);
  // on-manifold efforts make z^T R z vanish: two-sided energy balance
  CHECK(rp.max_abs_residual <= rp.tol);
}

TEST_CASE("undriven pendulum energy drifts no worse than the integrator") {
  PendulumParams params;
  params.beta = 0.0;
  Trajectory traj = generate_pendulum(params);
  PhDaeSystem s = pendulum_system(params);
  const double h0 = s.hamiltonian(traj.states.row(0).transpose());
  const double hN = s.hamiltonian(traj.states.row(traj.n_samples() - 1).transpose());
  CHECK(std::abs(hN - h0) <= 1.0);
}

TEST_CASE("finite differences track the pendulum oracle") {
  Trajectory traj = generate_pendulum();
  Trajectory fd = traj;
  DerivativeMethod method;  // finite differences
  std::vector<bool> mask = differential_mask(pendulum_system());
  build_derivatives(fd, method, &mask);
  for (Index j = 0; j < 4; ++j) {
    double r = std::sqrt((fd.derivs->col(j) - traj.derivs->col(j)).squaredNorm() /
                         static_cast<double>(traj.n_samples()));
    CHECK(r <= 5e-2);
  }
}

TEST_CASE("two coupled circuits form a valid 6-state system") {
  CouplingSpec spec;
  spec.subsystems = {circuit_system(), circuit_system()};
  spec.coupling_widths = {1, 1};
  spec.C_hat = MatrixXd(2, 2);
  spec.C_hat << 0, 1, -1, 0;

  PhDaeSystem c = couple(spec);
  CHECK(c.state_dim() == 6);
  CHECK(c.input_dim() == 0);
  CHECK((c.J + c.J.transpose()).cwiseAbs().maxCoeff() <= 1e-14);
  CHECK_NOTHROW(validate_system(c));

  // off-diagonal coupling block appears in J
  CHECK(c.J(2, 5) == Approx(-1.0));
  CHECK(c.J(5, 2) == Approx(1.0));
}

TEST_CASE("benchmark systems are recoverable from trajectory metadata") {
  Trajectory c = generate_circuit();
  auto sc = system_for_trajectory(c);
  REQUIRE(sc.has_value());
  CHECK(sc->state_dim() == 3);
  CHECK(bool(sc->effort));

  Trajectory p = generate_pendulum();
  auto sp = system_for_trajectory(p);
  REQUIRE(sp.has_value());
  CHECK(sp->state_dim() == 5);

  Trajectory anon;
  anon.times = VectorXd::LinSpaced(3, 0, 1);
  anon.states = MatrixXd::Zero(3, 2);
  anon.inputs = MatrixXd::Zero(3, 1);
  CHECK_FALSE(system_for_trajectory(anon).has_value());
}

TEST_CASE("likelihood ascent improves on the initial point for circuit data") {
  Trajectory pool = generate_circuit();
  std::vector<Index> rows;
  for (Index i = 0; i < 32; ++i) rows.push_back(i * 3000 / 31);
  Trajectory train = select_rows(pool, rows);

  IdentifyConfig config;
  config.derivative.kind = DerivKind::exact_oracle;
  EffortModel model = identify_effort(train, circuit_system(), config);
  const auto& obj = model.trace.objectives;
  REQUIRE(!obj.empty());
  CHECK(*std::max_element(obj.begin(), obj.end()) >= obj.front());
  CHECK(log_marginal_likelihood(model.gp) >= obj.front());
}
