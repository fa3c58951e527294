#pragma once

// ADAM ascent on an unconstrained parameter vector.
// Fixed iteration budget, no early stopping; returns the best-seen iterate.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

namespace phgp {

using Eigen::Index;
using Eigen::VectorXd;

struct AdamConfig {
  double learning_rate = 0.1;
  int iterations = 200;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 0;  // reserved for callers with randomized initialization
};

struct ObjectiveEval {
  double value = 0.0;
  VectorXd gradient;
};

using ObjectiveFn = std::function<ObjectiveEval(const VectorXd&)>;

struct OptimTrace {
  // objectives[0] is the initial value, objectives[i] the value held after iteration i.
  // A reverted iteration re-records the retained value, so every entry is finite.
  std::vector<double> objectives;
  std::vector<double> learning_rates;  // one per iteration, after any halving
  VectorXd final_params;
  bool converged = true;  // false when any proposal evaluated non-finite
};

namespace detail {

inline bool finite_eval(const ObjectiveEval& e) {
  return std::isfinite(e.value) && e.gradient.allFinite();
}

}  // namespace detail

// Maximizes f over params. Exactly config.iterations proposals are made; a
// non-finite proposal is reverted and halves the learning rate, two consecutive
// non-finite proposals abort. Returns the iterate with the best recorded value.
inline std::pair<VectorXd, OptimTrace> maximize(const ObjectiveFn& f, VectorXd params,
                                                const AdamConfig& config) {
  if (!(config.learning_rate > 0.0)) throw std::invalid_argument("adam: learning_rate must be > 0");
  if (config.iterations < 1) throw std::invalid_argument("adam: iterations must be >= 1");
  if (!(config.beta1 >= 0.0 && config.beta1 < 1.0) || !(config.beta2 >= 0.0 && config.beta2 < 1.0))
    throw std::invalid_argument("adam: beta1, beta2 must lie in [0, 1)");

  ObjectiveEval cur = f(params);
  if (!detail::finite_eval(cur) || cur.gradient.size() != params.size())
    throw std::invalid_argument("adam: objective not finite at the initial parameters");

  OptimTrace trace;
  trace.objectives.reserve(config.iterations + 1);
  trace.learning_rates.reserve(config.iterations);
  trace.objectives.push_back(cur.value);

  VectorXd best = params;
  double best_value = cur.value;

  const Index n = params.size();
  VectorXd m = VectorXd::Zero(n), v = VectorXd::Zero(n);
  double lr = config.learning_rate;
  int t = 0;
  int consecutive_bad = 0;

  for (int it = 0; it < config.iterations; ++it) {
    VectorXd m_next = config.beta1 * m + (1.0 - config.beta1) * cur.gradient;
    VectorXd v_next = config.beta2 * v + (1.0 - config.beta2) * cur.gradient.cwiseAbs2();
    int t_next = t + 1;
    double c1 = 1.0 - std::pow(config.beta1, t_next);
    double c2 = 1.0 - std::pow(config.beta2, t_next);
    VectorXd step =
        (m_next / c1).cwiseQuotient(((v_next / c2).cwiseSqrt().array() + config.eps).matrix());
    VectorXd proposal = params + lr * step;

    ObjectiveEval next = f(proposal);
    if (detail::finite_eval(next)) {
      params = std::move(proposal);
      cur = std::move(next);
      m = std::move(m_next);
      v = std::move(v_next);
      t = t_next;
      consecutive_bad = 0;
      if (cur.value > best_value) {
        best_value = cur.value;
        best = params;
      }
    } else {
      trace.converged = false;
      if (++consecutive_bad >= 2) throw std::runtime_error("optimization diverged");
      lr *= 0.5;
    }
    trace.objectives.push_back(cur.value);
    trace.learning_rates.push_back(lr);
  }

  trace.final_params = best;
  return {best, std::move(trace)};
}

}  // namespace phgp
