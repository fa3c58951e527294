#pragma once

#include <phgp/kernels.hpp>

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

// Exact GP inference for the scalar and the (transformed) multi-task model.
// Dense double-precision Cholesky throughout; failed factorizations retry
// with escalating diagonal jitter eps * mean(diag), eps = 1e-10 .. 1e-6.

namespace phgp {

namespace detail {

// In-place blocked inverse of a lower-triangular matrix. Faster than a
// triangular solve against the identity because the zero structure of the
// result is exploited; matters for the n ~ 3000 derivative GP fits.
inline void invert_lower_tri_inplace(Eigen::Ref<MatrixXd> a) {
  const Index n = a.rows();
  if (n <= 64) {
    MatrixXd w = MatrixXd::Identity(n, n);
    a.template triangularView<Eigen::Lower>().solveInPlace(w);
    a = w;
    return;
  }
  const Index k = n / 2;
  invert_lower_tri_inplace(a.topLeftCorner(k, k));
  invert_lower_tri_inplace(a.bottomRightCorner(n - k, n - k));
  MatrixXd t = a.bottomLeftCorner(n - k, k) * a.topLeftCorner(k, k).template triangularView<Eigen::Lower>();
  a.bottomLeftCorner(n - k, k).noalias() =
      -(a.bottomRightCorner(n - k, n - k).template triangularView<Eigen::Lower>() * t);
}

struct CholFactor {
  MatrixXd L;
  double jitter = 0.0;
};

// Cholesky with the escalating-jitter ladder. K is the full covariance
// including noise; mean(diag) is taken before any jitter.
inline CholFactor jittered_llt(const MatrixXd& K) {
  CholFactor out;
  Eigen::LLT<MatrixXd> llt(K);
  if (llt.info() == Eigen::Success) {
    out.L = llt.matrixL();
    return out;
  }
  const double mean_diag = K.diagonal().mean();
  for (double eps = 1e-10; eps < 1.5e-6; eps *= 10.0) {
    MatrixXd kj = K;
    kj.diagonal().array() += eps * mean_diag;
    llt.compute(kj);
    if (llt.info() == Eigen::Success) {
      out.L = llt.matrixL();
      out.jitter = eps * mean_diag;
      return out;
    }
  }
  throw std::runtime_error("non-PSD kernel system");
}

inline double half_log_2pi() { return 0.5 * std::log(2.0 * M_PI); }

}  // namespace detail

// Scalar zero-mean GP, used for the per-component derivative fits.
// noise_var >= 0 is accepted; 0 relies on the jitter ladder.
struct ScalarGpModel {
  MatrixXd inputs;  // N x d
  VectorXd targets;
  GaussianKernelParams kernel;
  double noise_var = 1e-2;

  MatrixXd factor;  // lower triangular, factor factor^T = K + sigma^2 I (+ jitter)
  VectorXd alpha;
  double jitter = 0.0;
  bool fitted = false;
};

// Multi-task GP with separable kernel k(x,x') * k_T and constant linear
// transform A: covariance (A k_T A^T) (x) k(X,X). transform = I gives the
// plain multi-task model; A = J - R gives the z_JR process. Targets are
// stacked task-major.
struct MtGpModel {
  MatrixXd inputs;  // N x d
  VectorXd stacked_targets;
  GaussianKernelParams scalar;
  IntertaskParams tasks;
  VectorXd noise_vars;  // per-task, length D
  MatrixXd transform;

  MatrixXd factor;
  VectorXd alpha;
  double jitter = 0.0;
  bool fitted = false;

  Index n_points() const { return inputs.rows(); }
  Index n_tasks() const { return tasks.tasks(); }
};

struct PosteriorSummary {
  VectorXd mean;
  std::optional<MatrixXd> covariance;
};

inline void validate(const ScalarGpModel& m) {
  if (m.inputs.rows() < 1 || m.targets.size() != m.inputs.rows())
    throw std::invalid_argument("ScalarGpModel: need N >= 1 targets matching inputs");
  if (m.noise_var < 0.0) throw std::invalid_argument("ScalarGpModel: negative noise variance");
  check_phi(m.kernel);
}

inline void validate(const MtGpModel& m) {
  const Index N = m.inputs.rows(), D = m.tasks.tasks();
  if (N < 1 || D < 1) throw std::invalid_argument("MtGpModel: empty model");
  if (m.stacked_targets.size() != N * D)
    throw std::invalid_argument("MtGpModel: stacked_targets must have length N*D (task-major)");
  if (m.noise_vars.size() != D) throw std::invalid_argument("MtGpModel: noise_vars must have length D");
  if ((m.noise_vars.array() < 0.0).any())
    throw std::invalid_argument("MtGpModel: negative noise variance");
  if (m.transform.rows() != D || m.transform.cols() != D)
    throw std::invalid_argument("MtGpModel: transform must be D x D");
  check_phi(m.scalar);
}

// Full covariance of the stacked system, (A k_T A^T) (x) k(X,X) + Sigma.
inline MatrixXd mt_covariance(const MtGpModel& m) {
  const Index N = m.n_points(), D = m.n_tasks();
  MatrixXd T = m.transform * m.tasks.task_matrix() * m.transform.transpose();
  MatrixXd K = assemble_separable(m.inputs, m.inputs, m.scalar, T).entries;
  for (Index j = 0; j < D; ++j)
    K.diagonal().segment(j * N, N).array() += m.noise_vars[j];
  return K;
}

inline void fit_cache(ScalarGpModel& m) {
  validate(m);
  MatrixXd K = gaussian_gram(m.inputs, m.inputs, m.kernel);
  K.diagonal().array() += m.noise_var;
  detail::CholFactor cf = detail::jittered_llt(K);
  m.factor = std::move(cf.L);
  m.jitter = cf.jitter;
  m.alpha = m.factor.triangularView<Eigen::Lower>().solve(m.targets);
  m.factor.triangularView<Eigen::Lower>().transpose().solveInPlace(m.alpha);
  m.fitted = true;
}

inline void fit_cache(MtGpModel& m) {
  validate(m);
  detail::CholFactor cf = detail::jittered_llt(mt_covariance(m));
  m.factor = std::move(cf.L);
  m.jitter = cf.jitter;
  m.alpha = m.factor.triangularView<Eigen::Lower>().solve(m.stacked_targets);
  m.factor.triangularView<Eigen::Lower>().transpose().solveInPlace(m.alpha);
  m.fitted = true;
}

namespace detail {

inline void require_fitted(bool fitted) {
  if (!fitted) throw std::logic_error("gp: cache is stale, call fit_cache first");
}

inline double lml_from_cache(const MatrixXd& factor, const VectorXd& alpha, const VectorXd& y) {
  const double quad = y.dot(alpha);
  const double logdet = 2.0 * factor.diagonal().array().log().sum();
  return -0.5 * quad - 0.5 * logdet - static_cast<double>(y.size()) * half_log_2pi();
}

}  // namespace detail

inline double log_marginal_likelihood(const ScalarGpModel& m) {
  detail::require_fitted(m.fitted);
  return detail::lml_from_cache(m.factor, m.alpha, m.targets);
}

inline double log_marginal_likelihood(const MtGpModel& m) {
  detail::require_fitted(m.fitted);
  return detail::lml_from_cache(m.factor, m.alpha, m.stacked_targets);
}

// Gradient of the log marginal likelihood in the unconstrained
// parameterization (theta_phi = log phi, theta_sigma = log sigma^2):
// dL/dtheta = 1/2 alpha^T dK alpha - 1/2 tr(K^-1 dK), chained.
// Layout: (theta_phi, theta_sigma).
inline VectorXd lml_gradient(const ScalarGpModel& m) {
  detail::require_fitted(m.fitted);
  const Index n = m.inputs.rows();
  MatrixXd dK = gaussian_gram_dphi(m.inputs, m.inputs, m.kernel);

  // W = L^-1, K^-1 = W^T W (lower triangle via rank update, cheaper than a
  // full product at the n of derivative fits); tr(K^-1 M) = sum(K^-1 o M).
  MatrixXd W = m.factor;
  detail::invert_lower_tri_inplace(W);
  MatrixXd Kinv = MatrixXd::Zero(n, n);
  Kinv.selfadjointView<Eigen::Lower>().rankUpdate(W.transpose());
  const double tr_inv = Kinv.trace();
  double tr_inv_dk = 0.0;
  for (Index j = 0; j < n; ++j) {
    tr_inv_dk += Kinv(j, j) * dK(j, j);
    for (Index i = j + 1; i < n; ++i) tr_inv_dk += 2.0 * Kinv(i, j) * dK(i, j);
  }

  VectorXd g(2);
  const double data_phi = m.alpha.dot(dK * m.alpha);
  g[0] = m.kernel.phi * 0.5 * (data_phi - tr_inv_dk);
  g[1] = m.noise_var * 0.5 * (m.alpha.squaredNorm() - tr_inv);
  return g;
}

// Multi-task gradient. Layout: (theta_phi, v_1..v_D, [theta_tau_1..D when
// tau is present], theta_sigma_1..D). v is unconstrained; tau and the noise
// variances are exp-parameterized.
inline VectorXd lml_gradient(const MtGpModel& m) {
  detail::require_fitted(m.fitted);
  const Index N = m.n_points(), D = m.n_tasks();
  const bool with_tau = m.tasks.tau.size() > 0;
  const MatrixXd& A = m.transform;

  MatrixXd Ks = gaussian_gram(m.inputs, m.inputs, m.scalar);
  MatrixXd dKs = gaussian_gram_dphi(m.inputs, m.inputs, m.scalar);
  MatrixXd T = m.tasks.task_matrix();
  MatrixXd TA = A * T * A.transpose();

  MatrixXd W = m.factor;
  detail::invert_lower_tri_inplace(W);
  MatrixXd Kinv(N * D, N * D);
  Kinv.noalias() = W.transpose() * W;

  // alpha reshaped with one task per column
  Eigen::Map<const MatrixXd> Am(m.alpha.data(), N, D);
  MatrixXd HK = Ks * Am, Hd = dKs * Am;
  MatrixXd G = Am.transpose() * HK;   // G_ac   = alpha_a^T Ks alpha_c
  MatrixXd Gp = Am.transpose() * Hd;  // Gp_ac  = alpha_a^T dKs alpha_c
  MatrixXd S(D, D), Sp(D, D);         // S_ac   = sum(Kinv block (a,c) o Ks)
  for (Index a = 0; a < D; ++a)
    for (Index c = 0; c < D; ++c) {
      S(a, c) = (Kinv.block(a * N, c * N, N, N).array() * Ks.array()).sum();
      Sp(a, c) = (Kinv.block(a * N, c * N, N, N).array() * dKs.array()).sum();
    }

  VectorXd g(1 + (with_tau ? 3 : 2) * D);
  g[0] = m.scalar.phi * 0.5 * ((Gp.array() * TA.array()).sum() - (Sp.array() * TA.array()).sum());

  // dK/dv_j = (A (e_j v^T + v e_j^T) A^T) (x) Ks collapses to 2 (A^T G A v)_j
  MatrixXd Gh = A.transpose() * G * A;
  MatrixXd Sh = A.transpose() * S * A;
  g.segment(1, D) = (Gh - Sh) * m.tasks.v;

  Index off = 1 + D;
  if (with_tau) {
    for (Index j = 0; j < D; ++j)
      g[off + j] = m.tasks.tau[j] * 0.5 * (Gh(j, j) - Sh(j, j));
    off += D;
  }
  for (Index j = 0; j < D; ++j) {
    const double data = Am.col(j).squaredNorm();
    const double tr = Kinv.diagonal().segment(j * N, N).sum();
    g[off + j] = m.noise_vars[j] * 0.5 * (data - tr);
  }
  return g;
}

inline PosteriorSummary posterior(const ScalarGpModel& m, const MatrixXd& eval_inputs,
                                  bool want_covariance = false) {
  detail::require_fitted(m.fitted);
  if (eval_inputs.rows() == 0) throw std::invalid_argument("posterior: empty evaluation set");
  MatrixXd Kstar = gaussian_gram(eval_inputs, m.inputs, m.kernel);
  PosteriorSummary out;
  out.mean = Kstar * m.alpha;
  if (want_covariance) {
    MatrixXd U = m.factor.triangularView<Eigen::Lower>().solve(MatrixXd(Kstar.transpose()));
    out.covariance = gaussian_gram(eval_inputs, eval_inputs, m.kernel) - U.transpose() * U;
  }
  return out;
}

inline PosteriorSummary posterior(const MtGpModel& m, const MatrixXd& eval_inputs,
                                  bool want_covariance = false) {
  detail::require_fitted(m.fitted);
  if (eval_inputs.rows() == 0) throw std::invalid_argument("posterior: empty evaluation set");
  MatrixXd T = m.transform * m.tasks.task_matrix() * m.transform.transpose();
  MatrixXd Kstar = assemble_separable(eval_inputs, m.inputs, m.scalar, T).entries;
  PosteriorSummary out;
  out.mean = Kstar * m.alpha;
  if (want_covariance) {
    MatrixXd U = m.factor.triangularView<Eigen::Lower>().solve(MatrixXd(Kstar.transpose()));
    out.covariance = assemble_separable(eval_inputs, eval_inputs, m.scalar, T).entries - U.transpose() * U;
  }
  return out;
}

// --- hyperparameter packing for the optimizer ---------------------------
// Scalar: theta = (log phi, log sigma^2).
// Multi-task: theta = (log phi, v, [log tau], log sigma_1^2 .. log sigma_D^2).

inline VectorXd pack_params(const ScalarGpModel& m) {
  VectorXd t(2);
  t << std::log(m.kernel.phi), std::log(m.noise_var);
  return t;
}

inline void unpack_params(const VectorXd& t, ScalarGpModel& m) {
  if (t.size() != 2) throw std::invalid_argument("unpack_params: expected 2 parameters");
  m.kernel.phi = std::exp(t[0]);
  m.noise_var = std::exp(t[1]);
  m.fitted = false;
}

inline VectorXd pack_params(const MtGpModel& m) {
  const Index D = m.tasks.tasks();
  const bool with_tau = m.tasks.tau.size() > 0;
  VectorXd t(1 + (with_tau ? 3 : 2) * D);
  t[0] = std::log(m.scalar.phi);
  t.segment(1, D) = m.tasks.v;
  Index off = 1 + D;
  if (with_tau) {
    t.segment(off, D) = m.tasks.tau.array().log();
    off += D;
  }
  t.segment(off, D) = m.noise_vars.array().log();
  return t;
}

inline void unpack_params(const VectorXd& t, MtGpModel& m) {
  const Index D = m.tasks.tasks();
  const bool with_tau = m.tasks.tau.size() > 0;
  if (t.size() != 1 + (with_tau ? 3 : 2) * D)
    throw std::invalid_argument("unpack_params: parameter length mismatch");
  m.scalar.phi = std::exp(t[0]);
  m.tasks.v = t.segment(1, D);
  Index off = 1 + D;
  if (with_tau) {
    m.tasks.tau = t.segment(off, D).array().exp();
    off += D;
  }
  m.noise_vars = t.segment(off, D).array().exp();
  m.fitted = false;
}

// Median pairwise distance of the rows of X; standard lengthscale heuristic.
inline double median_pairwise_distance(const MatrixXd& X) {
  const Index n = X.rows();
  if (n < 2) throw std::invalid_argument("median_pairwise_distance: need at least 2 points");
  std::vector<double> d;
  d.reserve(static_cast<size_t>(n) * (n - 1) / 2);
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) d.push_back((X.row(i) - X.row(j)).norm());
  size_t mid = d.size() / 2;
  std::nth_element(d.begin(), d.begin() + mid, d.end());
  return d[mid];
}

}  // namespace phgp
