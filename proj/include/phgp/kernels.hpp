#pragma once

#include <Eigen/Dense>
#include <stdexcept>

// Kernel building blocks for the multi-task GP.
//
// Point sets are dense matrices with one point per row (N x d). Stacked
// multi-task vectors and matrices are task-major: all entries of task 0
// come first, so entry (j*N + i) belongs to task j, point i.

namespace phgp {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

struct GaussianKernelParams {
  double phi = 1.0;  // isotropic lengthscale, > 0; no output scale (amplitudes live in the task loadings)
};

// Intertask covariance k_T = v v^T + diag(tau). tau may be empty (= 0),
// in which case k_T is the pure rank-1 loading matrix.
struct IntertaskParams {
  VectorXd v;
  VectorXd tau;

  Index tasks() const { return v.size(); }

  MatrixXd task_matrix() const {
    MatrixXd t = v * v.transpose();
    if (tau.size() > 0) {
      if (tau.size() != v.size())
        throw std::invalid_argument("IntertaskParams: tau/v size mismatch");
      t += tau.asDiagonal();
    }
    return t;
  }
};

// Assembled block kernel matrix over two point sets, task-major layout:
// entries((j*R + i), (j2*C + i2)) = block(x_i, x_i2)(j, j2)
// with R = n_row_points, C = n_col_points.
struct KernelMatrix {
  MatrixXd entries;
  Index n_row_points = 0;
  Index n_col_points = 0;
  Index n_tasks = 0;
};

inline Index stacked_index(Index task, Index point, Index n_points) {
  return task * n_points + point;
}

inline void check_phi(const GaussianKernelParams& p) {
  if (!(p.phi > 0.0)) throw std::invalid_argument("GaussianKernelParams: phi must be > 0");
}

inline double gaussian_kernel(const VectorXd& x, const VectorXd& y, const GaussianKernelParams& p) {
  check_phi(p);
  if (x.size() != y.size()) throw std::invalid_argument("gaussian_kernel: dimension mismatch");
  return std::exp(-(x - y).squaredNorm() / (2.0 * p.phi * p.phi));
}

// d/dphi of the Gaussian kernel: k * ||x-y||^2 / phi^3.
inline double gaussian_kernel_dphi(const VectorXd& x, const VectorXd& y, const GaussianKernelParams& p) {
  const double r2 = (x - y).squaredNorm();
  return gaussian_kernel(x, y, p) * r2 / (p.phi * p.phi * p.phi);
}

// Gram matrix of the scalar kernel, rows of X vs rows of Y.
inline MatrixXd gaussian_gram(const MatrixXd& X, const MatrixXd& Y, const GaussianKernelParams& p) {
  check_phi(p);
  if (X.cols() != Y.cols()) throw std::invalid_argument("gaussian_gram: dimension mismatch");
  const double inv2p2 = 1.0 / (2.0 * p.phi * p.phi);
  MatrixXd g(X.rows(), Y.rows());
  for (Index j = 0; j < Y.rows(); ++j)
    g.col(j) = (-(X.rowwise() - Y.row(j)).rowwise().squaredNorm() * inv2p2).array().exp();
  return g;
}

inline MatrixXd gaussian_gram_dphi(const MatrixXd& X, const MatrixXd& Y, const GaussianKernelParams& p) {
  check_phi(p);
  if (X.cols() != Y.cols()) throw std::invalid_argument("gaussian_gram_dphi: dimension mismatch");
  const double inv2p2 = 1.0 / (2.0 * p.phi * p.phi);
  const double invp3 = 1.0 / (p.phi * p.phi * p.phi);
  MatrixXd g(X.rows(), Y.rows());
  for (Index j = 0; j < Y.rows(); ++j) {
    VectorXd r2 = (X.rowwise() - Y.row(j)).rowwise().squaredNorm();
    g.col(j) = (-r2 * inv2p2).array().exp() * r2.array() * invp3;
  }
  return g;
}

// One D x D block of the separable multi-task kernel: k(x,y) * k_T.
inline MatrixXd mt_kernel_block(const VectorXd& x, const VectorXd& y,
                                const GaussianKernelParams& p, const IntertaskParams& tasks) {
  return gaussian_kernel(x, y, p) * tasks.task_matrix();
}

// Linearly transformed block: A * (k(x,y) * k_T) * A^T for constant A.
inline MatrixXd transformed_kernel_block(const VectorXd& x, const VectorXd& y,
                                         const GaussianKernelParams& p, const IntertaskParams& tasks,
                                         const MatrixXd& A) {
  if (A.rows() != A.cols() || A.rows() != tasks.tasks())
    throw std::invalid_argument("transformed_kernel_block: A must be D x D");
  return A * mt_kernel_block(x, y, p, tasks) * A.transpose();
}

enum class MixSide { Left, Right };

// Mixing blocks between the transformed and the plain process:
// Left:  A * k_block      (transformed rows vs plain columns)
// Right: k_block * A^T    (plain rows vs transformed columns)
inline MatrixXd mixing_kernel_block(const VectorXd& x, const VectorXd& y,
                                    const GaussianKernelParams& p, const IntertaskParams& tasks,
                                    const MatrixXd& A, MixSide side) {
  if (A.rows() != A.cols() || A.rows() != tasks.tasks())
    throw std::invalid_argument("mixing_kernel_block: A must be D x D");
  MatrixXd block = mt_kernel_block(x, y, p, tasks);
  return side == MixSide::Left ? MatrixXd(A * block) : MatrixXd(block * A.transpose());
}

// Entrywise assembly from an arbitrary block function (x_i, y_j) -> D x D.
template <typename BlockFn>
KernelMatrix assemble(const MatrixXd& X, const MatrixXd& Y, Index n_tasks, BlockFn&& block_fn) {
  if (X.rows() == 0 || Y.rows() == 0) throw std::invalid_argument("assemble: empty point set");
  KernelMatrix km;
  km.n_row_points = X.rows();
  km.n_col_points = Y.rows();
  km.n_tasks = n_tasks;
  km.entries.resize(n_tasks * X.rows(), n_tasks * Y.rows());
  for (Index i = 0; i < X.rows(); ++i) {
    for (Index j = 0; j < Y.rows(); ++j) {
      MatrixXd b = block_fn(VectorXd(X.row(i)), VectorXd(Y.row(j)));
      if (b.rows() != n_tasks || b.cols() != n_tasks)
        throw std::invalid_argument("assemble: block size mismatch");
      for (Index a = 0; a < n_tasks; ++a)
        for (Index c = 0; c < n_tasks; ++c)
          km.entries(stacked_index(a, i, X.rows()), stacked_index(c, j, Y.rows())) = b(a, c);
    }
  }
  return km;
}

// Fast path for blocks of the form k(x,y) * T with a constant task matrix T:
// the assembled matrix is the Kronecker product T (x) K_s. Entrywise equal to
// assemble() with the corresponding block function.
inline KernelMatrix assemble_separable(const MatrixXd& X, const MatrixXd& Y,
                                       const GaussianKernelParams& p, const MatrixXd& T) {
  if (X.rows() == 0 || Y.rows() == 0) throw std::invalid_argument("assemble_separable: empty point set");
  if (T.rows() != T.cols()) throw std::invalid_argument("assemble_separable: T must be square");
  const MatrixXd ks = gaussian_gram(X, Y, p);
  KernelMatrix km;
  km.n_row_points = X.rows();
  km.n_col_points = Y.rows();
  km.n_tasks = T.rows();
  km.entries.resize(T.rows() * X.rows(), T.cols() * Y.rows());
  for (Index a = 0; a < T.rows(); ++a)
    for (Index c = 0; c < T.cols(); ++c)
      km.entries.block(a * X.rows(), c * Y.rows(), X.rows(), Y.rows()) = T(a, c) * ks;
  return km;
}

}  // namespace phgp
