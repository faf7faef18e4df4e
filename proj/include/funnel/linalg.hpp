#pragma once

#include <Eigen/Core>

#include <stdexcept>

namespace funnel {

// Smallest eigenvalue of a symmetric matrix.
double min_eigenvalue(const Eigen::MatrixXd& sym);

// Largest eigenvalue of a symmetric matrix.
double max_eigenvalue(const Eigen::MatrixXd& sym);

// Induced 2-norm (largest singular value) of a general matrix.
double spectral_norm(const Eigen::MatrixXd& m);

// Smallest singular value.
double min_singular_value(const Eigen::MatrixXd& m);

// Force exact symmetry: (A + A^T) / 2.
Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& a);

bool is_symmetric(const Eigen::MatrixXd& a, double tol = 1e-10);

// Symmetric positive-definite square root.
Eigen::MatrixXd spd_sqrt(const Eigen::MatrixXd& sym);

// Inverse of an SPD matrix through its eigendecomposition (keeps symmetry
// exact, which the certificate checks rely on).
Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& sym);

// Solves the discrete Lyapunov equation A^T X A - X + Q = 0 by Kronecker
// vectorization.  Requires rho(A) < 1.
Eigen::MatrixXd solve_discrete_lyapunov(const Eigen::MatrixXd& a, const Eigen::MatrixXd& q);

struct DlqrResult {
  Eigen::MatrixXd gain;         // u = -gain * x stabilizes x+ = A x + B u
  Eigen::MatrixXd cost_matrix;  // Riccati fixed point
  int iterations = 0;
};

// Infinite-horizon discrete-time LQR via Riccati iteration to a fixed point.
// Throws std::runtime_error when the iteration fails to converge.
DlqrResult solve_dlqr(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                      const Eigen::MatrixXd& q, const Eigen::MatrixXd& r,
                      double tol = 1e-12, int max_iter = 200000);

// Thrown by dynamics/linear-algebra routines on structurally invalid input.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace funnel
