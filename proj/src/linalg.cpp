#include "funnel/linalg.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace funnel {

double min_eigenvalue(const Eigen::MatrixXd& sym) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

double max_eigenvalue(const Eigen::MatrixXd& sym) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

double spectral_norm(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues()(0);
}

double min_singular_value(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues()(svd.singularValues().size() - 1);
}

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& a) { return 0.5 * (a + a.transpose()); }

bool is_symmetric(const Eigen::MatrixXd& a, double tol) {
  if (a.rows() != a.cols()) return false;
  return (a - a.transpose()).cwiseAbs().maxCoeff() <= tol * std::max(1.0, a.cwiseAbs().maxCoeff());
}

Eigen::MatrixXd spd_sqrt(const Eigen::MatrixXd& sym) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  if (es.eigenvalues().minCoeff() < 0.0) {
    throw NumericalError("spd_sqrt: matrix is not positive semidefinite");
  }
  return es.eigenvectors() * es.eigenvalues().cwiseSqrt().asDiagonal() *
         es.eigenvectors().transpose();
}

Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& sym) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  const double lo = es.eigenvalues().minCoeff();
  if (lo <= 0.0) {
    throw NumericalError("spd_inverse: matrix is not positive definite");
  }
  return es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() *
         es.eigenvectors().transpose();
}

Eigen::MatrixXd solve_discrete_lyapunov(const Eigen::MatrixXd& a, const Eigen::MatrixXd& q) {
  const int n = static_cast<int>(a.rows());
  if (a.cols() != n || q.rows() != n || q.cols() != n) {
    throw NumericalError("solve_discrete_lyapunov: dimension mismatch");
  }
  // vec(A^T X A) = (A^T (x) A^T) vec(X); solve (I - A^T (x) A^T) vec(X) = vec(Q).
  Eigen::MatrixXd at = a.transpose();
  Eigen::MatrixXd kron(n * n, n * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) kron.block(i * n, j * n, n, n) = at(i, j) * at;
  Eigen::MatrixXd lhs = Eigen::MatrixXd::Identity(n * n, n * n) - kron;
  Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(q.data(), n * n);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(lhs);
  if (!lu.isInvertible()) {
    throw NumericalError("solve_discrete_lyapunov: no unique solution (rho(A) >= 1?)");
  }
  Eigen::VectorXd x = lu.solve(rhs);
  return symmetrize(Eigen::Map<const Eigen::MatrixXd>(x.data(), n, n));
}

DlqrResult solve_dlqr(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                      const Eigen::MatrixXd& q, const Eigen::MatrixXd& r, double tol,
                      int max_iter) {
  const int n = static_cast<int>(a.rows());
  const int m = static_cast<int>(b.cols());
  if (b.rows() != n || q.rows() != n || q.cols() != n || r.rows() != m || r.cols() != m) {
    throw NumericalError("solve_dlqr: dimension mismatch");
  }
  Eigen::MatrixXd p = q;
  DlqrResult out;
  for (int it = 0; it < max_iter; ++it) {
    Eigen::MatrixXd btp = b.transpose() * p;
    Eigen::MatrixXd gram = r + btp * b;
    Eigen::LLT<Eigen::MatrixXd> llt(gram);
    if (llt.info() != Eigen::Success) {
      throw NumericalError("solve_dlqr: R + B'PB not positive definite");
    }
    Eigen::MatrixXd k = llt.solve(btp * a);
    Eigen::MatrixXd p_next = symmetrize(q + a.transpose() * p * (a - b * k));
    const double delta = (p_next - p).cwiseAbs().maxCoeff();
    p = p_next;
    if (delta <= tol * std::max(1.0, p.cwiseAbs().maxCoeff())) {
      out.iterations = it + 1;
      out.cost_matrix = p;
      Eigen::MatrixXd btp2 = b.transpose() * p;
      out.gain = (r + btp2 * b).llt().solve(btp2 * a);
      return out;
    }
  }
  throw NumericalError("solve_dlqr: Riccati iteration did not converge");
}

}  // namespace funnel
