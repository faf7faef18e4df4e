#include "funnel/model.hpp"

#include <cmath>

namespace funnel {

Eigen::VectorXd rk4_step(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)>& field,
    const Eigen::VectorXd& x, const Eigen::VectorXd& u, double dt) {
  const Eigen::VectorXd k1 = field(x, u);
  const Eigen::VectorXd k2 = field(x + 0.5 * dt * k1, u);
  const Eigen::VectorXd k3 = field(x + 0.5 * dt * k2, u);
  const Eigen::VectorXd k4 = field(x + dt * k3, u);
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

double jacobian_step_size(double value, double h) {
  return std::max(h * std::abs(value), 1e-7);
}

Jacobians jacobians_fd(const DiscreteModel& model, const Eigen::VectorXd& x,
                       const Eigen::VectorXd& u, double h) {
  if (h <= 0.0) throw NumericalError("jacobians_fd: perturbation scale must be positive");
  const int n = model.state_dim();
  const int m = model.input_dim();
  Jacobians j;
  j.a.resize(n, n);
  j.b.resize(n, m);
  for (int c = 0; c < n; ++c) {
    const double hc = jacobian_step_size(x(c), h);
    Eigen::VectorXd xp = x, xm = x;
    xp(c) += hc;
    xm(c) -= hc;
    j.a.col(c) = (model.step(xp, u) - model.step(xm, u)) / (2.0 * hc);
  }
  for (int c = 0; c < m; ++c) {
    const double hc = jacobian_step_size(u(c), h);
    Eigen::VectorXd up = u, um = u;
    up(c) += hc;
    um(c) -= hc;
    j.b.col(c) = (model.step(x, up) - model.step(x, um)) / (2.0 * hc);
  }
  if (!j.a.allFinite() || !j.b.allFinite()) {
    throw NumericalError("jacobians_fd: non-finite entries");
  }
  return j;
}

}  // namespace funnel
