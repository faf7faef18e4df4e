#include "funnel/arm.hpp"

#include <cmath>

namespace funnel {

void ArmParameters::validate() const {
  auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
  if (!positive(m1) || !positive(m2) || !positive(l1) || !positive(l2) || !positive(lc1) ||
      !positive(lc2) || !positive(I1) || !positive(I2)) {
    throw NumericalError("ArmParameters: masses, lengths and inertias must be positive");
  }
  if (b1 < 0.0 || b2 < 0.0 || !std::isfinite(b1) || !std::isfinite(b2)) {
    throw NumericalError("ArmParameters: friction coefficients must be nonnegative");
  }
  if (!(const_a() > 0.0) || !(const_b() > 0.0) || !(const_d() > 0.0)) {
    throw NumericalError("ArmParameters: derived constants a, b, d must be positive");
  }
}

ArmParameters case_study_plant() {
  ArmParameters p;
  p.m1 = 1.00;
  p.m2 = 0.80;
  p.l1 = 0.70;
  p.l2 = 0.60;
  p.lc1 = 0.35;
  p.lc2 = 0.30;
  p.I1 = 0.050;
  p.I2 = 0.040;
  p.b1 = 0.020;
  p.b2 = 0.020;
  p.g = 9.81;
  return p;
}

ArmParameters case_study_twin() {
  ArmParameters p;
  p.m1 = 0.95;
  p.m2 = 0.84;
  p.l1 = 0.73;
  p.l2 = 0.58;
  p.lc1 = 0.365;
  p.lc2 = 0.29;
  p.I1 = 0.055;
  p.I2 = 0.038;
  p.b1 = 0.018;
  p.b2 = 0.022;
  p.g = 9.81;
  return p;
}

Eigen::Matrix2d mass_matrix(const ArmParameters& p, double q2) {
  const double a = p.const_a();
  const double b = p.const_b();
  const double d = p.const_d();
  const double c2 = std::cos(q2);
  Eigen::Matrix2d m;
  m << a + 2.0 * b * c2, d + b * c2, d + b * c2, d;
  return m;
}

Eigen::Matrix2d coriolis_matrix(const ArmParameters& p, double q2, double dq1, double dq2) {
  const double b = p.const_b();
  const double s2 = std::sin(q2);
  Eigen::Matrix2d c;
  c << -2.0 * b * s2 * dq2, -b * s2 * dq2, b * s2 * dq1, 0.0;
  return c;
}

Eigen::Vector2d gravity_vector(const ArmParameters& p, double q1, double q2) {
  const double c1 = std::cos(q1);
  const double c12 = std::cos(q1 + q2);
  Eigen::Vector2d g;
  g(0) = (p.m1 * p.lc1 + p.m2 * p.l1) * p.g * c1 + p.m2 * p.lc2 * p.g * c12;
  g(1) = p.m2 * p.lc2 * p.g * c12;
  return g;
}

Eigen::Vector4d continuous_dynamics(const ArmParameters& p, const Eigen::Vector4d& x,
                                    const Eigen::Vector2d& u) {
  const Eigen::Vector2d dq(x(2), x(3));
  const Eigen::Matrix2d m = mass_matrix(p, x(1));
  const Eigen::Matrix2d c = coriolis_matrix(p, x(1), x(2), x(3));
  const Eigen::Vector2d g = gravity_vector(p, x(0), x(1));
  const Eigen::Vector2d fric(p.b1 * x(2), p.b2 * x(3));

  const double det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
  if (!(std::abs(det) > 1e-12)) {
    throw NumericalError("continuous_dynamics: singular mass matrix (corrupt parameters)");
  }
  const Eigen::Vector2d rhs = u - c * dq - g - fric;
  Eigen::Vector2d ddq;
  ddq(0) = (m(1, 1) * rhs(0) - m(0, 1) * rhs(1)) / det;
  ddq(1) = (-m(1, 0) * rhs(0) + m(0, 0) * rhs(1)) / det;

  Eigen::Vector4d dx;
  dx << dq(0), dq(1), ddq(0), ddq(1);
  return dx;
}

ArmModel::ArmModel(const ArmParameters& params, double dt) : params_(params), dt_(dt) {
  params_.validate();
  if (dt_ <= 0.0) throw NumericalError("ArmModel: dt must be positive");
}

Eigen::VectorXd ArmModel::field(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const {
  return continuous_dynamics(params_, Eigen::Vector4d(x), Eigen::Vector2d(u));
}

Eigen::VectorXd ArmModel::step(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const {
  Eigen::VectorXd next = rk4_step(
      [this](const Eigen::VectorXd& xs, const Eigen::VectorXd& us) { return field(xs, us); }, x,
      u, dt_);
  if (!next.allFinite()) {
    throw NumericalError("ArmModel::step: non-finite state (diverging trajectory)");
  }
  return next;
}

}  // namespace funnel
