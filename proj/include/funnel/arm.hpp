#pragma once

#include <Eigen/Core>

#include "funnel/model.hpp"

namespace funnel {

// Physical parameters of the planar 2-DoF arm.  Masses, lengths and inertias
// must be strictly positive; viscous friction coefficients may be zero.
struct ArmParameters {
  double m1 = 0.0, m2 = 0.0;   // link masses [kg]
  double l1 = 0.0, l2 = 0.0;   // link lengths [m]
  double lc1 = 0.0, lc2 = 0.0; // center-of-mass distances [m]
  double I1 = 0.0, I2 = 0.0;   // link inertias about the CoM [kg m^2]
  double b1 = 0.0, b2 = 0.0;   // viscous friction [N m s / rad]
  double g = 9.81;             // gravity [m/s^2]

  // Derived constants of the manipulator equations.
  double const_a() const { return I1 + I2 + m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2); }
  double const_b() const { return m2 * l1 * lc2; }
  double const_d() const { return I2 + m2 * lc2 * lc2; }

  // Throws NumericalError when a positivity invariant is violated.
  void validate() const;
};

// Case-study parameter tables (plant vs. slightly mismatched twin).
ArmParameters case_study_plant();
ArmParameters case_study_twin();

// State convention: x = [q1, q2, dq1, dq2].
using ArmState = Eigen::Vector4d;

Eigen::Matrix2d mass_matrix(const ArmParameters& p, double q2);
Eigen::Matrix2d coriolis_matrix(const ArmParameters& p, double q2, double dq1, double dq2);
Eigen::Vector2d gravity_vector(const ArmParameters& p, double q1, double q2);

// dx/dt = [dq; M(q)^-1 (tau - C(q,dq) dq - G(q) - B dq)].
Eigen::Vector4d continuous_dynamics(const ArmParameters& p, const Eigen::Vector4d& x,
                                    const Eigen::Vector2d& u);

// RK4-discretized arm.  One object per parameter table; the plant and the twin
// are two instances of this class.
class ArmModel : public DiscreteModel {
 public:
  ArmModel(const ArmParameters& params, double dt);

  int state_dim() const override { return 4; }
  int input_dim() const override { return 2; }
  double dt() const { return dt_; }
  const ArmParameters& parameters() const { return params_; }

  Eigen::VectorXd field(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const;
  Eigen::VectorXd step(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const override;

  // Torque that holds configuration (q1, q2) at rest.
  Eigen::Vector2d gravity_compensation(double q1, double q2) const {
    return gravity_vector(params_, q1, q2);
  }

 private:
  ArmParameters params_;
  double dt_;
};

}  // namespace funnel
