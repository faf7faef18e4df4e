#pragma once

#include <Eigen/Core>

#include <functional>
#include <utility>

#include "funnel/linalg.hpp"

namespace funnel {

// A discrete-time system x(k+1) = step(x(k), u(k)).  Anything exposing the
// dimensions and the one-step map can stand in for the arm, which lets the
// tests inject linear systems with known answers.
class DiscreteModel {
 public:
  virtual ~DiscreteModel() = default;

  virtual int state_dim() const = 0;
  virtual int input_dim() const = 0;
  virtual Eigen::VectorXd step(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const = 0;
};

// Classical 4-stage Runge-Kutta step of dx/dt = field(x, u) with the input
// held constant across the stages (zero-order hold).
Eigen::VectorXd rk4_step(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)>& field,
    const Eigen::VectorXd& x, const Eigen::VectorXd& u, double dt);

// Discrete model obtained by RK4 discretization of a continuous vector field.
class OdeModel : public DiscreteModel {
 public:
  using Field = std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)>;

  OdeModel(int state_dim, int input_dim, double dt, Field field)
      : n_(state_dim), m_(input_dim), dt_(dt), field_(std::move(field)) {
    if (dt_ <= 0.0) throw NumericalError("OdeModel: dt must be positive");
  }

  int state_dim() const override { return n_; }
  int input_dim() const override { return m_; }
  double dt() const { return dt_; }

  Eigen::VectorXd field(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const {
    return field_(x, u);
  }

  Eigen::VectorXd step(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const override {
    return rk4_step(field_, x, u, dt_);
  }

 private:
  int n_;
  int m_;
  double dt_;
  Field field_;
};

// Exact discrete linear map x+ = A x + B u, for tests with closed-form answers.
class LtiModel : public DiscreteModel {
 public:
  LtiModel(Eigen::MatrixXd a, Eigen::MatrixXd b) : a_(std::move(a)), b_(std::move(b)) {}

  int state_dim() const override { return static_cast<int>(a_.rows()); }
  int input_dim() const override { return static_cast<int>(b_.cols()); }

  Eigen::VectorXd step(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const override {
    return a_ * x + b_ * u;
  }

  const Eigen::MatrixXd& a() const { return a_; }
  const Eigen::MatrixXd& b() const { return b_; }

 private:
  Eigen::MatrixXd a_;
  Eigen::MatrixXd b_;
};

struct Jacobians {
  Eigen::MatrixXd a;  // d step / d x, n x n
  Eigen::MatrixXd b;  // d step / d u, n x m
};

// Central finite differences of the one-step map, column by column.  The
// perturbation is relative with an absolute floor; see jacobian_step_size.
Jacobians jacobians_fd(const DiscreteModel& model, const Eigen::VectorXd& x,
                       const Eigen::VectorXd& u, double h = 1e-5);

// Per-coordinate step max(h * |value|, 1e-7).
double jacobian_step_size(double value, double h);

}  // namespace funnel
