#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <vector>

#include "funnel/model.hpp"

namespace funnel {

// Axis-aligned constraint box lo <= v <= hi.
struct Box {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  bool contains(const Eigen::VectorXd& v, double tol = 0.0) const {
    return (v.array() >= lower.array() - tol).all() && (v.array() <= upper.array() + tol).all();
  }
};

// Twin-feasible nominal trajectory with its increment bound.
struct NominalTrajectory {
  std::vector<Eigen::VectorXd> states;   // x_nom(0..N)
  std::vector<Eigen::VectorXd> inputs;   // u_nom(0..N-1)
  double increment_bound = 0.0;          // v

  int horizon() const { return static_cast<int>(inputs.size()); }
};

// Scalar constants feeding every disturbance / variation bound.
struct BoundConstants {
  double gamma = 0.0;        // plant-twin one-step mismatch bound
  double lipschitz_jacobian = 0.0;  // L_J
  double remainder = 0.0;    // L_r, second-order Taylor remainder coefficient
  double increment = 0.0;    // v, nominal increment bound
  double variation_rate() const { return lipschitz_jacobian * increment; }  // C = L_J v
};

// Exact maximum over j of ||(x(j+1), u(j+1)) - (x(j), u(j))||.
double increment_bound_v(const NominalTrajectory& nom);

struct LqrPlanSettings {
  Eigen::VectorXd q_weights;  // diagonal of Q
  Eigen::VectorXd r_weights;  // diagonal of R
  double equilibrium_tol = 1e-6;
  std::optional<Box> state_box;
  std::optional<Box> input_box;
};

// Simulates the twin under u = u_goal - K (x - x_goal), with K the
// infinite-horizon LQR gain for the twin linearized at the goal.  The goal
// must be an equilibrium of the twin under u_goal.
NominalTrajectory plan_nominal_lqr(const DiscreteModel& twin, const Eigen::VectorXd& x0,
                                   const Eigen::VectorXd& x_goal, const Eigen::VectorXd& u_goal,
                                   int horizon, const LqrPlanSettings& settings);

// LQR gain used by the planner (also the baseline controller's gain).
Eigen::MatrixXd nominal_tracking_gain(const DiscreteModel& twin, const Eigen::VectorXd& x_goal,
                                      const Eigen::VectorXd& u_goal,
                                      const LqrPlanSettings& settings);

// max_k || f(x_nom(k), u_nom(k)) - f_twin(x_nom(k), u_nom(k)) ||, then scaled
// by `inflation`.
double estimate_gamma(const DiscreteModel& plant, const DiscreteModel& twin,
                      const NominalTrajectory& nom, double inflation = 1.0);

struct ProbeSettings {
  double radius = 0.1;   // infinity-norm tube radius around the nominal
  int samples = 200;
  std::uint64_t seed = 0;
  double fd_scale = 1e-5;
};

// Jacobian Lipschitz constant of the one-step map, estimated by sampled
// difference quotients of finite-difference Jacobians near the nominal.
double estimate_lipschitz_jacobian(const DiscreteModel& plant, const NominalTrajectory& nom,
                                   const ProbeSettings& probe, double inflation = 1.0);

// Second-order remainder constant: max ||f(z+d) - f(z) - J(z) d|| / ||d||^2.
double estimate_remainder(const DiscreteModel& plant, const NominalTrajectory& nom,
                          const ProbeSettings& probe, double inflation = 1.0);

// Largest one-step twin-dynamics defect along the trajectory (invariant check).
double nominal_defect(const DiscreteModel& twin, const NominalTrajectory& nom);

}  // namespace funnel
