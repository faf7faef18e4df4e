#include "funnel/nominal.hpp"

#include <cmath>

#include "funnel/rng.hpp"

namespace funnel {

double increment_bound_v(const NominalTrajectory& nom) {
  const int n_steps = static_cast<int>(nom.inputs.size());
  double v = 0.0;
  for (int j = 0; j + 1 < n_steps; ++j) {
    const double dx = (nom.states[j + 1] - nom.states[j]).squaredNorm();
    const double du = (nom.inputs[j + 1] - nom.inputs[j]).squaredNorm();
    v = std::max(v, std::sqrt(dx + du));
  }
  return v;
}

Eigen::MatrixXd nominal_tracking_gain(const DiscreteModel& twin, const Eigen::VectorXd& x_goal,
                                      const Eigen::VectorXd& u_goal,
                                      const LqrPlanSettings& settings) {
  const Jacobians lin = jacobians_fd(twin, x_goal, u_goal);
  const Eigen::MatrixXd q = settings.q_weights.asDiagonal();
  const Eigen::MatrixXd r = settings.r_weights.asDiagonal();
  return solve_dlqr(lin.a, lin.b, q, r).gain;
}

NominalTrajectory plan_nominal_lqr(const DiscreteModel& twin, const Eigen::VectorXd& x0,
                                   const Eigen::VectorXd& x_goal, const Eigen::VectorXd& u_goal,
                                   int horizon, const LqrPlanSettings& settings) {
  if (horizon < 1) throw NumericalError("plan_nominal_lqr: horizon must be >= 1");
  const double eq_defect = (twin.step(x_goal, u_goal) - x_goal).norm();
  if (eq_defect > settings.equilibrium_tol) {
    throw NumericalError("plan_nominal_lqr: (x_goal, u_goal) is not a twin equilibrium");
  }

  const Eigen::MatrixXd k = nominal_tracking_gain(twin, x_goal, u_goal, settings);

  NominalTrajectory nom;
  nom.states.reserve(horizon + 1);
  nom.inputs.reserve(horizon);
  Eigen::VectorXd x = x0;
  nom.states.push_back(x);
  for (int step = 0; step < horizon; ++step) {
    Eigen::VectorXd u = u_goal - k * (x - x_goal);
    if (settings.input_box && !settings.input_box->contains(u)) {
      throw NumericalError("plan_nominal_lqr: nominal input leaves its box at step " +
                           std::to_string(step));
    }
    x = twin.step(x, u);
    if (settings.state_box && !settings.state_box->contains(x)) {
      throw NumericalError("plan_nominal_lqr: nominal state leaves its box at step " +
                           std::to_string(step + 1));
    }
    nom.inputs.push_back(u);
    nom.states.push_back(x);
  }
  nom.increment_bound = increment_bound_v(nom);
  return nom;
}

double estimate_gamma(const DiscreteModel& plant, const DiscreteModel& twin,
                      const NominalTrajectory& nom, double inflation) {
  if (nom.states.empty()) throw NumericalError("estimate_gamma: empty nominal");
  double gamma = 0.0;
  for (int k = 0; k < nom.horizon(); ++k) {
    gamma = std::max(
        gamma, (plant.step(nom.states[k], nom.inputs[k]) - twin.step(nom.states[k], nom.inputs[k]))
                   .norm());
  }
  if (nom.horizon() == 0) {
    // Single-point nominal: use the state with a zero input of matching size.
    Eigen::VectorXd u = Eigen::VectorXd::Zero(plant.input_dim());
    gamma = (plant.step(nom.states[0], u) - twin.step(nom.states[0], u)).norm();
  }
  return inflation * gamma;
}

namespace {

// Random point z = (x, u) in the infinity-norm tube around a random nominal point.
std::pair<Eigen::VectorXd, Eigen::VectorXd> tube_point(const NominalTrajectory& nom, Rng& rng,
                                                       double radius, int n, int m) {
  const int k = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(nom.horizon()));
  Eigen::VectorXd x = nom.states[k];
  Eigen::VectorXd u = nom.inputs[k];
  for (int i = 0; i < n; ++i) x(i) += rng.uniform(-radius, radius);
  for (int i = 0; i < m; ++i) u(i) += rng.uniform(-radius, radius);
  return {x, u};
}

Eigen::MatrixXd stacked_jacobian(const DiscreteModel& model, const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& u, double fd_scale) {
  const Jacobians j = jacobians_fd(model, x, u, fd_scale);
  Eigen::MatrixXd ab(j.a.rows(), j.a.cols() + j.b.cols());
  ab << j.a, j.b;
  return ab;
}

}  // namespace

double estimate_lipschitz_jacobian(const DiscreteModel& plant, const NominalTrajectory& nom,
                                   const ProbeSettings& probe, double inflation) {
  if (probe.radius <= 0.0 || probe.samples < 2) {
    throw NumericalError("estimate_lipschitz_jacobian: invalid probe settings");
  }
  const int n = plant.state_dim();
  const int m = plant.input_dim();
  Rng rng(derive_seed(probe.seed, seed_purpose::kEstimation, 1));
  double best = 0.0;
  for (int s = 0; s < probe.samples; ++s) {
    auto [xa, ua] = tube_point(nom, rng, probe.radius, n, m);
    auto [xb, ub] = tube_point(nom, rng, probe.radius, n, m);
    Eigen::VectorXd za(n + m), zb(n + m);
    za << xa, ua;
    zb << xb, ub;
    const double dist = (za - zb).norm();
    if (dist < 1e-9) continue;  // degenerate pair
    const Eigen::MatrixXd ja = stacked_jacobian(plant, xa, ua, probe.fd_scale);
    const Eigen::MatrixXd jb = stacked_jacobian(plant, xb, ub, probe.fd_scale);
    best = std::max(best, spectral_norm(ja - jb) / dist);
  }
  return inflation * best;
}

double estimate_remainder(const DiscreteModel& plant, const NominalTrajectory& nom,
                          const ProbeSettings& probe, double inflation) {
  if (probe.radius <= 0.0 || probe.samples < 2) {
    throw NumericalError("estimate_remainder: invalid probe settings");
  }
  const int n = plant.state_dim();
  const int m = plant.input_dim();
  Rng rng(derive_seed(probe.seed, seed_purpose::kEstimation, 2));
  double best = 0.0;
  for (int s = 0; s < probe.samples; ++s) {
    const int k = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(nom.horizon()));
    const Eigen::VectorXd& x = nom.states[k];
    const Eigen::VectorXd& u = nom.inputs[k];
    Eigen::VectorXd delta = rng.ball(n + m, probe.radius);
    const double dn = delta.norm();
    if (dn < 1e-9) continue;
    const Eigen::MatrixXd jac = stacked_jacobian(plant, x, u, probe.fd_scale);
    const Eigen::VectorXd pred = plant.step(x, u) + jac * delta;
    const Eigen::VectorXd actual = plant.step(x + delta.head(n), u + delta.tail(m));
    best = std::max(best, (actual - pred).norm() / (dn * dn));
  }
  return inflation * best;
}

double nominal_defect(const DiscreteModel& twin, const NominalTrajectory& nom) {
  double defect = 0.0;
  for (int k = 0; k < nom.horizon(); ++k) {
    defect = std::max(defect,
                      (twin.step(nom.states[k], nom.inputs[k]) - nom.states[k + 1]).norm());
  }
  return defect;
}

}  // namespace funnel
