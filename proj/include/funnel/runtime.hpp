#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "funnel/deviation.hpp"
#include "funnel/geometry.hpp"
#include "funnel/nominal.hpp"
#include "funnel/synthesis.hpp"

namespace funnel {

// Everything run_online needs beyond the models and the nominal.
struct RunSettings {
  SegmentSchedule schedule;
  double alpha = 0.98;
  double mu = 1.02;
  double excitation_bound = 0.15;
  std::uint64_t seed = 0;
  Box state_box;
  Box input_box;
  BoundConstants constants;
  Eigen::VectorXd initial_state;       // plant start (possibly perturbed)
  Eigen::VectorXd k0_q_weights;        // initial-controller LQR weights
  Eigen::VectorXd k0_r_weights;
  double envelope_cap = 1e3;
  double rank_tol = 1e-8;
  FunnelSdpSettings sdp;
  double fd_scale = 1e-5;
};

struct ControllerRecord {
  int segment = 0;
  Eigen::MatrixXd p;
  Eigen::MatrixXd k;
  Eigen::MatrixXd l;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double nu = 0.0;
  double beta = std::numeric_limits<double>::quiet_NaN();
  double rho = std::numeric_limits<double>::quiet_NaN();
  Eigen::MatrixXd p_min_env;
  Eigen::MatrixXd r_max_env;
  bool synthesized = false;  // true when this segment's (P, K) came from the SDP
  bool fallback = false;     // true when retained from the previous segment
  std::string fallback_reason;
  SolverDiagnostics diagnostics;
  // Window data that certified this segment's controller (empty if none).
  std::optional<DataMatrices> data;
};

struct FallbackEvent {
  int segment = 0;  // segment that retained the previous controller
  std::string reason;
};

struct RankOutcome {
  int segment = 0;  // window segment the data came from
  bool informative = false;
  double sigma_min = 0.0;
};

struct StabilityBoundParams {
  double p_min_eig = 0.0;
  double p_max_eig = 0.0;
  double alpha = 0.0;
  double mu = 1.0;
  int segment_steps = 1;
  double b_bar = 0.0;    // max ||B(k)|| along the nominal
  double eps_bar = 0.0;

  double alpha_hat() const {
    return alpha * std::pow(mu, 1.0 / static_cast<double>(segment_steps));
  }
  bool dwell_condition_holds() const;
};

// Right-hand side of the practical-exponential-stability bound at step k.
double pges_bound(int k, const StabilityBoundParams& params, double eta0_norm);

struct RunViolations {
  std::vector<int> funnel;          // eta' P_i eta > 1 + tol
  std::vector<int> state_box;
  std::vector<int> input_box;
  std::vector<int> lyapunov;        // V(k+1) > alpha V(k) outside windows
  std::vector<int> stability_bound; // ||eta(k)|| > pges bound

  bool none() const {
    return funnel.empty() && state_box.empty() && input_box.empty() && lyapunov.empty() &&
           stability_bound.empty();
  }
};

struct RunReport {
  std::vector<Eigen::VectorXd> states;  // N+1 entries (shorter if diverged)
  std::vector<Eigen::VectorXd> inputs;  // N entries
  std::vector<Eigen::VectorXd> etas;    // N+1
  std::vector<Eigen::VectorXd> xis;     // N
  std::vector<bool> excited;            // N
  std::vector<ControllerRecord> segments;
  std::vector<double> bound_trace;      // N+1
  StabilityBoundParams bound_params;
  double eta0_norm = 0.0;
  RunViolations violations;
  std::vector<FallbackEvent> fallback_events;
  std::vector<RankOutcome> rank_checks;
  std::vector<double> betas;            // per completed window
  double terminal_deviation = 0.0;
  bool diverged = false;
  int divergence_step = -1;
};

struct InitialController {
  Eigen::MatrixXd p0;
  Eigen::MatrixXd k0;
};

// Twin-LQR initial controller with a Lyapunov-shaped funnel, scaled so that
// eta(0) is inside the unit level set and the set fits the segment-0 state
// envelope.  Validated by simulating the twin closed loop for one segment.
InitialController initial_controller(const DiscreteModel& twin, const NominalTrajectory& nom,
                                     const RunSettings& settings,
                                     const Eigen::MatrixXd& p_min_env0);

// Per-step envelopes along the nominal for one segment, combined into the
// single segment envelope pair (cached).
SegmentEnvelopes segment_envelopes_for(const NominalTrajectory& nom, const RunSettings& settings,
                                       int segment);

// The online loop: per-segment feedback with excitation windows, end-of-window
// data assembly, SDP synthesis for the next segment with fallback on failure.
RunReport run_online(const DiscreteModel& plant, const DiscreteModel& twin,
                     const NominalTrajectory& nom, const RunSettings& settings);

// Twin-designed nominal tracking controller applied to the plant without any
// data-driven updates; divergence is recorded, not thrown.
RunReport baseline_run(const DiscreteModel& plant, const NominalTrajectory& nom,
                       const Eigen::MatrixXd& baseline_feedback, const RunSettings& settings);

// Re-derives every violation category from a finished report.
RunViolations check_report(const RunReport& report, const RunSettings& settings);

// max_k ||B(k)||_2 along the nominal (finite-difference Jacobians).
double max_input_jacobian_norm(const DiscreteModel& model, const NominalTrajectory& nom,
                               double fd_scale = 1e-5);

}  // namespace funnel
