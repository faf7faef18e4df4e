#include "funnel/runtime.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace funnel {
namespace {

// FNV-style hash over doubles for the envelope cache key.
std::uint64_t hash_doubles(std::uint64_t h, const double* data, std::size_t count) {
  const auto* bytes = reinterpret_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < count * sizeof(double); ++i) {
    h ^= bytes[i];
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::uint64_t envelope_key(const NominalTrajectory& nom, const RunSettings& st, int segment) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (int k = st.schedule.segment_start(segment); k < st.schedule.window_end(segment); ++k) {
    h = hash_doubles(h, nom.states[k].data(), nom.states[k].size());
    if (k < nom.horizon()) h = hash_doubles(h, nom.inputs[k].data(), nom.inputs[k].size());
  }
  h = hash_doubles(h, st.state_box.lower.data(), st.state_box.lower.size());
  h = hash_doubles(h, st.state_box.upper.data(), st.state_box.upper.size());
  h = hash_doubles(h, st.input_box.lower.data(), st.input_box.lower.size());
  h = hash_doubles(h, st.input_box.upper.data(), st.input_box.upper.size());
  h = hash_doubles(h, &st.envelope_cap, 1);
  return h;
}

bool finite_and_bounded(const Eigen::VectorXd& v) { return v.allFinite() && v.norm() < 1e12; }

}  // namespace

bool StabilityBoundParams::dwell_condition_holds() const {
  if (mu < 1.0 || alpha <= 0.0 || alpha >= 1.0) return false;
  if (mu == 1.0) return segment_steps > 0;
  return static_cast<double>(segment_steps) > -std::log(mu) / std::log(alpha);
}

double pges_bound(int k, const StabilityBoundParams& params, double eta0_norm) {
  if (!params.dwell_condition_holds()) {
    throw NumericalError("pges_bound: dwell condition T > -ln(mu)/ln(alpha) violated");
  }
  if (params.p_min_eig <= 0.0 || params.p_max_eig < params.p_min_eig) {
    throw NumericalError("pges_bound: invalid extremal eigenvalue bounds");
  }
  const double cond = std::sqrt(params.p_max_eig / params.p_min_eig);
  const double ahat = params.alpha_hat();
  const double decay = cond * std::pow(ahat, 0.5 * static_cast<double>(k)) * eta0_norm;
  const double tail = cond *
                      std::pow(ahat / params.alpha, 0.5 * static_cast<double>(params.segment_steps)) /
                      (1.0 - std::sqrt(ahat)) * params.b_bar * params.eps_bar;
  return decay + tail;
}

SegmentEnvelopes segment_envelopes_for(const NominalTrajectory& nom, const RunSettings& settings,
                                       int segment) {
  const std::uint64_t key = envelope_key(nom, settings, segment);
  SegmentEnvelopes env;
  if (envelope_cache().lookup(key, &env)) return env;

  std::vector<Eigen::MatrixXd> p_steps;
  std::vector<Eigen::MatrixXd> r_steps;
  const int first = settings.schedule.segment_start(segment);
  const int last = settings.schedule.window_end(segment);  // segment end, exclusive
  for (int k = first; k < last; ++k) {
    const HalfspaceSet hx = linearize_box_constraints(settings.state_box.lower,
                                                      settings.state_box.upper, nom.states[k]);
    p_steps.push_back(mvie(hx, settings.envelope_cap).p_min);
    if (k < nom.horizon()) {
      const HalfspaceSet hu = linearize_box_constraints(settings.input_box.lower,
                                                        settings.input_box.upper, nom.inputs[k]);
      r_steps.push_back(input_envelope(hu, settings.envelope_cap));
    }
  }
  env = segment_envelopes(p_steps, r_steps);
  envelope_cache().store(key, env);
  return env;
}

InitialController initial_controller(const DiscreteModel& twin, const NominalTrajectory& nom,
                                     const RunSettings& settings,
                                     const Eigen::MatrixXd& p_min_env0) {
  const int n = twin.state_dim();
  const Eigen::VectorXd eta0 = settings.initial_state - nom.states[0];

  const Jacobians lin = jacobians_fd(twin, nom.states[0], nom.inputs[0], settings.fd_scale);
  const Eigen::MatrixXd q = settings.k0_q_weights.asDiagonal();
  const Eigen::MatrixXd r = settings.k0_r_weights.asDiagonal();
  const Eigen::MatrixXd k0 = -solve_dlqr(lin.a, lin.b, q, r).gain;  // xi = K0 eta

  // Lyapunov shape with decay margin alpha: solve (Acl/sqrt(a))' X (Acl/sqrt(a)) - X = -I.
  const Eigen::MatrixXd a_cl = lin.a + lin.b * k0;
  const double sqrt_alpha = std::sqrt(settings.alpha);
  Eigen::MatrixXd shape;
  try {
    shape = solve_discrete_lyapunov(a_cl / sqrt_alpha, Eigen::MatrixXd::Identity(n, n));
  } catch (const NumericalError&) {
    throw NumericalError(
        "initial_controller: twin closed loop does not contract at the required rate");
  }
  if (min_eigenvalue(shape) <= 0.0) {
    throw NumericalError("initial_controller: Lyapunov solve returned a non-PD matrix");
  }

  // Scale: c >= c_lo keeps the funnel inside the envelope; c <= c_hi keeps
  // eta(0) inside the unit level set.
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(p_min_env0, shape);
  const double c_lo = ges.eigenvalues().maxCoeff();
  const double level0 = eta0.dot(shape * eta0);
  const double c_hi = level0 > 0.0 ? 1.0 / level0 : std::numeric_limits<double>::infinity();
  if (!(c_lo > 0.0)) {
    throw NumericalError("initial_controller: envelope produced a degenerate scaling");
  }
  if (c_lo > c_hi) {
    throw NumericalError(
        "initial_controller: initial deviation too large for the constraint set");
  }

  InitialController out;
  out.p0 = symmetrize(c_lo * shape);
  out.k0 = k0;

  // Validate on the twin: closed loop for one segment from the perturbed start.
  Eigen::VectorXd x = settings.initial_state;
  for (int k = 0; k < settings.schedule.segment_steps; ++k) {
    const Eigen::VectorXd eta = x - nom.states[k];
    if (eta.dot(out.p0 * eta) > 1.0 + 1e-6) {
      throw NumericalError("initial_controller: twin validation left the funnel at step " +
                           std::to_string(k));
    }
    const Eigen::VectorXd u = nom.inputs[k] + out.k0 * eta;
    if (!settings.input_box.contains(u)) {
      throw NumericalError("initial_controller: twin validation violates the input box at step " +
                           std::to_string(k));
    }
    x = twin.step(x, u);
    if (!settings.state_box.contains(x)) {
      throw NumericalError("initial_controller: twin validation violates the state box at step " +
                           std::to_string(k + 1));
    }
  }
  return out;
}

double max_input_jacobian_norm(const DiscreteModel& model, const NominalTrajectory& nom,
                               double fd_scale) {
  double b_bar = 0.0;
  for (int k = 0; k < nom.horizon(); ++k) {
    const Jacobians j = jacobians_fd(model, nom.states[k], nom.inputs[k], fd_scale);
    b_bar = std::max(b_bar, spectral_norm(j.b));
  }
  return b_bar;
}

namespace {

void finalize_report(RunReport* report, const NominalTrajectory& nom, const RunSettings& settings,
                     const DiscreteModel* plant_for_bbar) {
  const int recorded = static_cast<int>(report->states.size()) - 1;
  report->terminal_deviation =
      recorded >= 0 ? (report->states.back() - nom.states[recorded]).norm() : 0.0;
  report->eta0_norm = report->etas.empty() ? 0.0 : report->etas.front().norm();

  double pmin = std::numeric_limits<double>::infinity();
  double pmax = 0.0;
  for (const auto& seg : report->segments) {
    if (seg.p.size() == 0) continue;
    pmin = std::min(pmin, min_eigenvalue(seg.p));
    pmax = std::max(pmax, max_eigenvalue(seg.p));
  }
  StabilityBoundParams bp;
  bp.p_min_eig = pmin;
  bp.p_max_eig = pmax;
  bp.alpha = settings.alpha;
  bp.mu = settings.mu;
  bp.segment_steps = settings.schedule.segment_steps;
  bp.eps_bar = settings.excitation_bound;
  bp.b_bar = plant_for_bbar ? max_input_jacobian_norm(*plant_for_bbar, nom, settings.fd_scale)
                            : 0.0;
  report->bound_params = bp;

  report->bound_trace.clear();
  if (bp.p_min_eig > 0.0 && bp.dwell_condition_holds()) {
    report->bound_trace.reserve(report->states.size());
    for (int k = 0; k < static_cast<int>(report->states.size()); ++k) {
      report->bound_trace.push_back(pges_bound(k, bp, report->eta0_norm));
    }
  }
  report->violations = check_report(*report, settings);
}

}  // namespace

RunReport run_online(const DiscreteModel& plant, const DiscreteModel& twin,
                     const NominalTrajectory& nom, const RunSettings& settings) {
  const int n = plant.state_dim();
  const int m = plant.input_dim();
  const SegmentSchedule& sched = settings.schedule;
  if (nom.horizon() < sched.horizon) {
    throw NumericalError("run_online: nominal shorter than the configured horizon");
  }

  RunReport report;
  const int num_segments = sched.num_segments();
  report.segments.resize(num_segments);

  // Segment 0 controller comes from the twin.
  const SegmentEnvelopes env0 = segment_envelopes_for(nom, settings, 0);
  const InitialController init = initial_controller(twin, nom, settings, env0.p_min);
  {
    ControllerRecord& rec = report.segments[0];
    rec.segment = 0;
    rec.p = init.p0;
    rec.k = init.k0;
    rec.l = init.k0 * init.p0;
    rec.p_min_env = env0.p_min;
    rec.r_max_env = env0.r_max;
    rec.synthesized = false;
  }

  Rng excitation_rng(derive_seed(settings.seed, seed_purpose::kExcitation));

  DeviationLog log;
  Eigen::VectorXd x = settings.initial_state;
  report.states.push_back(x);
  report.etas.push_back(x - nom.states[0]);

  for (int segment = 0; segment < num_segments && !report.diverged; ++segment) {
    const ControllerRecord& ctrl = report.segments[segment];
    for (int k = sched.segment_start(segment); k < sched.window_end(segment); ++k) {
      const Eigen::VectorXd eta = x - nom.states[k];
      const bool in_window = sched.in_window(k);
      Eigen::VectorXd xi = ctrl.k * eta;
      if (in_window) {
        xi += excitation_sample(excitation_rng, m, settings.excitation_bound);
      }
      const Eigen::VectorXd u = nom.inputs[k] + xi;

      log.append(k, eta, xi, in_window);
      report.inputs.push_back(u);
      report.xis.push_back(xi);
      report.excited.push_back(in_window);

      Eigen::VectorXd x_next;
      bool step_ok = true;
      try {
        x_next = plant.step(x, u);
      } catch (const NumericalError&) {
        step_ok = false;
      }
      if (!step_ok || !finite_and_bounded(x_next)) {
        report.diverged = true;
        report.divergence_step = k;
        break;
      }
      x = x_next;
      report.states.push_back(x);
      report.etas.push_back(x - nom.states[k + 1]);
    }
    if (report.diverged) break;

    // Synthesis at the boundary for the next segment.
    if (segment + 1 < num_segments) {
      ControllerRecord& next = report.segments[segment + 1];
      next.segment = segment + 1;
      const SegmentEnvelopes env = segment_envelopes_for(nom, settings, segment + 1);
      next.p_min_env = env.p_min;
      next.r_max_env = env.r_max;

      // Data matrices need eta at the segment boundary; extend the log view.
      DeviationLog data_log = log;
      data_log.append(sched.window_end(segment), report.etas.back(), Eigen::VectorXd::Zero(m),
                      false);
      const DataMatrices data =
          assemble_data_matrices(data_log, sched.window_start(segment), sched.window_steps);

      const RankCheck rank = check_rank_condition(data.h, data.xi, settings.rank_tol);
      report.rank_checks.push_back(RankOutcome{segment, rank.informative, rank.sigma_min});

      const double beta = compute_beta(log, sched.window_start(segment), sched.window_steps,
                                       sched.segment_start(segment), settings.constants);
      report.betas.push_back(beta);
      const VariationBound var = variation_bound(settings.constants, sched.segment_steps);

      bool used_fallback = false;
      std::string reason;
      if (!rank.informative) {
        used_fallback = true;
        reason = "rank condition failed (sigma_min " + std::to_string(rank.sigma_min) + ")";
      } else {
        const LmiBlocks blocks = make_lmi_blocks(data, beta, var.rho, n, m);
        FunnelSdpSettings sdp_settings = settings.sdp;
        sdp_settings.alpha = settings.alpha;
        sdp_settings.mu = settings.mu;
        const ControllerRecord& prev = report.segments[segment];
        SynthesisResult syn =
            solve_funnel_sdp(blocks, env.p_min, env.r_max, sdp_settings, prev.p, &data);
        next.diagnostics = syn.diagnostics;
        next.beta = beta;
        next.rho = var.rho;
        next.data = data;
        if (syn.status == SynthesisStatus::kFeasible) {
          next.p = syn.certificate->p;
          next.l = syn.certificate->l;
          next.k = syn.certificate->k;
          next.lambda1 = syn.certificate->lambda1;
          next.lambda2 = syn.certificate->lambda2;
          next.nu = syn.certificate->nu;
          next.synthesized = true;
        } else {
          used_fallback = true;
          reason = syn.status == SynthesisStatus::kInfeasible
                       ? "synthesis SDP infeasible (data not informative)"
                       : "synthesis solver stalled";
        }
      }
      if (used_fallback) {
        const ControllerRecord& prev = report.segments[segment];
        next.p = prev.p;
        next.k = prev.k;
        next.l = prev.l;
        next.fallback = true;
        next.fallback_reason = reason;
        report.fallback_events.push_back(FallbackEvent{segment + 1, reason});
      }
    }
  }

  finalize_report(&report, nom, settings, &plant);
  return report;
}

RunReport baseline_run(const DiscreteModel& plant, const NominalTrajectory& nom,
                       const Eigen::MatrixXd& baseline_feedback, const RunSettings& settings) {
  RunReport report;
  report.segments.resize(1);
  report.segments[0].segment = 0;
  report.segments[0].k = baseline_feedback;

  Eigen::VectorXd x = settings.initial_state;
  report.states.push_back(x);
  report.etas.push_back(x - nom.states[0]);
  for (int k = 0; k < settings.schedule.horizon; ++k) {
    const Eigen::VectorXd eta = x - nom.states[k];
    const Eigen::VectorXd xi = baseline_feedback * eta;
    const Eigen::VectorXd u = nom.inputs[k] + xi;
    report.inputs.push_back(u);
    report.xis.push_back(xi);
    report.excited.push_back(false);

    Eigen::VectorXd x_next;
    bool step_ok = true;
    try {
      x_next = plant.step(x, u);
    } catch (const NumericalError&) {
      step_ok = false;
    }
    if (!step_ok || !finite_and_bounded(x_next)) {
      report.diverged = true;
      report.divergence_step = k;
      break;
    }
    x = x_next;
    report.states.push_back(x);
    report.etas.push_back(x - nom.states[k + 1]);
  }

  // Box violations only; the baseline carries no certificates or funnels.
  for (int k = 0; k < static_cast<int>(report.states.size()); ++k) {
    if (!settings.state_box.contains(report.states[k])) report.violations.state_box.push_back(k);
  }
  for (int k = 0; k < static_cast<int>(report.inputs.size()); ++k) {
    if (!settings.input_box.contains(report.inputs[k])) report.violations.input_box.push_back(k);
  }
  const int recorded = static_cast<int>(report.states.size()) - 1;
  report.terminal_deviation =
      recorded >= 0 ? (report.states.back() - nom.states[recorded]).norm() : 0.0;
  report.eta0_norm = report.etas.front().norm();
  return report;
}

RunViolations check_report(const RunReport& report, const RunSettings& settings) {
  RunViolations v;
  const SegmentSchedule& sched = settings.schedule;

  for (int k = 0; k < static_cast<int>(report.states.size()); ++k) {
    if (!settings.state_box.contains(report.states[k])) v.state_box.push_back(k);
  }
  for (int k = 0; k < static_cast<int>(report.inputs.size()); ++k) {
    if (!settings.input_box.contains(report.inputs[k])) v.input_box.push_back(k);
  }

  // Funnel membership: eta(k)' P_i eta(k) <= 1 with the segment's certificate.
  for (int k = 0; k < static_cast<int>(report.etas.size()); ++k) {
    const int seg = std::min(sched.segment_of(k), static_cast<int>(report.segments.size()) - 1);
    if (seg < 0 || report.segments[seg].p.size() == 0) continue;
    const Eigen::VectorXd& eta = report.etas[k];
    if (eta.dot(report.segments[seg].p * eta) > 1.0 + 1e-6) v.funnel.push_back(k);
  }

  // Lyapunov decrease outside excitation windows.
  for (int k = 0; k + 1 < static_cast<int>(report.etas.size()); ++k) {
    if (k < static_cast<int>(report.excited.size()) && report.excited[k]) continue;
    const int seg = std::min(sched.segment_of(k), static_cast<int>(report.segments.size()) - 1);
    if (seg < 0 || report.segments[seg].p.size() == 0) continue;
    const Eigen::MatrixXd& p = report.segments[seg].p;
    const double v_now = report.etas[k].dot(p * report.etas[k]);
    const double v_next = report.etas[k + 1].dot(p * report.etas[k + 1]);
    if (v_next > settings.alpha * v_now + 1e-12) v.lyapunov.push_back(k);
  }

  // Theorem-2 bound dominance.
  for (int k = 0;
       k < static_cast<int>(std::min(report.bound_trace.size(), report.etas.size())); ++k) {
    if (report.etas[k].norm() > report.bound_trace[k] + 1e-9) v.stability_bound.push_back(k);
  }
  return v;
}

}  // namespace funnel
