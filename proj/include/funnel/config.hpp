#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "funnel/arm.hpp"
#include "funnel/nominal.hpp"
#include "funnel/runtime.hpp"

namespace funnel {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// How the bound constants entering beta / rho are obtained.
enum class ConstantsSource { kEstimated, kOverride };

struct ConstantsConfig {
  ConstantsSource source = ConstantsSource::kEstimated;
  double inflation = 1.2;  // safety factor on estimated maxima
  // Override values (used when source == kOverride).
  double gamma = 0.034;
  double lipschitz_jacobian = 16.94;
  double remainder = 0.074;
  double variation_rate = 3.64;  // C; the increment bound v is C / L_J
};

struct EstimationConfig {
  double probe_radius = 0.1;
  int samples = 200;
};

// File-backed experiment description.  Field defaults reproduce the 2-DoF arm
// case study.
struct ExperimentConfig {
  int schema_version = 1;
  std::uint64_t seed = 20240501;

  int horizon_steps = 600;
  int segment_steps = 100;
  int window_steps = 60;
  double dt = 0.01;
  double alpha = 0.98;
  double mu = 1.02;
  double excitation_bound = 0.15;

  ArmParameters plant = case_study_plant();
  ArmParameters twin = case_study_twin();

  Box state_box;  // defaults set in the constructor
  Box input_box;

  Eigen::VectorXd nominal_start;
  Eigen::VectorXd nominal_goal;
  Eigen::VectorXd planner_q_weights;
  Eigen::VectorXd planner_r_weights;

  Eigen::VectorXd initial_state;  // perturbed plant start
  Eigen::VectorXd k0_q_weights;
  Eigen::VectorXd k0_r_weights;

  ConstantsConfig constants;
  EstimationConfig estimation;

  double envelope_cap = 1e3;
  double rank_tol = 1e-8;
  double solver_rel_gap = 1e-7;
  double solver_abs_gap = 1e-9;

  std::string output_dir = "out";

  ExperimentConfig();
};

// Parses and validates a JSON experiment file.  Unknown keys are rejected
// with their full path; missing keys keep their defaults.
ExperimentConfig load_config(const std::string& path);

// Parses from an in-memory JSON string (used by tests and load_config).
ExperimentConfig parse_config(const std::string& json_text);

// Serializes the fully-resolved configuration.
std::string dump_config(const ExperimentConfig& config);

// Forces the case-study constants: gamma=0.034, L_J=16.94, L_r=0.074, C=3.64,
// alpha=0.98, mu=1.02, excitation 0.15, T=100, L=60, dt=0.01, N=600.
void apply_paper_constants(ExperimentConfig* config);

}  // namespace funnel
