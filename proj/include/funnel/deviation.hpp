#pragma once

#include <Eigen/Core>

#include <vector>

#include "funnel/nominal.hpp"
#include "funnel/rng.hpp"

namespace funnel {

// Fixed-length segmentation of the horizon with a trailing data window per
// segment: segment i covers {i*T, ..., (i+1)*T - 1} and its window is the
// last L steps of the segment.
struct SegmentSchedule {
  int horizon = 0;        // N
  int segment_steps = 0;  // T
  int window_steps = 0;   // L

  int num_segments() const { return horizon / segment_steps; }
  int segment_start(int i) const { return i * segment_steps; }
  int window_start(int i) const { return (i + 1) * segment_steps - window_steps; }
  int window_end(int i) const { return (i + 1) * segment_steps; }  // exclusive
  int segment_of(int k) const { return k / segment_steps; }
  bool in_window(int k) const {
    const int i = segment_of(k);
    return i < num_segments() && k >= window_start(i) && k < window_end(i);
  }
};

// Validates 1 <= L <= T <= N.
SegmentSchedule build_schedule(int horizon, int segment_steps, int window_steps);

// Per-step deviation record as logged by the online loop.
struct DeviationRecord {
  int k = 0;
  Eigen::VectorXd eta;  // x(k) - x_nom(k)
  Eigen::VectorXd xi;   // u(k) - u_nom(k)
  bool excited = false;
};

struct DeviationLog {
  std::vector<DeviationRecord> records;  // indexed by k, contiguous from 0

  const DeviationRecord& at(int k) const;
  void append(int k, Eigen::VectorXd eta, Eigen::VectorXd xi, bool excited);
};

// Stacked data matrices of one window (columns are consecutive steps).
struct DataMatrices {
  Eigen::MatrixXd h;       // eta(k), k in window
  Eigen::MatrixXd h_plus;  // eta(k+1)
  Eigen::MatrixXd xi;      // xi(k)
  int window_first = 0;    // first step of the source window
};

// Requires the log to cover the window and one step beyond its last index.
DataMatrices assemble_data_matrices(const DeviationLog& log, int window_first, int window_len);

struct RankCheck {
  bool informative = false;
  double sigma_min = 0.0;  // smallest singular value of the (n+m) x L stack
  double sigma_max = 0.0;
};

// Persistence-of-excitation test: the stacked [H; Xi] must have full row rank
// n+m, judged as sigma_{n+m} > tol * sigma_1.
RankCheck check_rank_condition(const Eigen::MatrixXd& h, const Eigen::MatrixXd& xi,
                               double tol = 1e-8);

// Random excitation: uniform on the ball of radius eps_bar, deterministic
// under the rng state.
Eigen::VectorXd excitation_sample(Rng& rng, int input_dim, double eps_bar);

// Disturbance-energy bound: sum over the window of
// (C |k - k_seg| ||(eta,xi)|| + gamma + L_r ||(eta,xi)||^2)^2.
double compute_beta(const DeviationLog& log, int window_first, int window_len, int segment_start,
                    const BoundConstants& constants);

// Jacobian-variation budget over two consecutive segments.
struct VariationBound {
  int horizon_steps = 0;  // T~ = 2T - 1
  double rho = 0.0;       // C^2 T~^2
};

VariationBound variation_bound(const BoundConstants& constants, int segment_steps);

}  // namespace funnel
