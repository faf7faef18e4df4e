#pragma once

#include <Eigen/Core>

#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace funnel::sdp {

// One affine matrix inequality G(z) = F0 + sum_i z_i * F_i >= 0.  Every F must
// be symmetric and share the block dimension.  A positive logdet_weight adds
// w * (-log det G(z)) to the objective, which is how determinant-maximization
// objectives are expressed.
struct LmiBlock {
  Eigen::MatrixXd f0;
  std::vector<std::pair<int, Eigen::MatrixXd>> terms;
  double logdet_weight = 0.0;
  std::string name;
};

// minimize  c'z + sum_j w_j * (-log det G_j(z))
// s.t.      G_j(z) >= 0 for all blocks, lower <= z <= upper.
//
// Interior-point path following on the log-det barrier.  Problems here are
// small and dense (tens of variables, blocks up to a few dozen rows), which is
// exactly the regime this implementation targets.
struct Problem {
  int num_vars = 0;
  Eigen::VectorXd c;                 // empty means zero
  std::vector<LmiBlock> blocks;
  Eigen::VectorXd lower;             // empty means -inf
  Eigen::VectorXd upper;             // empty means +inf
  Eigen::VectorXd initial_guess;     // empty means run a feasibility phase
};

enum class Status {
  kOptimal,     // gap certificate below tolerance
  kInfeasible,  // no positive-semidefinite point exists (phase-I certificate)
  kStall,       // numerical failure / could not certify either way
  kIterLimit,
};

struct Options {
  double rel_gap = 1e-7;
  double abs_gap = 1e-9;
  double t0 = 1.0;
  double t_growth = 8.0;
  double t_max = 1e15;
  int max_newton_total = 40000;
  int max_newton_per_stage = 200;
  double newton_tol = 1e-10;       // squared Newton decrement threshold
  double bound_magnitude = 1e8;    // implicit |z_i| bound (scaled units)
  bool verbose = false;
};

struct Solution {
  Status status = Status::kStall;
  Eigen::VectorXd z;
  double objective = std::numeric_limits<double>::quiet_NaN();
  double gap = std::numeric_limits<double>::infinity();
  double min_block_eig = std::numeric_limits<double>::quiet_NaN();
  int newton_iterations = 0;
  int outer_stages = 0;
  std::string message;
};

Solution solve(const Problem& problem, const Options& options = {});

// Smallest eigenvalue over all blocks evaluated at z (bounds excluded).
double min_block_eigenvalue(const Problem& problem, const Eigen::VectorXd& z);

// Objective c'z + sum_j w_j * (-log det G_j(z)); requires strict feasibility
// of the logdet-weighted blocks.
double objective_value(const Problem& problem, const Eigen::VectorXd& z);

const char* status_name(Status s);

}  // namespace funnel::sdp
