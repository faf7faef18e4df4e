#pragma once

#include <Eigen/Core>

#include <map>
#include <mutex>
#include <vector>

#include "funnel/linalg.hpp"

namespace funnel {

// Origin-centered ellipsoid { z : z' P z <= 1 } in deviation coordinates.
struct Ellipsoid {
  Eigen::MatrixXd p;

  int dim() const { return static_cast<int>(p.rows()); }
};

bool ellipsoid_contains(const Ellipsoid& e, const Eigen::VectorXd& z, double tol = 1e-9);

// Halfspaces a_j' z <= b_j.  A strictly interior origin requires b_j > 0.
struct HalfspaceSet {
  Eigen::MatrixXd a;  // rows are the normals
  Eigen::VectorXd b;

  int count() const { return static_cast<int>(a.rows()); }
  int dim() const { return static_cast<int>(a.cols()); }
};

// Box lo <= v <= hi linearized at an interior center, in deviation
// coordinates: +e_j' z <= hi_j - c_j and -e_j' z <= c_j - lo_j.
HalfspaceSet linearize_box_constraints(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                                       const Eigen::VectorXd& center);

struct MvieResult {
  Eigen::MatrixXd z;      // ellipsoid "radius" factor: set = { Z w : ||w|| <= 1 }
  Eigen::MatrixXd p_min;  // Z^-2, shape matrix of the inscribed ellipsoid
  bool analytic = false;  // solved by the axis-aligned fast path
};

// Maximum-volume inscribed ellipsoid: maximize log det Z subject to
// ||Z a_j|| <= b_j for all j and 0 <= Z <= cap * I.  Axis-aligned instances
// (every normal a multiple of a coordinate axis) use the exact diagonal
// optimum; general instances go through the interior-point solver.
MvieResult mvie(const HalfspaceSet& halfspaces, double cap = 1e3);

// Input-side envelope: the same program in xi-coordinates.  Returns
// R_max = Z^2, the inverse-form shape of the largest inscribed input
// ellipsoid { xi : xi' R_max^-1 xi <= 1 }.
Eigen::MatrixXd input_envelope(const HalfspaceSet& halfspaces, double cap = 1e3);

// Tight single envelopes over a segment:
//   state:  argmin trace(P) s.t. P >= P_k for all k      (P >= every per-step shape)
//   input:  argmax logdet(R) s.t. R <= R_k for all k     (R inside every per-step shape)
// Containment is made exact a posteriori by an eigenvalue-shift correction.
Eigen::MatrixXd state_envelope(const std::vector<Eigen::MatrixXd>& p_step);
Eigen::MatrixXd input_envelope_over(const std::vector<Eigen::MatrixXd>& r_step);

struct SegmentEnvelopes {
  Eigen::MatrixXd p_min;  // state envelope (shape form)
  Eigen::MatrixXd r_max;  // input envelope (inverse form)
};

SegmentEnvelopes segment_envelopes(const std::vector<Eigen::MatrixXd>& p_step,
                                   const std::vector<Eigen::MatrixXd>& r_step);

// Process-wide memo for envelope computations, keyed by a caller-computed
// hash of (nominal trajectory, constraint boxes, segment).
class EnvelopeCache {
 public:
  bool lookup(std::uint64_t key, SegmentEnvelopes* out) const;
  void store(std::uint64_t key, const SegmentEnvelopes& value);

 private:
  mutable std::mutex mutex_;
  std::map<std::uint64_t, SegmentEnvelopes> entries_;
};

EnvelopeCache& envelope_cache();

}  // namespace funnel
