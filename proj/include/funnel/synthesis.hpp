#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <string>

#include "funnel/deviation.hpp"
#include "funnel/sdp.hpp"

namespace funnel {

// Premise matrices of the robust-stability LMI, padded to the lifted
// dimension 4n+2m used by the affine S(.) map.  Block layout of the lifted
// coordinates: [n | n | m | n | m | n] standing for
// (identity, A', B', dA', dB', auxiliary Schur block).
struct LmiBlocks {
  int n = 0;
  int m = 0;
  Eigen::MatrixXd n1_tilde;  // data-consistency premise, (4n+2m)^2
  Eigen::MatrixXd n2_tilde;  // Jacobian-variation premise, (4n+2m)^2
  double beta = 0.0;
  double rho = 0.0;

  int lifted_dim() const { return 4 * n + 2 * m; }
};

// Data-consistency premise on the unpadded lift (3n+2m):
//   N1 = [I H+; 0 -H; 0 -Xi; 0 0; 0 0] diag(beta I, -I) [...]'.
Eigen::MatrixXd assemble_n1(const DataMatrices& data, double beta);

// Variation premise: rho I on the identity block, -I on the dA/dB blocks.
Eigen::MatrixXd assemble_n2(double rho, int n, int m);

// Pads a (3n+2m) premise with the trailing zero auxiliary block.
Eigen::MatrixXd pad_premise(const Eigen::MatrixXd& n_mat, int n);

LmiBlocks make_lmi_blocks(const DataMatrices& data, double beta, double rho, int n, int m);

// The affine map S(P, L, nu) of the robust-stability LMI (alpha fixed).
Eigen::MatrixXd affine_s_map(const Eigen::MatrixXd& p, const Eigen::MatrixXd& l, double nu,
                             double alpha);

// K = L P^{-1} through an SPD solve.  Throws when P is numerically singular.
Eigen::MatrixXd recover_gain(const Eigen::MatrixXd& p, const Eigen::MatrixXd& l);

struct SolverDiagnostics {
  std::string status;
  std::string message;
  double gap = 0.0;
  int newton_iterations = 0;
  double lmi_min_eig = 0.0;      // smallest eigenvalue of S - l1 N1 - l2 N2
  double lmi_scale = 0.0;        // ||S||_2 at the solution
  bool rescaled = false;         // data rescaling pass was applied
};

struct FunnelCertificate {
  Eigen::MatrixXd p;   // funnel shape matrix (decision variable of the LMI)
  Eigen::MatrixXd l;   // L = K P
  Eigen::MatrixXd k;   // recovered feedback
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double nu = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double rho = 0.0;
  SolverDiagnostics diagnostics;
};

enum class SynthesisStatus {
  kFeasible,
  kInfeasible,   // data not informative enough; caller falls back
  kSolverStall,  // numerical failure, distinct from model-level infeasibility
};

struct SynthesisResult {
  SynthesisStatus status = SynthesisStatus::kSolverStall;
  std::optional<FunnelCertificate> certificate;
  SolverDiagnostics diagnostics;
};

struct FunnelSdpSettings {
  double alpha = 0.98;
  double mu = 1.02;
  double strictness_scale = 1e-6;  // eps = strictness_scale * lambda_max(P_min)
  sdp::Options solver;
};

// Per-segment synthesis: maximize log det P subject to the robust-stability
// LMI, P >= p_min, the input-envelope coupling on (R_max, L, P), and
// P <= mu * p_prev when a previous certificate is supplied.
SynthesisResult solve_funnel_sdp(const LmiBlocks& blocks, const Eigen::MatrixXd& p_min,
                                 const Eigen::MatrixXd& r_max, const FunnelSdpSettings& settings,
                                 const std::optional<Eigen::MatrixXd>& p_prev = std::nullopt,
                                 const DataMatrices* data_for_rescale = nullptr);

struct VerificationOutcome {
  int requested = 0;
  int retained = 0;    // premise-consistent samples actually checked
  int violations = 0;  // samples with lambda_min(alpha P - Acl P Acl') < -tol
  double worst_residual = 0.0;  // most negative eigenvalue observed
  bool sampling_empty = false;
};

// Monte-Carlo check of the certified conclusion over the premise sets:
// (A, B) from the data-consistency set (least-squares center plus rejected
// perturbations), (dA, dB) from the spectral-norm ball of radius sqrt(rho).
VerificationOutcome verify_certificate_sampling(const FunnelCertificate& cert,
                                                const DataMatrices& data, double beta, double rho,
                                                double alpha, int samples, std::uint64_t seed,
                                                double tol = 1e-6);

}  // namespace funnel
