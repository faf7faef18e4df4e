#include "funnel/synthesis.hpp"

#include <Eigen/Dense>

#include <cmath>

#include "funnel/sym_index.hpp"

namespace funnel {
namespace {

Eigen::MatrixXd exact_symmetrize(Eigen::MatrixXd m) { return 0.5 * (m + m.transpose()); }

}  // namespace

Eigen::MatrixXd assemble_n1(const DataMatrices& data, double beta) {
  if (beta < 0.0) throw NumericalError("assemble_n1: beta must be nonnegative");
  const int n = static_cast<int>(data.h.rows());
  const int m = static_cast<int>(data.xi.rows());
  const int cols = static_cast<int>(data.h.cols());
  if (data.h_plus.rows() != n || data.h_plus.cols() != cols || data.xi.cols() != cols) {
    throw NumericalError("assemble_n1: data dimension mismatch");
  }
  const int lift = 3 * n + 2 * m;
  Eigen::MatrixXd sw = Eigen::MatrixXd::Zero(lift, n + cols);
  sw.topLeftCorner(n, n) = Eigen::MatrixXd::Identity(n, n);
  sw.block(0, n, n, cols) = data.h_plus;
  sw.block(n, n, n, cols) = -data.h;
  sw.block(2 * n, n, m, cols) = -data.xi;
  Eigen::VectorXd mw(n + cols);
  mw.head(n).setConstant(beta);
  mw.tail(cols).setConstant(-1.0);
  return exact_symmetrize(sw * mw.asDiagonal() * sw.transpose());
}

Eigen::MatrixXd assemble_n2(double rho, int n, int m) {
  if (rho < 0.0) throw NumericalError("assemble_n2: rho must be nonnegative");
  const int lift = 3 * n + 2 * m;
  Eigen::MatrixXd n2 = Eigen::MatrixXd::Zero(lift, lift);
  n2.topLeftCorner(n, n) = rho * Eigen::MatrixXd::Identity(n, n);
  n2.block(2 * n + m, 2 * n + m, n, n) = -Eigen::MatrixXd::Identity(n, n);
  n2.block(3 * n + m, 3 * n + m, m, m) = -Eigen::MatrixXd::Identity(m, m);
  return n2;
}

Eigen::MatrixXd pad_premise(const Eigen::MatrixXd& n_mat, int n) {
  const int base = static_cast<int>(n_mat.rows());
  Eigen::MatrixXd padded = Eigen::MatrixXd::Zero(base + n, base + n);
  padded.topLeftCorner(base, base) = n_mat;
  return padded;
}

LmiBlocks make_lmi_blocks(const DataMatrices& data, double beta, double rho, int n, int m) {
  LmiBlocks b;
  b.n = n;
  b.m = m;
  b.beta = beta;
  b.rho = rho;
  b.n1_tilde = pad_premise(assemble_n1(data, beta), n);
  b.n2_tilde = pad_premise(assemble_n2(rho, n, m), n);
  return b;
}

Eigen::MatrixXd affine_s_map(const Eigen::MatrixXd& p, const Eigen::MatrixXd& l, double nu,
                             double alpha) {
  const int n = static_cast<int>(p.rows());
  const int m = static_cast<int>(l.rows());
  if (p.cols() != n || l.cols() != n) throw NumericalError("affine_s_map: dimension mismatch");
  // Block offsets for layout [n, n, m, n, m, n].
  const int o1 = 0, o2 = n, o3 = 2 * n, o4 = 2 * n + m, o5 = 3 * n + m, o6 = 3 * n + 2 * m;
  const int dim = 4 * n + 2 * m;
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(dim, dim);
  s.block(o1, o1, n, n) = alpha * p - nu * Eigen::MatrixXd::Identity(n, n);
  s.block(o2, o2, n, n) = -p;
  s.block(o2, o3, n, m) = -l.transpose();
  s.block(o2, o4, n, n) = -p;
  s.block(o2, o5, n, m) = -l.transpose();
  s.block(o3, o2, m, n) = -l;
  s.block(o3, o4, m, n) = -l;
  s.block(o3, o6, m, n) = l;
  s.block(o4, o2, n, n) = -p;
  s.block(o4, o3, n, m) = -l.transpose();
  s.block(o4, o4, n, n) = -p;
  s.block(o4, o5, n, m) = -l.transpose();
  s.block(o5, o2, m, n) = -l;
  s.block(o5, o4, m, n) = -l;
  s.block(o5, o6, m, n) = l;
  s.block(o6, o3, n, m) = l.transpose();
  s.block(o6, o5, n, m) = l.transpose();
  s.block(o6, o6, n, n) = p;
  return s;
}

Eigen::MatrixXd recover_gain(const Eigen::MatrixXd& p, const Eigen::MatrixXd& l) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(p);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > 1e12) {
    throw NumericalError("recover_gain: P numerically singular");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(p);
  return llt.solve(l.transpose()).transpose();
}

namespace {

struct VarLayout {
  SymBasis pbasis;
  int n = 0, m = 0;

  int num_p() const { return pbasis.count(); }
  int idx_l(int r, int c) const { return num_p() + r * n + c; }
  int idx_nu() const { return num_p() + m * n; }
  int idx_l1() const { return idx_nu() + 1; }
  int idx_l2() const { return idx_nu() + 2; }
  int total() const { return idx_nu() + 3; }

  Eigen::MatrixXd l_element(int r, int c) const {
    Eigen::MatrixXd e = Eigen::MatrixXd::Zero(m, n);
    e(r, c) = 1.0;
    return e;
  }
};

sdp::Problem build_funnel_problem(const LmiBlocks& blocks, const Eigen::MatrixXd& p_min,
                                  const Eigen::MatrixXd& r_max,
                                  const FunnelSdpSettings& settings,
                                  const std::optional<Eigen::MatrixXd>& p_prev) {
  const int n = blocks.n;
  const int m = blocks.m;
  VarLayout lay{SymBasis{n}, n, m};
  const Eigen::MatrixXd zero_p = Eigen::MatrixXd::Zero(n, n);
  const Eigen::MatrixXd zero_l = Eigen::MatrixXd::Zero(m, n);
  const double eps = settings.strictness_scale * max_eigenvalue(p_min);

  sdp::Problem pr;
  pr.num_vars = lay.total();
  pr.c = Eigen::VectorXd::Zero(pr.num_vars);

  // Robust-stability LMI: S(P, L, nu) - l1 N1~ - l2 N2~ >= eps I.
  {
    sdp::LmiBlock blk;
    const int dim = blocks.lifted_dim();
    blk.name = "stability";
    blk.f0 = -eps * Eigen::MatrixXd::Identity(dim, dim);
    for (int v = 0; v < lay.num_p(); ++v) {
      blk.terms.emplace_back(v, affine_s_map(lay.pbasis.element(v), zero_l, 0.0, settings.alpha));
    }
    for (int r = 0; r < m; ++r) {
      for (int c = 0; c < n; ++c) {
        blk.terms.emplace_back(lay.idx_l(r, c),
                               affine_s_map(zero_p, lay.l_element(r, c), 0.0, settings.alpha));
      }
    }
    blk.terms.emplace_back(lay.idx_nu(), affine_s_map(zero_p, zero_l, 1.0, settings.alpha));
    blk.terms.emplace_back(lay.idx_l1(), -blocks.n1_tilde);
    blk.terms.emplace_back(lay.idx_l2(), -blocks.n2_tilde);
    pr.blocks.push_back(std::move(blk));
  }

  // log det objective block: P itself.
  {
    sdp::LmiBlock blk;
    blk.name = "P";
    blk.f0 = zero_p;
    blk.logdet_weight = 1.0;
    for (int v = 0; v < lay.num_p(); ++v) blk.terms.emplace_back(v, lay.pbasis.element(v));
    pr.blocks.push_back(std::move(blk));
  }

  // Feasibility: P >= P_min.
  {
    sdp::LmiBlock blk;
    blk.name = "state-envelope";
    blk.f0 = -p_min;
    for (int v = 0; v < lay.num_p(); ++v) blk.terms.emplace_back(v, lay.pbasis.element(v));
    pr.blocks.push_back(std::move(blk));
  }

  // Input envelope coupling [[R_max, L], [L', P]] >= 0.
  {
    sdp::LmiBlock blk;
    blk.name = "input-envelope";
    blk.f0 = Eigen::MatrixXd::Zero(m + n, m + n);
    blk.f0.topLeftCorner(m, m) = r_max;
    for (int v = 0; v < lay.num_p(); ++v) {
      Eigen::MatrixXd f = Eigen::MatrixXd::Zero(m + n, m + n);
      f.bottomRightCorner(n, n) = lay.pbasis.element(v);
      blk.terms.emplace_back(v, f);
    }
    for (int r = 0; r < m; ++r) {
      for (int c = 0; c < n; ++c) {
        Eigen::MatrixXd f = Eigen::MatrixXd::Zero(m + n, m + n);
        f(r, m + c) = 1.0;
        f(m + c, r) = 1.0;
        blk.terms.emplace_back(lay.idx_l(r, c), f);
      }
    }
    pr.blocks.push_back(std::move(blk));
  }

  // Cross-segment growth P <= mu * P_prev.
  if (p_prev) {
    sdp::LmiBlock blk;
    blk.name = "growth";
    blk.f0 = settings.mu * (*p_prev);
    for (int v = 0; v < lay.num_p(); ++v) blk.terms.emplace_back(v, -lay.pbasis.element(v));
    pr.blocks.push_back(std::move(blk));
  }

  // nu >= eps, multipliers >= 0.
  pr.lower = Eigen::VectorXd::Constant(pr.num_vars, -std::numeric_limits<double>::infinity());
  pr.upper = Eigen::VectorXd::Constant(pr.num_vars, std::numeric_limits<double>::infinity());
  pr.lower(lay.idx_nu()) = eps;
  pr.lower(lay.idx_l1()) = 0.0;
  pr.lower(lay.idx_l2()) = 0.0;
  return pr;
}

SynthesisResult run_funnel_solve(const LmiBlocks& blocks, const Eigen::MatrixXd& p_min,
                                 const Eigen::MatrixXd& r_max, const FunnelSdpSettings& settings,
                                 const std::optional<Eigen::MatrixXd>& p_prev) {
  const int n = blocks.n;
  const int m = blocks.m;
  VarLayout lay{SymBasis{n}, n, m};
  sdp::Problem pr = build_funnel_problem(blocks, p_min, r_max, settings, p_prev);
  sdp::Solution sol = sdp::solve(pr, settings.solver);

  SynthesisResult out;
  out.diagnostics.status = sdp::status_name(sol.status);
  out.diagnostics.message = sol.message;
  out.diagnostics.gap = sol.gap;
  out.diagnostics.newton_iterations = sol.newton_iterations;

  if (sol.status == sdp::Status::kInfeasible) {
    out.status = SynthesisStatus::kInfeasible;
    return out;
  }
  if (sol.status != sdp::Status::kOptimal) {
    out.status = SynthesisStatus::kSolverStall;
    return out;
  }

  FunnelCertificate cert;
  cert.p = lay.pbasis.from_vector(sol.z.head(lay.num_p()));
  cert.l.resize(m, n);
  for (int r = 0; r < m; ++r) {
    for (int c = 0; c < n; ++c) cert.l(r, c) = sol.z(lay.idx_l(r, c));
  }
  cert.nu = sol.z(lay.idx_nu());
  cert.lambda1 = sol.z(lay.idx_l1());
  cert.lambda2 = sol.z(lay.idx_l2());
  cert.alpha = settings.alpha;
  cert.beta = blocks.beta;
  cert.rho = blocks.rho;
  cert.k = recover_gain(cert.p, cert.l);

  const Eigen::MatrixXd s = affine_s_map(cert.p, cert.l, cert.nu, settings.alpha);
  const Eigen::MatrixXd x = s - cert.lambda1 * blocks.n1_tilde - cert.lambda2 * blocks.n2_tilde;
  out.diagnostics.lmi_min_eig = min_eigenvalue(exact_symmetrize(x));
  out.diagnostics.lmi_scale = spectral_norm(s);
  cert.diagnostics = out.diagnostics;
  out.certificate = std::move(cert);
  out.status = SynthesisStatus::kFeasible;
  return out;
}

}  // namespace

SynthesisResult solve_funnel_sdp(const LmiBlocks& blocks, const Eigen::MatrixXd& p_min,
                                 const Eigen::MatrixXd& r_max, const FunnelSdpSettings& settings,
                                 const std::optional<Eigen::MatrixXd>& p_prev,
                                 const DataMatrices* data_for_rescale) {
  if (settings.alpha <= 0.0 || settings.alpha >= 1.0) {
    throw NumericalError("solve_funnel_sdp: alpha must lie in (0, 1)");
  }
  if (settings.mu < 1.0) throw NumericalError("solve_funnel_sdp: mu must be >= 1");

  SynthesisResult first = run_funnel_solve(blocks, p_min, r_max, settings, p_prev);
  if (first.status != SynthesisStatus::kSolverStall || data_for_rescale == nullptr) {
    return first;
  }

  // One rescaling pass: divide the data matrices by their joint Frobenius
  // norm and beta by its square.  This is a congruence of the premise QMI, so
  // the feasible set is unchanged.
  const double s2 = data_for_rescale->h.squaredNorm() + data_for_rescale->h_plus.squaredNorm() +
                    data_for_rescale->xi.squaredNorm();
  if (s2 <= 0.0) return first;
  const double scale = std::sqrt(s2);
  DataMatrices scaled = *data_for_rescale;
  scaled.h /= scale;
  scaled.h_plus /= scale;
  scaled.xi /= scale;
  LmiBlocks reblocks =
      make_lmi_blocks(scaled, blocks.beta / s2, blocks.rho, blocks.n, blocks.m);
  SynthesisResult second = run_funnel_solve(reblocks, p_min, r_max, settings, p_prev);
  second.diagnostics.rescaled = true;
  if (second.certificate) {
    second.certificate->beta = blocks.beta;  // report in original units
    second.certificate->diagnostics.rescaled = true;
  }
  return second;
}

VerificationOutcome verify_certificate_sampling(const FunnelCertificate& cert,
                                                const DataMatrices& data, double beta, double rho,
                                                double alpha, int samples, std::uint64_t seed,
                                                double tol) {
  const int n = static_cast<int>(data.h.rows());
  const int m = static_cast<int>(data.xi.rows());
  const int cols = static_cast<int>(data.h.cols());

  VerificationOutcome out;
  out.requested = samples;

  Eigen::MatrixXd g(n + m, cols);
  g << data.h, data.xi;
  const Eigen::MatrixXd gram = g * g.transpose();
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(gram);
  const Eigen::MatrixXd d_center = data.h_plus * g.transpose() * cod.pseudoInverse();
  const double sigma_min = min_singular_value(g);
  const double radius = sigma_min > 1e-12
                            ? std::sqrt(std::max(beta, 0.0)) / sigma_min
                            : std::sqrt(std::max(beta, 0.0)) * 1e6;

  const int max_attempts = std::max(50 * samples, 1000);
  int attempts = 0;
  for (int s = 0; out.retained < samples && attempts < max_attempts; ++s) {
    Rng rng(derive_seed(seed, seed_purpose::kVerifier, static_cast<std::uint64_t>(s)));
    ++attempts;

    // Candidate (A, B): least-squares center for the first sample, then
    // rejected random perturbations reaching toward the consistency boundary.
    Eigen::MatrixXd d = d_center;
    if (s > 0) {
      Eigen::MatrixXd e(n, n + m);
      for (int r = 0; r < n; ++r)
        for (int c2 = 0; c2 < n + m; ++c2) e(r, c2) = rng.normal();
      const double enorm = e.norm();
      if (enorm > 1e-300) {
        d += e * (rng.uniform() * radius / enorm);
      }
    }
    const Eigen::MatrixXd w = data.h_plus - d * g;
    if (max_eigenvalue(exact_symmetrize(w * w.transpose())) > beta + 1e-12 * (1.0 + beta)) {
      continue;  // outside the data-consistent set
    }

    // Candidate (dA, dB) in the spectral ball of radius sqrt(rho).
    Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(n, n + m);
    if (rho > 0.0) {
      Eigen::MatrixXd raw(n, n + m);
      for (int r = 0; r < n; ++r)
        for (int c2 = 0; c2 < n + m; ++c2) raw(r, c2) = rng.normal();
      const double sn = spectral_norm(raw);
      if (sn > 1e-300) {
        delta = raw * (std::sqrt(rho) * rng.uniform() / sn);
      }
    }

    const Eigen::MatrixXd a = d.leftCols(n) + delta.leftCols(n);
    const Eigen::MatrixXd b = d.rightCols(m) + delta.rightCols(m);
    const Eigen::MatrixXd a_cl = a + b * cert.k;
    const Eigen::MatrixXd test =
        exact_symmetrize(alpha * cert.p - a_cl * cert.p * a_cl.transpose());
    const double lo = min_eigenvalue(test);
    ++out.retained;
    if (lo < -tol) {
      ++out.violations;
    }
    out.worst_residual = std::min(out.worst_residual, lo);
  }
  out.sampling_empty = out.retained == 0;
  return out;
}

}  // namespace funnel
