#include "funnel/geometry.hpp"

#include <Eigen/Dense>

#include <cmath>

#include "funnel/sdp.hpp"
#include "funnel/sym_index.hpp"

namespace funnel {
namespace {

bool axis_aligned(const HalfspaceSet& hs) {
  for (int r = 0; r < hs.count(); ++r) {
    int nonzero = 0;
    for (int c = 0; c < hs.dim(); ++c) {
      if (hs.a(r, c) != 0.0) ++nonzero;
    }
    if (nonzero != 1) return false;
  }
  return true;
}

}  // namespace

bool ellipsoid_contains(const Ellipsoid& e, const Eigen::VectorXd& z, double tol) {
  if (z.size() != e.dim()) throw NumericalError("ellipsoid_contains: dimension mismatch");
  return z.dot(e.p * z) <= 1.0 + tol;
}

HalfspaceSet linearize_box_constraints(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                                       const Eigen::VectorXd& center) {
  const int d = static_cast<int>(lo.size());
  if (hi.size() != d || center.size() != d) {
    throw NumericalError("linearize_box_constraints: dimension mismatch");
  }
  for (int i = 0; i < d; ++i) {
    if (!(lo(i) < center(i) && center(i) < hi(i))) {
      throw NumericalError("linearize_box_constraints: center not strictly inside the box");
    }
  }
  HalfspaceSet hs;
  hs.a = Eigen::MatrixXd::Zero(2 * d, d);
  hs.b.resize(2 * d);
  for (int i = 0; i < d; ++i) {
    hs.a(2 * i, i) = 1.0;
    hs.b(2 * i) = hi(i) - center(i);
    hs.a(2 * i + 1, i) = -1.0;
    hs.b(2 * i + 1) = center(i) - lo(i);
  }
  return hs;
}

MvieResult mvie(const HalfspaceSet& hs, double cap) {
  const int d = hs.dim();
  if (cap <= 0.0) throw NumericalError("mvie: cap must be positive");
  for (int r = 0; r < hs.count(); ++r) {
    if (!(hs.b(r) > 0.0)) {
      throw NumericalError("mvie: origin not strictly interior (nonpositive offset)");
    }
  }

  MvieResult out;
  if (axis_aligned(hs)) {
    // Exact optimum for boxes: diagonal Z with the tight per-axis radius
    // (Hadamard inequality makes any non-diagonal Z strictly worse).
    Eigen::VectorXd radius = Eigen::VectorXd::Constant(d, cap);
    for (int r = 0; r < hs.count(); ++r) {
      for (int c = 0; c < d; ++c) {
        if (hs.a(r, c) != 0.0) {
          radius(c) = std::min(radius(c), hs.b(r) / std::abs(hs.a(r, c)));
        }
      }
    }
    out.z = radius.asDiagonal();
    out.p_min = radius.cwiseProduct(radius).cwiseInverse().asDiagonal();
    out.analytic = true;
    return out;
  }

  SymBasis basis{d};
  sdp::Problem pr;
  pr.num_vars = basis.count();

  sdp::LmiBlock zblk;
  zblk.f0 = Eigen::MatrixXd::Zero(d, d);
  zblk.logdet_weight = 1.0;
  zblk.name = "Z";
  for (int v = 0; v < pr.num_vars; ++v) zblk.terms.emplace_back(v, basis.element(v));
  pr.blocks.push_back(zblk);

  sdp::LmiBlock capblk;
  capblk.f0 = cap * Eigen::MatrixXd::Identity(d, d);
  capblk.name = "cap";
  for (int v = 0; v < pr.num_vars; ++v) capblk.terms.emplace_back(v, -basis.element(v));
  pr.blocks.push_back(capblk);

  for (int r = 0; r < hs.count(); ++r) {
    // ||Z a|| <= b as the Schur form [[b I, Z a], [(Z a)', b]].
    sdp::LmiBlock blk;
    blk.f0 = Eigen::MatrixXd::Zero(d + 1, d + 1);
    blk.f0.topLeftCorner(d, d) = hs.b(r) * Eigen::MatrixXd::Identity(d, d);
    blk.f0(d, d) = hs.b(r);
    const Eigen::VectorXd a = hs.a.row(r).transpose();
    for (int v = 0; v < pr.num_vars; ++v) {
      Eigen::VectorXd col = basis.element(v) * a;
      Eigen::MatrixXd f = Eigen::MatrixXd::Zero(d + 1, d + 1);
      f.block(0, d, d, 1) = col;
      f.block(d, 0, 1, d) = col.transpose();
      blk.terms.emplace_back(v, f);
    }
    pr.blocks.push_back(blk);
  }

  // Inscribed ball start: strictly feasible for every block.
  double r0 = cap;
  for (int r = 0; r < hs.count(); ++r) r0 = std::min(r0, hs.b(r) / hs.a.row(r).norm());
  Eigen::VectorXd guess = Eigen::VectorXd::Zero(pr.num_vars);
  int idx = 0;
  for (int i = 0; i < d; ++i) {
    for (int j = i; j < d; ++j) {
      if (i == j) guess(idx) = 0.9 * r0;
      ++idx;
    }
  }
  pr.initial_guess = guess;

  sdp::Solution sol = sdp::solve(pr);
  if (sol.status != sdp::Status::kOptimal) {
    throw NumericalError(std::string("mvie: solver failed: ") + sol.message);
  }
  out.z = symmetrize(basis.from_vector(sol.z));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(out.z);
  if (es.eigenvalues().minCoeff() <= 0.0) {
    throw NumericalError("mvie: returned Z not positive definite");
  }
  out.p_min = es.eigenvectors() *
              es.eigenvalues().array().square().inverse().matrix().asDiagonal() *
              es.eigenvectors().transpose();
  out.analytic = false;
  return out;
}

Eigen::MatrixXd input_envelope(const HalfspaceSet& hs, double cap) {
  MvieResult r = mvie(hs, cap);
  return r.z * r.z;
}

Eigen::MatrixXd state_envelope(const std::vector<Eigen::MatrixXd>& p_step) {
  if (p_step.empty()) throw NumericalError("state_envelope: empty segment");
  const int d = static_cast<int>(p_step.front().rows());
  if (p_step.size() == 1) return p_step.front();

  SymBasis basis{d};
  sdp::Problem pr;
  pr.num_vars = basis.count();
  pr.c = Eigen::VectorXd::Zero(pr.num_vars);
  for (int v = 0; v < pr.num_vars; ++v) {
    if (basis.is_diagonal_var(v)) pr.c(v) = 1.0;  // trace objective
  }
  for (const auto& pk : p_step) {
    sdp::LmiBlock blk;
    blk.f0 = -pk;
    for (int v = 0; v < pr.num_vars; ++v) blk.terms.emplace_back(v, basis.element(v));
    pr.blocks.push_back(blk);
  }

  double top = 0.0;
  for (const auto& pk : p_step) top = std::max(top, max_eigenvalue(pk));
  Eigen::MatrixXd p0 = (top + 1.0) * Eigen::MatrixXd::Identity(d, d);
  Eigen::VectorXd guess(pr.num_vars);
  int idx = 0;
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j) guess(idx++) = p0(i, j);
  pr.initial_guess = guess;

  sdp::Solution sol = sdp::solve(pr);
  if (sol.status != sdp::Status::kOptimal) {
    throw NumericalError(std::string("state_envelope: solver failed: ") + sol.message);
  }
  Eigen::MatrixXd p = symmetrize(basis.from_vector(sol.z));
  // Shift to exact containment.
  double viol = 0.0;
  for (const auto& pk : p_step) viol = std::max(viol, -min_eigenvalue(p - pk));
  if (viol > 0.0) p += viol * Eigen::MatrixXd::Identity(d, d);
  return p;
}

Eigen::MatrixXd input_envelope_over(const std::vector<Eigen::MatrixXd>& r_step) {
  if (r_step.empty()) throw NumericalError("input_envelope_over: empty segment");
  const int d = static_cast<int>(r_step.front().rows());
  if (r_step.size() == 1) return r_step.front();

  SymBasis basis{d};
  sdp::Problem pr;
  pr.num_vars = basis.count();

  sdp::LmiBlock rblk;
  rblk.f0 = Eigen::MatrixXd::Zero(d, d);
  rblk.logdet_weight = 1.0;
  for (int v = 0; v < pr.num_vars; ++v) rblk.terms.emplace_back(v, basis.element(v));
  pr.blocks.push_back(rblk);

  for (const auto& rk : r_step) {
    sdp::LmiBlock blk;
    blk.f0 = rk;
    for (int v = 0; v < pr.num_vars; ++v) blk.terms.emplace_back(v, -basis.element(v));
    pr.blocks.push_back(blk);
  }

  double bottom = std::numeric_limits<double>::infinity();
  for (const auto& rk : r_step) bottom = std::min(bottom, min_eigenvalue(rk));
  if (!(bottom > 0.0)) throw NumericalError("input_envelope_over: per-step matrix not PD");
  Eigen::VectorXd guess = Eigen::VectorXd::Zero(pr.num_vars);
  int idx = 0;
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j) guess(idx++) = (i == j) ? 0.5 * bottom : 0.0;
  pr.initial_guess = guess;

  sdp::Solution sol = sdp::solve(pr);
  if (sol.status != sdp::Status::kOptimal) {
    throw NumericalError(std::string("input_envelope_over: solver failed: ") + sol.message);
  }
  Eigen::MatrixXd r = symmetrize(basis.from_vector(sol.z));
  double viol = 0.0;
  for (const auto& rk : r_step) viol = std::max(viol, -min_eigenvalue(rk - r));
  if (viol > 0.0) r -= viol * Eigen::MatrixXd::Identity(d, d);
  if (min_eigenvalue(r) <= 0.0) {
    throw NumericalError("input_envelope_over: envelope collapsed to a non-PD matrix");
  }
  return r;
}

SegmentEnvelopes segment_envelopes(const std::vector<Eigen::MatrixXd>& p_step,
                                   const std::vector<Eigen::MatrixXd>& r_step) {
  SegmentEnvelopes env;
  env.p_min = state_envelope(p_step);
  env.r_max = input_envelope_over(r_step);
  return env;
}

bool EnvelopeCache::lookup(std::uint64_t key, SegmentEnvelopes* out) const {
  std::lock_guard<std::mutex> lock(mutex_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return false;
  *out = it->second;
  return true;
}

void EnvelopeCache::store(std::uint64_t key, const SegmentEnvelopes& value) {
  std::lock_guard<std::mutex> lock(mutex_);
  entries_[key] = value;
}

EnvelopeCache& envelope_cache() {
  static EnvelopeCache cache;
  return cache;
}

}  // namespace funnel
