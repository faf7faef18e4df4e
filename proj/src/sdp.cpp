#include "funnel/sdp.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace funnel::sdp {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Internal flattened form: every constraint (including variable bounds) is an
// LmiBlock; variables are rescaled so term matrices have unit-ish norms.
struct Flat {
  int p = 0;
  Eigen::VectorXd c;
  std::vector<LmiBlock> blocks;        // in scaled variables
  Eigen::VectorXd scale;               // z_original = scale .* z_scaled
  double theta = 0.0;                  // total barrier parameter
};

struct BlockState {
  Eigen::LLT<Eigen::MatrixXd> llt;
  Eigen::MatrixXd g;                   // current block value
  double logdet = 0.0;
  std::vector<Eigen::MatrixXd> m;      // G^-1 * F_i per term
  std::vector<double> tr;              // trace of m_i
};

Eigen::MatrixXd block_value(const LmiBlock& b, const Eigen::VectorXd& z) {
  Eigen::MatrixXd g = b.f0;
  for (const auto& [idx, f] : b.terms) g.noalias() += z(idx) * f;
  return g;
}

bool factorize(const LmiBlock& b, const Eigen::VectorXd& z, BlockState* st) {
  st->g = block_value(b, z);
  if (!st->g.allFinite()) return false;
  st->llt.compute(st->g);
  if (st->llt.info() != Eigen::Success) return false;
  const auto& l = st->llt.matrixLLT();
  double ld = 0.0;
  for (int i = 0; i < l.rows(); ++i) {
    const double d = l(i, i);
    if (!(d > 0.0) || !std::isfinite(d)) return false;
    ld += std::log(d);
  }
  st->logdet = 2.0 * ld;
  return true;
}

// Value of the centering objective t*(c'z) + sum_j (t*w_j + 1) * (-logdet G_j).
// Returns +inf when infeasible.
double psi_value(const Flat& fl, double t, const Eigen::VectorXd& z) {
  double v = t * fl.c.dot(z);
  BlockState st;
  for (const auto& b : fl.blocks) {
    if (!factorize(b, z, &st)) return kInf;
    v -= (t * b.logdet_weight + 1.0) * st.logdet;
  }
  return std::isfinite(v) ? v : kInf;
}

double f0_value(const Flat& fl, const Eigen::VectorXd& z) {
  double v = fl.c.dot(z);
  BlockState st;
  for (const auto& b : fl.blocks) {
    if (b.logdet_weight == 0.0) continue;
    if (!factorize(b, z, &st)) return kInf;
    v -= b.logdet_weight * st.logdet;
  }
  return v;
}

bool strictly_feasible(const Flat& fl, const Eigen::VectorXd& z) {
  BlockState st;
  for (const auto& b : fl.blocks) {
    if (!factorize(b, z, &st)) return false;
  }
  return true;
}

struct CenterOutcome {
  bool converged = false;
  bool stalled = false;
  int iters = 0;
};

// Damped Newton minimization of psi_t from a strictly feasible start.
CenterOutcome center(const Flat& fl, double t, Eigen::VectorXd* z, const Options& opt,
                     int budget) {
  const int p = fl.p;
  CenterOutcome out;
  std::vector<BlockState> states(fl.blocks.size());

  for (int it = 0; it < std::min(budget, opt.max_newton_per_stage); ++it) {
    Eigen::VectorXd grad = t * fl.c;
    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(p, p);
    for (size_t j = 0; j < fl.blocks.size(); ++j) {
      const auto& b = fl.blocks[j];
      auto& st = states[j];
      if (!factorize(b, *z, &st)) {
        out.stalled = true;  // should not happen: line search preserves feasibility
        return out;
      }
      const double w = t * b.logdet_weight + 1.0;
      const size_t nt = b.terms.size();
      st.m.resize(nt);
      st.tr.resize(nt);
      for (size_t a = 0; a < nt; ++a) {
        st.m[a] = st.llt.solve(b.terms[a].second);
        st.tr[a] = st.m[a].trace();
        grad(b.terms[a].first) -= w * st.tr[a];
      }
      for (size_t a = 0; a < nt; ++a) {
        const int ia = b.terms[a].first;
        for (size_t bb = a; bb < nt; ++bb) {
          const int ib = b.terms[bb].first;
          const double hv = w * (st.m[a].array() * st.m[bb].transpose().array()).sum();
          hess(ia, ib) += hv;
          if (ia != ib) hess(ib, ia) += hv;
        }
      }
    }

    // Solve the Newton system with escalating ridge regularization.
    Eigen::VectorXd step;
    double ridge = 0.0;
    const double base = std::max(hess.trace() / p, 1e-300);
    for (int attempt = 0; attempt < 40; ++attempt) {
      Eigen::LDLT<Eigen::MatrixXd> ldlt(hess + ridge * Eigen::MatrixXd::Identity(p, p));
      if (ldlt.info() == Eigen::Success) {
        step = ldlt.solve(-grad);
        if (step.allFinite() && grad.dot(step) < 0.0) break;
      }
      ridge = (ridge == 0.0) ? 1e-12 * base : ridge * 10.0;
      step.resize(0);
    }
    if (step.size() == 0) {
      // Gradient numerically zero: treat as converged.
      if (grad.norm() <= 1e-9 * (1.0 + std::abs(t))) {
        out.converged = true;
        out.iters = it;
        return out;
      }
      out.stalled = true;
      out.iters = it;
      return out;
    }

    const double decrement2 = -grad.dot(step);
    if (decrement2 <= opt.newton_tol) {
      out.converged = true;
      out.iters = it;
      return out;
    }

    const double psi0 = psi_value(fl, t, *z);
    double s = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 60; ++ls) {
      Eigen::VectorXd cand = *z + s * step;
      const double psi1 = psi_value(fl, t, cand);
      if (psi1 < psi0 + 0.25 * s * grad.dot(step)) {
        *z = cand;
        moved = true;
        break;
      }
      s *= 0.5;
    }
    out.iters = it + 1;
    if (!moved) {
      // No progress possible at this accuracy; accept the point if the
      // decrement is already small, otherwise report a stall.
      out.converged = decrement2 <= 1e-6;
      out.stalled = !out.converged;
      return out;
    }
  }
  // Ran out of per-stage budget; caller decides whether that matters.
  out.converged = true;
  return out;
}

Flat build_flat(const Problem& pr, const Options& opt) {
  Flat fl;
  fl.p = pr.num_vars;
  fl.c = pr.c.size() ? pr.c : Eigen::VectorXd::Zero(pr.num_vars);

  // Variable scaling from the raw term norms.
  Eigen::VectorXd norm = Eigen::VectorXd::Zero(pr.num_vars);
  for (const auto& b : pr.blocks) {
    for (const auto& [idx, f] : b.terms) {
      if (idx < 0 || idx >= pr.num_vars) throw std::invalid_argument("sdp: bad variable index");
      if (f.rows() != b.f0.rows() || f.cols() != b.f0.cols())
        throw std::invalid_argument("sdp: term dimension mismatch");
      norm(idx) = std::max(norm(idx), f.norm());
    }
  }
  fl.scale.resize(pr.num_vars);
  for (int i = 0; i < pr.num_vars; ++i) fl.scale(i) = norm(i) > 1e-12 ? 1.0 / norm(i) : 1.0;

  for (const auto& b : pr.blocks) {
    LmiBlock sb;
    sb.f0 = b.f0;
    sb.logdet_weight = b.logdet_weight;
    sb.name = b.name;
    for (const auto& [idx, f] : b.terms) sb.terms.emplace_back(idx, f * fl.scale(idx));
    fl.blocks.push_back(std::move(sb));
    fl.theta += static_cast<double>(b.f0.rows());
  }

  // Bounds (finite user bounds plus an implicit compactness box) as 1x1 blocks
  // on the scaled variable zs = z / scale.
  for (int i = 0; i < pr.num_vars; ++i) {
    const double lo_u = pr.lower.size() ? pr.lower(i) : -kInf;
    const double hi_u = pr.upper.size() ? pr.upper(i) : kInf;
    const double lo_s = std::isfinite(lo_u) ? lo_u / fl.scale(i) : -opt.bound_magnitude;
    const double hi_s = std::isfinite(hi_u) ? hi_u / fl.scale(i) : opt.bound_magnitude;
    LmiBlock blo;
    blo.f0 = Eigen::MatrixXd::Constant(1, 1, -lo_s);
    blo.terms.emplace_back(i, Eigen::MatrixXd::Identity(1, 1));
    fl.blocks.push_back(std::move(blo));
    LmiBlock bhi;
    bhi.f0 = Eigen::MatrixXd::Constant(1, 1, hi_s);
    bhi.terms.emplace_back(i, -Eigen::MatrixXd::Identity(1, 1));
    fl.blocks.push_back(std::move(bhi));
    fl.theta += 2.0;
  }
  return fl;
}

// Path following; invokes stage_check after each centered stage.  Returns the
// final status (kOptimal when the gap certificate is met).
template <typename StageCheck>
Status follow_path(const Flat& fl, Eigen::VectorXd* z, const Options& opt, Solution* sol,
                   StageCheck&& stage_check) {
  double t = opt.t0;
  int total_newton = 0;
  for (int stage = 0; stage < 2048; ++stage) {
    CenterOutcome co = center(fl, t, z, opt, opt.max_newton_total - total_newton);
    total_newton += co.iters;
    sol->newton_iterations = total_newton;
    sol->outer_stages = stage + 1;
    if (co.stalled) return Status::kStall;
    if (total_newton >= opt.max_newton_total) return Status::kIterLimit;

    const double gap = fl.theta / t;
    const double f0 = f0_value(fl, *z);
    sol->gap = gap;
    if (int rc = stage_check(*z, f0, gap); rc != 0) {
      return rc > 0 ? Status::kOptimal : Status::kInfeasible;
    }
    if (gap <= opt.abs_gap + opt.rel_gap * std::abs(f0)) return Status::kOptimal;
    if (t >= opt.t_max) return Status::kStall;
    t *= opt.t_growth;
  }
  return Status::kStall;
}

}  // namespace

double min_block_eigenvalue(const Problem& problem, const Eigen::VectorXd& z) {
  double lo = kInf;
  for (const auto& b : problem.blocks) {
    Eigen::MatrixXd g = block_value(b, z);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g, Eigen::EigenvaluesOnly);
    lo = std::min(lo, es.eigenvalues().minCoeff());
  }
  return lo;
}

double objective_value(const Problem& problem, const Eigen::VectorXd& z) {
  double v = problem.c.size() ? problem.c.dot(z) : 0.0;
  for (const auto& b : problem.blocks) {
    if (b.logdet_weight == 0.0) continue;
    Eigen::MatrixXd g = block_value(b, z);
    Eigen::LLT<Eigen::MatrixXd> llt(g);
    if (llt.info() != Eigen::Success) return kInf;
    double ld = 0.0;
    for (int i = 0; i < g.rows(); ++i) ld += std::log(llt.matrixLLT()(i, i));
    v -= b.logdet_weight * 2.0 * ld;
  }
  return v;
}

const char* status_name(Status s) {
  switch (s) {
    case Status::kOptimal: return "optimal";
    case Status::kInfeasible: return "infeasible";
    case Status::kStall: return "stall";
    case Status::kIterLimit: return "iteration-limit";
  }
  return "unknown";
}

Solution solve(const Problem& problem, const Options& options) {
  Solution sol;
  if (problem.num_vars <= 0) throw std::invalid_argument("sdp: num_vars must be positive");
  for (const auto& b : problem.blocks) {
    if (b.f0.rows() != b.f0.cols()) throw std::invalid_argument("sdp: blocks must be square");
  }

  Flat fl = build_flat(problem, options);

  // Scaled start.
  Eigen::VectorXd zs = Eigen::VectorXd::Zero(fl.p);
  bool have_interior = false;
  if (problem.initial_guess.size() == problem.num_vars) {
    Eigen::VectorXd cand = problem.initial_guess.cwiseQuotient(fl.scale);
    if (strictly_feasible(fl, cand)) {
      zs = cand;
      have_interior = true;
    }
  }

  if (!have_interior) {
    // Phase I: minimize s subject to G_j(z) + s I >= 0.
    Flat ph;
    ph.p = fl.p + 1;
    ph.c = Eigen::VectorXd::Zero(ph.p);
    ph.c(fl.p) = 1.0;
    ph.scale = Eigen::VectorXd::Ones(ph.p);
    double s0 = 0.0;
    for (const auto& b : fl.blocks) {
      Eigen::MatrixXd g = block_value(b, zs);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g, Eigen::EigenvaluesOnly);
      s0 = std::max(s0, -es.eigenvalues().minCoeff());
    }
    s0 += 1.0;
    for (const auto& b : fl.blocks) {
      LmiBlock nb;
      nb.f0 = b.f0;
      nb.terms = b.terms;
      nb.terms.emplace_back(fl.p, Eigen::MatrixXd::Identity(b.f0.rows(), b.f0.cols()));
      ph.blocks.push_back(std::move(nb));
      ph.theta += static_cast<double>(b.f0.rows());
    }
    // Keep s itself in a box.
    LmiBlock slo, shi;
    slo.f0 = Eigen::MatrixXd::Constant(1, 1, 10.0 * (1.0 + s0));
    slo.terms.emplace_back(fl.p, Eigen::MatrixXd::Identity(1, 1));
    shi.f0 = Eigen::MatrixXd::Constant(1, 1, 2.0 * (1.0 + s0));
    shi.terms.emplace_back(fl.p, -Eigen::MatrixXd::Identity(1, 1));
    ph.blocks.push_back(slo);
    ph.blocks.push_back(shi);
    ph.theta += 2.0;

    Eigen::VectorXd zp(ph.p);
    zp.head(fl.p) = zs;
    zp(fl.p) = s0;

    Options phase_opt = options;
    phase_opt.rel_gap = 0.0;
    phase_opt.abs_gap = 0.0;  // stage_check terminates the phase

    Solution phase_sol;
    Status st = follow_path(ph, &zp, phase_opt, &phase_sol,
                            [&](const Eigen::VectorXd& z, double /*f0*/, double gap) -> int {
                              const double s = z(fl.p);
                              if (s < -1e-9) return 1;          // strict interior found
                              if (s - gap > 1e-12) return -1;   // infeasibility certified
                              return 0;
                            });
    sol.newton_iterations += phase_sol.newton_iterations;
    if (st == Status::kInfeasible) {
      sol.status = Status::kInfeasible;
      sol.gap = phase_sol.gap;
      sol.message = "phase I: no strictly feasible point (lower bound on slack is positive)";
      return sol;
    }
    if (st != Status::kOptimal) {
      sol.status = (st == Status::kIterLimit) ? Status::kIterLimit : Status::kStall;
      sol.message = "phase I: could not certify feasibility or infeasibility";
      return sol;
    }
    zs = zp.head(fl.p);
    if (!strictly_feasible(fl, zs)) {
      sol.status = Status::kStall;
      sol.message = "phase I: recovered point lost strict feasibility";
      return sol;
    }
  }

  Solution phase2;
  Status st = follow_path(fl, &zs, options, &phase2,
                          [](const Eigen::VectorXd&, double, double) { return 0; });
  sol.newton_iterations += phase2.newton_iterations;
  sol.outer_stages = phase2.outer_stages;
  sol.gap = phase2.gap;
  sol.status = st;
  sol.z = zs.cwiseProduct(fl.scale);
  sol.objective = objective_value(problem, sol.z);
  sol.min_block_eig = min_block_eigenvalue(problem, sol.z);
  if (st == Status::kOptimal) {
    sol.message = "optimal within gap tolerance";
  } else if (sol.message.empty()) {
    sol.message = std::string("phase II: ") + status_name(st);
  }
  return sol;
}

}  // namespace funnel::sdp
