#include "funnel/deviation.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace funnel {

SegmentSchedule build_schedule(int horizon, int segment_steps, int window_steps) {
  if (window_steps < 1 || segment_steps < window_steps || horizon < segment_steps) {
    throw NumericalError("build_schedule: need N >= T >= L >= 1");
  }
  SegmentSchedule s;
  s.horizon = horizon;
  s.segment_steps = segment_steps;
  s.window_steps = window_steps;
  return s;
}

const DeviationRecord& DeviationLog::at(int k) const {
  if (k < 0 || k >= static_cast<int>(records.size()) || records[k].k != k) {
    throw NumericalError("DeviationLog: missing step " + std::to_string(k));
  }
  return records[k];
}

void DeviationLog::append(int k, Eigen::VectorXd eta, Eigen::VectorXd xi, bool excited) {
  if (k != static_cast<int>(records.size())) {
    throw NumericalError("DeviationLog: non-contiguous append");
  }
  records.push_back(DeviationRecord{k, std::move(eta), std::move(xi), excited});
}

DataMatrices assemble_data_matrices(const DeviationLog& log, int window_first, int window_len) {
  if (window_len < 1) throw NumericalError("assemble_data_matrices: empty window");
  const auto& first = log.at(window_first);
  const int n = static_cast<int>(first.eta.size());
  const int m = static_cast<int>(first.xi.size());
  DataMatrices d;
  d.window_first = window_first;
  d.h.resize(n, window_len);
  d.h_plus.resize(n, window_len);
  d.xi.resize(m, window_len);
  for (int j = 0; j < window_len; ++j) {
    d.h.col(j) = log.at(window_first + j).eta;
    d.h_plus.col(j) = log.at(window_first + j + 1).eta;
    d.xi.col(j) = log.at(window_first + j).xi;
  }
  return d;
}

RankCheck check_rank_condition(const Eigen::MatrixXd& h, const Eigen::MatrixXd& xi, double tol) {
  if (h.cols() != xi.cols()) throw NumericalError("check_rank_condition: column mismatch");
  const int n = static_cast<int>(h.rows());
  const int m = static_cast<int>(xi.rows());
  Eigen::MatrixXd stack(n + m, h.cols());
  stack << h, xi;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(stack);
  RankCheck rc;
  rc.sigma_max = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
  if (stack.cols() < n + m) {
    rc.sigma_min = 0.0;
    rc.informative = false;
    return rc;
  }
  rc.sigma_min = svd.singularValues()(n + m - 1);
  rc.informative = rc.sigma_min > tol * rc.sigma_max && rc.sigma_max > 0.0;
  return rc;
}

Eigen::VectorXd excitation_sample(Rng& rng, int input_dim, double eps_bar) {
  if (eps_bar < 0.0) throw NumericalError("excitation_sample: negative bound");
  return rng.ball(input_dim, eps_bar);
}

double compute_beta(const DeviationLog& log, int window_first, int window_len, int segment_start,
                    const BoundConstants& constants) {
  const double c = constants.variation_rate();
  double beta = 0.0;
  for (int j = 0; j < window_len; ++j) {
    const int k = window_first + j;
    const auto& rec = log.at(k);
    const double norm = std::sqrt(rec.eta.squaredNorm() + rec.xi.squaredNorm());
    const double term = c * std::abs(k - segment_start) * norm + constants.gamma +
                        constants.remainder * norm * norm;
    beta += term * term;
  }
  return beta;
}

VariationBound variation_bound(const BoundConstants& constants, int segment_steps) {
  if (segment_steps < 1) throw NumericalError("variation_bound: T must be >= 1");
  VariationBound v;
  v.horizon_steps = 2 * segment_steps - 1;
  const double c = constants.variation_rate();
  v.rho = c * c * static_cast<double>(v.horizon_steps) * static_cast<double>(v.horizon_steps);
  return v;
}

}  // namespace funnel
