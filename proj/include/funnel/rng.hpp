#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>

namespace funnel {

// Deterministic random primitives on top of a 64-bit state.  All randomized
// code in the project derives its draws from these helpers so that a (seed,
// purpose) pair reproduces bit-identical sequences on any platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {
    // Avoid the all-zero orbit and decorrelate small seeds.
    next_u64();
    next_u64();
  }

  // splitmix64 step.
  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform on [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller (no libstdc++ distribution dependence).
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
  }

  Eigen::VectorXd normal_vector(int dim) {
    Eigen::VectorXd v(dim);
    for (int i = 0; i < dim; ++i) v(i) = normal();
    return v;
  }

  // Uniformly distributed point in the Euclidean ball of given radius.
  Eigen::VectorXd ball(int dim, double radius) {
    if (radius <= 0.0) return Eigen::VectorXd::Zero(dim);
    Eigen::VectorXd dir = normal_vector(dim);
    const double nrm = dir.norm();
    if (nrm < 1e-300) return Eigen::VectorXd::Zero(dim);
    const double r = radius * std::pow(uniform(), 1.0 / static_cast<double>(dim));
    return dir * (r / nrm);
  }

  // Uniform point in an axis-aligned box [lo, hi].
  Eigen::VectorXd box(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
    Eigen::VectorXd v(lo.size());
    for (int i = 0; i < lo.size(); ++i) v(i) = uniform(lo(i), hi(i));
    return v;
  }

 private:
  std::uint64_t state_;
};

// Derives an independent stream for a named purpose, so subsystems do not
// consume from each other's sequences.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t purpose,
                                 std::uint64_t index = 0) {
  std::uint64_t z = master ^ (0xD6E8FEB86659FD93ULL * (purpose + 1));
  z ^= 0xCA5A826395121157ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace seed_purpose {
constexpr std::uint64_t kExcitation = 1;
constexpr std::uint64_t kEstimation = 2;
constexpr std::uint64_t kVerifier = 3;
}  // namespace seed_purpose

}  // namespace funnel
