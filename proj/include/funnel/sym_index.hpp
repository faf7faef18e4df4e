#pragma once

#include <Eigen/Core>

#include "funnel/linalg.hpp"

namespace funnel {

// Upper-triangle (vech) indexing of a symmetric d x d matrix variable.
struct SymBasis {
  int d = 0;

  int count() const { return d * (d + 1) / 2; }

  // Symmetrized elementary matrix for scalar variable v.
  Eigen::MatrixXd element(int v) const {
    auto [i, j] = coords(v);
    Eigen::MatrixXd e = Eigen::MatrixXd::Zero(d, d);
    e(i, j) = 1.0;
    e(j, i) = 1.0;
    return e;
  }

  bool is_diagonal_var(int v) const {
    auto [i, j] = coords(v);
    return i == j;
  }

  std::pair<int, int> coords(int v) const {
    int idx = 0;
    for (int i = 0; i < d; ++i) {
      for (int j = i; j < d; ++j) {
        if (idx == v) return {i, j};
        ++idx;
      }
    }
    throw NumericalError("SymBasis: index out of range");
  }

  Eigen::MatrixXd from_vector(const Eigen::VectorXd& z) const {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(d, d);
    int idx = 0;
    for (int i = 0; i < d; ++i) {
      for (int j = i; j < d; ++j) {
        m(i, j) = z(idx);
        m(j, i) = z(idx);
        ++idx;
      }
    }
    return m;
  }

  Eigen::VectorXd to_vector(const Eigen::MatrixXd& m) const {
    Eigen::VectorXd z(count());
    int idx = 0;
    for (int i = 0; i < d; ++i) {
      for (int j = i; j < d; ++j) z(idx++) = m(i, j);
    }
    return z;
  }
};

}  // namespace funnel
