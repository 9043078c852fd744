#pragma once

#include <cmath>
#include <Eigen/Dense>

#include "rstring/grid.hpp"

namespace rstring {

// eigenvalue of -D^2 (Dirichlet second difference) for mode k = 1..m
inline double dirichlet_eigenvalue(const Grid& grid, int k) {
  const double h = grid.dtheta();
  return (2.0 / (h * h)) * (1.0 - std::cos(k * M_PI * h));
}

// second difference with pinned boundary values: (v_{j-1} - 2 v_j + v_{j+1}) / h^2,
// where v_0 and v_{m+1} are taken from lo/hi (rows broadcast per component)
inline PathState second_difference(const Grid& grid, const PathState& v,
                                   const Vec& lo, const Vec& hi) {
  const double h2 = grid.dtheta() * grid.dtheta();
  PathState out(grid.m, grid.dim);
  for (int j = 0; j < grid.m; ++j) {
    Eigen::RowVectorXd below =
        (j == 0) ? lo.transpose() : Eigen::RowVectorXd(v.row(j - 1));
    Eigen::RowVectorXd above =
        (j == grid.m - 1) ? hi.transpose() : Eigen::RowVectorXd(v.row(j + 1));
    out.row(j) = (below - 2.0 * v.row(j) + above) / h2;
  }
  return out;
}

// zero-boundary variant, for interior test directions
inline PathState second_difference(const Grid& grid, const PathState& v) {
  return second_difference(grid, v, Vec::Zero(grid.dim), Vec::Zero(grid.dim));
}

// Discrete sine basis e_k(theta_j) = sqrt(2) sin(pi k theta_j), k = 1..m.
// Orthonormal in the grid inner product dtheta * sum_j, and diagonalizes the
// Dirichlet second difference exactly.
class SineBasis {
 public:
  explicit SineBasis(const Grid& grid) : dtheta_(grid.dtheta()), e_(grid.m, grid.m) {
    const double s = std::sqrt(2.0);
    for (int j = 0; j < grid.m; ++j)
      for (int k = 0; k < grid.m; ++k)
        e_(j, k) = s * std::sin(M_PI * (k + 1) * grid.theta(j));
  }

  const Mat& matrix() const { return e_; }

  // column of mode k = 1..m
  Vec mode(int k) const { return e_.col(k - 1); }

  // coefficients c_k = <e_k, v>_grid, one column per component of v
  Mat to_coefficients(const PathState& v) const {
    return dtheta_ * (e_.transpose() * v);
  }

  PathState from_coefficients(const Mat& c) const { return e_ * c; }

 private:
  double dtheta_;
  Mat e_;
};

// Exact one-step propagator of du/dt = (1/2) D^2 u with zero Dirichlet data:
// G = E diag(exp(-lambda_k dt / 2)) E^T dtheta. Applied to the deviation from
// the linear interpolant it advances the heat flow without splitting error.
class HeatPropagator {
 public:
  HeatPropagator(const Grid& grid, double dt) : dt_(dt), factors_(grid.m) {
    if (!(dt > 0.0)) throw GridError("heat propagator: dt must be positive");
    SineBasis basis(grid);
    for (int k = 1; k <= grid.m; ++k)
      factors_(k - 1) = std::exp(-0.5 * dirichlet_eigenvalue(grid, k) * dt);
    g_ = basis.matrix() * factors_.asDiagonal() * basis.matrix().transpose() *
         grid.dtheta();
  }

  double dt() const { return dt_; }
  const Mat& matrix() const { return g_; }
  double mode_factor(int k) const { return factors_(k - 1); }

  PathState apply(const PathState& v) const { return g_ * v; }

 private:
  double dt_;
  Vec factors_;
  Mat g_;
};

}  // namespace rstring
