#pragma once

#include <Eigen/Dense>
#include <stdexcept>

#include "rstring/geometry.hpp"

namespace rstring {

class GridError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Interior values of a string: row j holds u(theta_j) in R^dim for
// theta_j = (j+1)/(m+1), j = 0..m-1. Endpoints u(0)=a, u(1)=b live on the
// Grid, not in the state.
using PathState = Eigen::MatrixXd;

struct Grid {
  int m;
  int dim;
  Vec a;
  Vec b;

  Grid(int m_, Vec a_, Vec b_)
      : m(m_), dim(static_cast<int>(a_.size())), a(std::move(a_)), b(std::move(b_)) {
    if (m < 3) throw GridError("grid: need at least 3 interior nodes");
    if (a.size() != b.size() || a.size() == 0)
      throw GridError("grid: endpoint dimension mismatch");
  }

  double dtheta() const { return 1.0 / (m + 1); }
  double theta(int j) const { return (j + 1) * dtheta(); }

  Vec line_at(int j) const { return a + theta(j) * (b - a); }

  // linear interpolant a -> b sampled at the interior nodes
  PathState line() const {
    PathState l(m, dim);
    for (int j = 0; j < m; ++j) l.row(j) = line_at(j).transpose();
    return l;
  }
};

// the endpoints must sit strictly inside the domain
inline void validate_grid(const Grid& grid, const Domain& dom) {
  if (grid.dim != dom.dim())
    throw GridError("grid: endpoint dimension does not match the domain");
  if (!dom.contains(grid.a) || dom.boundary_distance(grid.a) <= 0.0 ||
      !dom.contains(grid.b) || dom.boundary_distance(grid.b) <= 0.0)
    throw GridError("grid: endpoints must lie strictly inside the domain");
}

// dtheta * sum_j f_j . g_j over interior nodes
inline double ip_interior(const Grid& grid, const PathState& f,
                          const PathState& g) {
  return grid.dtheta() * f.cwiseProduct(g).sum();
}

// trapezoidal L2 norm of the full string including pinned endpoints
inline double l2_norm(const Grid& grid, const PathState& u) {
  double s = 0.5 * (grid.a.squaredNorm() + grid.b.squaredNorm());
  s += u.squaredNorm();
  return std::sqrt(grid.dtheta() * s);
}

// L2 distance of two strings sharing the same pinned endpoints
inline double l2_distance(const Grid& grid, const PathState& u,
                          const PathState& v) {
  return std::sqrt(grid.dtheta() * (u - v).squaredNorm());
}

}  // namespace rstring
