#pragma once

#include <cmath>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "rstring/geometry.hpp"
#include "rstring/grid.hpp"
#include "rstring/integrator.hpp"

namespace rstring {

// clearance between a point and the wall; a point at or beyond the wall has
// clearance zero, so overshoots of the penalized dynamics count as contact
inline double boundary_gap(const Domain& dom, const Vec& x) {
  return dom.contains(x) ? dom.boundary_distance(x) : 0.0;
}

// smallest node index whose distance to the boundary is at most eps
inline std::optional<int> first_hit(const PathState& path, const Domain& dom,
                                    double eps) {
  for (int j = 0; j < path.rows(); ++j)
    if (boundary_gap(dom, path.row(j).transpose()) <= eps) return j;
  return std::nullopt;
}

struct ContactNode {
  int node;
  double distance;
};

struct ContactRecord {
  double time;
  std::vector<ContactNode> contact_nodes;
  std::vector<std::vector<int>> clusters;

  // mean string coordinate of each cluster
  std::vector<double> cluster_positions(const Grid& grid) const {
    std::vector<double> pos;
    pos.reserve(clusters.size());
    for (const auto& c : clusters) {
      double s = 0.0;
      for (int node : c) s += grid.theta(node);
      pos.push_back(s / c.size());
    }
    return pos;
  }
};

inline int default_gap_nodes(const Grid& grid) {
  return static_cast<int>(std::ceil(0.05 * grid.m));
}

// one record per recorded time with at least one node within eps of the
// boundary; nodes separated by at most gap_nodes indices share a cluster
inline std::vector<ContactRecord> contact_set(const Trajectory& traj,
                                              const Domain& dom, double eps,
                                              int gap_nodes = -1) {
  const Grid& grid = traj.grid;
  if (gap_nodes < 0) gap_nodes = default_gap_nodes(grid);
  std::vector<ContactRecord> records;
  for (std::size_t i = 0; i < traj.states.size(); ++i) {
    ContactRecord rec;
    rec.time = traj.times[i];
    for (int j = 0; j < grid.m; ++j) {
      const double gap = boundary_gap(dom, traj.states[i].row(j).transpose());
      if (gap <= eps) rec.contact_nodes.push_back({j, gap});
    }
    if (rec.contact_nodes.empty()) continue;
    std::vector<int> cluster{rec.contact_nodes.front().node};
    for (std::size_t k = 1; k < rec.contact_nodes.size(); ++k) {
      const int node = rec.contact_nodes[k].node;
      if (node - cluster.back() <= gap_nodes) {
        cluster.push_back(node);
      } else {
        rec.clusters.push_back(std::move(cluster));
        cluster = {node};
      }
    }
    rec.clusters.push_back(std::move(cluster));
    records.push_back(std::move(rec));
  }
  return records;
}

// ---------------------------------------------------------------------------
// Cylinder functionals F(w) = f(<l_1,w>, ..., <l_k,w>) with f drawn from a
// small expression grammar carrying exact gradients.

class Expr;
using ExprPtr = std::shared_ptr<const Expr>;

class Expr {
 public:
  virtual ~Expr() = default;
  // value and gradient with respect to the probe arguments
  virtual double eval(const Vec& s, Vec& grad) const = 0;
};

namespace expr {

class Var final : public Expr {
 public:
  explicit Var(int i) : i_(i) {}
  double eval(const Vec& s, Vec& grad) const override {
    grad.setZero();
    grad(i_) = 1.0;
    return s(i_);
  }

 private:
  int i_;
};

class Const final : public Expr {
 public:
  explicit Const(double c) : c_(c) {}
  double eval(const Vec&, Vec& grad) const override {
    grad.setZero();
    return c_;
  }

 private:
  double c_;
};

class Add final : public Expr {
 public:
  Add(ExprPtr a, ExprPtr b) : a_(std::move(a)), b_(std::move(b)) {}
  double eval(const Vec& s, Vec& grad) const override {
    Vec gb(grad.size());
    const double va = a_->eval(s, grad);
    const double vb = b_->eval(s, gb);
    grad += gb;
    return va + vb;
  }

 private:
  ExprPtr a_, b_;
};

class Mul final : public Expr {
 public:
  Mul(ExprPtr a, ExprPtr b) : a_(std::move(a)), b_(std::move(b)) {}
  double eval(const Vec& s, Vec& grad) const override {
    Vec gb(grad.size());
    const double va = a_->eval(s, grad);
    const double vb = b_->eval(s, gb);
    grad = vb * grad + va * gb;
    return va * vb;
  }

 private:
  ExprPtr a_, b_;
};

class PowInt final : public Expr {
 public:
  PowInt(ExprPtr a, int p) : a_(std::move(a)), p_(p) {}
  double eval(const Vec& s, Vec& grad) const override {
    const double va = a_->eval(s, grad);
    grad *= p_ * std::pow(va, p_ - 1);
    return std::pow(va, p_);
  }

 private:
  ExprPtr a_;
  int p_;
};

class ExpOf final : public Expr {
 public:
  explicit ExpOf(ExprPtr a) : a_(std::move(a)) {}
  double eval(const Vec& s, Vec& grad) const override {
    const double v = std::exp(a_->eval(s, grad));
    grad *= v;
    return v;
  }

 private:
  ExprPtr a_;
};

class TanhOf final : public Expr {
 public:
  explicit TanhOf(ExprPtr a) : a_(std::move(a)) {}
  double eval(const Vec& s, Vec& grad) const override {
    const double v = std::tanh(a_->eval(s, grad));
    grad *= 1.0 - v * v;
    return v;
  }

 private:
  ExprPtr a_;
};

}  // namespace expr

inline ExprPtr var(int i) { return std::make_shared<expr::Var>(i); }
inline ExprPtr constant(double c) { return std::make_shared<expr::Const>(c); }
inline ExprPtr add(ExprPtr a, ExprPtr b) {
  return std::make_shared<expr::Add>(std::move(a), std::move(b));
}
inline ExprPtr mul(ExprPtr a, ExprPtr b) {
  return std::make_shared<expr::Mul>(std::move(a), std::move(b));
}
inline ExprPtr scale(double c, ExprPtr a) { return mul(constant(c), std::move(a)); }
inline ExprPtr pow_int(ExprPtr a, int p) {
  return std::make_shared<expr::PowInt>(std::move(a), p);
}
inline ExprPtr exp_of(ExprPtr a) { return std::make_shared<expr::ExpOf>(std::move(a)); }
inline ExprPtr tanh_of(ExprPtr a) { return std::make_shared<expr::TanhOf>(std::move(a)); }

struct CylinderFunctional {
  std::vector<PathState> probes;
  ExprPtr f;

  Vec arguments(const Grid& grid, const PathState& w) const {
    Vec s(probes.size());
    for (std::size_t i = 0; i < probes.size(); ++i)
      s(i) = ip_interior(grid, probes[i], w);
    return s;
  }

  double value(const Grid& grid, const PathState& w) const {
    Vec grad(static_cast<int>(probes.size()));
    return f->eval(arguments(grid, w), grad);
  }

  // value together with the partial derivatives at the probe arguments
  std::pair<double, Vec> eval(const Grid& grid, const PathState& w) const {
    Vec grad(static_cast<int>(probes.size()));
    const double v = f->eval(arguments(grid, w), grad);
    return {v, grad};
  }

  double directional(const Grid& grid, const PathState& w, const PathState& h) const {
    auto [v, grad] = eval(grid, w);
    (void)v;
    double s = 0.0;
    for (std::size_t i = 0; i < probes.size(); ++i)
      s += grad(static_cast<int>(i)) * ip_interior(grid, probes[i], h);
    return s;
  }

  // numeric spot check that f and its gradient stay below a bound on samples
  bool bounded_on(const std::vector<Vec>& args, double bound) const {
    Vec grad(static_cast<int>(probes.size()));
    for (const Vec& s : args) {
      const double v = f->eval(s, grad);
      if (!std::isfinite(v) || std::abs(v) > bound) return false;
      if (!grad.allFinite() || grad.cwiseAbs().maxCoeff() > bound) return false;
    }
    return true;
  }
};

}  // namespace rstring
