#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rstring/rng.hpp"

namespace rstring {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bounded convex domain O in R^d with nonempty interior. All queries treat
// the closure: contains() and project() work with cl(O), boundary_distance()
// measures the gap to the boundary from either side.
class Domain {
 public:
  enum class Kind { Interval, Box, Ball, Ellipsoid, Polytope };

  static Domain interval(double lo, double hi) {
    if (!(lo < hi)) throw GeometryError("interval: need lo < hi");
    Domain d(Kind::Interval, 1);
    d.lo_ = Vec::Constant(1, lo);
    d.hi_ = Vec::Constant(1, hi);
    d.diameter_ = hi - lo;
    d.witness_ = Vec::Constant(1, 0.5 * (lo + hi));
    return d;
  }

  static Domain box(Vec lo, Vec hi) {
    if (lo.size() != hi.size() || lo.size() == 0)
      throw GeometryError("box: lo/hi size mismatch");
    if (((hi - lo).array() <= 0.0).any())
      throw GeometryError("box: need lo < hi componentwise");
    Domain d(Kind::Box, static_cast<int>(lo.size()));
    d.lo_ = std::move(lo);
    d.hi_ = std::move(hi);
    d.diameter_ = (d.hi_ - d.lo_).norm();
    d.witness_ = 0.5 * (d.lo_ + d.hi_);
    return d;
  }

  static Domain ball(Vec center, double radius) {
    if (center.size() == 0) throw GeometryError("ball: empty center");
    if (!(radius > 0.0)) throw GeometryError("ball: need radius > 0");
    Domain d(Kind::Ball, static_cast<int>(center.size()));
    d.center_ = std::move(center);
    d.radius_ = radius;
    d.diameter_ = 2.0 * radius;
    d.witness_ = d.center_;
    return d;
  }

  static Domain ellipsoid(Vec center, Vec semiaxes) {
    if (center.size() != semiaxes.size() || center.size() == 0)
      throw GeometryError("ellipsoid: center/semiaxes size mismatch");
    if ((semiaxes.array() <= 0.0).any())
      throw GeometryError("ellipsoid: semiaxes must be positive");
    Domain d(Kind::Ellipsoid, static_cast<int>(center.size()));
    d.center_ = std::move(center);
    d.axes_ = std::move(semiaxes);
    d.diameter_ = 2.0 * d.axes_.maxCoeff();
    d.witness_ = d.center_;
    return d;
  }

  // Intersection of halfspaces a_i . y <= b_i (rows of a). Construction
  // verifies a nonempty interior and boundedness; both checks are
  // multi-start subgradient estimates, adequate for low dimension.
  static Domain polytope(Mat a, Vec b) {
    if (a.rows() != b.size() || a.rows() == 0 || a.cols() == 0)
      throw GeometryError("polytope: shape mismatch");
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      if (a.row(i).norm() == 0.0)
        throw GeometryError("polytope: zero constraint row");
    Domain d(Kind::Polytope, static_cast<int>(a.cols()));
    d.pa_ = std::move(a);
    d.pb_ = std::move(b);
    d.check_bounded();
    d.witness_ = d.find_interior_witness();
    d.diameter_ = d.estimate_polytope_diameter();
    return d;
  }

  Kind kind() const { return kind_; }
  int dim() const { return dim_; }
  double diameter() const { return diameter_; }
  Vec interior_point() const { return witness_; }

  bool contains(const Vec& y, double tol = 0.0) const {
    check_dim(y);
    switch (kind_) {
      case Kind::Interval:
      case Kind::Box:
        return (y.array() >= lo_.array() - tol).all() &&
               (y.array() <= hi_.array() + tol).all();
      case Kind::Ball:
        return (y - center_).norm() <= radius_ + tol;
      case Kind::Ellipsoid: {
        // compare in metric units so tol means a spatial margin
        double lv = ((y - center_).array() / axes_.array()).matrix().norm();
        return lv <= 1.0 + tol / axes_.minCoeff();
      }
      case Kind::Polytope:
        for (Eigen::Index i = 0; i < pa_.rows(); ++i)
          if (pa_.row(i).dot(y) > pb_[i] + tol * pa_.row(i).norm())
            return false;
        return true;
    }
    return false;
  }

  // Euclidean projection onto cl(O). Closed form except for polytopes,
  // which use Dykstra's alternating projections.
  Vec project(const Vec& y) const {
    check_dim(y);
    switch (kind_) {
      case Kind::Interval:
      case Kind::Box:
        return y.cwiseMax(lo_).cwiseMin(hi_);
      case Kind::Ball: {
        Vec u = y - center_;
        double r = u.norm();
        if (r <= radius_) return y;
        return center_ + (radius_ / r) * u;
      }
      case Kind::Ellipsoid: {
        if (contains(y)) return y;
        return center_ + ellipsoid_surface_point(y - center_, /*inside=*/false);
      }
      case Kind::Polytope:
        return dykstra(y);
    }
    return y;
  }

  // dist(y, cl(O)); zero inside.
  double distance(const Vec& y) const {
    if (contains(y)) return 0.0;
    return (y - project(y)).norm();
  }

  // dist(y, boundary of O), from either side.
  double boundary_distance(const Vec& y) const {
    check_dim(y);
    if (!contains(y)) return distance(y);
    switch (kind_) {
      case Kind::Interval:
      case Kind::Box:
        return std::min((y - lo_).minCoeff(), (hi_ - y).minCoeff());
      case Kind::Ball:
        return radius_ - (y - center_).norm();
      case Kind::Ellipsoid: {
        Vec u = y - center_;
        return (u - ellipsoid_surface_point(u, /*inside=*/true)).norm();
      }
      case Kind::Polytope: {
        double best = std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < pa_.rows(); ++i)
          best = std::min(best,
                          (pb_[i] - pa_.row(i).dot(y)) / pa_.row(i).norm());
        return std::max(best, 0.0);
      }
    }
    return 0.0;
  }

  // positive inside, negative outside, zero on the boundary
  double signed_inside_distance(const Vec& y) const {
    return contains(y) ? boundary_distance(y) : -distance(y);
  }

  // Unit inward direction: away from the nearest boundary point when y is
  // inside, toward the projection when outside. At exact medial-axis or
  // center points an arbitrary admissible direction is returned.
  Vec inward_direction(const Vec& y) const {
    check_dim(y);
    if (!contains(y)) {
      Vec p = project(y);
      double r = (p - y).norm();
      if (r == 0.0) return fallback_direction();
      return (p - y) / r;
    }
    Vec q = nearest_boundary_point(y);
    double r = (y - q).norm();
    if (r == 0.0) return fallback_direction();
    return (y - q) / r;
  }

  // Unit inner normal at a boundary point. At edges and corners this is the
  // normalized average of the active faces' inward normals.
  Vec inner_normal(const Vec& y, double tol = -1.0) const {
    check_dim(y);
    if (tol < 0.0) tol = 1e-9 * diameter_;
    if (boundary_distance(y) > tol)
      throw GeometryError("inner_normal: point is not on the boundary");
    switch (kind_) {
      case Kind::Interval:
      case Kind::Box: {
        Vec n = Vec::Zero(dim_);
        for (int k = 0; k < dim_; ++k) {
          if (y[k] - lo_[k] <= tol) n[k] += 1.0;
          if (hi_[k] - y[k] <= tol) n[k] -= 1.0;
        }
        double r = n.norm();
        if (r == 0.0) throw GeometryError("inner_normal: no active face");
        return n / r;
      }
      case Kind::Ball: {
        Vec u = center_ - y;
        double r = u.norm();
        if (r == 0.0) throw GeometryError("inner_normal: degenerate point");
        return u / r;
      }
      case Kind::Ellipsoid: {
        Vec g = (y - center_).array() / axes_.array().square();
        double r = g.norm();
        if (r == 0.0) throw GeometryError("inner_normal: degenerate point");
        return -g / r;
      }
      case Kind::Polytope: {
        Vec n = Vec::Zero(dim_);
        int active = 0;
        for (Eigen::Index i = 0; i < pa_.rows(); ++i) {
          double gap = (pb_[i] - pa_.row(i).dot(y)) / pa_.row(i).norm();
          if (gap <= tol) {
            n -= pa_.row(i).transpose() / pa_.row(i).norm();
            ++active;
          }
        }
        if (active == 0) throw GeometryError("inner_normal: no active face");
        double r = n.norm();
        if (r == 0.0)
          throw GeometryError("inner_normal: active normals cancel");
        return n / r;
      }
    }
    throw GeometryError("inner_normal: unreachable");
  }

  std::string describe() const {
    std::ostringstream os;
    os.precision(17);
    switch (kind_) {
      case Kind::Interval:
        os << "interval(lo=" << lo_[0] << ",hi=" << hi_[0] << ")";
        break;
      case Kind::Box:
        os << "box(lo=" << row(lo_) << ",hi=" << row(hi_) << ")";
        break;
      case Kind::Ball:
        os << "ball(center=" << row(center_) << ",radius=" << radius_ << ")";
        break;
      case Kind::Ellipsoid:
        os << "ellipsoid(center=" << row(center_) << ",semiaxes=" << row(axes_)
           << ")";
        break;
      case Kind::Polytope:
        os << "polytope(rows=" << pa_.rows() << ",dim=" << dim_ << ")";
        break;
    }
    return os.str();
  }

  // accessors used by config round-trips
  const Vec& box_lo() const { return lo_; }
  const Vec& box_hi() const { return hi_; }
  const Vec& center() const { return center_; }
  double radius() const { return radius_; }
  const Vec& semiaxes() const { return axes_; }
  const Mat& facet_matrix() const { return pa_; }
  const Vec& facet_offsets() const { return pb_; }

 private:
  Domain(Kind k, int dim) : kind_(k), dim_(dim) {}

  void check_dim(const Vec& y) const {
    if (y.size() != dim_) throw GeometryError("point dimension mismatch");
  }

  Vec fallback_direction() const {
    Vec e = Vec::Zero(dim_);
    e[0] = 1.0;
    return e;
  }

  static std::string row(const Vec& v) {
    std::ostringstream os;
    os.precision(17);
    os << "[";
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (i) os << ",";
      os << v[i];
    }
    os << "]";
    return os.str();
  }

  Vec nearest_boundary_point(const Vec& y) const {
    switch (kind_) {
      case Kind::Interval:
      case Kind::Box: {
        int arg = 0;
        double best = std::numeric_limits<double>::infinity();
        double side = 0.0;
        for (int k = 0; k < dim_; ++k) {
          if (y[k] - lo_[k] < best) best = y[k] - lo_[k], arg = k, side = -1.0;
          if (hi_[k] - y[k] < best) best = hi_[k] - y[k], arg = k, side = 1.0;
        }
        Vec q = y;
        q[arg] = side > 0.0 ? hi_[arg] : lo_[arg];
        return q;
      }
      case Kind::Ball: {
        Vec u = y - center_;
        double r = u.norm();
        if (r == 0.0) {
          Vec q = center_;
          q[0] += radius_;
          return q;
        }
        return center_ + (radius_ / r) * u;
      }
      case Kind::Ellipsoid:
        return center_ + ellipsoid_surface_point(y - center_, /*inside=*/true);
      case Kind::Polytope: {
        Eigen::Index arg = 0;
        double best = std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < pa_.rows(); ++i) {
          double gap = (pb_[i] - pa_.row(i).dot(y)) / pa_.row(i).norm();
          if (gap < best) best = gap, arg = i;
        }
        double s = (pb_[arg] - pa_.row(arg).dot(y)) / pa_.row(arg).squaredNorm();
        return y + s * pa_.row(arg).transpose();
      }
    }
    throw GeometryError("nearest_boundary_point: unreachable");
  }

  // Nearest point of the ellipsoid surface to the centered point u, via the
  // classic Lagrange parameter root-find: p_i = s_i^2 u_i / (s_i^2 + t),
  // sum p_i^2/s_i^2 = 1. Outside points need t > 0, inside points t < 0.
  // Components of u that vanish on the tightest axis make the inside root
  // degenerate, so those are nudged by a relative 1e-12 first; the induced
  // error is far below the tolerances used anywhere in this library.
  Vec ellipsoid_surface_point(Vec u, bool inside) const {
    double smin = axes_.minCoeff();
    if (inside) {
      if (u.norm() <= 1e-14 * smin) {
        Eigen::Index k;
        axes_.minCoeff(&k);
        Vec p = Vec::Zero(dim_);
        p[k] = smin;
        return p;
      }
      for (int k = 0; k < dim_; ++k)
        if (std::abs(u[k]) < 1e-12 * axes_[k]) u[k] = 1e-12 * axes_[k];
    }
    auto g = [&](double t) {
      double s = 0.0;
      for (int k = 0; k < dim_; ++k) {
        double w = axes_[k] * u[k] / (axes_[k] * axes_[k] + t);
        s += w * w;
      }
      return s - 1.0;
    };
    double tlo, thi;
    if (inside) {
      tlo = -smin * smin;
      thi = 0.0;
      double eps = smin * smin * 1e-15;
      tlo += eps;
      while (g(tlo) < 0.0 && eps < smin * smin) {
        eps *= 0.5;
        tlo = -smin * smin + eps;
      }
    } else {
      tlo = 0.0;
      thi = axes_.maxCoeff() * u.norm();
      while (g(thi) > 0.0) thi *= 2.0;
    }
    for (int it = 0; it < 200; ++it) {
      double tm = 0.5 * (tlo + thi);
      if (g(tm) > 0.0)
        tlo = tm;
      else
        thi = tm;
      if (thi - tlo < 1e-15 * (1.0 + std::abs(thi))) break;
    }
    double t = 0.5 * (tlo + thi);
    Vec p(dim_);
    for (int k = 0; k < dim_; ++k)
      p[k] = axes_[k] * axes_[k] * u[k] / (axes_[k] * axes_[k] + t);
    return p;
  }

  // Dykstra's algorithm over the halfspace family; converges to the exact
  // projection for any intersection of convex sets.
  Vec dykstra(const Vec& y) const {
    const int m = static_cast<int>(pa_.rows());
    std::vector<Vec> corr(m, Vec::Zero(dim_));
    Vec x = y;
    const double tol = 1e-12 * (1.0 + y.norm());
    for (int sweep = 0; sweep < 10000; ++sweep) {
      double moved = 0.0;
      for (int i = 0; i < m; ++i) {
        Vec z = x + corr[i];
        double viol = pa_.row(i).dot(z) - pb_[i];
        Vec xnew = z;
        if (viol > 0.0)
          xnew = z - (viol / pa_.row(i).squaredNorm()) * pa_.row(i).transpose();
        corr[i] = z - xnew;
        moved += (xnew - x).norm();
        x = xnew;
      }
      if (moved < tol && contains(x, tol)) return x;
    }
    if (contains(x, 1e-9 * (1.0 + y.norm()))) return x;
    throw GeometryError("dykstra: projection did not converge");
  }

  // Bounded iff the recession cone {v : Av <= 0} is trivial, i.e.
  // min_{|v|=1} max_i a_i.v > 0. Estimated by multi-start subgradient
  // descent on the sphere.
  void check_bounded() const {
    const int starts = 16 * dim_ + 32;
    std::uint64_t state = 0x9e3779b97f4a7c15ULL;
    double global = std::numeric_limits<double>::infinity();
    Mat an = pa_;
    for (Eigen::Index i = 0; i < an.rows(); ++i) an.row(i) /= an.row(i).norm();
    for (int s = 0; s < starts; ++s) {
      Vec v(dim_);
      if (s < 2 * dim_) {
        v.setZero();
        v[s / 2] = (s % 2 == 0) ? 1.0 : -1.0;
      } else {
        for (int k = 0; k < dim_; ++k) {
          double g1 = static_cast<double>(detail::splitmix64(state) >> 11) *
                      0x1.0p-53;
          double g2 = static_cast<double>(detail::splitmix64(state) >> 11) *
                      0x1.0p-53;
          v[k] = std::sqrt(-2.0 * std::log(g1 + 1e-300)) *
                 std::cos(6.283185307179586 * g2);
        }
        v /= v.norm();
      }
      for (int it = 0; it < 400; ++it) {
        Eigen::Index arg;
        (an * v).maxCoeff(&arg);
        Vec grad = an.row(arg).transpose();
        grad -= grad.dot(v) * v;  // project onto tangent space
        double step = 0.5 / (1.0 + it);
        v -= step * grad;
        double r = v.norm();
        if (r == 0.0) break;
        v /= r;
      }
      global = std::min(global, (an * v).maxCoeff());
    }
    if (global <= 1e-9)
      throw GeometryError("polytope: unbounded (trivial recession cone check failed)");
  }

  Vec find_interior_witness() const {
    Mat an = pa_;
    Vec bn = pb_;
    for (Eigen::Index i = 0; i < an.rows(); ++i) {
      double r = an.row(i).norm();
      an.row(i) /= r;
      bn[i] /= r;
    }
    Vec y = Vec::Zero(dim_);
    Vec best = y;
    double fbest = (an * y - bn).maxCoeff();
    double scale = std::max(1.0, bn.cwiseAbs().maxCoeff());
    for (int it = 1; it <= 4000; ++it) {
      Eigen::Index arg;
      double f = (an * y - bn).maxCoeff(&arg);
      if (f < fbest) fbest = f, best = y;
      y -= (scale / it) * an.row(arg).transpose();
    }
    if (!(fbest < -1e-12 * scale))
      throw GeometryError("polytope: could not locate an interior point");
    return best;
  }

  double estimate_polytope_diameter() const {
    // support-point sampling; an estimate is all the default tolerances need
    std::uint64_t state = 0x51ed2701b85cull;
    double far = 1e6 * (1.0 + pb_.cwiseAbs().maxCoeff());
    std::vector<Vec> pts;
    for (int s = 0; s < 2 * dim_ + 24; ++s) {
      Vec v(dim_);
      if (s < 2 * dim_) {
        v.setZero();
        v[s / 2] = (s % 2 == 0) ? 1.0 : -1.0;
      } else {
        for (int k = 0; k < dim_; ++k)
          v[k] = static_cast<double>(detail::splitmix64(state) >> 11) *
                     0x1.0p-52 -
                 1.0;
        if (v.norm() == 0.0) continue;
        v /= v.norm();
      }
      pts.push_back(dykstra(witness_fallback() + far * v));
    }
    double diam = 0.0;
    for (size_t i = 0; i < pts.size(); ++i)
      for (size_t j = i + 1; j < pts.size(); ++j)
        diam = std::max(diam, (pts[i] - pts[j]).norm());
    return diam;
  }

  Vec witness_fallback() const {
    return witness_.size() == dim_ ? witness_ : Vec::Zero(dim_);
  }

  Kind kind_;
  int dim_;
  Vec lo_, hi_;          // interval, box
  Vec center_;           // ball, ellipsoid
  double radius_ = 0.0;  // ball
  Vec axes_;             // ellipsoid
  Mat pa_;               // polytope rows
  Vec pb_;
  Vec witness_;
  double diameter_ = 0.0;
};

}  // namespace rstring
