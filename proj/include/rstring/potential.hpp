#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

#include "rstring/geometry.hpp"

namespace rstring {

class PotentialError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

// h(s) = s log s - s, continuously extended by h(0) = 0. Convex and
// decreasing on [0,1], with h'(s) = log s unbounded at 0+.
inline double barrier_h(double s) { return s > 0.0 ? s * std::log(s) - s : 0.0; }

// Halton low-discrepancy sequence, one base per coordinate.
inline double halton(std::uint64_t index, std::uint64_t base) {
  double f = 1.0, r = 0.0;
  while (index > 0) {
    f /= static_cast<double>(base);
    r += f * static_cast<double>(index % base);
    index /= base;
  }
  return r;
}

inline std::uint64_t nth_prime(int k) {
  static const std::uint64_t primes[] = {2,  3,  5,  7,  11, 13, 17, 19,
                                         23, 29, 31, 37, 41, 43, 47, 53};
  return primes[k % 16];
}

}  // namespace detail

// Convex potential phi on cl(O), extended by +infinity outside. The Custom
// kind accepts user callables plus the metadata the samplers need (a true
// lower bound of phi over cl(O)).
class Potential {
 public:
  enum class Kind { Zero, Quadratic, LogBarrier, Custom };

  static Potential zero(Domain dom) {
    Potential p(std::move(dom), Kind::Zero);
    p.lower_bound_ = 0.0;
    return p;
  }

  static Potential quadratic(Domain dom, Vec center, double weight) {
    if (center.size() != dom.dim())
      throw PotentialError("quadratic: center dimension mismatch");
    if (!(weight > 0.0)) throw PotentialError("quadratic: weight must be > 0");
    Potential p(std::move(dom), Kind::Quadratic);
    p.center_ = std::move(center);
    p.weight_ = weight;
    double gap = p.dom_.distance(p.center_);
    p.lower_bound_ = 0.5 * weight * gap * gap;
    return p;
  }

  static Potential log_barrier(Domain dom) {
    Potential p(std::move(dom), Kind::LogBarrier);
    double inr = p.estimate_inradius();
    // h is decreasing (hence convex under composition with the concave
    // boundary distance) only while d <= 1
    if (inr > 1.0 + 1e-6)
      throw PotentialError(
          "log_barrier: domain inradius exceeds 1, potential would lose convexity");
    p.lower_bound_ = detail::barrier_h(std::min(inr, 1.0));
    p.check_convexity_spot();
    p.integrability_proxy_ = p.run_integrability_proxy();
    return p;
  }

  static Potential custom(Domain dom, std::string name,
                          std::function<double(const Vec&)> value,
                          std::function<Vec(const Vec&)> min_subgradient,
                          double lower_bound = 0.0) {
    if (!value || !min_subgradient)
      throw PotentialError("custom: both callables are required");
    Potential p(std::move(dom), Kind::Custom);
    p.name_ = std::move(name);
    p.custom_value_ = std::move(value);
    p.custom_grad_ = std::move(min_subgradient);
    p.lower_bound_ = lower_bound;
    p.check_convexity_spot();
    p.integrability_proxy_ = p.run_integrability_proxy();
    return p;
  }

  Kind kind() const { return kind_; }
  const Domain& domain() const { return dom_; }
  const Vec& quadratic_center() const { return center_; }
  double quadratic_weight() const { return weight_; }
  double lower_bound() const { return lower_bound_; }
  double integrability_proxy() const { return integrability_proxy_; }

  // finite value on cl(O); throws if y is outside
  double value(const Vec& y) const {
    if (!dom_.contains(y, 1e-12 * (1.0 + dom_.diameter())))
      throw PotentialError("value: point outside the domain closure");
    return value_inside(y);
  }

  // +infinity outside cl(O)
  double value_extended(const Vec& y) const {
    if (!dom_.contains(y)) return std::numeric_limits<double>::infinity();
    return value_inside(y);
  }

  // Minimal-norm subgradient at an interior point. For the barrier this is
  // (log d) * grad d; on medial-axis ties the tied inward directions are
  // averaged, which is the minimal-norm hull point for up to two tied faces
  // and for the symmetric ties that occur in the shipped domains.
  Vec min_subgradient(const Vec& y) const {
    if (!dom_.contains(y) || dom_.boundary_distance(y) <= 0.0)
      throw PotentialError("min_subgradient: point must be in the open interior");
    switch (kind_) {
      case Kind::Zero:
        return Vec::Zero(dom_.dim());
      case Kind::Quadratic:
        return weight_ * (y - center_);
      case Kind::LogBarrier: {
        double d = dom_.boundary_distance(y);
        return std::log(d) * tied_inward_direction(y, d);
      }
      case Kind::Custom:
        return custom_grad_(y);
    }
    throw PotentialError("min_subgradient: unreachable");
  }

  std::string describe() const {
    switch (kind_) {
      case Kind::Zero:
        return "zero";
      case Kind::Quadratic: {
        std::ostringstream os;
        os.precision(17);
        os << "quadratic(center=[";
        for (Eigen::Index i = 0; i < center_.size(); ++i) {
          if (i) os << ",";
          os << center_[i];
        }
        os << "],weight=" << weight_ << ")";
        return os.str();
      }
      case Kind::LogBarrier:
        return "log_barrier";
      case Kind::Custom:
        return "custom(" + name_ + ")";
    }
    return "?";
  }

 private:
  Potential(Domain dom, Kind k) : dom_(std::move(dom)), kind_(k) {}

  double value_inside(const Vec& y) const {
    switch (kind_) {
      case Kind::Zero:
        return 0.0;
      case Kind::Quadratic:
        return 0.5 * weight_ * (y - center_).squaredNorm();
      case Kind::LogBarrier:
        return detail::barrier_h(dom_.boundary_distance(y));
      case Kind::Custom:
        return custom_value_(y);
    }
    return 0.0;
  }

  Vec tied_inward_direction(const Vec& y, double d) const {
    // collect directions of all (near-)nearest boundary points
    const double tie = 1e-12 * (1.0 + dom_.diameter());
    std::vector<Vec> dirs;
    switch (dom_.kind()) {
      case Domain::Kind::Interval:
      case Domain::Kind::Box: {
        const Vec& lo = dom_.box_lo();
        const Vec& hi = dom_.box_hi();
        for (int k = 0; k < dom_.dim(); ++k) {
          if (y[k] - lo[k] <= d + tie) {
            Vec v = Vec::Zero(dom_.dim());
            v[k] = 1.0;
            dirs.push_back(v);
          }
          if (hi[k] - y[k] <= d + tie) {
            Vec v = Vec::Zero(dom_.dim());
            v[k] = -1.0;
            dirs.push_back(v);
          }
        }
        break;
      }
      case Domain::Kind::Polytope: {
        const Mat& a = dom_.facet_matrix();
        const Vec& b = dom_.facet_offsets();
        for (Eigen::Index i = 0; i < a.rows(); ++i) {
          double gap = (b[i] - a.row(i).dot(y)) / a.row(i).norm();
          if (gap <= d + tie)
            dirs.push_back(-a.row(i).transpose() / a.row(i).norm());
        }
        break;
      }
      default:
        break;
    }
    if (dirs.empty()) return dom_.inward_direction(y);
    Vec avg = Vec::Zero(dom_.dim());
    for (const Vec& v : dirs) avg += v;
    return avg / static_cast<double>(dirs.size());
  }

  double estimate_inradius() const {
    switch (dom_.kind()) {
      case Domain::Kind::Interval:
      case Domain::Kind::Box:
        return 0.5 * (dom_.box_hi() - dom_.box_lo()).minCoeff();
      case Domain::Kind::Ball:
        return dom_.radius();
      case Domain::Kind::Ellipsoid:
        return dom_.semiaxes().minCoeff();
      case Domain::Kind::Polytope: {
        // boundary_distance is concave inside; supergradient ascent
        Vec y = dom_.interior_point();
        double best = dom_.boundary_distance(y);
        double step0 = 0.5 * dom_.diameter();
        for (int it = 1; it <= 2000; ++it) {
          Vec g = dom_.inward_direction(y);
          Vec ytry = y + (step0 / it) * g;
          if (dom_.contains(ytry)) {
            y = ytry;
            best = std::max(best, dom_.boundary_distance(y));
          }
        }
        return best;
      }
    }
    return 0.0;
  }

  // midpoint convexity on deterministic interior pairs
  void check_convexity_spot() const {
    const int npairs = 200;
    std::vector<Vec> pts = interior_samples(2 * npairs + 16);
    if (pts.size() < 2)
      throw PotentialError("convexity check: no interior sample points");
    double scale = 0.0;
    for (const Vec& p : pts) scale = std::max(scale, std::abs(value_inside(p)));
    double tol = 1e-9 * (1.0 + scale);
    for (size_t i = 0; i + 1 < pts.size() && i < 2 * npairs; i += 2) {
      const Vec& x = pts[i];
      const Vec& z = pts[i + 1];
      Vec m = 0.5 * (x + z);
      if (value_inside(m) > 0.5 * (value_inside(x) + value_inside(z)) + tol)
        throw PotentialError("potential failed the midpoint convexity check");
    }
  }

  // Monte-Carlo proxy for the integrability of |min_subgradient|^2 over O,
  // evaluated at deterministic low-discrepancy interior points.
  double run_integrability_proxy() const {
    std::vector<Vec> pts = interior_samples(1000);
    if (pts.empty())
      throw PotentialError("integrability proxy: no interior sample points");
    double acc = 0.0;
    for (const Vec& p : pts) acc += min_subgradient(p).squaredNorm();
    double mean = acc / static_cast<double>(pts.size());
    if (!std::isfinite(mean) || mean > 1e8)
      throw PotentialError("integrability proxy exceeded its bound");
    return mean;
  }

  std::vector<Vec> interior_samples(int target) const {
    // Halton points in a bounding box, filtered to the open interior
    Vec blo, bhi;
    switch (dom_.kind()) {
      case Domain::Kind::Interval:
      case Domain::Kind::Box:
        blo = dom_.box_lo();
        bhi = dom_.box_hi();
        break;
      case Domain::Kind::Ball:
        blo = dom_.center().array() - dom_.radius();
        bhi = dom_.center().array() + dom_.radius();
        break;
      case Domain::Kind::Ellipsoid:
        blo = dom_.center() - dom_.semiaxes();
        bhi = dom_.center() + dom_.semiaxes();
        break;
      case Domain::Kind::Polytope: {
        Vec w = dom_.interior_point();
        blo = w.array() - dom_.diameter();
        bhi = w.array() + dom_.diameter();
        break;
      }
    }
    std::vector<Vec> out;
    double margin = 1e-9 * (1.0 + dom_.diameter());
    for (std::uint64_t i = 1; i <= 64 * static_cast<std::uint64_t>(target) &&
                              out.size() < static_cast<size_t>(target);
         ++i) {
      Vec p(dom_.dim());
      for (int k = 0; k < dom_.dim(); ++k)
        p[k] = blo[k] +
               (bhi[k] - blo[k]) * detail::halton(i, detail::nth_prime(k));
      if (dom_.contains(p) && dom_.boundary_distance(p) > margin)
        out.push_back(p);
    }
    return out;
  }

  Domain dom_;
  Kind kind_;
  Vec center_;
  double weight_ = 0.0;
  std::string name_;
  std::function<double(const Vec&)> custom_value_;
  std::function<Vec(const Vec&)> custom_grad_;
  double lower_bound_ = 0.0;
  double integrability_proxy_ = 0.0;
};

// Moreau-Yosida regularization Phi_n(x) = inf_y { Phi(y) + n|x-y|^2 } with
// Phi = phi + indicator of cl(O). The infimum is attained at prox(x), and
// Phi_n is C^1 with gradient 2n(x - prox(x)).
class Yosida {
 public:
  Yosida(const Potential& pot, double n) : pot_(&pot), n_(n) {
    if (!(n > 0.0)) throw PotentialError("yosida: n must be > 0");
  }

  double n() const { return n_; }
  const Potential& potential() const { return *pot_; }

  Vec prox(const Vec& x) const {
    const Domain& dom = pot_->domain();
    switch (pot_->kind()) {
      case Potential::Kind::Zero:
        return dom.project(x);
      case Potential::Kind::Quadratic: {
        // isotropic quadratic: the constrained minimizer is the projection
        // of the unconstrained one
        double w = pot_->quadratic_weight();
        Vec m = (2.0 * n_ * x + w * pot_->quadratic_center()) / (2.0 * n_ + w);
        return dom.project(m);
      }
      case Potential::Kind::LogBarrier:
        return prox_barrier(x);
      case Potential::Kind::Custom:
        return prox_custom(x);
    }
    throw SolverError("prox: unreachable");
  }

  double value(const Vec& x) const {
    Vec p = prox(x);
    return value_at_prox(p) + n_ * (x - p).squaredNorm();
  }

  Vec gradient(const Vec& x) const { return 2.0 * n_ * (x - prox(x)); }

  struct Eval {
    double value;
    Vec gradient;
    Vec prox;
  };

  Eval eval(const Vec& x) const {
    Vec p = prox(x);
    return {value_at_prox(p) + n_ * (x - p).squaredNorm(), 2.0 * n_ * (x - p),
            p};
  }

 private:
  // inner solvers can leave the prox an ulp outside the closure; snap back
  // before evaluating phi there
  double value_at_prox(const Vec& p) const {
    const Domain& dom = pot_->domain();
    return pot_->value(dom.contains(p) ? p : dom.project(p));
  }

  Vec prox_barrier(const Vec& x) const {
    switch (pot_->domain().kind()) {
      case Domain::Kind::Interval:
      case Domain::Kind::Box:
      case Domain::Kind::Ball:
        return prox_barrier_gaps(x);
      default:
        return prox_barrier_ray(x);
    }
  }

  // In interval, box and ball domains the boundary distance is the minimum
  // of independent scalar gaps (one per slab axis, or a single radial one),
  // so the prox reduces to min_t h(t) + n sum_c max(0, t - g_c(x))^2 over
  // the attainable range: every gap below the optimal t moves to distance
  // exactly t, the rest stay put. The derivative log t + 2n sum_c max(0,
  // t - g_c) is strictly increasing, so bisection (in log t, since the root
  // collapses toward 0 far outside the domain) is exact.
  Vec prox_barrier_gaps(const Vec& x) const {
    const Domain& dom = pot_->domain();
    const bool radial = dom.kind() == Domain::Kind::Ball;
    double cap = dom.radius();
    Vec gap(radial ? 1 : x.size());
    if (radial) {
      gap(0) = dom.radius() - (x - dom.center()).norm();
    } else {
      cap = std::numeric_limits<double>::infinity();
      for (Eigen::Index c = 0; c < x.size(); ++c) {
        gap(c) = std::min(x(c) - dom.box_lo()(c), dom.box_hi()(c) - x(c));
        cap = std::min(cap, 0.5 * (dom.box_hi()(c) - dom.box_lo()(c)));
      }
    }
    auto slope = [&](double t) {
      double s = std::log(t);
      for (Eigen::Index c = 0; c < gap.size(); ++c)
        s += 2.0 * n_ * std::max(0.0, t - gap(c));
      return s;
    };
    double t = cap;
    if (slope(cap) > 0.0) {
      double lo = std::log(std::numeric_limits<double>::min());
      double hi = std::log(cap);
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (slope(std::exp(mid)) > 0.0 ? hi : lo) = mid;
      }
      t = std::exp(0.5 * (lo + hi));
    }
    if (radial) {
      const double r = (x - dom.center()).norm();
      if (gap(0) >= t || r == 0.0) return x;
      return dom.center() + ((dom.radius() - t) / r) * (x - dom.center());
    }
    Vec p = x;
    for (Eigen::Index c = 0; c < x.size(); ++c) {
      if (gap(c) >= t) continue;
      p(c) = x(c) - dom.box_lo()(c) <= dom.box_hi()(c) - x(c)
                 ? dom.box_lo()(c) + t
                 : dom.box_hi()(c) - t;
    }
    return p;
  }

  // For ellipsoids and polytopes the prox is searched along the inward ray
  // through x: the objective h(d(y)) + n|y-x|^2 is convex on the chord that
  // the ray cuts out of cl(O), so golden-section search converges
  // unconditionally. This is a controlled approximation: the true minimizer
  // can leave the ray where the distance field curves away from it.
  Vec prox_barrier_ray(const Vec& x) const {
    const Domain& dom = pot_->domain();
    Vec dir = dom.inward_direction(x);
    auto inside = [&](double s) { return dom.contains(x + s * dir); };

    double s_lo, s_hi;
    double growth = std::max(1.0, dom.diameter());
    if (dom.contains(x)) {
      double hi = growth;
      while (inside(hi)) hi *= 2.0;
      s_hi = bisect_flip(inside, 0.0, hi);
      double lo = -growth;
      while (inside(lo)) lo *= 2.0;
      s_lo = -bisect_flip([&](double s) { return inside(-s); }, 0.0, -lo);
    } else {
      double d0 = dom.distance(x);
      // entry point: the ray meets cl(O) at the projection
      s_lo = d0;
      double hi = d0 + growth;
      while (inside(hi)) hi *= 2.0;
      if (!inside(0.5 * (s_lo + hi)) && !inside(s_lo + 1e-13 * growth)) {
        // tangent chord; the prox collapses to the projection
        return dom.project(x);
      }
      s_hi = bisect_flip(inside, s_lo, hi);
    }

    auto objective = [&](double s) {
      Vec y = x + s * dir;
      double d = dom.contains(y) ? dom.boundary_distance(y) : 0.0;
      return detail::barrier_h(d) + n_ * s * s;
    };
    double s = golden_section(objective, s_lo, s_hi);

    // value comparisons locate a smooth minimum only to sqrt(machine eps);
    // polish by bisecting the stationarity condition, whose sign is sharp
    const double span = s_hi - s_lo;
    auto dist_at = [&](double t) {
      Vec y = x + t * dir;
      return dom.contains(y) ? dom.boundary_distance(y) : 0.0;
    };
    auto slope = [&](double t) {
      const double dl = 1e-7 * span;
      const double dp = (dist_at(t + dl) - dist_at(t - dl)) / (2.0 * dl);
      return std::log(std::max(dist_at(t), 1e-300)) * dp + 2.0 * n_ * t;
    };
    double lo2 = s_lo + 1e-9 * span, hi2 = s_hi - 1e-9 * span;
    if (slope(lo2) < 0.0 && slope(hi2) > 0.0) {
      for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (lo2 + hi2);
        (slope(mid) < 0.0 ? lo2 : hi2) = mid;
      }
      s = 0.5 * (lo2 + hi2);
    }
    return x + s * dir;
  }

  template <typename F>
  static double bisect_flip(F inside, double lo, double hi) {
    // pre: inside(lo), !inside(hi); returns the crossing
    for (int it = 0; it < 200; ++it) {
      double mid = 0.5 * (lo + hi);
      if (inside(mid))
        lo = mid;
      else
        hi = mid;
      if (hi - lo <= 1e-14 * (1.0 + std::abs(lo))) break;
    }
    return lo;
  }

  template <typename F>
  static double golden_section(F f, double lo, double hi) {
    const double gr = 0.6180339887498949;
    double a = lo, b = hi;
    double x1 = b - gr * (b - a);
    double x2 = a + gr * (b - a);
    double f1 = f(x1), f2 = f(x2);
    for (int it = 0; it < 200; ++it) {
      if (b - a <= 1e-13 * (1.0 + std::abs(a) + std::abs(b))) break;
      if (f1 <= f2) {
        b = x2;
        x2 = x1;
        f2 = f1;
        x1 = b - gr * (b - a);
        f1 = f(x1);
      } else {
        a = x1;
        x1 = x2;
        f1 = f2;
        x2 = a + gr * (b - a);
        f2 = f(x2);
      }
    }
    return 0.5 * (a + b);
  }

  // projected gradient with backtracking; the 2n-strong convexity of the
  // prox objective gives linear convergence for smooth custom potentials
  Vec prox_custom(const Vec& x) const {
    const Domain& dom = pot_->domain();
    auto obj = [&](const Vec& y) {
      return pot_->value_extended(y) + n_ * (y - x).squaredNorm();
    };
    Vec y = dom.project(x);
    double fy = obj(y);
    double step = 0.5 / n_;
    const double tol = 1e-12;
    Vec witness = dom.interior_point();
    for (int it = 0; it < 500; ++it) {
      Vec ys = y;
      if (!dom.contains(ys) || dom.boundary_distance(ys) <= 0.0) {
        // nudge boundary iterates strictly inside so the subgradient is
        // defined; toward the witness is inward for any convex domain
        Vec toward = witness - ys;
        double r = toward.norm();
        if (r > 0.0)
          ys += (1e-12 * (1.0 + dom.diameter()) / r) * toward;
      }
      Vec g = pot_->min_subgradient(ys);
      g += 2.0 * n_ * (y - x);
      Vec ynext;
      double fnext;
      double st = step;
      bool ok = false;
      for (int bt = 0; bt < 60; ++bt) {
        ynext = dom.project(y - st * g);
        fnext = obj(ynext);
        if (fnext <= fy - 0.25 / st * (ynext - y).squaredNorm() + 1e-300) {
          ok = true;
          break;
        }
        st *= 0.5;
      }
      if (!ok) return y;
      double moved = (ynext - y).norm();
      y = ynext;
      fy = fnext;
      step = std::min(st * 2.0, 100.0 / n_);
      if (moved <= tol * (1.0 + y.norm())) return y;
    }
    throw SolverError("prox: custom inner solver did not converge");
  }

  const Potential* pot_;
  double n_;
};

}  // namespace rstring
