#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

#include "rstring/grid.hpp"
#include "rstring/potential.hpp"
#include "rstring/rng.hpp"
#include "rstring/spectral.hpp"

namespace rstring {

// Brownian bridge from a to b sampled exactly at the interior nodes by
// sequential conditioning: given x at theta_{j-1}, the next node is Gaussian
// with mean x + (b - x) h / tau and variance h (tau - h) / tau per component,
// tau = 1 - theta_{j-1}.
inline PathState sample_bridge(const Grid& grid, SeedStream& rng) {
  const double h = grid.dtheta();
  PathState u(grid.m, grid.dim);
  Vec prev = grid.a;
  for (int j = 0; j < grid.m; ++j) {
    const double tau = 1.0 - j * h;
    const double sd = std::sqrt(h * (tau - h) / tau);
    for (int c = 0; c < grid.dim; ++c) {
      const double mean = prev(c) + (grid.b(c) - prev(c)) * h / tau;
      u(j, c) = mean + sd * rng.next_gaussian();
    }
    prev = u.row(j).transpose();
  }
  return u;
}

// space-time white noise increment over one step: iid N(0, dt / dtheta) per
// node and component, so that <h, dW>_grid has variance dt ||h||_grid^2
inline PathState noise_field(const Grid& grid, double dt, SeedStream& rng) {
  const double sd = std::sqrt(dt / grid.dtheta());
  PathState w(grid.m, grid.dim);
  for (int j = 0; j < grid.m; ++j)
    for (int c = 0; c < grid.dim; ++c) w(j, c) = sd * rng.next_gaussian();
  return w;
}

// trapezoidal potential energy of the hard potential; +inf as soon as any
// node (or endpoint) leaves the closed domain
inline double potential_energy_exact(const Grid& grid, const PathState& u,
                                     const Potential& pot) {
  const double inf = std::numeric_limits<double>::infinity();
  double s = 0.5 * (pot.value_extended(grid.a) + pot.value_extended(grid.b));
  if (std::isinf(s)) return inf;
  for (int j = 0; j < grid.m; ++j) {
    const double v = pot.value_extended(u.row(j).transpose());
    if (std::isinf(v)) return inf;
    s += v;
  }
  return grid.dtheta() * s;
}

// trapezoidal energy of the penalized potential; finite everywhere
inline double potential_energy_yosida(const Grid& grid, const PathState& u,
                                      const Yosida& yos) {
  double s = 0.5 * (yos.value(grid.a) + yos.value(grid.b));
  for (int j = 0; j < grid.m; ++j) s += yos.value(u.row(j).transpose());
  return grid.dtheta() * s;
}

struct WeightedSample {
  PathState path;
  double log_weight;  // log density ratio up to a constant; 0 for rejection draws
};

enum class SampleStrategy { Rejection, Importance };

namespace detail {

template <typename EnergyFn>
WeightedSample sample_invariant_impl(const Grid& grid, EnergyFn&& energy,
                                     double lower_bound, SampleStrategy strategy,
                                     SeedStream& rng, long max_attempts) {
  if (strategy == SampleStrategy::Importance) {
    PathState u = sample_bridge(grid, rng);
    const double e = energy(u);
    return {std::move(u), -e};
  }
  for (long attempt = 0; attempt < max_attempts; ++attempt) {
    PathState u = sample_bridge(grid, rng);
    const double e = energy(u);
    if (std::isinf(e)) continue;
    if (rng.next_uniform() <= std::exp(-(e - lower_bound)))
      return {std::move(u), 0.0};
  }
  throw SolverError("sample_invariant: rejection cap reached");
}

}  // namespace detail

// draw from the invariant measure of the reflected string (bridge tilted by
// exp(-U) with U the exact trapezoidal energy)
inline WeightedSample sample_invariant_nu(const Grid& grid, const Potential& pot,
                                          SampleStrategy strategy, SeedStream& rng,
                                          long max_attempts = 10'000'000) {
  auto energy = [&](const PathState& u) {
    return potential_energy_exact(grid, u, pot);
  };
  return detail::sample_invariant_impl(grid, energy, pot.lower_bound(), strategy,
                                       rng, max_attempts);
}

// draw from the invariant measure of the penalized string (tilt exp(-U_n))
inline WeightedSample sample_invariant_nu_n(const Grid& grid, const Yosida& yos,
                                            SampleStrategy strategy,
                                            SeedStream& rng,
                                            long max_attempts = 10'000'000) {
  auto energy = [&](const PathState& u) {
    return potential_energy_yosida(grid, u, yos);
  };
  // the penalized potential inherits the lower bound of the hard one
  return detail::sample_invariant_impl(grid, energy,
                                       yos.potential().lower_bound(), strategy,
                                       rng, max_attempts);
}

// squared H^{-1} norm of an interior field: sum_k k^{-2} |<e_k, f>_grid|^2
inline double hminus1_norm_sq(const Grid& grid, const SineBasis& basis,
                              const PathState& f) {
  Mat c = basis.to_coefficients(f);
  double s = 0.0;
  for (int k = 1; k <= grid.m; ++k)
    s += c.row(k - 1).squaredNorm() / (static_cast<double>(k) * k);
  return s;
}

inline double hminus1_norm_sq(const Grid& grid, const PathState& f) {
  SineBasis basis(grid);
  return hminus1_norm_sq(grid, basis, f);
}

// partial sum sum_{k<=m} k^{-2} of the constant relating the H^{-1} and
// supremum collars
inline double kappa_partial(int m) {
  double s = 0.0;
  for (int k = m; k >= 1; --k) s += 1.0 / (static_cast<double>(k) * k);
  return s;
}

// fractional Sobolev seminorm (plus L^r mass) of the full string on [0,1]:
// trapezoid nodes include the pinned endpoints
inline double sobolev_norm(const Grid& grid, const PathState& u, double eta,
                           double r) {
  if (!(eta > 0.0 && eta < 0.5))
    throw GridError("sobolev_norm: eta must lie in (0, 1/2)");
  if (!(r >= 1.0)) throw GridError("sobolev_norm: r must be at least 1");
  const int n = grid.m + 2;
  const double h = grid.dtheta();
  Mat x(n, grid.dim);
  x.row(0) = grid.a.transpose();
  x.block(1, 0, grid.m, grid.dim) = u;
  x.row(n - 1) = grid.b.transpose();
  Vec w = Vec::Constant(n, h);
  w(0) = 0.5 * h;
  w(n - 1) = 0.5 * h;
  double mass = 0.0;
  for (int i = 0; i < n; ++i) mass += w(i) * std::pow(x.row(i).norm(), r);
  double semi = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const double gap = std::abs(i - j) * h;
      semi += w(i) * w(j) *
              std::pow((x.row(i) - x.row(j)).norm(), r) /
              std::pow(gap, 1.0 + r * eta);
    }
  return std::pow(mass + semi, 1.0 / r);
}

}  // namespace rstring
