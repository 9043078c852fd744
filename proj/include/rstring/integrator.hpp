#pragma once

#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "rstring/grid.hpp"
#include "rstring/pathspace.hpp"
#include "rstring/potential.hpp"
#include "rstring/rng.hpp"
#include "rstring/spectral.hpp"

namespace rstring {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SimConfig {
  double dt = 1e-3;
  long steps = 1000;
  int record_every = 1;
  double n = 1.0;          // penalization stiffness
  double noise_scale = 1.0;  // diagnostic hook; physical runs use 1
  PathState initial;
};

inline void validate_config(const SimConfig& cfg, const Grid& grid) {
  if (!(cfg.dt > 0.0) || !std::isfinite(cfg.dt))
    throw ConfigError("config: dt must be positive and finite");
  if (cfg.steps < 1) throw ConfigError("config: steps must be at least 1");
  if (cfg.record_every < 1) throw ConfigError("config: record_every must be at least 1");
  if (!(cfg.n > 0.0)) throw ConfigError("config: penalization n must be positive");
  if (cfg.dt > 1.0 / (4.0 * cfg.n) * (1.0 + 1e-12))
    throw ConfigError("config: explicit drift needs dt <= 1/(4n)");
  if (!(cfg.noise_scale >= 0.0)) throw ConfigError("config: noise_scale must be nonnegative");
  if (cfg.initial.rows() != grid.m || cfg.initial.cols() != grid.dim)
    throw ConfigError("config: initial state has the wrong shape");
  if (!cfg.initial.allFinite()) throw ConfigError("config: initial state must be finite");
}

// row-wise penalized drift gradient, one Yosida evaluation per node
inline PathState gradient_field(const Grid& grid, const Yosida& yos, const PathState& u) {
  PathState g(grid.m, grid.dim);
  for (int j = 0; j < grid.m; ++j)
    g.row(j) = yos.gradient(u.row(j).transpose()).transpose();
  return g;
}

struct Trajectory {
  Grid grid;
  double dt = 0.0;
  int record_every = 1;
  double n = 0.0;
  std::vector<double> times;
  std::vector<PathState> states;
  // cumulative time integral of (1/2) grad Phi_n, same drift evaluations as
  // the stepper; row j is the accumulated outward pull at node j
  std::vector<PathState> penalty;
  // cumulative grid pairings <probe, dW> for each requested probe
  std::vector<std::vector<double>> probe_noise;
};

// One step of the penalized string: the deviation from the pinned line is
// dressed with the explicit drift and the noise increment, then propagated by
// the exact heat semigroup over dt. The heat factor of mode k is
// exp(-lambda_k dt / 2), so every step contracts deviations at least by the
// first-mode factor, and the monotone drift (for dt <= 1/(4n)) never expands
// the gap between two solutions driven by the same noise.
class Stepper {
 public:
  Stepper(const Grid& grid, const Potential& pot, const SimConfig& cfg)
      : grid_(grid), yos_(pot, cfg.n), prop_(grid, cfg.dt), line_(grid.line()),
        dt_(cfg.dt) {}

  const Yosida& yosida() const { return yos_; }
  const HeatPropagator& propagator() const { return prop_; }

  // advances u in place; returns the drift accumulator increment (dt/2) g(u)
  PathState advance(PathState& u, const PathState& noise) const {
    PathState g = gradient_field(grid_, yos_, u);
    PathState pull = (0.5 * dt_) * g;
    u = line_ + prop_.apply(u - line_ - pull + noise);
    return pull;
  }

 private:
  const Grid& grid_;
  Yosida yos_;
  HeatPropagator prop_;
  PathState line_;
  double dt_;
};

inline Trajectory run(const Grid& grid, const Potential& pot, const SimConfig& cfg,
                      SeedStream& rng,
                      const std::vector<PathState>* noise_probes = nullptr) {
  validate_config(cfg, grid);
  Stepper stepper(grid, pot, cfg);

  const std::size_t n_probes = noise_probes ? noise_probes->size() : 0;
  Trajectory traj{grid, cfg.dt, cfg.record_every, cfg.n, {}, {}, {}, {}};
  traj.probe_noise.resize(n_probes);

  PathState u = cfg.initial;
  PathState pen_cum = PathState::Zero(grid.m, grid.dim);
  std::vector<double> probe_cum(n_probes, 0.0);

  auto record = [&](double t) {
    traj.times.push_back(t);
    traj.states.push_back(u);
    traj.penalty.push_back(pen_cum);
    for (std::size_t p = 0; p < n_probes; ++p) traj.probe_noise[p].push_back(probe_cum[p]);
  };
  record(0.0);

  for (long k = 0; k < cfg.steps; ++k) {
    PathState noise = noise_field(grid, cfg.dt, rng);
    if (cfg.noise_scale != 1.0) noise *= cfg.noise_scale;
    for (std::size_t p = 0; p < n_probes; ++p)
      probe_cum[p] += ip_interior(grid, (*noise_probes)[p], noise);
    pen_cum += stepper.advance(u, noise);
    if ((k + 1) % cfg.record_every == 0) record((k + 1) * cfg.dt);
  }
  return traj;
}

struct CoupledRun {
  Trajectory first;
  Trajectory second;
  std::vector<double> distances;  // L2 gap at each recorded time
};

// two solutions driven by the identical noise stream; enforces the coupling
// contraction gap(t_{k+1}) <= exp(-lambda_1 dt / 2) gap(t_k) at every step
inline CoupledRun run_coupled(const Grid& grid, const Potential& pot,
                              const SimConfig& cfg, const PathState& initial2,
                              SeedStream& rng) {
  validate_config(cfg, grid);
  if (initial2.rows() != grid.m || initial2.cols() != grid.dim)
    throw ConfigError("run_coupled: second initial state has the wrong shape");
  if (!initial2.allFinite())
    throw ConfigError("run_coupled: second initial state must be finite");

  Stepper stepper(grid, pot, cfg);
  const double step_factor = std::exp(-0.5 * dirichlet_eigenvalue(grid, 1) * cfg.dt);

  CoupledRun out{Trajectory{grid, cfg.dt, cfg.record_every, cfg.n, {}, {}, {}, {}},
                 Trajectory{grid, cfg.dt, cfg.record_every, cfg.n, {}, {}, {}, {}},
                 {}};
  PathState u1 = cfg.initial;
  PathState u2 = initial2;
  PathState pen1 = PathState::Zero(grid.m, grid.dim);
  PathState pen2 = PathState::Zero(grid.m, grid.dim);

  auto record = [&](double t) {
    out.first.times.push_back(t);
    out.first.states.push_back(u1);
    out.first.penalty.push_back(pen1);
    out.second.times.push_back(t);
    out.second.states.push_back(u2);
    out.second.penalty.push_back(pen2);
    out.distances.push_back(l2_distance(grid, u1, u2));
  };
  record(0.0);

  double gap = l2_distance(grid, u1, u2);
  for (long k = 0; k < cfg.steps; ++k) {
    PathState noise = noise_field(grid, cfg.dt, rng);
    if (cfg.noise_scale != 1.0) noise *= cfg.noise_scale;
    pen1 += stepper.advance(u1, noise);
    pen2 += stepper.advance(u2, noise);
    const double next_gap = l2_distance(grid, u1, u2);
    // the two updates round independently, so even a fully contracted gap
    // carries an absolute noise floor; give the ratio test that much slack
    const double slack = 16.0 * grid.m * std::numeric_limits<double>::epsilon() *
                         (1.0 + l2_norm(grid, u1) + l2_norm(grid, u2));
    if (next_gap > step_factor * gap * (1.0 + 1e-8) + slack)
      throw SolverError("run_coupled: contraction tripwire violated");
    gap = next_gap;
    if ((k + 1) % cfg.record_every == 0) record((k + 1) * cfg.dt);
  }
  return out;
}

struct ReflectionEstimate {
  double eps = 0.0;
  double duration = 0.0;
  double total_mass = 0.0;  // theta-integrated magnitude of all penalty increments
  double leakage = 0.0;     // fraction of mass generated deeper than eps inside
  Vec density;              // per-node collar mass per unit time per unit theta
  Mat direction;            // unit direction of the net inward push per node
};

// collar width heuristic: three stationary single-node standard deviations of
// the pinned string, shrunk by the mesh factor M^{-1/2}
inline double default_collar_eps(const Grid& grid) {
  return 3.0 * 0.5 / std::sqrt(static_cast<double>(grid.m));
}

inline ReflectionEstimate reflection_estimate(const Trajectory& traj, const Domain& dom,
                                              double eps = -1.0) {
  const Grid& grid = traj.grid;
  if (eps <= 0.0) eps = default_collar_eps(grid);
  ReflectionEstimate est;
  est.eps = eps;
  est.density = Vec::Zero(grid.m);
  est.direction = Mat::Zero(grid.m, grid.dim);
  if (traj.states.size() < 2) return est;
  est.duration = traj.times.back() - traj.times.front();

  Mat net_pull = Mat::Zero(grid.m, grid.dim);
  const double h = grid.dtheta();
  for (std::size_t i = 1; i < traj.states.size(); ++i) {
    const PathState incr = traj.penalty[i] - traj.penalty[i - 1];
    // the increment was generated along [t_{i-1}, t_i]; attribute it to the
    // state at the start of the interval
    const PathState& at = traj.states[i - 1];
    for (int j = 0; j < grid.m; ++j) {
      const double mag = incr.row(j).norm();
      if (mag == 0.0) continue;
      est.total_mass += h * mag;
      const Vec x = at.row(j).transpose();
      const double depth = dom.contains(x) ? dom.boundary_distance(x) : 0.0;
      if (depth <= eps) {
        est.density(j) += mag;
        net_pull.row(j) -= incr.row(j);
      } else {
        est.leakage += h * mag;
      }
    }
  }
  if (est.total_mass > 0.0) est.leakage /= est.total_mass;
  // each node carries theta-measure h, so per-node mass h * sum(mag) over a
  // cell of width h gives density sum(mag) / duration
  if (est.duration > 0.0) est.density /= est.duration;
  for (int j = 0; j < grid.m; ++j) {
    const double norm = net_pull.row(j).norm();
    if (norm > 0.0) est.direction.row(j) = net_pull.row(j) / norm;
  }
  return est;
}

}  // namespace rstring
