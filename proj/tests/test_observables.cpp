#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <optional>

#include "rstring/observables.hpp"
#include "rstring/rng.hpp"

using namespace rstring;

namespace {

Vec v1(double x) {
  Vec v(1);
  v << x;
  return v;
}

// trajectory with a single synthetic slice
Trajectory one_slice(const Grid& grid, const PathState& state) {
  Trajectory traj{grid, 1e-3, 1, 10.0, {0.0}, {state}, {PathState::Zero(grid.m, grid.dim)}, {}};
  return traj;
}

// smooth dip of the flat string toward the upper wall around theta0
PathState dipped(const Grid& grid, double base, double theta0, double width,
                 double depth) {
  PathState u = PathState::Constant(grid.m, 1, base);
  for (int j = 0; j < grid.m; ++j) {
    const double t = (grid.theta(j) - theta0) / width;
    u(j, 0) += depth * std::exp(-0.5 * t * t);
  }
  return u;
}

}  // namespace

TEST_CASE("first hit follows the infimum convention") {
  Domain dom = Domain::interval(-1.0, 1.0);
  Grid grid(15, v1(0.0), v1(0.0));

  PathState deep = PathState::Zero(15, 1);
  REQUIRE(!first_hit(deep, dom, 0.01).has_value());

  PathState single = deep;
  single(7, 0) = 0.995;
  REQUIRE(first_hit(single, dom, 0.01).value() == 7);

  PathState pair = deep;
  pair(4, 0) = -0.999;
  pair(9, 0) = 0.999;
  REQUIRE(first_hit(pair, dom, 0.01).value() == 4);

  PathState beyond = deep;
  beyond(3, 0) = 1.2;  // outside the closure still counts as contact
  REQUIRE(first_hit(beyond, dom, 0.01).value() == 3);
}

TEST_CASE("contact records cluster dips and partition their nodes") {
  Domain dom = Domain::interval(-1.0, 1.0);
  Grid grid(63, v1(0.0), v1(0.0));
  const double eps = 0.01;

  SECTION("no contact, no records") {
    auto recs = contact_set(one_slice(grid, PathState::Zero(63, 1)), dom, eps);
    REQUIRE(recs.empty());
  }

  SECTION("one smooth dip gives one cluster") {
    auto recs = contact_set(one_slice(grid, dipped(grid, 0.0, 0.5, 0.05, 0.995)), dom, eps);
    REQUIRE(recs.size() == 1);
    REQUIRE(recs[0].clusters.size() == 1);
    REQUIRE(recs[0].time == 0.0);
    const auto pos = recs[0].cluster_positions(grid);
    REQUIRE(pos[0] == Catch::Approx(0.5).margin(0.02));
  }

  SECTION("two separated dips give two clusters") {
    PathState two = dipped(grid, 0.0, 0.25, 0.03, 0.995);
    PathState second = dipped(grid, 0.0, 0.75, 0.03, 0.995);
    for (int j = 0; j < grid.m; ++j) two(j, 0) = std::max(two(j, 0), second(j, 0));
    auto recs = contact_set(one_slice(grid, two), dom, eps);
    REQUIRE(recs.size() == 1);
    REQUIRE(recs[0].clusters.size() == 2);
    const auto pos = recs[0].cluster_positions(grid);
    REQUIRE(pos[0] == Catch::Approx(0.25).margin(0.02));
    REQUIRE(pos[1] == Catch::Approx(0.75).margin(0.02));
  }

  SECTION("clusters partition the contact nodes and respect the gap") {
    SeedStream rng(701, 0, "contact-partition");
    for (int rep = 0; rep < 50; ++rep) {
      PathState u(grid.m, 1);
      for (int j = 0; j < grid.m; ++j)
        u(j, 0) = 0.99 + 0.02 * rng.next_uniform();  // hovers around the wall
      auto recs = contact_set(one_slice(grid, u), dom, eps, 3);
      for (const auto& rec : recs) {
        std::size_t total = 0;
        int prev_last = -1000;
        for (const auto& cl : rec.clusters) {
          REQUIRE(!cl.empty());
          total += cl.size();
          for (std::size_t k = 1; k < cl.size(); ++k)
            REQUIRE(cl[k] - cl[k - 1] <= 3);
          if (prev_last > -1000) REQUIRE(cl.front() - prev_last > 3);
          prev_last = cl.back();
        }
        REQUIRE(total == rec.contact_nodes.size());
        for (const auto& cn : rec.contact_nodes) REQUIRE(cn.distance <= eps);
      }
    }
  }

  SECTION("first_hit agrees with the first cluster") {
    SeedStream rng(701, 1, "contact-first");
    for (int rep = 0; rep < 50; ++rep) {
      PathState u = dipped(grid, 0.0, 0.2 + 0.6 * rng.next_uniform(), 0.1, 0.9995);
      auto recs = contact_set(one_slice(grid, u), dom, eps);
      auto hit = first_hit(u, dom, eps);
      REQUIRE(recs.size() == 1);
      REQUIRE(hit.has_value());
      REQUIRE(recs[0].clusters.front().front() == hit.value());
    }
  }
}

TEST_CASE("cylinder functionals evaluate with exact gradients") {
  Grid grid(31, v1(0.0), v1(0.0));
  SineBasis basis(grid);

  SECTION("linear probe") {
    CylinderFunctional f{{basis.mode(1)}, var(0)};
    PathState w = 0.3 * basis.mode(1);
    REQUIRE(f.value(grid, w) == Catch::Approx(0.3));
    PathState h = basis.mode(2) + 2.0 * basis.mode(1);
    REQUIRE(f.directional(grid, w, h) == Catch::Approx(2.0));
  }

  SECTION("square of a probe") {
    CylinderFunctional f{{basis.mode(1)}, pow_int(var(0), 2)};
    PathState w = 0.3 * basis.mode(1);
    REQUIRE(f.value(grid, w) == Catch::Approx(0.09));
    PathState h = basis.mode(1);
    REQUIRE(f.directional(grid, w, h) == Catch::Approx(0.6));
  }

  SECTION("finite differences confirm the grammar gradients") {
    CylinderFunctional f{
        {basis.mode(1), basis.mode(2), basis.mode(3)},
        add(tanh_of(add(var(0), scale(0.5, var(1)))),
            mul(pow_int(var(1), 2), exp_of(scale(-1.0, var(2)))))};
    SeedStream rng(702, 0, "cylinder-fd");
    for (int rep = 0; rep < 20; ++rep) {
      PathState w(grid.m, 1), h(grid.m, 1);
      for (int j = 0; j < grid.m; ++j) {
        w(j, 0) = rng.next_gaussian();
        h(j, 0) = rng.next_gaussian();
      }
      const double delta = 1e-6;
      const double fd =
          (f.value(grid, w + delta * h) - f.value(grid, w - delta * h)) / (2.0 * delta);
      const double exact = f.directional(grid, w, h);
      REQUIRE(exact == Catch::Approx(fd).epsilon(1e-5).margin(1e-9));
    }
  }

  SECTION("boundedness spot check") {
    CylinderFunctional mild{{basis.mode(1)}, tanh_of(var(0))};
    CylinderFunctional wild{{basis.mode(1)}, exp_of(scale(10.0, var(0)))};
    std::vector<Vec> args;
    for (double s = -3.0; s <= 3.0; s += 0.5) args.push_back(v1(s));
    REQUIRE(mild.bounded_on(args, 2.0));
    REQUIRE(!wild.bounded_on(args, 100.0));
  }
}
