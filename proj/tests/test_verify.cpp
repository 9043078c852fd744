#include <catch2/catch_amalgamated.hpp>

#include <json.hpp>

#include "rstring/verify.hpp"

using namespace rstring;

namespace {

const VerificationReport::Item& find_item(const VerificationReport& r,
                                          const std::string& needle) {
  for (const auto& it : r.items)
    if (it.name.find(needle) != std::string::npos) return it;
  FAIL("no report item matching '" << needle << "' in " << r.test_name);
  throw std::logic_error("unreachable");
}

}  // namespace

TEST_CASE("verification reports serialize and summarize") {
  VerificationReport r;
  r.test_name = "demo";
  r.config_summary = "m=31";
  r.items.push_back({"alpha", 1.5, 0.2, 3.0, true});
  r.items.push_back({"beta", 9.0, std::numeric_limits<double>::quiet_NaN(), 3.0, false});
  r.verdict = "fail";
  r.seed_labels = {"7:0:demo"};
  r.wall_seconds = 0.25;

  const auto j = nlohmann::json::parse(report_json(r));
  CHECK(j["test_name"] == "demo");
  CHECK(j["verdict"] == "fail");
  CHECK(j["criteria"].size() == 2);
  CHECK(j["criteria"][0]["name"] == "alpha");
  CHECK(j["criteria"][0]["stderr"] == Catch::Approx(0.2));
  CHECK(!j["criteria"][1].contains("stderr"));
  CHECK(j["seeds"][0] == "7:0:demo");

  const std::string line = report_summary(r);
  CHECK(line.find("[FAIL]") == 0);
  CHECK(line.find("demo") != std::string::npos);
  CHECK(line.find("1/2") != std::string::npos);

  SECTION("builder derives the verdict from its items") {
    detail::ReportBuilder ok("t", "c");
    ok.item("fine", 0.0, 1.0, true);
    CHECK(ok.finish().verdict == "pass");

    detail::ReportBuilder bad("t", "c");
    bad.item("fine", 0.0, 1.0, true);
    bad.item("broken", 2.0, 1.0, false);
    CHECK(bad.finish().verdict == "fail");

    detail::ReportBuilder maybe("t", "c");
    maybe.item("fine", 0.0, 1.0, true);
    maybe.mark_inconclusive("sampler starved");
    CHECK(maybe.finish().verdict == "inconclusive");
  }

  SECTION("stream disjointness guard") {
    SeedStream a(3, 1, "x");
    SeedStream b(3, 1, "x");
    SeedStream c(3, 1, "y");
    CHECK_THROWS_AS(detail::require_disjoint_streams(a, b), std::logic_error);
    CHECK_NOTHROW(detail::require_disjoint_streams(a, c));
  }
}

TEST_CASE("penalization suite certifies the reference potentials") {
  SECTION("quadratic potential on an interval") {
    Domain dom = Domain::interval(-1.0, 1.0);
    Potential pot = Potential::quadratic(dom, Vec::Zero(1), 2.0);
    const auto r = verify_yosida(pot, dom, {10.0, 100.0, 1000.0}, 150, 11);
    INFO(report_json(r));
    CHECK(r.passed());
    CHECK(r.wall_seconds > 0.0);
    CHECK(find_item(r, "finite-difference").ok);
  }

  SECTION("bare constraint on a ball keeps the exterior identity") {
    Domain dom = Domain::ball(Vec::Zero(2), 1.0);
    Potential pot = Potential::zero(dom);
    const auto r = verify_yosida(pot, dom, {10.0, 100.0, 1000.0}, 120, 12);
    INFO(report_json(r));
    CHECK(r.passed());
    CHECK(find_item(r, "exterior identity").estimate <= 1e-9);
  }

  SECTION("logarithmic barrier keeps an integrable drift") {
    Domain dom = Domain::interval(0.0, 1.0);
    Potential pot = Potential::log_barrier(dom);
    const auto r = verify_yosida(pot, dom, {10.0, 100.0, 1000.0}, 120, 13);
    INFO(report_json(r));
    CHECK(r.passed());
    CHECK(find_item(r, "square-integral").ok);
  }

  SECTION("a decreasing stiffness schedule is rejected") {
    Domain dom = Domain::interval(-1.0, 1.0);
    Potential pot = Potential::quadratic(dom, Vec::Zero(1), 2.0);
    const auto r = verify_yosida(pot, dom, {100.0, 10.0}, 60, 14);
    CHECK_FALSE(r.passed());
    CHECK(r.verdict == "fail");
  }
}

TEST_CASE("integration by parts balances on the bridge and its tilts") {
  Grid grid(31, Vec::Zero(1), Vec::Zero(1));
  Domain dom = Domain::interval(-2.0, 2.0);
  Potential pot = Potential::zero(dom);
  SineBasis basis(grid);

  std::vector<IbpPair> suite;
  suite.push_back({"linear mode-1", {{mode_probe(grid, basis, 1)}, var(0)},
                   bump_function(grid)});
  suite.push_back({"tanh mode-1", {{mode_probe(grid, basis, 1)}, tanh_of(var(0))},
                   mode_probe(grid, basis, 2)});
  suite.push_back({"constant", {{}, constant(1.0)}, bump_function(grid, 0.35, 0.25)});

  SECTION("pure bridge, no tilt") {
    const auto r = verify_ibp(grid, dom, pot, 0.0, suite, 20000, 500.0, 21);
    INFO(report_json(r));
    CHECK(r.passed());
    CHECK(find_item(r, "effective sample size").estimate == Catch::Approx(20000.0));
    CHECK(find_item(r, "closed-form balance").estimate < 1e-9);
  }

  SECTION("penalized tilt") {
    Domain narrow = Domain::interval(-1.0, 1.0);
    const auto r =
        verify_ibp(grid, narrow, Potential::zero(narrow), 40.0, suite, 20000, 500.0, 22);
    INFO(report_json(r));
    CHECK(r.passed());
  }

  SECTION("degenerate importance weights are flagged, not hidden") {
    Domain tiny = Domain::interval(-0.05, 0.05);
    const auto r =
        verify_ibp(grid, tiny, Potential::zero(tiny), 4000.0, suite, 2000, 500.0, 23);
    CHECK(r.verdict == "inconclusive");
    CHECK_FALSE(r.passed());
  }
}

TEST_CASE("coupled contraction certificate") {
  Grid grid(31, Vec::Constant(1, 0.5), Vec::Constant(1, 0.5));
  Domain dom = Domain::interval(0.0, 1.0);
  Potential pot = Potential::zero(dom);
  SimConfig base;
  base.dt = 1e-3;
  base.steps = 600;
  base.record_every = 10;
  base.n = 50.0;
  base.initial = grid.line();

  const auto r = verify_contraction(grid, pot, base, 20, 31);
  INFO(report_json(r));
  CHECK(r.passed());
  CHECK(find_item(r, "pathwise gap").estimate <= 1.0 + 1e-8);
  CHECK(find_item(r, "equal initials").estimate == 0.0);
  CHECK(find_item(r, "lambda1/2 at M=127").estimate <= 1e-3);
  CHECK(find_item(r, "e1 decay slope").estimate <= 0.05);
}

TEST_CASE("invariance certificate on a relaxed chain") {
  Grid grid(31, Vec::Zero(1), Vec::Zero(1));
  Domain dom = Domain::interval(-1.0, 1.0);
  Potential pot = Potential::zero(dom);

  SECTION("the relaxed chain matches direct draws") {
    const auto r = verify_invariance(grid, dom, pot, 20.0, 0.5, 150, 1e-3, 41);
    INFO(report_json(r));
    CHECK(r.passed());
    CHECK(find_item(r, "symmetry").ok);
  }

  SECTION("an unmixed cold start is caught") {
    const auto r = verify_invariance(grid, dom, pot, 20.0, 0.005, 150, 1e-3, 42);
    INFO(report_json(r));
    CHECK_FALSE(r.passed());
    CHECK(r.verdict == "fail");
    CHECK_FALSE(find_item(r, "KS direct vs cold-start [<u,e1>]").ok);
  }
}

TEST_CASE("stability certificate across stiffness levels") {
  Grid grid(15, Vec::Zero(1), Vec::Zero(1));
  Domain dom = Domain::interval(-0.5, 0.5);
  Potential pot = Potential::zero(dom);

  const auto r = verify_stability(grid, dom, pot, {5.0, 20.0, 80.0, 320.0, 1280.0},
                                  4000, 25, 0.3, 51);
  INFO(report_json(r));
  CHECK(r.passed());
  CHECK(find_item(r, "W1 coarse-vs-fine decrement").estimate >= 3.0);
  CHECK(find_item(r, "dynamic Cauchy").estimate >= 3.0);
  CHECK(find_item(r, "same-n split").ok);
}

TEST_CASE("contact multiplicity trend on crafted slices") {
  const double eps0 = 0.01;
  Grid grid(19, Vec::Constant(1, 0.5), Vec::Constant(1, 0.5));
  Domain dom = Domain::interval(0.0, 1.0);

  auto slice = [&](std::vector<std::pair<double, double>> dips) {
    // dips hold (theta, wall distance); everything else sits mid-domain
    PathState u = PathState::Constant(grid.m, 1, 0.5);
    for (auto [at, dist] : dips) {
      const int j = static_cast<int>(std::lround(at / grid.dtheta())) - 1;
      u(j, 0) = dist;
    }
    return u;
  };

  std::vector<double> times;
  std::vector<PathState> states;
  for (int i = 0; i < 260; ++i) {
    times.push_back(0.1 * times.size());
    states.push_back(slice({{0.25, 0.5 * eps0}}));
  }
  for (int i = 0; i < 60; ++i) {
    times.push_back(0.1 * times.size());
    states.push_back(slice({{0.25, 0.5 * eps0}, {0.7, 3.0 * eps0}}));
  }
  Trajectory traj{grid, 1e-3, 100, 100.0, times, states, {}, {}};

  SECTION("fractions fall as the collar tightens") {
    const auto r = verify_contact_uniqueness({traj}, dom, {4 * eps0, 2 * eps0, eps0}, -1,
                                             0.2, 200, 0.05);
    INFO(report_json(r));
    CHECK(r.passed());
    CHECK(find_item(r, "multiplicity fraction at eps=0.04").estimate ==
          Catch::Approx(60.0 / 320.0));
    CHECK(find_item(r, "multiplicity fraction at eps=0.01").estimate == 0.0);
    CHECK(find_item(r, "coarse vs fine").estimate >= 3.0);
  }

  SECTION("far too few bearing slices yields inconclusive") {
    const auto r = verify_contact_uniqueness({traj}, dom, {4 * eps0, 2 * eps0, eps0}, -1,
                                             0.2, 100000, 0.05);
    CHECK(r.verdict == "inconclusive");
  }
}

TEST_CASE("stationary increment scaling certificate") {
  Grid grid(15, Vec::Zero(1), Vec::Zero(1));
  Domain dom = Domain::interval(-100.0, 100.0);
  Potential pot = Potential::zero(dom);

  SimConfig cfg;
  cfg.dt = 4e-5;
  cfg.steps = 250000;
  cfg.record_every = 10;
  cfg.n = 50.0;

  std::vector<Trajectory> trajs;
  for (int rep = 0; rep < 4; ++rep) {
    SeedStream init(61, rep, "holder-init");
    SeedStream noise(61, rep, "holder-noise");
    cfg.initial = sample_bridge(grid, init);
    trajs.push_back(run(grid, pot, cfg, noise));
  }

  const std::vector<double> lags = {4e-4, 1.2e-3, 3e-3, 8e-3, 1.6e-2, 4e-2};
  const auto r = verify_holder(trajs, lags, 0.5);
  INFO(report_json(r));
  CHECK(r.passed());
  CHECK(find_item(r, "lag span").estimate >= 2.0);
  CHECK(find_item(r, "zero-lag").estimate == 0.0);
  CHECK(find_item(r, "p=2 slope").estimate == Catch::Approx(1.0).margin(0.15));
  CHECK(find_item(r, "p=4 slope").estimate == Catch::Approx(2.0).margin(0.30));
}

TEST_CASE("strong Feller smoothing bound") {
  Grid grid(15, Vec::Zero(1), Vec::Zero(1));
  Domain dom = Domain::interval(-50.0, 50.0);
  Potential pot = Potential::zero(dom);
  SineBasis basis(grid);
  CylinderFunctional phi{{mode_probe(grid, basis, 1)}, tanh_of(var(0))};

  const PathState x = grid.line();
  const PathState y = x + 0.2 * mode_probe(grid, basis, 1);
  const auto r = verify_strong_feller(grid, pot, 20.0, phi, 1.0, x, y, 0.2, 1e-3, 50, 71);
  INFO(report_json(r));
  CHECK(r.passed());

  const auto same = verify_strong_feller(grid, pot, 20.0, phi, 1.0, x, x, 0.2, 1e-3, 20, 72);
  CHECK(same.passed());
  CHECK(find_item(same, "P_t phi").estimate == 0.0);
}
