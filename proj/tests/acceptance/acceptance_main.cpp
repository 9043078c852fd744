// Acceptance gate: eight end-to-end criteria, one verdict line each on
// stdout, sub-report details on stderr. Exits nonzero if any criterion
// fails or overruns its wall-clock cap.

#include <sys/wait.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "rstring/config.hpp"
#include "rstring/io.hpp"
#include "rstring/verify.hpp"

using namespace rstring;

namespace {

struct Outcome {
  bool pass = true;
  std::vector<std::string> detail;

  void note(const std::string& line) { detail.push_back(line); }

  void check(bool ok, const std::string& what) {
    pass = pass && ok;
    detail.push_back(std::string(ok ? "ok: " : "FAILED: ") + what);
  }

  void absorb(const VerificationReport& r) {
    pass = pass && r.passed();
    detail.push_back(report_summary(r));
    if (!r.passed())
      for (const auto& it : r.items)
        if (!it.ok) {
          std::ostringstream ss;
          ss << "    failing item: " << it.name << " = " << it.estimate
             << " (threshold " << it.threshold << ")";
          detail.push_back(ss.str());
        }
  }
};

Vec v1(double x) {
  Vec v(1);
  v << x;
  return v;
}

Vec v2(double x, double y) {
  Vec v(2);
  v << x, y;
  return v;
}

// ---------------------------------------------------------------------------
// 1. penalty envelope properties on the pinned potential/domain matrix

Outcome criterion_yosida() {
  Outcome out;
  const std::vector<double> n_list{10.0, 100.0, 1000.0, 10000.0};
  const Domain interval = Domain::interval(-1.0, 1.0);
  const Domain ball = Domain::ball(v2(0.0, 0.0), 1.0);

  out.absorb(verify_yosida(Potential::zero(interval), interval, n_list, 10000, 9101));
  out.absorb(verify_yosida(Potential::zero(ball), ball, n_list, 10000, 9102));
  out.absorb(verify_yosida(Potential::quadratic(interval, v1(0.2), 3.0), interval,
                           n_list, 10000, 9103));
  out.absorb(verify_yosida(Potential::quadratic(ball, v2(0.1, -0.2), 2.0), ball,
                           n_list, 10000, 9104));
  out.absorb(verify_yosida(Potential::log_barrier(interval), interval, n_list, 10000,
                           9105));
  out.absorb(verify_yosida(Potential::log_barrier(ball), ball, n_list, 10000, 9106));
  return out;
}

// ---------------------------------------------------------------------------
// 2. coupled contraction at the heat rate

Outcome criterion_contraction() {
  Outcome out;
  Grid grid(63, v1(0.3), v1(0.6));
  Domain dom = Domain::interval(0.0, 1.0);
  Potential pot = Potential::quadratic(dom, v1(0.5), 4.0);
  SimConfig base;
  base.dt = 5e-4;
  base.steps = 4000;
  base.record_every = 10;
  base.n = 100.0;
  out.absorb(verify_contraction(grid, pot, base, 100, 9201));
  return out;
}

// ---------------------------------------------------------------------------
// 3. integration by parts under the penalized bridge measure

Outcome criterion_ibp() {
  Outcome out;
  Grid grid(31, v1(0.0), v1(0.0));
  Domain dom = Domain::interval(-1.0, 1.0);
  Potential pot = Potential::quadratic(dom, v1(0.0), 2.0);
  const auto suite = default_ibp_suite(grid);
  out.check(suite.size() >= 6, "suite carries at least six functional/direction pairs");
  out.absorb(verify_ibp(grid, dom, pot, 10.0, suite, 100000, 500.0, 9301));
  out.absorb(verify_ibp(grid, dom, pot, 100.0, suite, 100000, 500.0, 9302));
  // unpenalized centered bridge: the closed-form oracle case
  out.absorb(verify_ibp(grid, dom, Potential::zero(dom), 0.0, suite, 100000, 500.0,
                        9303));
  return out;
}

// ---------------------------------------------------------------------------
// 4. invariance of the penalized measure, 1-d and 2-d

Outcome criterion_invariance() {
  Outcome out;
  {
    Grid grid(31, v1(0.0), v1(0.0));
    Domain dom = Domain::interval(-1.0, 1.0);
    Potential pot = Potential::zero(dom);
    out.absorb(verify_invariance(grid, dom, pot, 100.0, 2.0, 150, 1e-4, 9401));
  }
  {
    Grid grid(31, v2(0.0, 0.0), v2(0.0, 0.0));
    Domain dom = Domain::ball(v2(0.0, 0.0), 1.0);
    Potential pot = Potential::zero(dom);
    out.absorb(verify_invariance(grid, dom, pot, 100.0, 2.0, 150, 1e-4, 9402));
  }
  return out;
}

// ---------------------------------------------------------------------------
// 5. stability of laws along the stiffness schedule

Outcome criterion_stability() {
  Outcome out;
  Grid grid(15, v1(0.0), v1(0.0));
  Domain dom = Domain::interval(-0.5, 0.5);
  Potential pot = Potential::zero(dom);
  out.absorb(verify_stability(grid, dom, pot, {5.0, 20.0, 80.0, 320.0, 1280.0}, 20000,
                              64, 0.3, 9501));
  return out;
}

// ---------------------------------------------------------------------------
// 6. stationary increment scaling in the dual norm

Outcome criterion_holder() {
  Outcome out;
  Grid grid(63, v1(0.5), v1(0.5));
  Domain dom = Domain::interval(0.0, 1.0);
  Potential pot = Potential::zero(dom);
  Yosida yos(pot, 1000.0);

  std::vector<Trajectory> trajs;
  for (int r = 0; r < 8; ++r) {
    SeedStream draw_rng(9601, r, "holder-draw");
    SeedStream noise_rng(9601, r, "holder-noise");
    SimConfig sim;
    sim.dt = 2.5e-5;
    sim.steps = 40000;
    sim.record_every = 16;
    sim.n = 1000.0;
    sim.initial = sample_invariant_nu_n(grid, yos, SampleStrategy::Rejection, draw_rng).path;
    trajs.push_back(run(grid, pot, sim, noise_rng));
  }
  const double rec_dt = 2.5e-5 * 16;
  const std::vector<double> lags = {rec_dt,        3.0 * rec_dt,  8.0 * rec_dt,
                                    20.0 * rec_dt, 50.0 * rec_dt, 100.0 * rec_dt};
  out.absorb(verify_holder(trajs, lags, 0.05));
  return out;
}

// ---------------------------------------------------------------------------
// 7. single-point contact multiplicity trend

Outcome criterion_contact() {
  Outcome out;
  // one active wall: the string is pinned at 0.5 inside (0,2), so contacts
  // happen at the lower boundary only and multiplicity means two separate dips
  Grid grid(63, v1(0.5), v1(0.5));
  Domain dom = Domain::interval(0.0, 2.0);
  Potential pot = Potential::zero(dom);

  // independent draws from the hard invariant law are stationary slices of
  // the reflected string; rejection keeps exactly the paths inside the domain
  std::vector<Trajectory> trajs;
  for (int r = 0; r < 8; ++r) {
    SeedStream draw_rng(9701, r, "contact-draw");
    std::vector<double> times;
    std::vector<PathState> states;
    for (int i = 0; i < 8000; ++i) {
      states.push_back(
          sample_invariant_nu(grid, pot, SampleStrategy::Rejection, draw_rng).path);
      times.push_back(static_cast<double>(i));
    }
    trajs.push_back(Trajectory{grid, 1.0, 1, 0.0, times, states, {}, {}});
  }
  const double eps0 = 0.01;
  out.absorb(verify_contact_uniqueness(trajs, dom, {4.0 * eps0, 2.0 * eps0, eps0}, -1,
                                       0.2, 200, 0.05));
  return out;
}

// ---------------------------------------------------------------------------
// 8. infrastructure: replay, round-trip, config and exit-code contracts

const char* acceptance_config = R"(master_seed = 77
[domain]
kind = "interval"
lo = -1.0
hi = 1.0
[grid]
m = 15
a = [0.0]
b = [0.1]
[potential]
kind = "quadratic"
center = [0.0]
weight = 2.0
[integrator]
dt = 0.001
steps = 120
record_every = 6
n = 50.0
[output]
directory = "outdir"
prefix = "acc"
)";

bool bit_identical(const Trajectory& x, const Trajectory& y) {
  if (x.times != y.times || x.states.size() != y.states.size()) return false;
  for (std::size_t i = 0; i < x.states.size(); ++i) {
    if ((x.states[i] - y.states[i]).cwiseAbs().maxCoeff() != 0.0) return false;
    if ((x.penalty[i] - y.penalty[i]).cwiseAbs().maxCoeff() != 0.0) return false;
  }
  return true;
}

Trajectory run_from_config_text(const std::string& text) {
  RunConfig cfg = load_run_config_text(text);
  SeedStream init_rng(cfg.master_seed, 0, "simulate-init");
  SeedStream noise_rng(cfg.master_seed, 0, "simulate-noise");
  SimConfig sim = cfg.sim;
  sim.initial = cfg.make_initial(init_rng);
  return run(cfg.grid, cfg.potential, sim, noise_rng);
}

int cli(const std::filesystem::path& workdir, const std::string& args) {
  const std::string cmd = "cd '" + workdir.string() + "' && '" + RSTRING_CLI_PATH "' " +
                          args + " >>cli_log.txt 2>&1";
  const int status = std::system(cmd.c_str());
  return (status != -1 && WIFEXITED(status)) ? WEXITSTATUS(status) : -1;
}

Outcome criterion_infrastructure() {
  Outcome out;
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "rstring_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);

  // bit-exact replay from (config, seed)
  const Trajectory t1 = run_from_config_text(acceptance_config);
  const Trajectory t2 = run_from_config_text(acceptance_config);
  out.check(bit_identical(t1, t2), "replay from (config, seed) is bit-exact");

  // trajectory file round trip
  Domain dom = Domain::interval(-1.0, 1.0);
  Potential pot = Potential::quadratic(dom, v1(0.0), 2.0);
  TrajectoryFileData data{t1, 77, dom.describe(), pot.describe()};
  const fs::path traj_path = dir / "roundtrip.traj";
  write_trajectory(data, traj_path.string());
  const TrajectoryFileData back = read_trajectory(traj_path.string());
  out.check(bit_identical(back.trajectory, t1) && back.seed == 77,
            "trajectory file round trip is bit-identical");

  // strict config parsing rejects malformed inputs
  auto expect_reject = [&](const std::string& label, const std::string& text) {
    bool threw = false;
    try {
      load_run_config_text(text);
    } catch (const ConfigError&) {
      threw = true;
    } catch (const GridError&) {
      threw = true;
    } catch (const GeometryError&) {
      threw = true;
    }
    out.check(threw, "config rejected: " + label);
  };
  expect_reject("unknown top-level key", "master_seed = 1\nbogus = 2\n");
  {
    std::string text(acceptance_config);
    text.replace(text.find("master_seed = 77"), 16, "master_seed = -1");
    expect_reject("negative master seed", text);
  }
  {
    std::string text(acceptance_config);
    text.replace(text.find("kind = \"interval\""), 17, "kind = \"dodecahedron\"");
    expect_reject("unknown domain kind", text);
  }
  {
    std::string text(acceptance_config);
    text.replace(text.find("a = [0.0]"), 9, "a = [7.0]");
    expect_reject("endpoint pinned outside the closure", text);
  }
  {
    std::string text(acceptance_config);
    text.replace(text.find("dt = 0.001"), 10, "dt = -0.001");
    expect_reject("nonpositive time step", text);
  }
  expect_reject("missing integrator section", "master_seed = 1\n[domain]\nkind = "
                "\"interval\"\nlo = 0.0\nhi = 1.0\n[grid]\nm = 7\na = [0.5]\nb = "
                "[0.5]\n[potential]\nkind = \"zero\"\n");

  // CLI subcommand and exit-code contract
  {
    std::ofstream cfg_file(dir / "acc.toml");
    cfg_file << acceptance_config;
  }
  out.check(cli(dir, "frobnicate") == 2, "unknown subcommand exits 2");
  out.check(cli(dir, "--help") == 0, "help exits 0");
  out.check(cli(dir, "simulate --config missing.toml") == 2, "missing config exits 2");
  out.check(cli(dir, "export --traj missing.traj") == 3, "missing trajectory exits 3");
  out.check(cli(dir, "simulate --config acc.toml") == 0, "simulate exits 0");
  out.check(cli(dir, "export --traj outdir/acc.traj") == 0, "export exits 0");
  {
    std::ifstream csv(dir / "outdir" / "acc.csv");
    std::string header;
    std::getline(csv, header);
    long rows = 0;
    std::string line;
    while (std::getline(csv, line)) ++rows;
    out.check(header == "time,theta,component,value,penalty",
              "frame CSV header matches the contract");
    out.check(rows == (120 / 6 + 1) * 15, "frame CSV row count = records x nodes");
  }
  out.check(cli(dir, "verify --config acc.toml --tests yosida") == 0,
            "verify with a passing list exits 0");
  return out;
}

struct Criterion {
  std::string label;
  double cap_seconds;
  std::function<Outcome()> fn;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {"penalty envelope on interval and ball (zero, quadratic, barrier)", 60.0,
       criterion_yosida},
      {"coupled contraction at the heat rate", 120.0, criterion_contraction},
      {"integration by parts under the penalized bridge measure", 180.0,
       criterion_ibp},
      {"invariance of the penalized measure, 1-d and 2-d", 300.0,
       criterion_invariance},
      {"stability of laws along the stiffness schedule", 300.0, criterion_stability},
      {"stationary increment scaling in the dual norm", 300.0, criterion_holder},
      {"single-point contact multiplicity trend", 600.0, criterion_contact},
      {"infrastructure: replay, round trip, config and exit codes", 60.0,
       criterion_infrastructure},
  };

  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));
  if (selected.empty())
    for (std::size_t i = 1; i <= criteria.size(); ++i)
      selected.push_back(static_cast<int>(i));

  bool all_pass = true;
  for (int index : selected) {
    if (index < 1 || index > static_cast<int>(criteria.size())) {
      std::cerr << "no criterion " << index << "\n";
      return 2;
    }
    const Criterion& c = criteria[index - 1];
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.fn();
    } catch (const std::exception& e) {
      out.pass = false;
      out.note(std::string("exception: ") + e.what());
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < c.cap_seconds;
    const bool pass = out.pass && in_time;
    all_pass = all_pass && pass;

    std::ostringstream line;
    line << (pass ? "[PASS] " : "[FAIL] ") << index << ". " << c.label << " ("
         << std::fixed << std::setprecision(1) << secs << " s, cap "
         << std::setprecision(0) << c.cap_seconds << " s)";
    std::cout << line.str() << std::endl;
    for (const std::string& d : out.detail) std::cerr << "    " << d << "\n";
    if (!in_time) std::cerr << "    FAILED: exceeded wall-clock cap\n";
  }
  return all_pass ? 0 : 1;
}
