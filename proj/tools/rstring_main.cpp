#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rstring/config.hpp"
#include "rstring/io.hpp"
#include "rstring/verify.hpp"

namespace {

using namespace rstring;

std::string output_path(const RunConfig& cfg, const std::string& suffix) {
  std::filesystem::create_directories(cfg.output.directory);
  return (std::filesystem::path(cfg.output.directory) / (cfg.output.prefix + suffix))
      .string();
}

int cmd_simulate(const std::string& config_path) {
  RunConfig cfg = load_run_config(config_path);
  SeedStream init_rng(cfg.master_seed, 0, "simulate-init");
  SeedStream noise_rng(cfg.master_seed, 0, "simulate-noise");
  SimConfig sim = cfg.sim;
  sim.initial = cfg.make_initial(init_rng);
  Trajectory traj = run(cfg.grid, cfg.potential, sim, noise_rng);

  TrajectoryFileData data{std::move(traj), cfg.master_seed, cfg.domain.describe(),
                          cfg.potential.describe()};
  const std::string path = output_path(cfg, ".traj");
  write_trajectory(data, path);
  std::cerr << "wrote " << path << " (" << data.trajectory.states.size() << " records, m="
            << cfg.grid.m << ", d=" << cfg.grid.dim << ")\n";
  return 0;
}

int cmd_sample(const std::string& config_path, long count, const std::string& strategy,
               bool hard) {
  RunConfig cfg = load_run_config(config_path);
  const SampleStrategy strat =
      strategy == "importance" ? SampleStrategy::Importance : SampleStrategy::Rejection;
  SeedStream rng(cfg.master_seed, 0, hard ? "sample-hard" : "sample-penalized");

  std::vector<WeightedSample> draws;
  draws.reserve(count);
  Yosida yos(cfg.potential, cfg.sim.n);
  for (long i = 0; i < count; ++i) {
    draws.push_back(hard ? sample_invariant_nu(cfg.grid, cfg.potential, strat, rng)
                         : sample_invariant_nu_n(cfg.grid, yos, strat, rng));
  }

  const std::string path = output_path(cfg, "_samples.csv");
  std::ofstream os(path);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  export_samples_csv(cfg.grid, draws, os);
  std::cerr << "wrote " << path << " (" << draws.size() << " samples from "
            << (hard ? "nu" : "nu_n") << ")\n";
  return 0;
}

VerificationReport run_named_test(const std::string& name, const RunConfig& cfg) {
  const Grid& grid = cfg.grid;
  const VerifyOptions& v = cfg.verify;

  if (name == "yosida")
    return verify_yosida(cfg.potential, cfg.domain, v.n_list, 1000, cfg.master_seed);

  if (name == "ibp")
    return verify_ibp(grid, cfg.domain, cfg.potential, cfg.sim.n,
                      default_ibp_suite(grid), v.ibp_samples, v.ess_floor,
                      cfg.master_seed);

  if (name == "contraction")
    return verify_contraction(grid, cfg.potential, cfg.sim, v.replicas, cfg.master_seed);

  if (name == "invariance")
    return verify_invariance(grid, cfg.domain, cfg.potential, cfg.sim.n, v.t_relax,
                             v.replicas, cfg.sim.dt, cfg.master_seed);

  if (name == "stability")
    return verify_stability(grid, cfg.domain, cfg.potential, v.n_list, 20000,
                            std::min(v.replicas, 40), 0.2, cfg.master_seed);

  if (name == "contact-uniqueness" || name == "holder") {
    // stationary trajectories: each replica starts from a fresh invariant draw
    std::vector<Trajectory> trajs;
    Yosida yos(cfg.potential, cfg.sim.n);
    for (int r = 0; r < 8; ++r) {
      SeedStream draw_rng(cfg.master_seed, r, "stationary-draw");
      SeedStream noise_rng(cfg.master_seed, r, "stationary-noise");
      SimConfig sim = cfg.sim;
      sim.initial =
          sample_invariant_nu_n(grid, yos, SampleStrategy::Rejection, draw_rng).path;
      trajs.push_back(run(grid, cfg.potential, sim, noise_rng));
    }
    if (name == "contact-uniqueness")
      return verify_contact_uniqueness(trajs, cfg.domain,
                                       {4.0 * v.eps0, 2.0 * v.eps0, v.eps0}, -1, 0.2,
                                       200, 0.05);
    // geometric lags between the resolution floor and the diffusive window
    const double rec_dt = cfg.sim.dt * cfg.sim.record_every;
    const double t_total = cfg.sim.dt * static_cast<double>(cfg.sim.steps);
    const double burn = 0.25 * t_total;
    const double tau_lo = std::max(rec_dt, 10.0 * cfg.sim.dt);
    const double window = 0.4 / dirichlet_eigenvalue(grid, 1);
    double tau_hi = std::max(std::min(window, 0.25 * (t_total - burn)), 4.0 * tau_lo);
    tau_hi = std::min(tau_hi, 0.45 * (t_total - burn));
    if (tau_hi <= tau_lo) tau_hi = 4.0 * tau_lo;
    std::vector<double> lags;
    for (int i = 0; i < 6; ++i)
      lags.push_back(tau_lo * std::pow(tau_hi / tau_lo, i / 5.0));
    return verify_holder(trajs, lags, burn);
  }

  if (name == "strong-feller") {
    SineBasis basis(grid);
    CylinderFunctional phi{{mode_probe(grid, basis, 1)}, tanh_of(var(0))};
    const PathState x = grid.line();
    const PathState y = x + 0.2 * mode_probe(grid, basis, 1);
    return verify_strong_feller(grid, cfg.potential, cfg.sim.n, phi, 1.0, x, y, 0.25,
                                cfg.sim.dt, v.replicas, cfg.master_seed);
  }

  throw ConfigError("verify: unknown test '" + name +
                    "' (expected yosida, ibp, contraction, invariance, stability, "
                    "contact-uniqueness, holder or strong-feller)");
}

int cmd_verify(const std::string& config_path, std::vector<std::string> tests) {
  RunConfig cfg = load_run_config(config_path);
  if (tests.empty()) tests = cfg.verify.tests;
  if (tests.empty())
    tests = {"yosida",    "ibp",       "contraction", "invariance",
             "stability", "contact-uniqueness", "holder"};

  nlohmann::json reports = nlohmann::json::array();
  bool all_pass = true;
  for (const std::string& name : tests) {
    const VerificationReport r = run_named_test(name, cfg);
    std::cerr << report_summary(r) << "\n";
    reports.push_back(nlohmann::json::parse(report_json(r)));
    all_pass = all_pass && r.passed();
  }

  const std::string path = output_path(cfg, "_verify.json");
  std::ofstream os(path);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  os << reports.dump(2) << "\n";
  std::cerr << "wrote " << path << " (" << reports.size() << " reports)\n";
  return all_pass ? 0 : 1;
}

int cmd_contact_stats(const std::string& config_path, const std::string& traj_path,
                      double eps, int gap_nodes) {
  RunConfig cfg = load_run_config(config_path);
  const TrajectoryFileData data = read_trajectory(traj_path);
  if (eps <= 0.0) eps = cfg.verify.eps0;
  const auto records = contact_set(data.trajectory, cfg.domain, eps, gap_nodes);

  const std::string path = output_path(cfg, "_contacts.csv");
  std::ofstream os(path);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  export_contacts_csv(records, data.trajectory.grid, os);
  std::cerr << "wrote " << path << " (" << records.size() << " contact slices of "
            << data.trajectory.states.size() << " records at eps=" << eps << ")\n";
  return 0;
}

int cmd_export(const std::string& traj_path, std::string out_path) {
  const TrajectoryFileData data = read_trajectory(traj_path);
  if (out_path.empty())
    out_path = std::filesystem::path(traj_path).replace_extension(".csv").string();
  std::ofstream os(out_path);
  if (!os) throw IoError("cannot open '" + out_path + "' for writing");
  export_frames_csv(data.trajectory, os);
  std::cerr << "wrote " << out_path << " (" << data.trajectory.states.size()
            << " frames)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"simulation and verification laboratory for penalized reflected strings"};
  app.require_subcommand(1);

  std::string config_path, traj_path, out_csv, strategy = "rejection";
  std::vector<std::string> tests;
  long sample_count = 100;
  bool hard = false;
  double eps = 0.0;
  int gap_nodes = -1;

  auto* sim = app.add_subcommand("simulate", "run the integrator and write a trajectory");
  sim->add_option("--config", config_path, "run configuration file")->required();

  auto* smp = app.add_subcommand("sample", "draw invariant-measure samples to CSV");
  smp->add_option("--config", config_path, "run configuration file")->required();
  smp->add_option("--count", sample_count, "number of draws");
  smp->add_option("--strategy", strategy, "rejection or importance")
      ->check(CLI::IsMember({"rejection", "importance"}));
  smp->add_flag("--hard", hard, "target the hard-constraint measure instead of nu_n");

  auto* ver = app.add_subcommand("verify", "run statistical certificates");
  ver->add_option("--config", config_path, "run configuration file")->required();
  ver->add_option("--tests", tests, "test names (default: config list or all)")
      ->delimiter(',');

  auto* cst = app.add_subcommand("contact-stats", "contact clusters of a trajectory");
  cst->add_option("--config", config_path, "run configuration file")->required();
  cst->add_option("--traj", traj_path, "trajectory file")->required();
  cst->add_option("--eps", eps, "contact collar width (default: verify.eps0)");
  cst->add_option("--gap-nodes", gap_nodes, "cluster separation in nodes");

  auto* exp = app.add_subcommand("export", "convert a trajectory file to CSV");
  exp->add_option("--traj", traj_path, "trajectory file")->required();
  exp->add_option("--out", out_csv, "destination CSV (default: alongside input)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cerr << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    std::cerr << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (sim->parsed()) return cmd_simulate(config_path);
    if (smp->parsed()) return cmd_sample(config_path, sample_count, strategy, hard);
    if (ver->parsed()) return cmd_verify(config_path, tests);
    if (cst->parsed()) return cmd_contact_stats(config_path, traj_path, eps, gap_nodes);
    if (exp->parsed()) return cmd_export(traj_path, out_csv);
    std::cerr << "error: no subcommand\n" << app.help();
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const GridError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const GeometryError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const PotentialError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return 3;
  }
}
