#include "hjbrom/experiments.hpp"
#include "hjbrom/pipeline.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

using namespace hjbrom;

namespace {

Vector parse_mu(const std::string& text) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    values.push_back(std::stod(item, &used));
    if (used != item.size()) throw InvalidInput("malformed parameter value '" + item + "'");
  }
  require(!values.empty(), "empty parameter list");
  return Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size()));
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path);
  return nlohmann::json::parse(in);
}

std::filesystem::path runs_path(const std::filesystem::path& out) {
  return out.parent_path() / (out.stem().string() + "_runs" + out.extension().string());
}

struct OfflineArgs {
  std::string benchmark;  // empty: from the config, else test1
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  int resolution = 0;
};

int run_offline(const OfflineArgs& a) {
  nlohmann::json file;
  if (!a.config.empty()) file = read_json(a.config);
  std::string id = a.benchmark;
  if (id.empty() && file.contains("benchmark")) id = file.at("benchmark").get<std::string>();
  if (id.empty()) id = "test1";
  OfflineConfig cfg = default_offline_config(id);
  if (!file.is_null()) cfg = offline_config_from_json(file, cfg);
  cfg.benchmark = id;
  if (a.seed) cfg.seed = *a.seed;
  if (a.resolution > 0) cfg.resolution = a.resolution;
  const Benchmark bench = bundle_benchmark(cfg);
  const OfflineBundle bundle = offline_build(bench, cfg);
  save_bundle(bundle, a.out);
  std::cout << "boxes " << bundle.partition.size() << "\n"
            << "basis_seconds " << bundle.timings.basis << "\n"
            << "grid_seconds " << bundle.timings.grids << "\n"
            << "table_seconds " << bundle.timings.tables << "\n"
            << "vi_seconds " << bundle.timings.vi << "\n";
  for (std::size_t i = 0; i < bundle.boxes.size(); ++i) {
    if (!bundle.boxes[i].vi_converged) std::cerr << "warning: VI did not converge in box " << i << "\n";
  }
  return 0;
}

struct OnlineArgs {
  std::string bundle;
  std::string mu;
  int num_ics = 10;
  std::uint64_t seed = 1;
  std::string report;
  bool direct = false;
};

int run_online(const OnlineArgs& a) {
  const OfflineBundle bundle = load_bundle(a.bundle);
  const Benchmark bench = bundle_benchmark(bundle.config);
  const Vector mu = parse_mu(a.mu);
  const auto samples = sample_initial(bench.ensemble, a.num_ics, a.seed);
  OnlineOptions opt;
  opt.use_tables = !a.direct;
  const OnlineResult res = online_query(bundle, bench, mu, samples, opt);
  const AreProblem problem = linearized_family(bench)(mu);
  const Matrix K = lqr_gain(problem, solve_are(problem));
  const TimeStepper stepper(bench.system, mu, bench.stepper);

  CsvTable table;
  table.header = {"sample", "J_uncontrolled", "J_lqr", "J_hjb", "hjb_diverged"};
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const CostRun unc = simulate_cost(stepper, bench.cost, samples[i], zero_policy(bench.system.control_dim()), opt.cost);
    const CostRun lqr = simulate_cost(stepper, bench.cost, samples[i], linear_feedback(K), opt.cost);
    table.add({std::to_string(i), csv_number(unc.cost), csv_number(lqr.cost), csv_number(res.runs[i].cost),
               res.runs[i].diverged ? "1" : "0"});
  }
  if (a.report.empty()) {
    table.write(std::cout);
  } else {
    table.write(std::filesystem::path(a.report));
  }
  std::cerr << "box " << res.box << " pi_iterations " << res.pi_iterations << " converged " << res.pi_converged
            << " pi_seconds " << res.pi_seconds << " full_evaluations " << res.pi_full_evaluations << "\n";
  return res.pi_converged ? 0 : 2;
}

struct EvaluateArgs {
  std::vector<std::string> bundles;
  std::string table;
  std::string out;
  int samples = 0;
  std::uint64_t seed = 1;
  int resolution = 0;
};

int run_evaluate(const EvaluateArgs& a) {
  const std::filesystem::path out(a.out);
  if (a.table == "1") {
    Table1Config cfg = default_table1_config();
    if (a.samples > 0) cfg.samples = a.samples;
    if (a.resolution > 0) cfg.resolution = a.resolution;
    cfg.seed = a.seed;
    const Table1Result res = run_table1(cfg);
    res.summary.write(out);
    res.runs.write(runs_path(out));
    return 0;
  }
  require(!a.bundles.empty(), "--bundle is required for this table");
  std::vector<OfflineBundle> bundles;
  for (const auto& dir : a.bundles) bundles.push_back(load_bundle(dir));
  const Benchmark bench = bundle_benchmark(bundles.front().config);
  for (const auto& b : bundles) {
    require(b.config.benchmark == bench.id && b.config.resolution == bench.resolution,
            "all bundles must belong to the same benchmark");
  }
  if (a.table == "2") {
    BurgersRatioConfig cfg;
    if (a.samples > 0) cfg.samples = a.samples;
    cfg.seed = a.seed;
    const BurgersRatioResult res = run_burgers_ratio(bench, bundles.front(), cfg);
    res.summary.write(out);
    res.runs.write(runs_path(out));
  } else if (a.table == "heat-ratio") {
    HeatRatioConfig cfg;
    if (a.samples > 0) cfg.samples = a.samples;
    cfg.seed = a.seed;
    std::vector<const OfflineBundle*> ptrs;
    for (const auto& b : bundles) ptrs.push_back(&b);
    const HeatRatioResult res = run_heat_ratio(bench, ptrs, cfg);
    res.summary.write(out);
    res.runs.write(runs_path(out));
  } else if (a.table == "speedup") {
    SpeedupConfig cfg;
    if (a.samples > 0) cfg.samples = a.samples;
    cfg.seed = a.seed;
    const SpeedupResult res = run_speedup(bench, bundles.front(), cfg);
    res.summary.write(out);
    std::cout << "median_ratio " << res.median_ratio << "\n"
              << "max_table_evaluations " << res.max_evaluations_tables << "\n";
  } else {
    throw InvalidInput("unknown table '" + a.table + "'");
  }
  return 0;
}

struct SimulateArgs {
  std::string benchmark = "test1";
  std::string controller = "none";
  std::string mu;
  std::string bundle;
  int num_ics = 1;
  std::uint64_t seed = 1;
  int resolution = 0;
  double horizon = 10.0;
  std::string out;
  bool trajectory = false;
};

int run_simulate(const SimulateArgs& a) {
  std::optional<OfflineBundle> bundle;
  if (a.controller == "hjb") {
    require(!a.bundle.empty(), "--bundle is required for the hjb controller");
    bundle = load_bundle(a.bundle);
    require(bundle->config.benchmark == a.benchmark, "bundle belongs to a different benchmark");
  }
  const Benchmark bench =
      bundle ? bundle_benchmark(bundle->config) : make_benchmark(a.benchmark, a.resolution);
  const Vector mu = a.mu.empty() ? bench.domain.center() : parse_mu(a.mu);
  require(bench.domain.contains(mu), "parameter lies outside the benchmark domain");
  const auto samples = sample_initial(bench.ensemble, a.num_ics, a.seed);

  Policy policy = zero_policy(bench.system.control_dim());
  std::optional<OnlineResult> online;
  if (a.controller == "lqr") {
    const AreProblem problem = linearized_family(bench)(mu);
    policy = linear_feedback(lqr_gain(problem, solve_are(problem)));
  } else if (a.controller == "hjb") {
    OnlineOptions opt;
    opt.simulate = false;
    online = online_query(*bundle, bench, mu, {}, opt);
    policy = make_controller(*bundle, bench, online->box, online->field, mu).policy();
  } else if (a.controller != "none") {
    throw InvalidInput("unknown controller '" + a.controller + "'");
  }

  CsvTable table;
  const TimeStepper stepper(bench.system, mu, bench.stepper);
  if (a.trajectory) {
    require(samples.size() == 1, "--trajectory needs --num-ics 1");
    const Trajectory tr = simulate(bench.system, samples.front(), policy, mu, bench.stepper, a.horizon);
    table.header = {"t", "state_norm"};
    for (Index k = 0; k < bench.system.control_dim(); ++k) table.header.push_back("u" + std::to_string(k));
    for (std::size_t k = 0; k + 1 < tr.states.size(); ++k) {
      std::vector<std::string> row{csv_number(tr.times[k]), csv_number(tr.states[k].norm())};
      for (Index j = 0; j < tr.controls[k].size(); ++j) row.push_back(csv_number(tr.controls[k](j)));
      table.add(std::move(row));
    }
  } else {
    table.header = {"sample", "cost", "horizon", "diverged"};
    CostRunOptions opt;
    opt.max_horizon = a.horizon;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const CostRun r = simulate_cost(stepper, bench.cost, samples[i], policy, opt);
      table.add({std::to_string(i), csv_number(r.cost), csv_number(r.horizon), r.diverged ? "1" : "0"});
    }
  }
  if (a.out.empty()) {
    table.write(std::cout);
  } else {
    table.write(std::filesystem::path(a.out));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reduced-order HJB feedback control for parametric PDE benchmarks"};
  app.require_subcommand(1);

  OfflineArgs off;
  auto* offline = app.add_subcommand("offline", "Build and save an offline bundle");
  offline->add_option("--benchmark", off.benchmark)->check(CLI::IsMember({"test1", "test2", "test3"}));
  offline->add_option("--config", off.config, "JSON config file")->check(CLI::ExistingFile);
  offline->add_option("--out", off.out, "Bundle directory")->required();
  offline->add_option("--seed", off.seed);
  offline->add_option("--resolution", off.resolution, "Grid points per axis (0: default)");

  OnlineArgs on;
  auto* online = app.add_subcommand("online", "Refine the value function for one parameter and run feedback");
  online->add_option("--bundle", on.bundle)->required()->check(CLI::ExistingDirectory);
  online->add_option("--mu", on.mu, "Comma-separated parameter values")->required();
  online->add_option("--num-ics", on.num_ics)->check(CLI::PositiveNumber);
  online->add_option("--seed", on.seed);
  online->add_option("--report", on.report, "CSV output path (default stdout)");
  online->add_flag("--direct", on.direct, "Evaluate the full-order model instead of the tables");

  EvaluateArgs ev;
  auto* evaluate = app.add_subcommand("evaluate", "Run an experiment driver and write CSV");
  evaluate->add_option("--bundle", ev.bundles, "Bundle directory (repeat for several depths)");
  evaluate->add_option("--table", ev.table)->required()->check(CLI::IsMember({"1", "2", "speedup", "heat-ratio"}));
  evaluate->add_option("--out", ev.out)->required();
  evaluate->add_option("--samples", ev.samples, "Number of initial states or parameters");
  evaluate->add_option("--seed", ev.seed);
  evaluate->add_option("--resolution", ev.resolution, "Test 1 grid points per axis (table 1 only)");

  SimulateArgs sim;
  auto* simulate_cmd = app.add_subcommand("simulate", "Closed-loop simulation of the full-order model");
  simulate_cmd->add_option("--benchmark", sim.benchmark)->check(CLI::IsMember({"test1", "test2", "test3"}));
  simulate_cmd->add_option("--controller", sim.controller)->check(CLI::IsMember({"none", "lqr", "hjb"}));
  simulate_cmd->add_option("--mu", sim.mu);
  simulate_cmd->add_option("--bundle", sim.bundle);
  simulate_cmd->add_option("--num-ics", sim.num_ics)->check(CLI::PositiveNumber);
  simulate_cmd->add_option("--seed", sim.seed);
  simulate_cmd->add_option("--resolution", sim.resolution);
  simulate_cmd->add_option("--horizon", sim.horizon)->check(CLI::PositiveNumber);
  simulate_cmd->add_option("--out", sim.out);
  simulate_cmd->add_flag("--trajectory", sim.trajectory, "Write the state norm and controls over time");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*offline) return run_offline(off);
    if (*online) return run_online(on);
    if (*evaluate) return run_evaluate(ev);
    if (*simulate_cmd) return run_simulate(sim);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
