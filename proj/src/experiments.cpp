#include "hjbrom/experiments.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <random>

namespace hjbrom {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

constexpr double kInf = std::numeric_limits<double>::infinity();

const char* kind_label(GridKind kind) {
  return kind == GridKind::equal_mass ? "equal_mass" : "equidistant";
}

double run_cost(const CostRun& run) { return run.diverged ? kInf : run.cost; }

double relative_error(const CostRun& run, double reference) {
  if (run.diverged) return kInf;
  return std::abs(run.cost - reference) / std::abs(reference);
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double median(std::vector<double> v) {
  require(!v.empty(), "median of an empty set");
  std::sort(v.begin(), v.end());
  const std::size_t k = v.size() / 2;
  return v.size() % 2 ? v[k] : 0.5 * (v[k - 1] + v[k]);
}

std::vector<double> snapshot_grid(double t_end, int count) {
  std::vector<double> t;
  for (int k = 0; k <= count; ++k) t.push_back(t_end * k / count);
  return t;
}

Matrix full_lqr_gain(const Benchmark& bench, const Vector& mu) {
  const AreProblem problem = linearized_family(bench)(mu);
  return lqr_gain(problem, solve_are(problem));
}

}  // namespace

void CsvTable::add(std::vector<std::string> row) {
  require(row.size() == header.size(), "CSV row width does not match the header");
  rows.push_back(std::move(row));
}

void CsvTable::write(std::ostream& out) const {
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
    out << "\n";
  };
  line(header);
  for (const auto& r : rows) line(r);
}

void CsvTable::write(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw InvalidInput("cannot write " + path.string());
  write(out);
}

std::string csv_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

OfflineConfig default_offline_config(const std::string& id) {
  OfflineConfig c;
  c.benchmark = id;
  c.sl.dt = 1e-2;
  if (id == "test1") {
    c.partition = PartitionConfig{3, 0.9, 1e-4, 5, 3};
    c.snapshot_times = snapshot_grid(0.1, 10);
    c.coarse_points = 7;
    c.fine_points = 11;
  } else if (id == "test2") {
    c.partition = PartitionConfig{3, 1e-6, 1e-4, 3, 1};
    c.snapshot_times = {0.0};
    c.coarse_points = 9;
    c.fine_points = 21;
  } else if (id == "test3") {
    c.partition = PartitionConfig{3, 1e-6, 1e-4, 2, 0};
    c.snapshot_times = {0.0};
    c.coarse_points = 9;
    c.fine_points = 15;
  } else {
    throw InvalidInput("unknown benchmark '" + id + "'");
  }
  return c;
}

Policy linear_feedback(Matrix gain) {
  auto K = std::make_shared<const Matrix>(std::move(gain));
  return [K](double, const Vector& y) -> Vector { return -(*K * y); };
}

Matrix reduced_lqr_gain(const AreProblem& problem, const ReducedBasis& basis) {
  AreSolution lifted;
  lifted.P = projected_are_solution(problem, basis);
  return lqr_gain(problem, lifted);
}

std::vector<Vector> sample_parameters(const ParameterDomain& domain, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Vector> out;
  for (int i = 0; i < count; ++i) {
    Vector mu(domain.dim());
    for (Index k = 0; k < mu.size(); ++k) {
      mu(k) = domain.lower()(k) + unit(rng) * (domain.upper()(k) - domain.lower()(k));
    }
    out.push_back(std::move(mu));
  }
  return out;
}

Table1Config default_table1_config() { return Table1Config{}; }

Table1Result run_table1(const Table1Config& cfg) {
  require(cfg.samples >= 1, "at least one test sample is required");
  const Benchmark bench = build_test1(cfg.resolution);
  Vector mu = cfg.mu;
  if (mu.size() == 0) {
    mu.resize(2);
    mu << 0.08, 3.0;
  }
  require(bench.domain.contains(mu), "parameter lies outside the Test 1 domain");
  const AreProblem problem = linearized_family(bench)(mu);
  const AreSolution are = solve_are(problem);
  const Matrix K = lqr_gain(problem, are);
  const Eigen::JacobiSVD<Matrix> svd(are.P, Eigen::ComputeThinU);

  const TimeStepper stepper(bench.system, mu, bench.stepper);
  const auto samples = sample_initial(bench.ensemble, cfg.samples, cfg.seed);
  std::vector<double> j_lqr, j_unc;
  for (const auto& x : samples) {
    const CostRun r = simulate_cost(stepper, bench.cost, x, linear_feedback(K), cfg.cost);
    if (r.diverged) throw SolverError("full-order LQR run diverged on Test 1");
    j_lqr.push_back(r.cost);
    j_unc.push_back(run_cost(simulate_cost(stepper, bench.cost, x, zero_policy(1), cfg.cost)));
  }

  SnapshotOptions snap;
  snap.times = cfg.snapshot_times;
  snap.count = cfg.snapshot_count;
  snap.seed = cfg.seed + 1;
  snap.stepper = bench.stepper;
  const SnapshotSet snapshots = collect_snapshots(bench.system, bench.ensemble, mu, snap);

  Table1Result result;
  result.full_lqr_mean = mean(j_lqr);
  result.summary.header = {"dim",          "points",       "grid",       "nodes",
                           "lqr_error",    "hjb_error",    "lqr_diverged", "hjb_diverged",
                           "inside",       "pi_iterations", "pi_converged", "solve_seconds"};
  result.runs.header = {"mu_diff", "mu_adv", "dim",   "points",         "grid",
                        "sample",  "J_uncontrolled", "J_lqr", "J_lqr_reduced", "J_hjb"};

  for (int l : cfg.dims) {
    require(l >= 1 && l <= svd.matrixU().cols(), "reduced dimension out of range");
    const ReducedBasis basis(svd.matrixU().leftCols(l));
    const Matrix Kr = reduced_lqr_gain(problem, basis);
    std::vector<CostRun> reduced_runs;
    for (const auto& x : samples) {
      reduced_runs.push_back(simulate_cost(stepper, bench.cost, x, linear_feedback(Kr), cfg.cost));
    }
    const auto fits = fit_reduced(snapshots.states, basis);

    for (int H : cfg.points) {
      for (GridKind kind : cfg.kinds) {
        Table1Row row;
        row.dim = l;
        row.points = H;
        row.kind = kind;
        const TensorGrid grid = make_grid(fits, GridOptions{{H}, cfg.coverage, kind});
        row.nodes = grid.size();
        if (row.nodes > cfg.max_nodes) continue;

        const auto t0 = Clock::now();
        const EvaluationTable table = build_tables(bench.system, bench.cost, basis, grid);
        const TableDynamics dynamics(table, coefficients(bench.system, bench.cost, mu));
        SLConfig sl = cfg.sl;
        sl.discount = bench.cost.discount;
        SolveReport pi = policy_iteration(initial_field(grid, dynamics.evaluate(), bench.controls, sl),
                                          dynamics, bench.controls, sl);
        row.solve_seconds = seconds_since(t0);
        row.pi_iterations = pi.iterations;
        row.pi_converged = pi.converged;
        const HjbController controller(std::move(pi.field), basis, bench.system, bench.cost,
                                       bench.controls, mu, sl);

        std::vector<double> err_lqr, err_hjb;
        for (std::size_t i = 0; i < samples.size(); ++i) {
          const Vector xr = project_state(basis, samples[i]);
          if ((xr.array() >= grid.lower().array()).all() && (xr.array() <= grid.upper().array()).all()) {
            ++row.inside;
          }
          const CostRun hjb = simulate_cost(stepper, bench.cost, samples[i], controller.policy(), cfg.cost);
          err_lqr.push_back(relative_error(reduced_runs[i], j_lqr[i]));
          err_hjb.push_back(relative_error(hjb, j_lqr[i]));
          row.lqr_diverged += reduced_runs[i].diverged;
          row.hjb_diverged += hjb.diverged;
          result.runs.add({csv_number(mu(0)), csv_number(mu(1)), std::to_string(l), std::to_string(H),
                           kind_label(kind), std::to_string(i), csv_number(j_unc[i]),
                           csv_number(j_lqr[i]), csv_number(run_cost(reduced_runs[i])),
                           csv_number(run_cost(hjb))});
        }
        row.lqr_error = mean(err_lqr);
        row.hjb_error = mean(err_hjb);
        result.summary.add({std::to_string(l), std::to_string(H), kind_label(kind),
                            std::to_string(row.nodes), csv_number(row.lqr_error),
                            csv_number(row.hjb_error), std::to_string(row.lqr_diverged),
                            std::to_string(row.hjb_diverged), std::to_string(row.inside),
                            std::to_string(row.pi_iterations), row.pi_converged ? "1" : "0",
                            csv_number(row.solve_seconds)});
        result.rows.push_back(row);
      }
    }
  }
  return result;
}

HeatRatioResult run_heat_ratio(const Benchmark& bench, const std::vector<const OfflineBundle*>& bundles,
                               const HeatRatioConfig& cfg) {
  require(cfg.samples >= 1, "at least one test sample is required");
  const auto samples = sample_initial(bench.ensemble, cfg.samples, cfg.seed);
  HeatRatioResult result;
  result.summary.header = {"depth", "mu", "box", "ratio_barycenter", "ratio_online",
                           "pi_iterations", "pi_converged"};
  result.runs.header = {"depth", "mu", "sample", "J_uncontrolled", "J_lqr", "J_hjb_barycenter", "J_hjb"};

  std::vector<Matrix> gains;
  for (double m : cfg.mus) gains.push_back(full_lqr_gain(bench, Vector::Constant(1, m)));

  for (const OfflineBundle* bundle : bundles) {
    require(bundle != nullptr, "null bundle");
    int depth = 0;
    for (const auto& box : bundle->partition.boxes) depth = std::max(depth, box.level);
    for (std::size_t q = 0; q < cfg.mus.size(); ++q) {
      const Vector mu = Vector::Constant(1, cfg.mus[q]);
      const TimeStepper stepper(bench.system, mu, bench.stepper);
      OnlineOptions opt;
      opt.simulate = true;
      opt.cost = cfg.cost;
      const OnlineResult online = online_query(*bundle, bench, mu, samples, opt);
      const HjbController offline_ctl =
          make_controller(*bundle, bench, online.box, bundle->boxes[online.box].barycenter, mu);

      HeatRatioRow row;
      row.depth = depth;
      row.mu = cfg.mus[q];
      row.box = online.box;
      row.pi_iterations = online.pi_iterations;
      row.pi_converged = online.pi_converged;
      std::vector<double> r_bar, r_on;
      for (std::size_t i = 0; i < samples.size(); ++i) {
        const CostRun lqr = simulate_cost(stepper, bench.cost, samples[i], linear_feedback(gains[q]), cfg.cost);
        const CostRun bar = simulate_cost(stepper, bench.cost, samples[i], offline_ctl.policy(), cfg.cost);
        const CostRun unc = simulate_cost(stepper, bench.cost, samples[i], zero_policy(1), cfg.cost);
        const CostRun& on = online.runs[i];
        r_bar.push_back(run_cost(lqr) / run_cost(bar));
        r_on.push_back(run_cost(lqr) / run_cost(on));
        result.runs.add({std::to_string(depth), csv_number(row.mu), std::to_string(i),
                         csv_number(run_cost(unc)), csv_number(run_cost(lqr)), csv_number(run_cost(bar)),
                         csv_number(run_cost(on))});
      }
      row.ratio_barycenter = mean(r_bar);
      row.ratio_online = mean(r_on);
      result.summary.add({std::to_string(depth), csv_number(row.mu), std::to_string(row.box),
                          csv_number(row.ratio_barycenter), csv_number(row.ratio_online),
                          std::to_string(row.pi_iterations), row.pi_converged ? "1" : "0"});
      result.rows.push_back(row);
    }
  }
  return result;
}

BurgersRatioResult run_burgers_ratio(const Benchmark& bench, const OfflineBundle& bundle,
                                     const BurgersRatioConfig& cfg) {
  require(cfg.samples >= 1, "at least one test sample is required");
  require(bench.domain.dim() == 2, "Burgers ratio expects a two-parameter benchmark");
  const auto samples = sample_initial(bench.ensemble, cfg.samples, cfg.seed);
  BurgersRatioResult result;
  result.summary.header = {"a", "mean", "best", "worst", "lqr_mean", "pi_iterations", "pi_converged"};
  result.runs.header = {"mu1", "mu2", "sample", "J_uncontrolled", "J_lqr", "J_hjb"};
  const Index m = bench.system.control_dim();

  for (double a : cfg.a_values) {
    const Vector mu = Vector::Constant(2, a);
    const TimeStepper stepper(bench.system, mu, bench.stepper);
    OnlineOptions opt;
    opt.cost = cfg.cost;
    const OnlineResult online = online_query(bundle, bench, mu, samples, opt);
    Matrix K;
    if (cfg.include_lqr) K = full_lqr_gain(bench, mu);

    BurgersRatioRow row;
    row.a = a;
    row.pi_iterations = online.pi_iterations;
    row.pi_converged = online.pi_converged;
    std::vector<double> ratios, lqr_ratios;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const double unc = run_cost(simulate_cost(stepper, bench.cost, samples[i], zero_policy(m), cfg.cost));
      const double hjb = run_cost(online.runs[i]);
      double lqr = std::numeric_limits<double>::quiet_NaN();
      if (cfg.include_lqr) {
        lqr = run_cost(simulate_cost(stepper, bench.cost, samples[i], linear_feedback(K), cfg.cost));
        lqr_ratios.push_back(lqr / unc);
      }
      ratios.push_back(hjb / unc);
      result.runs.add({csv_number(a), csv_number(a), std::to_string(i), csv_number(unc), csv_number(lqr),
                       csv_number(hjb)});
    }
    row.mean = mean(ratios);
    row.best = *std::min_element(ratios.begin(), ratios.end());
    row.worst = *std::max_element(ratios.begin(), ratios.end());
    row.lqr_mean = cfg.include_lqr ? mean(lqr_ratios) : std::numeric_limits<double>::quiet_NaN();
    result.summary.add({csv_number(a), csv_number(row.mean), csv_number(row.best), csv_number(row.worst),
                        csv_number(row.lqr_mean), std::to_string(row.pi_iterations),
                        row.pi_converged ? "1" : "0"});
    result.rows.push_back(row);
  }
  return result;
}

SpeedupResult run_speedup(const Benchmark& bench, const OfflineBundle& bundle, const SpeedupConfig& cfg) {
  require(cfg.samples >= 1 && cfg.repetitions >= 1, "speedup needs samples and repetitions");
  SpeedupResult result;
  result.summary.header = {"sample", "box", "seconds_tables", "seconds_direct", "ratio",
                           "evaluations_tables", "evaluations_direct", "iterations_tables",
                           "iterations_direct"};
  const auto mus = sample_parameters(bench.domain, cfg.samples, cfg.seed);
  std::vector<double> ratios;
  for (std::size_t s = 0; s < mus.size(); ++s) {
    SpeedupRow row;
    row.mu = mus[s];
    std::vector<double> t_tab, t_dir;
    for (int rep = 0; rep < cfg.repetitions; ++rep) {
      OnlineOptions opt;
      opt.simulate = false;
      opt.use_tables = true;
      const OnlineResult tab = online_query(bundle, bench, row.mu, {}, opt);
      opt.use_tables = false;
      const OnlineResult dir = online_query(bundle, bench, row.mu, {}, opt);
      t_tab.push_back(tab.pi_seconds);
      t_dir.push_back(dir.pi_seconds);
      row.box = tab.box;
      row.evaluations_tables = std::max(row.evaluations_tables, tab.pi_full_evaluations);
      row.evaluations_direct = dir.pi_full_evaluations;
      row.iterations_tables = tab.pi_iterations;
      row.iterations_direct = dir.pi_iterations;
    }
    row.seconds_tables = median(t_tab);
    row.seconds_direct = median(t_dir);
    row.ratio = row.seconds_direct / std::max(row.seconds_tables, 1e-12);
    ratios.push_back(row.ratio);
    result.max_evaluations_tables = std::max(result.max_evaluations_tables, row.evaluations_tables);
    result.summary.add({std::to_string(s), std::to_string(row.box), csv_number(row.seconds_tables),
                        csv_number(row.seconds_direct), csv_number(row.ratio),
                        std::to_string(row.evaluations_tables), std::to_string(row.evaluations_direct),
                        std::to_string(row.iterations_tables), std::to_string(row.iterations_direct)});
    result.rows.push_back(std::move(row));
  }
  result.median_ratio = median(ratios);
  return result;
}

}  // namespace hjbrom
