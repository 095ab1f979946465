#pragma once

#include "hjbrom/bench.hpp"
#include "hjbrom/pipeline.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace hjbrom {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add(std::vector<std::string> row);
  void write(std::ostream& out) const;
  void write(const std::filesystem::path& path) const;
};

/// Shortest round-trip decimal form; "inf"/"nan" for non-finite values.
std::string csv_number(double value);

/// Offline settings used by the experiment drivers for "test1" | "test2" | "test3".
OfflineConfig default_offline_config(const std::string& id);

/// u = -K y.
Policy linear_feedback(Matrix gain);

/// Reduced LQR gain K̂ = R⁻¹ BᵀP̂ with P̂ lifted from the projected ARE.
Matrix reduced_lqr_gain(const AreProblem& problem, const ReducedBasis& basis);

// ---------------------------------------------------------------------------
// Fixed-parameter accuracy study on Test 1.

struct Table1Config {
  int resolution = kTest1Resolution;
  Vector mu;  // empty: (μ_diff, μ_adv) = (0.08, 3)
  std::vector<int> dims{1, 2, 3, 4, 5};
  std::vector<int> points{11};
  std::vector<GridKind> kinds{GridKind::equal_mass, GridKind::equidistant};
  int samples = 100;
  std::uint64_t seed = 1;
  int snapshot_count = 100;
  std::vector<double> snapshot_times{0.0, 0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.07, 0.08, 0.09, 0.1};
  double coverage = 0.005;
  SLConfig sl;
  CostRunOptions cost{30.0, 1e-6};
  Index max_nodes = 200000;  // larger grids are skipped
};

struct Table1Row {
  int dim = 0;
  int points = 0;
  GridKind kind = GridKind::equal_mass;
  Index nodes = 0;
  double lqr_error = 0.0;  // reduced LQR vs full LQR
  double hjb_error = 0.0;  // HJB vs full LQR
  int lqr_diverged = 0;
  int hjb_diverged = 0;
  int inside = 0;  // samples whose projection lies in the grid box
  int pi_iterations = 0;
  bool pi_converged = false;
  double solve_seconds = 0.0;
};

struct Table1Result {
  double full_lqr_mean = 0.0;
  std::vector<Table1Row> rows;
  CsvTable summary;
  CsvTable runs;
};

Table1Config default_table1_config();
Table1Result run_table1(const Table1Config& cfg);

// ---------------------------------------------------------------------------
// Test 2: LQR-to-HJB cost ratio over μ.

struct HeatRatioConfig {
  std::vector<double> mus{2.0, 3.0, 4.0, 5.0, 6.0, 7.0};
  int samples = 20;
  std::uint64_t seed = 1;
  CostRunOptions cost;
};

struct HeatRatioRow {
  int depth = 0;
  double mu = 0.0;
  std::size_t box = 0;
  double ratio_barycenter = 0.0;  // mean J_lqr / J_hjb, offline field only
  double ratio_online = 0.0;      // mean J_lqr / J_hjb after online PI
  int pi_iterations = 0;
  bool pi_converged = false;
};

struct HeatRatioResult {
  std::vector<HeatRatioRow> rows;
  CsvTable summary;
  CsvTable runs;
};

/// One bundle per partition depth; the depth is read from the bundle partition.
HeatRatioResult run_heat_ratio(const Benchmark& bench, const std::vector<const OfflineBundle*>& bundles,
                               const HeatRatioConfig& cfg);

// ---------------------------------------------------------------------------
// Test 3: controlled-to-uncontrolled cost ratio at μ = (a, a).

struct BurgersRatioConfig {
  std::vector<double> a_values{0.1, 2.5, 5.0};
  int samples = 10;
  std::uint64_t seed = 1;
  bool include_lqr = true;
  CostRunOptions cost;
};

struct BurgersRatioRow {
  double a = 0.0;
  double mean = 0.0;
  double best = 0.0;
  double worst = 0.0;
  double lqr_mean = 0.0;  // mean J_lqr / J_uncontrolled, NaN when skipped
  int pi_iterations = 0;
  bool pi_converged = false;
};

struct BurgersRatioResult {
  std::vector<BurgersRatioRow> rows;
  CsvTable summary;
  CsvTable runs;
};

BurgersRatioResult run_burgers_ratio(const Benchmark& bench, const OfflineBundle& bundle,
                                     const BurgersRatioConfig& cfg);

// ---------------------------------------------------------------------------
// Online PI timing with and without precomputed tables.

struct SpeedupConfig {
  int samples = 10;
  int repetitions = 3;
  std::uint64_t seed = 1;
};

struct SpeedupRow {
  Vector mu;
  std::size_t box = 0;
  double seconds_tables = 0.0;  // median over repetitions
  double seconds_direct = 0.0;
  double ratio = 0.0;
  std::uint64_t evaluations_tables = 0;
  std::uint64_t evaluations_direct = 0;
  int iterations_tables = 0;
  int iterations_direct = 0;
};

struct SpeedupResult {
  std::vector<SpeedupRow> rows;
  double median_ratio = 0.0;
  std::uint64_t max_evaluations_tables = 0;
  CsvTable summary;
};

SpeedupResult run_speedup(const Benchmark& bench, const OfflineBundle& bundle, const SpeedupConfig& cfg);

/// Uniform draws from the parameter domain.
std::vector<Vector> sample_parameters(const ParameterDomain& domain, int count, std::uint64_t seed);

}  // namespace hjbrom
