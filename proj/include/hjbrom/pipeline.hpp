#pragma once

#include "hjbrom/basis.hpp"
#include "hjbrom/bench.hpp"
#include "hjbrom/domain.hpp"
#include "hjbrom/hjb.hpp"
#include "hjbrom/reduced.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace hjbrom {

inline constexpr int kBundleSchema = 1;
inline constexpr const char* kVersion = "0.1.0";

struct OfflineConfig {
  std::string benchmark = "test1";
  int resolution = 0;
  std::uint64_t seed = 1;
  PartitionConfig partition;
  int snapshot_count = 100;
  std::vector<double> snapshot_times{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  double coverage = 0.005;
  GridKind grid_kind = GridKind::equal_mass;
  int coarse_points = 9;
  int fine_points = 25;
  SLConfig sl;
  nlohmann::json overrides;  // applied to the benchmark, see apply_overrides
};

nlohmann::json to_json(const OfflineConfig& cfg);
OfflineConfig offline_config_from_json(const nlohmann::json& j, OfflineConfig base = {});
nlohmann::json to_json(const SLConfig& cfg);
SLConfig sl_config_from_json(const nlohmann::json& j, SLConfig base = {});

/// Benchmark named by the config, with its overrides applied.
Benchmark bundle_benchmark(const OfflineConfig& cfg);

/// Per-box offline products.
struct BoxProducts {
  TensorGrid coarse;
  TensorGrid fine;
  EvaluationTable table;   // on the fine grid
  ValueField barycenter;   // VI on the coarse grid at the box barycenter
  int vi_iterations = 0;
  bool vi_converged = false;
};

struct OfflineTimings {
  double basis = 0.0;
  double grids = 0.0;
  double tables = 0.0;
  double vi = 0.0;
};

struct OfflineBundle {
  OfflineConfig config;
  ParameterPartition partition;
  std::vector<BoxProducts> boxes;
  OfflineTimings timings;
  std::string version;
};

/// Partition, grids, tables and barycenter VI for one benchmark.
OfflineBundle offline_build(const Benchmark& bench, const OfflineConfig& cfg);

/// Same, with a caller-provided partition (e.g. a fixed basis).
OfflineBundle offline_build(const Benchmark& bench, const OfflineConfig& cfg,
                            ParameterPartition partition);

/// Writes manifest.json and checksummed little-endian arrays into `dir`.
void save_bundle(const OfflineBundle& bundle, const std::filesystem::path& dir);
/// Throws InvalidInput on a missing file, schema mismatch or checksum failure.
OfflineBundle load_bundle(const std::filesystem::path& dir);

struct OnlineOptions {
  bool use_tables = true;
  bool simulate = true;
  CostRunOptions cost;
};

struct OnlineResult {
  std::size_t box = 0;
  ValueField field;
  int pi_iterations = 0;
  bool pi_converged = false;
  double transfer_seconds = 0.0;
  double pi_seconds = 0.0;
  std::uint64_t pi_full_evaluations = 0;  // full-order calls inside the PI loop
  std::vector<CostRun> runs;              // one per initial state
};

/// locate → transfer → PI → closed-loop runs of the full system.
OnlineResult online_query(const OfflineBundle& bundle, const Benchmark& bench, const Vector& mu,
                          const std::vector<Vector>& initial_states, const OnlineOptions& options);

/// Controller of box `box` for a refined (or barycenter) field.
HjbController make_controller(const OfflineBundle& bundle, const Benchmark& bench,
                              std::size_t box, ValueField field, const Vector& mu);

}  // namespace hjbrom
