#include "hjbrom/pipeline.hpp"

#include <zlib.h>

#include <bit>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace hjbrom {

static_assert(std::endian::native == std::endian::little, "bundle arrays are written little-endian");

namespace {

using Clock = std::chrono::steady_clock;
using nlohmann::json;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

const char* kind_name(GridKind kind) {
  return kind == GridKind::equal_mass ? "equal_mass" : "equidistant";
}

GridKind kind_from(const std::string& name) {
  if (name == "equal_mass") return GridKind::equal_mass;
  if (name == "equidistant") return GridKind::equidistant;
  throw InvalidInput("unknown grid kind '" + name + "'");
}

template <class T>
void read_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

json to_json(const SLConfig& c) {
  return json{{"dt", c.dt},         {"discount", c.discount},       {"vi_tol", c.vi_tol},
              {"vi_max_iter", c.vi_max_iter}, {"pi_tol", c.pi_tol}, {"pi_max_iter", c.pi_max_iter},
              {"pe_tol", c.pe_tol}, {"penalty", c.penalty}, {"direct_solve_max", c.direct_solve_max}};
}

SLConfig sl_config_from_json(const json& j, SLConfig c) {
  read_if(j, "dt", c.dt);
  read_if(j, "discount", c.discount);
  read_if(j, "vi_tol", c.vi_tol);
  read_if(j, "vi_max_iter", c.vi_max_iter);
  read_if(j, "pi_tol", c.pi_tol);
  read_if(j, "pi_max_iter", c.pi_max_iter);
  read_if(j, "pe_tol", c.pe_tol);
  read_if(j, "penalty", c.penalty);
  read_if(j, "direct_solve_max", c.direct_solve_max);
  return c;
}

json to_json(const OfflineConfig& c) {
  return json{{"benchmark", c.benchmark},
              {"resolution", c.resolution},
              {"seed", c.seed},
              {"overrides", c.overrides},
              {"partition",
               {{"train_per_axis", c.partition.train_per_axis},
                {"tol", c.partition.tol},
                {"pod_tol", c.partition.pod_tol},
                {"max_size", c.partition.max_size},
                {"max_refine", c.partition.max_refine}}},
              {"snapshots", {{"count", c.snapshot_count}, {"times", c.snapshot_times}}},
              {"grid",
               {{"coverage", c.coverage},
                {"kind", kind_name(c.grid_kind)},
                {"coarse_points", c.coarse_points},
                {"fine_points", c.fine_points}}},
              {"sl", to_json(c.sl)}};
}

OfflineConfig offline_config_from_json(const json& j, OfflineConfig c) {
  read_if(j, "benchmark", c.benchmark);
  read_if(j, "resolution", c.resolution);
  read_if(j, "seed", c.seed);
  if (j.contains("overrides")) c.overrides = j.at("overrides");
  if (j.contains("partition")) {
    const auto& p = j.at("partition");
    read_if(p, "train_per_axis", c.partition.train_per_axis);
    read_if(p, "tol", c.partition.tol);
    read_if(p, "pod_tol", c.partition.pod_tol);
    read_if(p, "max_size", c.partition.max_size);
    read_if(p, "max_refine", c.partition.max_refine);
  }
  if (j.contains("snapshots")) {
    const auto& s = j.at("snapshots");
    read_if(s, "count", c.snapshot_count);
    read_if(s, "times", c.snapshot_times);
  }
  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    read_if(g, "coverage", c.coverage);
    if (g.contains("kind")) c.grid_kind = kind_from(g.at("kind").get<std::string>());
    read_if(g, "coarse_points", c.coarse_points);
    read_if(g, "fine_points", c.fine_points);
  }
  if (j.contains("sl")) c.sl = sl_config_from_json(j.at("sl"), c.sl);
  return c;
}

Benchmark bundle_benchmark(const OfflineConfig& cfg) {
  Benchmark bench = make_benchmark(cfg.benchmark, cfg.resolution);
  if (!cfg.overrides.is_null()) apply_overrides(bench, cfg.overrides);
  return bench;
}

OfflineBundle offline_build(const Benchmark& bench, const OfflineConfig& cfg) {
  const auto start = Clock::now();
  ParameterPartition partition =
      adaptive_partition(bench.domain, cfg.partition, linearized_family(bench));
  const double basis_time = seconds_since(start);
  OfflineBundle bundle = offline_build(bench, cfg, std::move(partition));
  bundle.timings.basis = basis_time;
  return bundle;
}

OfflineBundle offline_build(const Benchmark& bench, const OfflineConfig& cfg,
                            ParameterPartition partition) {
  require(cfg.coarse_points >= 3 && cfg.fine_points >= 3, "grid sizes must be at least 3");
  OfflineBundle bundle;
  bundle.config = cfg;
  bundle.config.benchmark = bench.id;
  bundle.config.resolution = bench.resolution;
  bundle.config.sl.discount = bench.cost.discount;
  bundle.version = kVersion;
  bundle.partition = std::move(partition);
  const SLConfig& sl = bundle.config.sl;
  sl.validate();

  for (std::size_t i = 0; i < bundle.partition.size(); ++i) {
    const ReducedBasis& basis = bundle.partition.bases[i];
    const Vector mu = bundle.partition.boxes[i].barycenter();
    BoxProducts box;

    auto t = Clock::now();
    SnapshotOptions snap;
    snap.times = cfg.snapshot_times;
    snap.count = cfg.snapshot_count;
    snap.seed = cfg.seed + i;
    snap.stepper = bench.stepper;
    const SnapshotSet set = collect_snapshots(bench.system, bench.ensemble, mu, snap);
    if (set.states.cols() < 2) throw SolverError("grid phase: too few non-diverging snapshots");
    const auto fits = fit_reduced(set.states, basis);
    box.coarse = make_grid(fits, GridOptions{{cfg.coarse_points}, cfg.coverage, cfg.grid_kind});
    box.fine = make_grid(fits, GridOptions{{cfg.fine_points}, cfg.coverage, cfg.grid_kind});
    bundle.timings.grids += seconds_since(t);

    t = Clock::now();
    box.table = build_tables(bench.system, bench.cost, basis, box.fine);
    bundle.timings.tables += seconds_since(t);

    t = Clock::now();
    const EvaluationTable coarse_table = build_tables(bench.system, bench.cost, basis, box.coarse);
    const TableDynamics dynamics(coarse_table, coefficients(bench.system, bench.cost, mu));
    ValueField initial = initial_field(box.coarse, dynamics.evaluate(), bench.controls, sl);
    SolveReport vi = value_iteration(std::move(initial), dynamics, bench.controls, sl);
    box.barycenter = std::move(vi.field);
    box.vi_iterations = vi.iterations;
    box.vi_converged = vi.converged;
    bundle.timings.vi += seconds_since(t);

    bundle.boxes.push_back(std::move(box));
  }
  return bundle;
}

namespace {

class ArrayWriter {
 public:
  explicit ArrayWriter(std::filesystem::path dir) : dir_(std::move(dir)) {}

  json write(const double* data, Index rows, Index cols) {
    std::ostringstream name;
    name << "a" << std::setw(5) << std::setfill('0') << next_++ << ".bin";
    const auto bytes = static_cast<std::size_t>(rows * cols) * sizeof(double);
    std::ofstream out(dir_ / name.str(), std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidInput("cannot write " + (dir_ / name.str()).string());
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(bytes));
    const uLong crc = crc32(crc32(0L, Z_NULL, 0), reinterpret_cast<const Bytef*>(data),
                            static_cast<uInt>(bytes));
    return json{{"file", name.str()}, {"rows", rows}, {"cols", cols}, {"crc32", crc}};
  }
  json write(const Matrix& m) { return write(m.data(), m.rows(), m.cols()); }
  json write(const Vector& v) { return write(v.data(), v.size(), 1); }
  json write(const std::vector<double>& v) {
    return write(v.data(), static_cast<Index>(v.size()), 1);
  }

 private:
  std::filesystem::path dir_;
  int next_ = 0;
};

class ArrayReader {
 public:
  explicit ArrayReader(std::filesystem::path dir) : dir_(std::move(dir)) {}

  Matrix matrix(const json& ref) const {
    const Index rows = ref.at("rows").get<Index>();
    const Index cols = ref.at("cols").get<Index>();
    const auto path = dir_ / ref.at("file").get<std::string>();
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInput("bundle array missing: " + path.string());
    Matrix m(rows, cols);
    const auto bytes = static_cast<std::size_t>(rows * cols) * sizeof(double);
    in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(bytes));
    if (static_cast<std::size_t>(in.gcount()) != bytes || in.peek() != EOF) {
      throw InvalidInput("bundle array has wrong size: " + path.string());
    }
    const uLong crc = crc32(crc32(0L, Z_NULL, 0), reinterpret_cast<const Bytef*>(m.data()),
                            static_cast<uInt>(bytes));
    if (crc != ref.at("crc32").get<uLong>()) {
      throw InvalidInput("bundle array checksum mismatch: " + path.string());
    }
    return m;
  }
  Vector vector(const json& ref) const {
    Matrix m = matrix(ref);
    return Eigen::Map<const Vector>(m.data(), m.size());
  }
  std::vector<double> values(const json& ref) const {
    const Vector v = vector(ref);
    return std::vector<double>(v.data(), v.data() + v.size());
  }

 private:
  std::filesystem::path dir_;
};

json grid_json(ArrayWriter& w, const TensorGrid& grid) {
  json axes = json::array();
  for (const auto& a : grid.axes()) axes.push_back(w.write(a.nodes));
  return axes;
}

TensorGrid grid_from(const ArrayReader& r, const json& axes) {
  std::vector<UnivariateGrid> out;
  for (const auto& a : axes) out.push_back(UnivariateGrid{r.values(a)});
  return TensorGrid(std::move(out));
}

}  // namespace

void save_bundle(const OfflineBundle& bundle, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  ArrayWriter w(dir);
  json manifest;
  manifest["schema"] = kBundleSchema;
  manifest["version"] = bundle.version;
  manifest["config"] = to_json(bundle.config);
  manifest["timings"] = {{"basis", bundle.timings.basis},
                         {"grids", bundle.timings.grids},
                         {"tables", bundle.timings.tables},
                         {"vi", bundle.timings.vi}};
  const auto& part = bundle.partition;
  json boxes = json::array();
  for (std::size_t i = 0; i < part.size(); ++i) {
    const BoxProducts& b = bundle.boxes.at(i);
    json box;
    box["lower"] = w.write(part.boxes[i].lower);
    box["upper"] = w.write(part.boxes[i].upper);
    box["level"] = part.boxes[i].level;
    box["indicator"] = w.write(std::vector<double>{part.indicators[i]});
    box["basis"] = w.write(part.bases[i].matrix());
    box["coarse"] = grid_json(w, b.coarse);
    box["fine"] = grid_json(w, b.fine);
    json table;
    table["reduced_dim"] = b.table.reduced_dim;
    table["control_dim"] = b.table.control_dim;
    table["nodes"] = b.table.nodes;
    for (const auto& d : b.table.drift) table["drift"].push_back(w.write(d));
    for (const auto& c : b.table.control) table["control"].push_back(w.write(c));
    for (const auto& s : b.table.state_cost) table["state_cost"].push_back(w.write(s));
    box["table"] = table;
    box["barycenter"] = {{"values", w.write(b.barycenter.values)},
                         {"penalty", w.write(std::vector<double>{b.barycenter.penalty})},
                         {"vi_iterations", b.vi_iterations},
                         {"vi_converged", b.vi_converged}};
    boxes.push_back(std::move(box));
  }
  manifest["boxes"] = std::move(boxes);
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  if (!out) throw InvalidInput("cannot write manifest in " + dir.string());
  out << manifest.dump(2) << "\n";
}

OfflineBundle load_bundle(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw InvalidInput("bundle manifest missing in " + dir.string());
  const json manifest = json::parse(in);
  if (manifest.at("schema").get<int>() != kBundleSchema) {
    throw InvalidInput("unsupported bundle schema");
  }
  const ArrayReader r(dir);
  OfflineBundle bundle;
  bundle.version = manifest.at("version").get<std::string>();
  bundle.config = offline_config_from_json(manifest.at("config"));
  const auto& t = manifest.at("timings");
  bundle.timings = {t.at("basis").get<double>(), t.at("grids").get<double>(),
                    t.at("tables").get<double>(), t.at("vi").get<double>()};
  for (const auto& box : manifest.at("boxes")) {
    bundle.partition.boxes.push_back(ParameterBox{r.vector(box.at("lower")),
                                                  r.vector(box.at("upper")),
                                                  box.at("level").get<int>()});
    bundle.partition.indicators.push_back(r.values(box.at("indicator")).at(0));
    bundle.partition.bases.emplace_back(r.matrix(box.at("basis")));
    BoxProducts b;
    b.coarse = grid_from(r, box.at("coarse"));
    b.fine = grid_from(r, box.at("fine"));
    const auto& table = box.at("table");
    b.table.reduced_dim = table.at("reduced_dim").get<Index>();
    b.table.control_dim = table.at("control_dim").get<Index>();
    b.table.nodes = table.at("nodes").get<Index>();
    if (table.contains("drift")) {
      for (const auto& ref : table.at("drift")) b.table.drift.push_back(r.matrix(ref));
    }
    if (table.contains("control")) {
      for (const auto& ref : table.at("control")) b.table.control.push_back(r.matrix(ref));
    }
    if (table.contains("state_cost")) {
      for (const auto& ref : table.at("state_cost")) b.table.state_cost.push_back(r.vector(ref));
    }
    const auto& bar = box.at("barycenter");
    b.barycenter = ValueField{b.coarse, r.vector(bar.at("values")),
                              r.values(bar.at("penalty")).at(0)};
    b.vi_iterations = bar.at("vi_iterations").get<int>();
    b.vi_converged = bar.at("vi_converged").get<bool>();
    bundle.boxes.push_back(std::move(b));
  }
  return bundle;
}

HjbController make_controller(const OfflineBundle& bundle, const Benchmark& bench,
                              std::size_t box, ValueField field, const Vector& mu) {
  return HjbController(std::move(field), bundle.partition.bases.at(box), bench.system, bench.cost,
                       bench.controls, mu, bundle.config.sl);
}

OnlineResult online_query(const OfflineBundle& bundle, const Benchmark& bench, const Vector& mu,
                          const std::vector<Vector>& initial_states, const OnlineOptions& options) {
  require(bench.domain.contains(mu), "parameter lies outside the benchmark domain");
  OnlineResult result;
  result.box = locate(bundle.partition, mu);
  const BoxProducts& box = bundle.boxes.at(result.box);
  const ReducedBasis& basis = bundle.partition.bases.at(result.box);
  const SLConfig& sl = bundle.config.sl;

  auto t = Clock::now();
  ValueField initial = transfer(box.barycenter, box.fine);
  result.transfer_seconds = seconds_since(t);

  const auto before = bench.system.evaluation_count();
  t = Clock::now();
  SolveReport pi;
  if (options.use_tables) {
    const TableDynamics dynamics(box.table, coefficients(bench.system, bench.cost, mu));
    pi = policy_iteration(std::move(initial), dynamics, bench.controls, sl);
  } else {
    const DirectDynamics dynamics(bench.system, bench.cost, basis, box.fine, mu, &bench.controls);
    pi = policy_iteration(std::move(initial), dynamics, bench.controls, sl);
  }
  result.pi_seconds = seconds_since(t);
  result.pi_full_evaluations = bench.system.evaluation_count() - before;
  result.pi_iterations = pi.iterations;
  result.pi_converged = pi.converged;
  result.field = std::move(pi.field);

  if (options.simulate && !initial_states.empty()) {
    const HjbController controller = make_controller(bundle, bench, result.box, result.field, mu);
    const TimeStepper stepper(bench.system, mu, bench.stepper);
    const Policy policy = controller.policy();
    for (const auto& x : initial_states) {
      result.runs.push_back(simulate_cost(stepper, bench.cost, x, policy, options.cost));
    }
  }
  return result;
}

}  // namespace hjbrom
