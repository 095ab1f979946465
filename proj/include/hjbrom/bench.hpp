#pragma once

#include "hjbrom/basis.hpp"
#include "hjbrom/model.hpp"
#include "hjbrom/riccati.hpp"
#include "hjbrom/types.hpp"

#include <json.hpp>

#include <string>

namespace hjbrom {

/// Uniform interior grid of (0,1)² with N×N unknowns, h = 1/(N+1).
/// Unknown p = i + N·j sits at ((i+1)h, (j+1)h).
struct SquareGrid {
  int N = 0;

  [[nodiscard]] double h() const { return 1.0 / (N + 1); }
  [[nodiscard]] Index size() const { return static_cast<Index>(N) * N; }
  [[nodiscard]] Index index(int i, int j) const { return i + static_cast<Index>(N) * j; }
  [[nodiscard]] Matrix coordinates() const;  // size × 2
};

/// Five-point Dirichlet Laplacian.
SparseMatrix laplacian(const SquareGrid& grid);

/// First-order upwind discretization of a(ξ)·∇ with zero Dirichlet data.
SparseMatrix upwind_advection(const SquareGrid& grid,
                              const std::function<Vector(double, double)>& velocity);

/// Indicator of the unknowns satisfying `inside`, as a column.
Vector indicator(const SquareGrid& grid, const std::function<bool(double, double)>& inside);

struct Benchmark {
  std::string id;
  int resolution = 0;
  SeparableControlSystem system;
  QuadraticCost cost;
  ControlGrid controls;
  GaussianEnsemble ensemble;
  ParameterDomain domain;
  StepperConfig stepper;
};

inline constexpr int kTest1Resolution = 25;
inline constexpr int kTest2Resolution = 19;
inline constexpr int kTest3Resolution = 20;

/// Advection–diffusion, μ = (μ_diff, μ_adv) ∈ [0.05,0.1]×[2,4].
Benchmark build_test1(int resolution = kTest1Resolution);
/// Unstable semilinear heat equation ẏ = Ay + μ(y - y³) + Bu, μ ∈ [2,7].
Benchmark build_test2(int resolution = kTest2Resolution);
/// Coupled Burgers equations, μ ∈ [0.01,5]², outputs weighted by μ_k.
Benchmark build_test3(int resolution = kTest3Resolution);

/// Dispatch on "test1" | "test2" | "test3"; resolution 0 selects the default.
Benchmark make_benchmark(const std::string& id, int resolution = 0);

/// Replaces benchmark settings from a JSON object. Recognized keys:
///   "controls": {"kind": "uniform"|"cubic", "lo"/"hi" or "start"/"step", "count"}
///   "discount", "ensemble": {"scale", "decay"}, "stepper": {"dt", "scheme"}
void apply_overrides(Benchmark& bench, const nlohmann::json& overrides);

/// μ ↦ ARE data of the linearization at the origin.
ProblemFamily linearized_family(const Benchmark& bench);

}  // namespace hjbrom
