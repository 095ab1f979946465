#pragma once

#include "hjbrom/basis.hpp"
#include "hjbrom/domain.hpp"
#include "hjbrom/model.hpp"
#include "hjbrom/reduced.hpp"
#include "hjbrom/types.hpp"

#include <array>
#include <cmath>
#include <vector>

namespace hjbrom {

struct SLConfig {
  double dt = 1e-2;
  double discount = 1e-3;
  double vi_tol = 1e-8;
  int vi_max_iter = 20000;
  double pi_tol = 1e-8;
  int pi_max_iter = 100;
  double pe_tol = 1e-10;
  double penalty = 0.0;  // <= 0 selects default_penalty
  Index direct_solve_max = 30000;

  [[nodiscard]] double beta() const { return std::exp(-discount * dt); }
  void validate() const;
};

/// Nodal values on a tensor grid plus the value used outside its bounding box.
struct ValueField {
  TensorGrid grid;
  Vector values;
  double penalty = 0.0;
};

inline constexpr int kMaxReducedDim = 8;

/// Multilinear interpolation weights of one query point.
struct Stencil {
  int count = 0;
  std::array<Index, (1 << kMaxReducedDim)> index{};
  std::array<double, (1 << kMaxReducedDim)> weight{};
};

/// Fills the nonzero weights for x; false when x is outside the bounding box.
bool interpolation_stencil(const TensorGrid& grid, const double* x, Stencil& stencil);

/// Multilinear interpolant, or the penalty outside the bounding box.
double interpolate(const ValueField& field, const Vector& x);

/// Multilinear interpolant with x clamped into the bounding box.
double interpolate_clamped(const ValueField& field, const Vector& x);

/// 10·Δt·g_max/(1 - e^{-λΔt}), g_max over nodes × controls.
double default_penalty(const NodeData& data, const ControlGrid& controls, const SLConfig& cfg);

/// Zero field on `grid` with the configured (or default) penalty.
ValueField initial_field(const TensorGrid& grid, const NodeData& data, const ControlGrid& controls,
                         const SLConfig& cfg);

struct SweepResult {
  Vector values;
  std::vector<int> policy;
};

/// One Jacobi application of the SL operator S, with per-node argmin.
SweepResult vi_sweep(const ValueField& field, const NodeData& data, const ControlGrid& controls,
                     const SLConfig& cfg);

struct SolveReport {
  ValueField field;
  std::vector<int> policy;
  int iterations = 0;
  double residual = 0.0;  // last ‖ΔV‖_∞
  bool converged = false;
};

SolveReport value_iteration(ValueField initial, const NodeDynamics& dynamics,
                            const ControlGrid& controls, const SLConfig& cfg);

/// Solves (I - e^{-λΔt} M(u)) V = Δt g(u) (+ penalty terms) for a frozen policy.
Vector policy_evaluation(const ValueField& field, const NodeData& data, const ControlGrid& controls,
                         const std::vector<int>& policy, const SLConfig& cfg,
                         double* residual = nullptr);

/// Policy iteration starting from the greedy policy of `initial`.
SolveReport policy_iteration(ValueField initial, const NodeDynamics& dynamics,
                             const ControlGrid& controls, const SLConfig& cfg);

/// Coarse field sampled at the fine nodes (clamped), fine penalty = coarse penalty.
ValueField transfer(const ValueField& coarse, const TensorGrid& fine);

/// Full-order feedback u*(x) = argmin e^{-λΔt} I[V](Ψᵀ(x + Δt f(x,u))) + Δt g(x,u).
class HjbController {
 public:
  HjbController(ValueField field, const ReducedBasis& basis, const SeparableControlSystem& sys,
                const QuadraticCost& cost, const ControlGrid& controls, Vector mu, SLConfig cfg);

  [[nodiscard]] std::size_t index(const Vector& x) const;
  [[nodiscard]] Vector operator()(double t, const Vector& x) const;
  [[nodiscard]] Policy policy() const;
  /// Number of queries where every candidate foot point left the grid.
  [[nodiscard]] long saturations() const { return *saturated_; }
  [[nodiscard]] const ValueField& field() const { return field_; }

 private:
  ValueField field_;
  const ReducedBasis* basis_;
  const SeparableControlSystem* sys_;
  const QuadraticCost* cost_;
  const ControlGrid* controls_;
  Vector mu_;
  SLConfig cfg_;
  Vector control_cost_;
  std::shared_ptr<long> saturated_;
};

}  // namespace hjbrom
