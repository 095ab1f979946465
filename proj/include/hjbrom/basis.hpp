#pragma once

#include "hjbrom/model.hpp"
#include "hjbrom/riccati.hpp"
#include "hjbrom/types.hpp"

#include <functional>
#include <map>
#include <vector>

namespace hjbrom {

/// Orthonormal columns Ψ (n×ℓ). An empty basis has ℓ = 0.
class ReducedBasis {
 public:
  ReducedBasis() = default;
  explicit ReducedBasis(Matrix columns);

  static ReducedBasis empty(Index n) { return ReducedBasis(Matrix(n, 0)); }

  [[nodiscard]] Index full_dim() const { return columns_.rows(); }
  [[nodiscard]] Index size() const { return columns_.cols(); }
  [[nodiscard]] const Matrix& matrix() const { return columns_; }

  /// Appends the part of `candidates` orthogonal to the current span, using
  /// two passes of Gram–Schmidt per column. Returns the number of columns kept.
  Index append(const Matrix& candidates, Index max_new, double drop_tol = 1e-10);

  /// max |ΨᵀΨ - I|.
  [[nodiscard]] double orthonormality_error() const;

 private:
  Matrix columns_;
};

/// Left singular vectors of X kept until the captured energy reaches
/// (1 - energy_tol) of Σσ². At most max_modes columns when max_modes > 0.
ReducedBasis pod(const Matrix& snapshots, double energy_tol, Index max_modes = 0);

/// Normalized residual Δ(μ) = ‖ℛ(Ψ Z Ψᵀ)‖_F / ‖Q‖_F with Z the solution of
/// the Galerkin-projected ARE. +∞ when the reduced ARE cannot be solved.
double error_indicator(const AreProblem& problem, const ReducedBasis& basis);

/// Lifted approximation Ψ Z Ψᵀ (zero for the empty basis).
Matrix projected_are_solution(const AreProblem& problem, const ReducedBasis& basis);

/// μ ↦ linearized ARE data.
using ProblemFamily = std::function<AreProblem(const Vector& mu)>;

/// Memoizes full-order ARE solutions by parameter value.
class AreCache {
 public:
  const Matrix& solve(const ProblemFamily& family, const Vector& mu);
  [[nodiscard]] std::size_t solves() const { return solves_; }

 private:
  std::map<std::vector<double>, Matrix> cache_;
  std::size_t solves_ = 0;
};

struct GreedyConfig {
  std::vector<Vector> train_set;
  double tol = 1e-3;
  double pod_tol = 1e-4;
  Index max_size = 5;
};

struct GreedyResult {
  ReducedBasis basis;
  double max_indicator = 0.0;
  int iterations = 0;
  std::vector<double> history;      // max indicator before each iteration and at exit
  std::vector<Vector> selected;     // μ* per iteration
};

/// Low-rank factor greedy basis generation.
GreedyResult lrfg(const GreedyConfig& cfg, const ReducedBasis& initial, const ProblemFamily& family,
                  AreCache* cache = nullptr);

/// A node of the bisection tree.
struct ParameterBox {
  Vector lower;
  Vector upper;
  int level = 0;

  [[nodiscard]] Vector barycenter() const { return 0.5 * (lower + upper); }
  [[nodiscard]] double volume() const { return (upper - lower).prod(); }
  [[nodiscard]] bool contains(const Vector& mu) const;
  /// 2^q children, child index bit k set ⇔ upper half along coordinate k.
  [[nodiscard]] std::vector<ParameterBox> bisect() const;
  /// `per_axis` evenly spaced points per coordinate, corners included.
  [[nodiscard]] std::vector<Vector> training_points(int per_axis) const;
};

struct BoxFit {
  ReducedBasis basis;
  double indicator = 0.0;
};

struct ParameterPartition {
  std::vector<ParameterBox> boxes;
  std::vector<ReducedBasis> bases;
  std::vector<double> indicators;

  [[nodiscard]] std::size_t size() const { return boxes.size(); }
  [[nodiscard]] int max_level() const;
};

struct PartitionConfig {
  int train_per_axis = 3;
  double tol = 1e-3;
  double pod_tol = 1e-4;
  Index max_size = 5;
  int max_refine = 0;
};

/// Recursive bisection driven by a per-box fit. A box is accepted when its
/// indicator is at most `tol` or when it sits at depth `max_refine`.
ParameterPartition adaptive_partition(const ParameterDomain& domain, double tol, int max_refine,
                                      const std::function<BoxFit(const ParameterBox&)>& fit);

/// Partition using lrfg on each box.
ParameterPartition adaptive_partition(const ParameterDomain& domain, const PartitionConfig& cfg,
                                      const ProblemFamily& family, AreCache* cache = nullptr);

/// Index of the first box containing μ.
std::size_t locate(const ParameterPartition& partition, const Vector& mu);

}  // namespace hjbrom
