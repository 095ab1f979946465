#pragma once

#include "hjbrom/basis.hpp"
#include "hjbrom/domain.hpp"
#include "hjbrom/model.hpp"
#include "hjbrom/types.hpp"

#include <vector>

namespace hjbrom {

/// x^ℓ = Ψᵀ x.
Vector project_state(const ReducedBasis& basis, const Vector& x);

/// Galerkin-projected evaluation of a full system, Ψᵀ f(Ψ x, u; μ).
class ReducedSystem {
 public:
  ReducedSystem(const SeparableControlSystem& sys, const QuadraticCost& cost,
                const ReducedBasis& basis);

  [[nodiscard]] Index dim() const { return basis_->size(); }
  [[nodiscard]] Vector rhs(const Vector& x, const Vector& u, const Vector& mu) const;
  /// g(Ψ x, u; μ).
  [[nodiscard]] double running_cost(const Vector& x, const Vector& u, const Vector& mu) const;
  /// Ψᵀ A_q Ψ for linear drift term q.
  [[nodiscard]] Matrix reduced_operator(std::size_t term) const;

 private:
  const SeparableControlSystem* sys_;
  const QuadraticCost* cost_;
  const ReducedBasis* basis_;
};

/// Θ values of every separable term at one parameter.
struct TermCoefficients {
  Vector drift;
  Vector control;
  Vector state;
  Matrix control_weight;
};

TermCoefficients coefficients(const SeparableControlSystem& sys, const QuadraticCost& cost,
                              const Vector& mu);

/// Parameter-independent projected term evaluations at the nodes of one grid.
struct EvaluationTable {
  Index reduced_dim = 0;
  Index control_dim = 0;
  Index nodes = 0;
  std::vector<Matrix> drift;      // per drift term, ℓ × H: Ψᵀ f_q^y(Ψ x_j)
  std::vector<Matrix> control;    // per control term, ℓ × m or ℓ × (m·H) when state dependent
  std::vector<Vector> state_cost; // per state-cost term, H: (C_q Ψ x_j)ᵀ W_q (C_q Ψ x_j)

  [[nodiscard]] bool control_node_dependent(std::size_t q) const {
    return control[q].cols() != control_dim;
  }
};

EvaluationTable build_tables(const SeparableControlSystem& sys, const QuadraticCost& cost,
                             const ReducedBasis& basis, const TensorGrid& grid);

/// Σ Θ_q^y f_q^{y,ℓ}[j] + Σ Θ_q^u f_q^{u,ℓ}[j] u.
Vector reduced_rhs(const EvaluationTable& table, const TermCoefficients& theta, Index j,
                   const Vector& u);

/// Reduced data at every node for one parameter.
struct NodeData {
  Matrix drift;       // ℓ × H
  Matrix control;     // ℓ × m, or ℓ × (m·H) when state dependent
  Vector state_cost;  // H
  Matrix control_weight;
  /// Optional ℓ × (H·|U|) reduced f(x_j, u_k), column j·|U| + k. When set,
  /// drift and control are unused.
  Matrix increments;

  [[nodiscard]] bool per_control() const { return increments.size() > 0; }

  [[nodiscard]] bool node_dependent_control() const {
    return control.cols() != control_weight.rows();
  }
  [[nodiscard]] Eigen::Ref<const Matrix> control_at(Index j) const {
    const Index m = control_weight.rows();
    return node_dependent_control() ? control.middleCols(j * m, m) : control.leftCols(m);
  }
};

/// Source of reduced node data for the SL solvers.
class NodeDynamics {
 public:
  virtual ~NodeDynamics() = default;
  [[nodiscard]] virtual Index nodes() const = 0;
  [[nodiscard]] virtual Index reduced_dim() const = 0;
  /// Called once per sweep or policy-improvement step.
  [[nodiscard]] virtual NodeData evaluate() const = 0;
};

/// Recombines a precomputed table with Θ(μ); no full-order work.
class TableDynamics final : public NodeDynamics {
 public:
  TableDynamics(const EvaluationTable& table, TermCoefficients theta);

  [[nodiscard]] Index nodes() const override { return table_->nodes; }
  [[nodiscard]] Index reduced_dim() const override { return table_->reduced_dim; }
  [[nodiscard]] NodeData evaluate() const override;

 private:
  const EvaluationTable* table_;
  TermCoefficients theta_;
};

/// Evaluates the full-order model at Ψ x_j on every call.
class DirectDynamics final : public NodeDynamics {
 public:
  /// With `controls`, f is evaluated at every (node, control) pair; otherwise
  /// drift and control matrix are evaluated once per node.
  DirectDynamics(const SeparableControlSystem& sys, const QuadraticCost& cost,
                 const ReducedBasis& basis, const TensorGrid& grid, Vector mu,
                 const ControlGrid* controls = nullptr);

  [[nodiscard]] Index nodes() const override { return nodes_.cols(); }
  [[nodiscard]] Index reduced_dim() const override { return nodes_.rows(); }
  [[nodiscard]] NodeData evaluate() const override;

 private:
  const SeparableControlSystem* sys_;
  const QuadraticCost* cost_;
  const ReducedBasis* basis_;
  Matrix nodes_;
  Vector mu_;
  const ControlGrid* controls_;
};

}  // namespace hjbrom
