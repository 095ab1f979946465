#pragma once

#include "hjbrom/types.hpp"

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

namespace hjbrom {

/// Axis-aligned box of admissible parameters.
class ParameterDomain {
 public:
  ParameterDomain(Vector lower, Vector upper);

  [[nodiscard]] Index dim() const { return lower_.size(); }
  [[nodiscard]] const Vector& lower() const { return lower_; }
  [[nodiscard]] const Vector& upper() const { return upper_; }
  [[nodiscard]] Vector center() const { return 0.5 * (lower_ + upper_); }
  [[nodiscard]] double volume() const;
  [[nodiscard]] bool contains(const Vector& mu) const;

 private:
  Vector lower_;
  Vector upper_;
};

using Coefficient = std::function<double(const Vector& mu)>;
using VectorField = std::function<Vector(const Vector& y)>;
using JacobianField = std::function<SparseMatrix(const Vector& y)>;
using MatrixField = std::function<Matrix(const Vector& y)>;

inline Coefficient constant_coefficient(double value) {
  return [value](const Vector&) { return value; };
}

inline Coefficient parameter_component(Index k) {
  return [k](const Vector& mu) { return mu(k); };
}

/// One summand Θ(μ) f(y) of the drift.
struct DriftTerm {
  Coefficient coefficient;
  VectorField field;
  JacobianField jacobian;              // optional; finite differences otherwise
  std::optional<SparseMatrix> linear;  // set when field(y) == linear * y

  static DriftTerm linear_term(Coefficient coefficient, SparseMatrix op);
  static DriftTerm nonlinear_term(Coefficient coefficient, VectorField field,
                                  JacobianField jacobian = {});
};

/// One summand Θ(μ) F(y) u of the control part, F(y) is n×m.
struct ControlTerm {
  Coefficient coefficient;
  MatrixField field;
  std::optional<Matrix> constant;

  static ControlTerm constant_term(Coefficient coefficient, Matrix input);
};

/// Dynamics f(y,u;μ) = Σ Θ_q^y(μ) f_q^y(y) + Σ Θ_q^u(μ) f_q^u(y) u.
///
/// Every call to drift()/control_matrix()/eval() counts as one full-order
/// evaluation; the counter is shared between copies so that callers can
/// assert that a code path never touches the high-dimensional model.
class SeparableControlSystem {
 public:
  SeparableControlSystem(Index n, Index m, std::vector<DriftTerm> drift,
                         std::vector<ControlTerm> control);

  [[nodiscard]] Index state_dim() const { return n_; }
  [[nodiscard]] Index control_dim() const { return m_; }
  [[nodiscard]] const std::vector<DriftTerm>& drift_terms() const { return drift_; }
  [[nodiscard]] const std::vector<ControlTerm>& control_terms() const { return control_; }

  [[nodiscard]] Vector drift(const Vector& y, const Vector& mu) const;
  [[nodiscard]] Matrix control_matrix(const Vector& y, const Vector& mu) const;
  [[nodiscard]] Vector eval(const Vector& y, const Vector& u, const Vector& mu) const;

  /// ∂f/∂y at (y, u). Uses analytic term Jacobians when present.
  [[nodiscard]] SparseMatrix state_jacobian(const Vector& y, const Vector& u,
                                            const Vector& mu) const;

  /// True when every drift term is linear and every control term constant.
  [[nodiscard]] bool is_linear() const;
  /// Assembled Σ Θ_q A_q; only valid when is_linear().
  [[nodiscard]] SparseMatrix linear_operator(const Vector& mu) const;

  [[nodiscard]] std::uint64_t evaluation_count() const { return counter_->load(); }
  void reset_evaluation_count() const { counter_->store(0); }

 private:
  void check_state(const Vector& y) const;

  Index n_;
  Index m_;
  std::vector<DriftTerm> drift_;
  std::vector<ControlTerm> control_;
  std::shared_ptr<std::atomic<std::uint64_t>> counter_;
};

Vector eval_dynamics(const SeparableControlSystem& sys, const Vector& y, const Vector& u,
                     const Vector& mu);

/// Θ(μ) (C y)ᵀ W (C y) with C an output map.
struct StateWeightTerm {
  Coefficient coefficient;
  SparseMatrix output;  // p×n
  Matrix weight;        // p×p, symmetric PSD; empty means identity
};

/// g(y,u;μ) = Σ_q Θ_q(μ) yᵀ C_qᵀ W_q C_q y + uᵀ R(μ) u with discount λ.
struct QuadraticCost {
  std::vector<StateWeightTerm> state_terms;
  std::function<Matrix(const Vector& mu)> control_weight;
  double discount = 0.0;

  [[nodiscard]] Matrix state_weight(const Vector& mu) const;
  [[nodiscard]] double state_cost(const Vector& y, const Vector& mu) const;
  [[nodiscard]] double control_cost(const Vector& u, const Vector& mu) const;
  [[nodiscard]] double running(const Vector& y, const Vector& u, const Vector& mu) const {
    return state_cost(y, mu) + control_cost(u, mu);
  }
};

/// Finite set U of admissible control values.
class ControlGrid {
 public:
  explicit ControlGrid(std::vector<Vector> values);

  /// {(start + i·step)^3 : i = 0..count-1} for a scalar control.
  static ControlGrid cubic(double start, double step, int count);
  /// Evenly spaced scalar values in [lo, hi].
  static ControlGrid uniform(double lo, double hi, int count);
  /// Cartesian product of scalar grids, first factor varying slowest.
  static ControlGrid product(const std::vector<ControlGrid>& factors);

  [[nodiscard]] std::size_t size() const { return values_.size(); }
  [[nodiscard]] Index dim() const { return values_.front().size(); }
  [[nodiscard]] const Vector& operator[](std::size_t i) const { return values_[i]; }
  [[nodiscard]] const std::vector<Vector>& values() const { return values_; }

 private:
  std::vector<Vector> values_;
};

/// 𝒩(ν, Σ) with Σ_ij = c b(N_i) b(N_j) exp(-γ |N_i - N_j|²).
///
/// Entries belonging to different groups (e.g. velocity components stored in
/// one state vector) are uncorrelated; an empty group list means one group.
struct GaussianEnsemble {
  Matrix node_coords;  // n×d
  Vector mean;
  double scale = 1.0;
  double decay = 1.0;
  std::function<double(const Vector& node)> boundary_weight;
  std::vector<int> groups;

  [[nodiscard]] Index dim() const { return node_coords.rows(); }
  [[nodiscard]] Matrix covariance() const;
};

/// Draws from a GaussianEnsemble through a clipped symmetric square root of Σ.
class GaussianSampler {
 public:
  explicit GaussianSampler(const GaussianEnsemble& ensemble);

  [[nodiscard]] std::vector<Vector> sample(int count, std::uint64_t seed) const;
  [[nodiscard]] const Matrix& factor() const { return factor_; }
  /// Number of eigenvalues of Σ that were clipped to zero.
  [[nodiscard]] Index clipped() const { return clipped_; }

 private:
  Vector mean_;
  Matrix factor_;
  Index clipped_ = 0;
};

std::vector<Vector> sample_initial(const GaussianEnsemble& ensemble, int count,
                                   std::uint64_t seed);

enum class Scheme { explicit_euler, implicit_euler };

struct StepperConfig {
  Scheme scheme = Scheme::explicit_euler;
  double dt = 1e-2;
};

/// Newton settings for implicit Euler.
struct NewtonOptions {
  double tolerance = 1e-10;
  int max_iterations = 50;
};

/// Time stepper bound to one system and parameter. For linear systems with
/// implicit Euler the factorization of (I - Δt A(μ)) is computed once.
class TimeStepper {
 public:
  TimeStepper(const SeparableControlSystem& sys, Vector mu, StepperConfig cfg,
              NewtonOptions newton = {});
  ~TimeStepper();
  TimeStepper(TimeStepper&&) noexcept;
  TimeStepper& operator=(TimeStepper&&) = delete;

  [[nodiscard]] Vector step(const Vector& y, const Vector& u) const;
  [[nodiscard]] const StepperConfig& config() const { return cfg_; }
  [[nodiscard]] const Vector& parameter() const { return mu_; }

 private:
  [[nodiscard]] Vector newton_step(const Vector& y, const Vector& u) const;

  const SeparableControlSystem* sys_;
  Vector mu_;
  StepperConfig cfg_;
  NewtonOptions newton_;
  struct LinearSolve;
  std::unique_ptr<LinearSolve> linear_;
};

Vector step(const SeparableControlSystem& sys, const Vector& y, const Vector& u,
            const Vector& mu, const StepperConfig& cfg);

/// u = policy(t, y).
using Policy = std::function<Vector(double t, const Vector& y)>;

Policy zero_policy(Index m);

struct Trajectory {
  double dt = 0.0;
  std::vector<double> times;
  std::vector<Vector> states;    // K+1 entries
  std::vector<Vector> controls;  // K entries, controls[k] acts on [t_k, t_{k+1})
};

inline constexpr double kOverflowGuard = 1e12;

Trajectory simulate(const SeparableControlSystem& sys, const Vector& x, const Policy& policy,
                    const Vector& mu, const StepperConfig& cfg, double horizon);

/// Left-endpoint rule Σ_k Δt e^{-λ t_k} g(y_k, u_k; μ).
double discounted_cost(const QuadraticCost& cost, const Trajectory& trajectory,
                       const Vector& mu);

/// Cost of a closed-loop run evaluated on the fly, truncated once the tail
/// bound e^{-λt} g_k Δt / (1 - e^{-λΔt}) drops below tail_tol·J.
struct CostRun {
  double cost = 0.0;
  double horizon = 0.0;
  int steps = 0;
  bool diverged = false;
};

struct CostRunOptions {
  double max_horizon = 10.0;
  double tail_tol = 1e-6;
};

CostRun simulate_cost(const TimeStepper& stepper, const QuadraticCost& cost, const Vector& x,
                      const Policy& policy, const CostRunOptions& options);

struct Linearization {
  Matrix A;
  Matrix B;
};

/// A = ∂f/∂y(ȳ,ū;μ), B = f^u(ȳ;μ).
Linearization linearize(const SeparableControlSystem& sys, const Vector& ybar,
                        const Vector& ubar, const Vector& mu);

/// Central-difference Jacobian of a vector field, step h.
Matrix finite_difference_jacobian(const VectorField& field, const Vector& y, double h = 1e-6);

}  // namespace hjbrom
