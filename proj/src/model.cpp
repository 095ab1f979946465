#include "hjbrom/model.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseLU>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace hjbrom {

ParameterDomain::ParameterDomain(Vector lower, Vector upper)
    : lower_(std::move(lower)), upper_(std::move(upper)) {
  require(lower_.size() >= 1, "parameter domain needs at least one dimension");
  require(lower_.size() == upper_.size(), "parameter bounds differ in dimension");
  for (Index k = 0; k < lower_.size(); ++k) {
    require(lower_(k) < upper_(k), "parameter lower bound must be below upper bound");
  }
}

double ParameterDomain::volume() const { return (upper_ - lower_).prod(); }

bool ParameterDomain::contains(const Vector& mu) const {
  if (mu.size() != dim()) return false;
  return (mu.array() >= lower_.array()).all() && (mu.array() <= upper_.array()).all();
}

DriftTerm DriftTerm::linear_term(Coefficient coefficient, SparseMatrix op) {
  DriftTerm term;
  term.coefficient = std::move(coefficient);
  auto shared = std::make_shared<SparseMatrix>(op);
  term.field = [shared](const Vector& y) -> Vector { return (*shared) * y; };
  term.jacobian = [shared](const Vector&) { return *shared; };
  term.linear = std::move(op);
  return term;
}

DriftTerm DriftTerm::nonlinear_term(Coefficient coefficient, VectorField field,
                                    JacobianField jacobian) {
  DriftTerm term;
  term.coefficient = std::move(coefficient);
  term.field = std::move(field);
  term.jacobian = std::move(jacobian);
  return term;
}

ControlTerm ControlTerm::constant_term(Coefficient coefficient, Matrix input) {
  ControlTerm term;
  term.coefficient = std::move(coefficient);
  auto shared = std::make_shared<Matrix>(input);
  term.field = [shared](const Vector&) { return *shared; };
  term.constant = std::move(input);
  return term;
}

SeparableControlSystem::SeparableControlSystem(Index n, Index m, std::vector<DriftTerm> drift,
                                               std::vector<ControlTerm> control)
    : n_(n),
      m_(m),
      drift_(std::move(drift)),
      control_(std::move(control)),
      counter_(std::make_shared<std::atomic<std::uint64_t>>(0)) {
  require(n >= 1 && m >= 1, "state and control dimensions must be positive");
  require(!drift_.empty(), "a separable system needs at least one drift term");
  for (const auto& t : drift_) {
    require(t.coefficient && t.field, "drift term needs coefficient and field");
    if (t.linear) require(t.linear->rows() == n && t.linear->cols() == n, "linear term shape");
  }
  for (const auto& t : control_) {
    require(t.coefficient && t.field, "control term needs coefficient and field");
    if (t.constant) require(t.constant->rows() == n && t.constant->cols() == m, "input shape");
  }
}

void SeparableControlSystem::check_state(const Vector& y) const {
  if (y.size() != n_) {
    std::ostringstream msg;
    msg << "state has dimension " << y.size() << ", expected " << n_;
    throw InvalidInput(msg.str());
  }
}

Vector SeparableControlSystem::drift(const Vector& y, const Vector& mu) const {
  check_state(y);
  counter_->fetch_add(1, std::memory_order_relaxed);
  Vector out = Vector::Zero(n_);
  for (const auto& t : drift_) {
    const double theta = t.coefficient(mu);
    if (theta == 0.0) continue;
    Vector fy = t.field(y);
    require(fy.size() == n_, "drift field returned wrong dimension");
    out.noalias() += theta * fy;
  }
  return out;
}

Matrix SeparableControlSystem::control_matrix(const Vector& y, const Vector& mu) const {
  check_state(y);
  counter_->fetch_add(1, std::memory_order_relaxed);
  Matrix out = Matrix::Zero(n_, m_);
  for (const auto& t : control_) {
    const double theta = t.coefficient(mu);
    if (theta == 0.0) continue;
    Matrix fu = t.field(y);
    require(fu.rows() == n_ && fu.cols() == m_, "control field returned wrong shape");
    out.noalias() += theta * fu;
  }
  return out;
}

Vector SeparableControlSystem::eval(const Vector& y, const Vector& u, const Vector& mu) const {
  check_state(y);
  require(u.size() == m_, "control has wrong dimension");
  counter_->fetch_add(1, std::memory_order_relaxed);
  Vector out = Vector::Zero(n_);
  for (const auto& t : drift_) {
    const double theta = t.coefficient(mu);
    if (theta == 0.0) continue;
    Vector fy = t.field(y);
    require(fy.size() == n_, "drift field returned wrong dimension");
    out.noalias() += theta * fy;
  }
  for (const auto& t : control_) {
    const double theta = t.coefficient(mu);
    if (theta == 0.0) continue;
    Matrix fu = t.field(y);
    require(fu.rows() == n_ && fu.cols() == m_, "control field returned wrong shape");
    out.noalias() += theta * (fu * u);
  }
  return out;
}

Matrix finite_difference_jacobian(const VectorField& field, const Vector& y, double h) {
  const Index n = y.size();
  Vector probe = y;
  Matrix J;
  for (Index j = 0; j < n; ++j) {
    probe(j) = y(j) + h;
    Vector plus = field(probe);
    probe(j) = y(j) - h;
    Vector minus = field(probe);
    probe(j) = y(j);
    if (j == 0) J.resize(plus.size(), n);
    J.col(j) = (plus - minus) / (2.0 * h);
  }
  return J;
}

SparseMatrix SeparableControlSystem::state_jacobian(const Vector& y, const Vector& u,
                                                    const Vector& mu) const {
  check_state(y);
  SparseMatrix J(n_, n_);
  for (const auto& t : drift_) {
    const double theta = t.coefficient(mu);
    if (theta == 0.0) continue;
    if (t.jacobian) {
      J += theta * t.jacobian(y);
    } else {
      Matrix dense = finite_difference_jacobian(t.field, y);
      J += theta * SparseMatrix(dense.sparseView());
    }
  }
  for (const auto& t : control_) {
    if (t.constant) continue;
    const double theta = t.coefficient(mu);
    if (theta == 0.0) continue;
    const auto& field = t.field;
    VectorField applied = [&field, &u](const Vector& z) -> Vector { return field(z) * u; };
    Matrix dense = finite_difference_jacobian(applied, y);
    J += theta * SparseMatrix(dense.sparseView());
  }
  return J;
}

bool SeparableControlSystem::is_linear() const {
  for (const auto& t : drift_)
    if (!t.linear) return false;
  for (const auto& t : control_)
    if (!t.constant) return false;
  return true;
}

SparseMatrix SeparableControlSystem::linear_operator(const Vector& mu) const {
  require(is_linear(), "linear_operator requires a linear system");
  SparseMatrix A(n_, n_);
  for (const auto& t : drift_) A += t.coefficient(mu) * (*t.linear);
  return A;
}

Vector eval_dynamics(const SeparableControlSystem& sys, const Vector& y, const Vector& u,
                     const Vector& mu) {
  return sys.eval(y, u, mu);
}

Matrix QuadraticCost::state_weight(const Vector& mu) const {
  require(!state_terms.empty(), "cost has no state terms");
  const Index n = state_terms.front().output.cols();
  Matrix Q = Matrix::Zero(n, n);
  for (const auto& t : state_terms) {
    const double theta = t.coefficient(mu);
    if (theta == 0.0) continue;
    const Matrix C = Matrix(t.output);
    if (t.weight.size() == 0) {
      Q.noalias() += theta * (C.transpose() * C);
    } else {
      Q.noalias() += theta * (C.transpose() * t.weight * C);
    }
  }
  return Q;
}

double QuadraticCost::state_cost(const Vector& y, const Vector& mu) const {
  double g = 0.0;
  for (const auto& t : state_terms) {
    const double theta = t.coefficient(mu);
    if (theta == 0.0) continue;
    const Vector z = t.output * y;
    g += theta * (t.weight.size() == 0 ? z.squaredNorm() : z.dot(t.weight * z));
  }
  return g;
}

double QuadraticCost::control_cost(const Vector& u, const Vector& mu) const {
  return u.dot(control_weight(mu) * u);
}

ControlGrid::ControlGrid(std::vector<Vector> values) : values_(std::move(values)) {
  require(!values_.empty(), "control grid must not be empty");
  const Index m = values_.front().size();
  require(m >= 1, "control values need positive dimension");
  for (std::size_t i = 0; i < values_.size(); ++i) {
    require(values_[i].size() == m, "control values differ in dimension");
    for (std::size_t j = 0; j < i; ++j) {
      require(values_[i] != values_[j], "control values must be pairwise distinct");
    }
  }
}

ControlGrid ControlGrid::cubic(double start, double step, int count) {
  require(count >= 1, "control grid needs at least one value");
  std::vector<Vector> values;
  values.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const double base = start + i * step;
    values.push_back(Vector::Constant(1, base * base * base));
  }
  return ControlGrid(std::move(values));
}

ControlGrid ControlGrid::uniform(double lo, double hi, int count) {
  require(count >= 1, "control grid needs at least one value");
  std::vector<Vector> values;
  for (int i = 0; i < count; ++i) {
    const double v = count == 1 ? lo : lo + (hi - lo) * i / (count - 1);
    values.push_back(Vector::Constant(1, v));
  }
  return ControlGrid(std::move(values));
}

ControlGrid ControlGrid::product(const std::vector<ControlGrid>& factors) {
  require(!factors.empty(), "product needs at least one factor");
  std::vector<Vector> values{Vector(0)};
  for (const auto& f : factors) {
    std::vector<Vector> next;
    next.reserve(values.size() * f.size());
    for (const auto& head : values) {
      for (const auto& v : f.values()) {
        Vector joined(head.size() + v.size());
        joined << head, v;
        next.push_back(std::move(joined));
      }
    }
    values = std::move(next);
  }
  return ControlGrid(std::move(values));
}

Matrix GaussianEnsemble::covariance() const {
  const Index n = dim();
  require(scale > 0.0 && decay > 0.0, "ensemble scale and decay must be positive");
  require(groups.empty() || static_cast<Index>(groups.size()) == n, "group list size");
  Vector b(n);
  for (Index i = 0; i < n; ++i) {
    b(i) = boundary_weight ? boundary_weight(node_coords.row(i).transpose()) : 1.0;
  }
  Matrix sigma(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j <= i; ++j) {
      double value = 0.0;
      if (groups.empty() || groups[i] == groups[j]) {
        const double d2 = (node_coords.row(i) - node_coords.row(j)).squaredNorm();
        value = scale * b(i) * b(j) * std::exp(-decay * d2);
      }
      sigma(i, j) = value;
      sigma(j, i) = value;
    }
  }
  return sigma;
}

GaussianSampler::GaussianSampler(const GaussianEnsemble& ensemble) : mean_(ensemble.mean) {
  require(mean_.size() == ensemble.dim(), "ensemble mean has wrong dimension");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(ensemble.covariance());
  if (eig.info() != Eigen::Success) throw SolverError("covariance eigendecomposition failed");
  Vector root = eig.eigenvalues();
  for (Index i = 0; i < root.size(); ++i) {
    if (root(i) < 0.0) {
      root(i) = 0.0;
      ++clipped_;
    } else {
      root(i) = std::sqrt(root(i));
    }
  }
  factor_ = eig.eigenvectors() * root.asDiagonal();
}

std::vector<Vector> GaussianSampler::sample(int count, std::uint64_t seed) const {
  require(count >= 1, "sample count must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Vector> out;
  out.reserve(static_cast<std::size_t>(count));
  Vector z(factor_.cols());
  for (int s = 0; s < count; ++s) {
    for (Index i = 0; i < z.size(); ++i) z(i) = normal(rng);
    out.push_back(mean_ + factor_ * z);
  }
  return out;
}

std::vector<Vector> sample_initial(const GaussianEnsemble& ensemble, int count,
                                   std::uint64_t seed) {
  return GaussianSampler(ensemble).sample(count, seed);
}

struct TimeStepper::LinearSolve {
  Eigen::SparseLU<SparseMatrix> lu;
  Matrix input;
};

TimeStepper::TimeStepper(const SeparableControlSystem& sys, Vector mu, StepperConfig cfg,
                         NewtonOptions newton)
    : sys_(&sys), mu_(std::move(mu)), cfg_(cfg), newton_(newton) {
  require(cfg_.dt > 0.0, "time step must be positive");
  if (cfg_.scheme == Scheme::implicit_euler && sys.is_linear()) {
    linear_ = std::make_unique<LinearSolve>();
    SparseMatrix I(sys.state_dim(), sys.state_dim());
    I.setIdentity();
    SparseMatrix lhs = I - cfg_.dt * sys.linear_operator(mu_);
    lhs.makeCompressed();
    linear_->lu.compute(lhs);
    if (linear_->lu.info() != Eigen::Success) throw SolverError("implicit Euler matrix is singular");
    linear_->input = sys.control_matrix(Vector::Zero(sys.state_dim()), mu_);
  }
}

TimeStepper::~TimeStepper() = default;
TimeStepper::TimeStepper(TimeStepper&&) noexcept = default;

Vector TimeStepper::step(const Vector& y, const Vector& u) const {
  if (cfg_.scheme == Scheme::explicit_euler) return y + cfg_.dt * sys_->eval(y, u, mu_);
  if (linear_) {
    require(y.size() == sys_->state_dim() && u.size() == sys_->control_dim(), "step dimensions");
    Vector rhs = y + cfg_.dt * (linear_->input * u);
    return linear_->lu.solve(rhs);
  }
  return newton_step(y, u);
}

Vector TimeStepper::newton_step(const Vector& y, const Vector& u) const {
  const Index n = y.size();
  SparseMatrix I(n, n);
  I.setIdentity();
  auto residual = [&](const Vector& z) -> Vector {
    return z - y - cfg_.dt * sys_->eval(z, u, mu_);
  };
  const double tol = newton_.tolerance * std::max(1.0, y.lpNorm<Eigen::Infinity>());
  Vector z = y;
  Vector r = residual(z);
  double rnorm = r.lpNorm<Eigen::Infinity>();
  int it = 0;
  for (; it < newton_.max_iterations && rnorm > tol; ++it) {
    SparseMatrix J = I - cfg_.dt * sys_->state_jacobian(z, u, mu_);
    J.makeCompressed();
    Eigen::SparseLU<SparseMatrix> lu(J);
    if (lu.info() != Eigen::Success) break;
    const Vector delta = lu.solve(-r);
    double alpha = 1.0;
    for (int halving = 0; halving < 20; ++halving) {
      const Vector trial = z + alpha * delta;
      const Vector rt = residual(trial);
      const double tn = rt.lpNorm<Eigen::Infinity>();
      if (std::isfinite(tn) && (tn < rnorm || halving == 19)) {
        z = trial;
        r = rt;
        rnorm = tn;
        break;
      }
      alpha *= 0.5;
    }
  }
  if (!(rnorm <= tol)) {
    std::ostringstream msg;
    msg << "implicit Euler Newton solve did not converge: " << it << " iterations, residual "
        << rnorm << " > " << tol;
    throw SolverError(msg.str());
  }
  return z;
}

Vector step(const SeparableControlSystem& sys, const Vector& y, const Vector& u,
            const Vector& mu, const StepperConfig& cfg) {
  return TimeStepper(sys, mu, cfg).step(y, u);
}

Policy zero_policy(Index m) {
  return [m](double, const Vector&) -> Vector { return Vector::Zero(m); };
}

namespace {

int step_count(double horizon, double dt) {
  require(horizon > 0.0, "horizon must be positive");
  const double ratio = horizon / dt;
  const double rounded = std::round(ratio);
  require(rounded >= 1.0 && std::abs(ratio - rounded) <= 1e-9 * std::max(1.0, ratio),
          "horizon must be a positive multiple of the time step");
  return static_cast<int>(rounded);
}

bool escaped(const Vector& y) {
  const double norm = y.norm();
  return !std::isfinite(norm) || norm > kOverflowGuard;
}

}  // namespace

Trajectory simulate(const SeparableControlSystem& sys, const Vector& x, const Policy& policy,
                    const Vector& mu, const StepperConfig& cfg, double horizon) {
  const int steps = step_count(horizon, cfg.dt);
  const TimeStepper stepper(sys, mu, cfg);
  Trajectory traj;
  traj.dt = cfg.dt;
  traj.times.reserve(steps + 1);
  traj.states.reserve(steps + 1);
  traj.controls.reserve(steps);
  traj.times.push_back(0.0);
  traj.states.push_back(x);
  Vector y = x;
  for (int k = 0; k < steps; ++k) {
    const double t = k * cfg.dt;
    Vector u = policy(t, y);
    y = stepper.step(y, u);
    if (escaped(y)) {
      std::ostringstream msg;
      msg << "trajectory diverged at t=" << (k + 1) * cfg.dt;
      throw DivergenceError(msg.str());
    }
    traj.controls.push_back(std::move(u));
    traj.states.push_back(y);
    traj.times.push_back((k + 1) * cfg.dt);
  }
  return traj;
}

double discounted_cost(const QuadraticCost& cost, const Trajectory& trajectory,
                       const Vector& mu) {
  require(!trajectory.states.empty(), "trajectory must not be empty");
  double J = 0.0;
  for (std::size_t k = 0; k < trajectory.controls.size(); ++k) {
    const double t = trajectory.times[k];
    J += trajectory.dt * std::exp(-cost.discount * t) *
         cost.running(trajectory.states[k], trajectory.controls[k], mu);
  }
  return J;
}

CostRun simulate_cost(const TimeStepper& stepper, const QuadraticCost& cost, const Vector& x,
                      const Policy& policy, const CostRunOptions& options) {
  const double dt = stepper.config().dt;
  const Vector& mu = stepper.parameter();
  const double lambda = cost.discount;
  const double tail_factor = lambda > 0.0 ? dt / (-std::expm1(-lambda * dt))
                                          : std::numeric_limits<double>::infinity();
  const int max_steps = static_cast<int>(std::round(options.max_horizon / dt));
  CostRun run;
  Vector y = x;
  for (int k = 0; k < max_steps; ++k) {
    const double t = k * dt;
    const Vector u = policy(t, y);
    const double weight = std::exp(-lambda * t);
    const double g = cost.running(y, u, mu);
    run.cost += dt * weight * g;
    run.steps = k + 1;
    run.horizon = (k + 1) * dt;
    if (run.cost > 0.0 && weight * g * tail_factor < options.tail_tol * run.cost) break;
    y = stepper.step(y, u);
    if (escaped(y)) {
      run.diverged = true;
      run.cost = std::numeric_limits<double>::infinity();
      break;
    }
  }
  return run;
}

Linearization linearize(const SeparableControlSystem& sys, const Vector& ybar,
                        const Vector& ubar, const Vector& mu) {
  Linearization lin;
  lin.A = Matrix(sys.state_jacobian(ybar, ubar, mu));
  lin.B = sys.control_matrix(ybar, mu);
  return lin;
}

}  // namespace hjbrom
