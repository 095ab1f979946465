#include "hjbrom/hjb.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseLU>

#include <algorithm>
#include <limits>

namespace hjbrom {

void SLConfig::validate() const {
  require(dt > 0.0, "SL time step must be positive");
  require(discount > 0.0, "SL discount must be positive");
  require(vi_tol > 0.0 && pi_tol > 0.0 && pe_tol > 0.0, "SL tolerances must be positive");
  require(vi_max_iter >= 1 && pi_max_iter >= 1, "SL iteration limits must be positive");
  require(beta() < 1.0, "e^{-λΔt} must be below one");
}

namespace {

inline bool axis_cell(const std::vector<double>& s, double x, Index& cell, double& t) {
  if (!(x >= s.front() && x <= s.back())) return false;
  auto it = std::upper_bound(s.begin(), s.end(), x);
  Index c = static_cast<Index>(it - s.begin()) - 1;
  c = std::min<Index>(c, static_cast<Index>(s.size()) - 2);
  cell = c;
  t = (x - s[c]) / (s[c + 1] - s[c]);
  return true;
}

/// Precomputed control quantities shared by every node.
struct ControlData {
  Matrix values;       // m × K
  Vector cost;         // Δt uᵀ R u
  Matrix increment;    // Δt G u_k, ℓ × K (constant G only)
};

ControlData control_data(const NodeData& data, const ControlGrid& controls, const SLConfig& cfg) {
  const Index m = data.control_weight.rows();
  require(controls.dim() == m, "control grid dimension does not match the system");
  const Index K = static_cast<Index>(controls.size());
  ControlData cd;
  cd.values.resize(m, K);
  for (Index k = 0; k < K; ++k) cd.values.col(k) = controls[static_cast<std::size_t>(k)];
  cd.cost = cfg.dt * (cd.values.array() * (data.control_weight * cd.values).array()).colwise().sum().transpose();
  if (!data.per_control() && !data.node_dependent_control()) cd.increment = cfg.dt * (data.control.leftCols(m) * cd.values);
  return cd;
}

void check_node_data(const NodeData& data, Index l, Index H, Index K) {
  require(data.state_cost.size() == H, "node data does not match the grid");
  if (data.per_control()) {
    require(data.increments.rows() == l && data.increments.cols() == H * K,
            "per-control node data does not match the grid and control set");
  } else {
    require(data.drift.rows() == l && data.drift.cols() == H, "node data does not match the grid");
  }
}

double stencil_value(const Stencil& st, const Vector& values) {
  double v = 0.0;
  for (int k = 0; k < st.count; ++k) v += st.weight[k] * values(st.index[k]);
  return v;
}

}  // namespace

bool interpolation_stencil(const TensorGrid& grid, const double* x, Stencil& st) {
  const Index l = grid.dim();
  require(l <= kMaxReducedDim, "reduced dimension exceeds the interpolation limit");
  st.count = 1;
  st.index[0] = 0;
  st.weight[0] = 1.0;
  const auto& strides = grid.strides();
  for (Index j = 0; j < l; ++j) {
    Index c = 0;
    double t = 0.0;
    if (!axis_cell(grid.axis(j).nodes, x[j], c, t)) {
      st.count = 0;
      return false;
    }
    const Index lo = c * strides[j];
    const Index hi = (c + 1) * strides[j];
    if (t == 0.0 || t == 1.0) {
      const Index off = t == 0.0 ? lo : hi;
      for (int k = 0; k < st.count; ++k) st.index[k] += off;
      continue;
    }
    const int n = st.count;
    for (int k = 0; k < n; ++k) {
      st.index[n + k] = st.index[k] + hi;
      st.weight[n + k] = st.weight[k] * t;
      st.index[k] += lo;
      st.weight[k] *= 1.0 - t;
    }
    st.count = 2 * n;
  }
  return true;
}

double interpolate(const ValueField& field, const Vector& x) {
  require(x.size() == field.grid.dim(), "query point has wrong dimension");
  Stencil st;
  if (!interpolation_stencil(field.grid, x.data(), st)) return field.penalty;
  return stencil_value(st, field.values);
}

double interpolate_clamped(const ValueField& field, const Vector& x) {
  const Vector clamped = x.cwiseMax(field.grid.lower()).cwiseMin(field.grid.upper());
  Stencil st;
  interpolation_stencil(field.grid, clamped.data(), st);
  return stencil_value(st, field.values);
}

double default_penalty(const NodeData& data, const ControlGrid& controls, const SLConfig& cfg) {
  const ControlData cd = control_data(data, controls, cfg);
  const double g_max = data.state_cost.maxCoeff() + cd.cost.maxCoeff() / cfg.dt;
  return 10.0 * cfg.dt * g_max / (1.0 - cfg.beta());
}

ValueField initial_field(const TensorGrid& grid, const NodeData& data, const ControlGrid& controls,
                         const SLConfig& cfg) {
  cfg.validate();
  ValueField field{grid, Vector::Zero(grid.size()), cfg.penalty};
  if (!(cfg.penalty > 0.0)) field.penalty = default_penalty(data, controls, cfg);
  return field;
}

SweepResult vi_sweep(const ValueField& field, const NodeData& data, const ControlGrid& controls,
                     const SLConfig& cfg) {
  const TensorGrid& grid = field.grid;
  const Index H = grid.size();
  const Index l = grid.dim();
  require(field.values.size() == H, "value field size does not match its grid");
  const ControlData cd = control_data(data, controls, cfg);
  const Index K = cd.values.cols();
  check_node_data(data, l, H, K);
  const double beta = cfg.beta();
  const double outside = beta * field.penalty;

  SweepResult out;
  out.values.resize(H);
  out.policy.assign(static_cast<std::size_t>(H), 0);
  const Matrix X = grid.nodes();
  Matrix increment;
  Vector base(l), foot(l);
  Stencil st;
  for (Index i = 0; i < H; ++i) {
    const Matrix* inc = &cd.increment;
    if (data.per_control()) {
      base = X.col(i);
      increment = cfg.dt * data.increments.middleCols(i * K, K);
      inc = &increment;
    } else {
      base = X.col(i) + cfg.dt * data.drift.col(i);
      if (data.node_dependent_control()) {
        increment = cfg.dt * (data.control_at(i) * cd.values);
        inc = &increment;
      }
    }
    const double node_cost = cfg.dt * data.state_cost(i);
    double best = std::numeric_limits<double>::infinity();
    int arg = 0;
    for (Index k = 0; k < K; ++k) {
      foot = base + inc->col(k);
      const double v = interpolation_stencil(grid, foot.data(), st)
                           ? beta * stencil_value(st, field.values)
                           : outside;
      const double total = v + node_cost + cd.cost(k);
      if (total < best) {
        best = total;
        arg = static_cast<int>(k);
      }
    }
    out.values(i) = best;
    out.policy[static_cast<std::size_t>(i)] = arg;
  }
  return out;
}

SolveReport value_iteration(ValueField initial, const NodeDynamics& dynamics,
                            const ControlGrid& controls, const SLConfig& cfg) {
  cfg.validate();
  SolveReport report;
  report.field = std::move(initial);
  report.residual = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= cfg.vi_max_iter; ++it) {
    SweepResult next = vi_sweep(report.field, dynamics.evaluate(), controls, cfg);
    report.residual = (next.values - report.field.values).lpNorm<Eigen::Infinity>();
    report.field.values = std::move(next.values);
    report.policy = std::move(next.policy);
    report.iterations = it;
    if (report.residual <= cfg.vi_tol) {
      report.converged = true;
      break;
    }
  }
  return report;
}

Vector policy_evaluation(const ValueField& field, const NodeData& data, const ControlGrid& controls,
                         const std::vector<int>& policy, const SLConfig& cfg, double* residual) {
  const TensorGrid& grid = field.grid;
  const Index H = grid.size();
  const Index l = grid.dim();
  require(static_cast<Index>(policy.size()) == H, "policy size does not match the grid");
  const ControlData cd = control_data(data, controls, cfg);
  check_node_data(data, l, H, cd.values.cols());
  const double beta = cfg.beta();

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(H) * ((std::size_t{1} << l) + 1));
  const Matrix X = grid.nodes();
  Vector rhs(H);
  Vector foot(l);
  Stencil st;
  for (Index i = 0; i < H; ++i) {
    const int k = policy[static_cast<std::size_t>(i)];
    require(k >= 0 && k < static_cast<int>(controls.size()), "policy control index out of range");
    if (data.per_control()) {
      foot = X.col(i) + cfg.dt * data.increments.col(i * cd.values.cols() + k);
    } else {
      foot = X.col(i) + cfg.dt * data.drift.col(i);
      if (data.node_dependent_control()) {
        foot += cfg.dt * (data.control_at(i) * cd.values.col(k));
      } else {
        foot += cd.increment.col(k);
      }
    }
    rhs(i) = cfg.dt * data.state_cost(i) + cd.cost(k);
    triplets.emplace_back(i, i, 1.0);
    if (interpolation_stencil(grid, foot.data(), st)) {
      for (int c = 0; c < st.count; ++c) triplets.emplace_back(i, st.index[c], -beta * st.weight[c]);
    } else {
      rhs(i) += beta * field.penalty;
    }
  }
  Eigen::SparseMatrix<double, Eigen::RowMajor> A(H, H);
  A.setFromTriplets(triplets.begin(), triplets.end());

  const double target = cfg.pe_tol * std::max(1.0, rhs.lpNorm<Eigen::Infinity>());
  auto res_of = [&](const Vector& v) { return (A * v - rhs).lpNorm<Eigen::Infinity>(); };

  Vector V = field.values.size() == H ? field.values : Vector::Zero(H);
  double res = std::numeric_limits<double>::infinity();
  if (H <= cfg.direct_solve_max) {
    const SparseMatrix Ac(A);
    Eigen::SparseLU<SparseMatrix> lu;
    lu.analyzePattern(Ac);
    lu.factorize(Ac);
    if (lu.info() == Eigen::Success) {
      Vector sol = lu.solve(rhs);
      if (sol.allFinite()) {
        V = std::move(sol);
        res = res_of(V);
      }
    }
  }
  if (!(res <= target)) {
    Eigen::BiCGSTAB<Eigen::SparseMatrix<double, Eigen::RowMajor>, Eigen::IncompleteLUT<double>> solver;
    solver.preconditioner().setDroptol(1e-2);
    solver.preconditioner().setFillfactor(2);
    solver.setTolerance(1e-14);
    solver.setMaxIterations(4000);
    solver.compute(A);
    if (solver.info() == Eigen::Success) {
      Vector sol = solver.solveWithGuess(rhs, V);
      if (sol.allFinite()) {
        const double r = res_of(sol);
        if (r < res) {
          V = std::move(sol);
          res = r;
        }
      }
    }
  }
  if (!(res <= target)) {
    // Richardson on the contraction V = βMV + b.
    if (!std::isfinite(res)) res = res_of(V);
    for (int it = 0; it < 200000 && res > target; ++it) {
      V -= A * V - rhs;
      if (it % 50 == 49) res = res_of(V);
    }
    res = res_of(V);
  }
  if (residual) *residual = res;
  return V;
}

SolveReport policy_iteration(ValueField initial, const NodeDynamics& dynamics,
                             const ControlGrid& controls, const SLConfig& cfg) {
  cfg.validate();
  SolveReport report;
  report.field = std::move(initial);
  report.residual = std::numeric_limits<double>::infinity();
  NodeData data = dynamics.evaluate();
  std::vector<int> policy = vi_sweep(report.field, data, controls, cfg).policy;
  for (int it = 1; it <= cfg.pi_max_iter; ++it) {
    Vector V = policy_evaluation(report.field, data, controls, policy, cfg);
    report.residual = (V - report.field.values).lpNorm<Eigen::Infinity>();
    report.field.values = std::move(V);
    report.iterations = it;
    report.policy = policy;
    data = dynamics.evaluate();
    std::vector<int> next = vi_sweep(report.field, data, controls, cfg).policy;
    if (next == policy || report.residual <= cfg.pi_tol) {
      report.converged = true;
      break;
    }
    policy = std::move(next);
  }
  return report;
}

ValueField transfer(const ValueField& coarse, const TensorGrid& fine) {
  require(fine.dim() == coarse.grid.dim(), "grids have different dimensions");
  ValueField out{fine, Vector(fine.size()), coarse.penalty};
  for (Index k = 0; k < fine.size(); ++k) out.values(k) = interpolate_clamped(coarse, fine.node(k));
  return out;
}

HjbController::HjbController(ValueField field, const ReducedBasis& basis,
                             const SeparableControlSystem& sys, const QuadraticCost& cost,
                             const ControlGrid& controls, Vector mu, SLConfig cfg)
    : field_(std::move(field)),
      basis_(&basis),
      sys_(&sys),
      cost_(&cost),
      controls_(&controls),
      mu_(std::move(mu)),
      cfg_(cfg),
      saturated_(std::make_shared<long>(0)) {
  require(basis.size() == field_.grid.dim(), "value field does not match the basis");
  require(controls.dim() == sys.control_dim(), "control grid does not match the system");
  const Matrix R = cost.control_weight(mu_);
  control_cost_.resize(static_cast<Index>(controls.size()));
  for (std::size_t k = 0; k < controls.size(); ++k) {
    control_cost_(static_cast<Index>(k)) = controls[k].dot(R * controls[k]);
  }
}

std::size_t HjbController::index(const Vector& x) const {
  const Matrix& psi = basis_->matrix();
  const Vector xr = psi.transpose() * x;
  const Vector dr = psi.transpose() * sys_->drift(x, mu_);
  const Matrix Fr = psi.transpose() * sys_->control_matrix(x, mu_);
  const double state = cost_->state_cost(x, mu_);
  const double beta = cfg_.beta();
  const Vector base = xr + cfg_.dt * dr;
  double best = std::numeric_limits<double>::infinity();
  std::size_t arg = 0;
  bool any_inside = false;
  Vector foot(xr.size());
  Stencil st;
  for (std::size_t k = 0; k < controls_->size(); ++k) {
    foot = base + cfg_.dt * (Fr * (*controls_)[k]);
    double v = beta * field_.penalty;
    if (interpolation_stencil(field_.grid, foot.data(), st)) {
      v = beta * stencil_value(st, field_.values);
      any_inside = true;
    }
    const double total = v + cfg_.dt * (state + control_cost_(static_cast<Index>(k)));
    if (total < best) {
      best = total;
      arg = k;
    }
  }
  if (!any_inside) ++*saturated_;
  return arg;
}

Vector HjbController::operator()(double, const Vector& x) const { return (*controls_)[index(x)]; }

Policy HjbController::policy() const {
  auto self = std::make_shared<HjbController>(*this);
  return [self](double t, const Vector& x) { return (*self)(t, x); };
}

}  // namespace hjbrom
