#include "hjbrom/reduced.hpp"

namespace hjbrom {

Vector project_state(const ReducedBasis& basis, const Vector& x) {
  require(x.size() == basis.full_dim(), "state length does not match the basis");
  return basis.matrix().transpose() * x;
}

ReducedSystem::ReducedSystem(const SeparableControlSystem& sys, const QuadraticCost& cost,
                             const ReducedBasis& basis)
    : sys_(&sys), cost_(&cost), basis_(&basis) {
  require(basis.full_dim() == sys.state_dim(), "basis does not match the system dimension");
}

Vector ReducedSystem::rhs(const Vector& x, const Vector& u, const Vector& mu) const {
  const Matrix& psi = basis_->matrix();
  return psi.transpose() * sys_->eval(psi * x, u, mu);
}

double ReducedSystem::running_cost(const Vector& x, const Vector& u, const Vector& mu) const {
  return cost_->running(basis_->matrix() * x, u, mu);
}

Matrix ReducedSystem::reduced_operator(std::size_t term) const {
  const auto& t = sys_->drift_terms().at(term);
  require(t.linear.has_value(), "reduced operator requested for a nonlinear term");
  const Matrix& psi = basis_->matrix();
  return psi.transpose() * (*t.linear * psi);
}

TermCoefficients coefficients(const SeparableControlSystem& sys, const QuadraticCost& cost,
                              const Vector& mu) {
  TermCoefficients theta;
  theta.drift.resize(static_cast<Index>(sys.drift_terms().size()));
  for (std::size_t q = 0; q < sys.drift_terms().size(); ++q) {
    theta.drift(static_cast<Index>(q)) = sys.drift_terms()[q].coefficient(mu);
  }
  theta.control.resize(static_cast<Index>(sys.control_terms().size()));
  for (std::size_t q = 0; q < sys.control_terms().size(); ++q) {
    theta.control(static_cast<Index>(q)) = sys.control_terms()[q].coefficient(mu);
  }
  theta.state.resize(static_cast<Index>(cost.state_terms.size()));
  for (std::size_t q = 0; q < cost.state_terms.size(); ++q) {
    theta.state(static_cast<Index>(q)) = cost.state_terms[q].coefficient(mu);
  }
  theta.control_weight = cost.control_weight(mu);
  return theta;
}

EvaluationTable build_tables(const SeparableControlSystem& sys, const QuadraticCost& cost,
                             const ReducedBasis& basis, const TensorGrid& grid) {
  require(grid.dim() == basis.size(), "grid dimension does not match the basis size");
  require(basis.full_dim() == sys.state_dim(), "basis does not match the system dimension");
  const Matrix& psi = basis.matrix();
  const Matrix X = grid.nodes();
  const Index H = X.cols();
  const Index m = sys.control_dim();

  EvaluationTable table;
  table.reduced_dim = basis.size();
  table.control_dim = m;
  table.nodes = H;

  for (const auto& term : sys.drift_terms()) {
    if (term.linear) {
      const Matrix reduced = psi.transpose() * (*term.linear * psi);
      table.drift.push_back(reduced * X);
      continue;
    }
    Matrix D(basis.size(), H);
    for (Index j = 0; j < H; ++j) D.col(j) = psi.transpose() * term.field(psi * X.col(j));
    table.drift.push_back(std::move(D));
  }

  for (const auto& term : sys.control_terms()) {
    if (term.constant) {
      table.control.push_back(psi.transpose() * *term.constant);
      continue;
    }
    Matrix G(basis.size(), m * H);
    for (Index j = 0; j < H; ++j) G.middleCols(j * m, m) = psi.transpose() * term.field(psi * X.col(j));
    table.control.push_back(std::move(G));
  }

  for (const auto& term : cost.state_terms) {
    const Matrix out = term.output * psi;
    const Matrix Z = out * X;
    const Matrix WZ = term.weight.size() == 0 ? Z : Matrix(term.weight * Z);
    table.state_cost.push_back((Z.array() * WZ.array()).colwise().sum().transpose());
  }
  return table;
}

Vector reduced_rhs(const EvaluationTable& table, const TermCoefficients& theta, Index j,
                   const Vector& u) {
  require(j >= 0 && j < table.nodes, "table node index out of range");
  require(u.size() == table.control_dim, "control has wrong length");
  Vector r = Vector::Zero(table.reduced_dim);
  for (std::size_t q = 0; q < table.drift.size(); ++q) {
    r += theta.drift(static_cast<Index>(q)) * table.drift[q].col(j);
  }
  const Index m = table.control_dim;
  for (std::size_t q = 0; q < table.control.size(); ++q) {
    const auto G = table.control_node_dependent(q) ? table.control[q].middleCols(j * m, m)
                                                   : table.control[q].leftCols(m);
    r += theta.control(static_cast<Index>(q)) * (G * u);
  }
  return r;
}

TableDynamics::TableDynamics(const EvaluationTable& table, TermCoefficients theta)
    : table_(&table), theta_(std::move(theta)) {
  require(theta_.drift.size() == static_cast<Index>(table.drift.size()) &&
              theta_.control.size() == static_cast<Index>(table.control.size()) &&
              theta_.state.size() == static_cast<Index>(table.state_cost.size()),
          "coefficients do not match the table terms");
}

NodeData TableDynamics::evaluate() const {
  const auto& t = *table_;
  NodeData data;
  data.drift = Matrix::Zero(t.reduced_dim, t.nodes);
  for (std::size_t q = 0; q < t.drift.size(); ++q) {
    data.drift.noalias() += theta_.drift(static_cast<Index>(q)) * t.drift[q];
  }
  bool node_dependent = false;
  for (std::size_t q = 0; q < t.control.size(); ++q) node_dependent |= t.control_node_dependent(q);
  const Index m = t.control_dim;
  data.control = Matrix::Zero(t.reduced_dim, node_dependent ? m * t.nodes : m);
  for (std::size_t q = 0; q < t.control.size(); ++q) {
    const double c = theta_.control(static_cast<Index>(q));
    if (t.control_node_dependent(q) || !node_dependent) {
      data.control.noalias() += c * t.control[q];
    } else {
      for (Index j = 0; j < t.nodes; ++j) data.control.middleCols(j * m, m) += c * t.control[q];
    }
  }
  data.state_cost = Vector::Zero(t.nodes);
  for (std::size_t q = 0; q < t.state_cost.size(); ++q) {
    data.state_cost += theta_.state(static_cast<Index>(q)) * t.state_cost[q];
  }
  data.control_weight = theta_.control_weight;
  return data;
}

DirectDynamics::DirectDynamics(const SeparableControlSystem& sys, const QuadraticCost& cost,
                               const ReducedBasis& basis, const TensorGrid& grid, Vector mu,
                               const ControlGrid* controls)
    : sys_(&sys), cost_(&cost), basis_(&basis), nodes_(grid.nodes()), mu_(std::move(mu)), controls_(controls) {
  require(grid.dim() == basis.size(), "grid dimension does not match the basis size");
  require(!controls || controls->dim() == sys.control_dim(), "control grid does not match the system");
}

NodeData DirectDynamics::evaluate() const {
  const Matrix& psi = basis_->matrix();
  const Index H = nodes_.cols();
  const Index m = sys_->control_dim();
  NodeData data;
  data.state_cost.resize(H);
  data.control_weight = cost_->control_weight(mu_);
  if (controls_) {
    const Index K = static_cast<Index>(controls_->size());
    data.increments.resize(nodes_.rows(), H * K);
    for (Index j = 0; j < H; ++j) {
      const Vector y = psi * nodes_.col(j);
      for (Index k = 0; k < K; ++k) {
        data.increments.col(j * K + k) =
            psi.transpose() * sys_->eval(y, (*controls_)[static_cast<std::size_t>(k)], mu_);
      }
      data.state_cost(j) = cost_->state_cost(y, mu_);
    }
    return data;
  }
  data.drift.resize(nodes_.rows(), H);
  data.control.resize(nodes_.rows(), m * H);
  for (Index j = 0; j < H; ++j) {
    const Vector y = psi * nodes_.col(j);
    data.drift.col(j) = psi.transpose() * sys_->drift(y, mu_);
    data.control.middleCols(j * m, m) = psi.transpose() * sys_->control_matrix(y, mu_);
    data.state_cost(j) = cost_->state_cost(y, mu_);
  }
  return data;
}

}  // namespace hjbrom
