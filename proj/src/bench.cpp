#include "hjbrom/bench.hpp"

#include <cmath>
#include <vector>

namespace hjbrom {

Matrix SquareGrid::coordinates() const {
  Matrix X(size(), 2);
  for (int j = 0; j < N; ++j) {
    for (int i = 0; i < N; ++i) {
      X(index(i, j), 0) = (i + 1) * h();
      X(index(i, j), 1) = (j + 1) * h();
    }
  }
  return X;
}

SparseMatrix laplacian(const SquareGrid& grid) {
  const int N = grid.N;
  const double s = 1.0 / (grid.h() * grid.h());
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(static_cast<std::size_t>(5 * grid.size()));
  for (int j = 0; j < N; ++j) {
    for (int i = 0; i < N; ++i) {
      const Index p = grid.index(i, j);
      t.emplace_back(p, p, -4.0 * s);
      if (i > 0) t.emplace_back(p, grid.index(i - 1, j), s);
      if (i + 1 < N) t.emplace_back(p, grid.index(i + 1, j), s);
      if (j > 0) t.emplace_back(p, grid.index(i, j - 1), s);
      if (j + 1 < N) t.emplace_back(p, grid.index(i, j + 1), s);
    }
  }
  SparseMatrix L(grid.size(), grid.size());
  L.setFromTriplets(t.begin(), t.end());
  return L;
}

SparseMatrix upwind_advection(const SquareGrid& grid,
                              const std::function<Vector(double, double)>& velocity) {
  const int N = grid.N;
  const double inv_h = 1.0 / grid.h();
  std::vector<Eigen::Triplet<double>> t;
  for (int j = 0; j < N; ++j) {
    for (int i = 0; i < N; ++i) {
      const Index p = grid.index(i, j);
      const Vector a = velocity((i + 1) * grid.h(), (j + 1) * grid.h());
      const int pos[2] = {i, j};
      for (int k = 0; k < 2; ++k) {
        const double c = a(k) * inv_h;
        if (c == 0.0) continue;
        const int step = c > 0.0 ? -1 : 1;  // upwind neighbour
        const int q = pos[k] + step;
        t.emplace_back(p, p, c > 0.0 ? c : -c);
        if (q >= 0 && q < N) {
          const Index nb = k == 0 ? grid.index(q, j) : grid.index(i, q);
          t.emplace_back(p, nb, c > 0.0 ? -c : c);
        }
      }
    }
  }
  SparseMatrix V(grid.size(), grid.size());
  V.setFromTriplets(t.begin(), t.end());
  return V;
}

Vector indicator(const SquareGrid& grid, const std::function<bool(double, double)>& inside) {
  Vector v = Vector::Zero(grid.size());
  for (int j = 0; j < grid.N; ++j) {
    for (int i = 0; i < grid.N; ++i) {
      if (inside((i + 1) * grid.h(), (j + 1) * grid.h())) v(grid.index(i, j)) = 1.0;
    }
  }
  return v;
}

namespace {

double tent(const Vector& xi) {
  return (-4.0 * (xi(0) - 0.5) * (xi(0) - 0.5) + 1.0) * (-4.0 * (xi(1) - 0.5) * (xi(1) - 0.5) + 1.0);
}

SparseMatrix row_matrix(const Vector& v) {
  SparseMatrix C(1, v.size());
  for (Index p = 0; p < v.size(); ++p) {
    if (v(p) != 0.0) C.insert(0, p) = v(p);
  }
  C.makeCompressed();
  return C;
}

void check_resolution(int resolution) {
  require(resolution >= 10, "benchmark resolution must be at least 10 nodes per axis");
}

/// -(w·∇)w with per-node upwinding; w = (w1, w2) stacked.
struct Convection {
  SquareGrid grid;

  [[nodiscard]] double diff(const Vector& v, Index offset, int i, int j, int k, double a) const {
    const int N = grid.N;
    auto at = [&](int ii, int jj) {
      return (ii < 0 || ii >= N || jj < 0 || jj >= N) ? 0.0 : v(offset + grid.index(ii, jj));
    };
    const double c = at(i, j);
    const double inv_h = 1.0 / grid.h();
    if (a >= 0.0) return k == 0 ? (c - at(i - 1, j)) * inv_h : (c - at(i, j - 1)) * inv_h;
    return k == 0 ? (at(i + 1, j) - c) * inv_h : (at(i, j + 1) - c) * inv_h;
  }

  [[nodiscard]] Vector field(const Vector& y) const {
    const Index n = grid.size();
    Vector out(2 * n);
    for (int j = 0; j < grid.N; ++j) {
      for (int i = 0; i < grid.N; ++i) {
        const Index p = grid.index(i, j);
        const double a[2] = {y(p), y(n + p)};
        for (int comp = 0; comp < 2; ++comp) {
          double conv = 0.0;
          for (int k = 0; k < 2; ++k) conv += a[k] * diff(y, comp * n, i, j, k, a[k]);
          out(comp * n + p) = -conv;
        }
      }
    }
    return out;
  }

  [[nodiscard]] SparseMatrix jacobian(const Vector& y) const {
    const Index n = grid.size();
    const int N = grid.N;
    const double inv_h = 1.0 / grid.h();
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(static_cast<std::size_t>(12 * n));
    for (int j = 0; j < N; ++j) {
      for (int i = 0; i < N; ++i) {
        const Index p = grid.index(i, j);
        const double a[2] = {y(p), y(n + p)};
        for (int comp = 0; comp < 2; ++comp) {
          const Index row = comp * n + p;
          for (int k = 0; k < 2; ++k) {
            // d/d a_k of a_k·D_k w_comp
            t.emplace_back(row, k * n + p, -diff(y, comp * n, i, j, k, a[k]));
            // a_k · d/dw_comp of the one-sided difference
            const int step = a[k] >= 0.0 ? -1 : 1;
            const double self = a[k] >= 0.0 ? inv_h : -inv_h;
            t.emplace_back(row, comp * n + p, -a[k] * self);
            const int ii = k == 0 ? i + step : i;
            const int jj = k == 1 ? j + step : j;
            if (ii >= 0 && ii < N && jj >= 0 && jj < N) {
              t.emplace_back(row, comp * n + grid.index(ii, jj), a[k] * self);
            }
          }
        }
      }
    }
    SparseMatrix J(2 * n, 2 * n);
    J.setFromTriplets(t.begin(), t.end());
    return J;
  }
};

}  // namespace

Benchmark build_test1(int resolution) {
  check_resolution(resolution);
  const SquareGrid grid{resolution};
  const Index n = grid.size();
  const SparseMatrix L = laplacian(grid);
  const SparseMatrix V = upwind_advection(grid, [](double x1, double x2) {
    Vector a(2);
    a << -(x2 - 0.5), x1 - 0.5;
    return a;
  });
  const Vector b = indicator(grid, [](double x1, double x2) {
    return x1 >= 0.5 && x1 <= 0.9 && x2 >= 0.5 && x2 <= 0.9;
  });
  Vector c = indicator(grid, [](double x1, double x2) {
    return x1 >= 0.1 && x1 <= 0.4 && x2 >= 0.1 && x2 <= 0.4;
  });
  c /= c.sum();

  std::vector<DriftTerm> drift;
  drift.push_back(DriftTerm::linear_term(parameter_component(0), L));
  drift.push_back(DriftTerm::linear_term([](const Vector& mu) { return -mu(1); }, V));
  std::vector<ControlTerm> control;
  control.push_back(ControlTerm::constant_term(constant_coefficient(1.0), Matrix(b)));

  QuadraticCost cost;
  cost.state_terms.push_back({constant_coefficient(1.0), row_matrix(c), Matrix::Constant(1, 1, 10.0)});
  cost.control_weight = [](const Vector&) { return Matrix::Constant(1, 1, 1e-2); };
  cost.discount = 1e-3;

  GaussianEnsemble ens;
  ens.node_coords = grid.coordinates();
  ens.mean = Vector::Zero(n);
  ens.scale = 1e-3;
  ens.decay = 2.0;
  ens.boundary_weight = tent;

  Vector lo(2), hi(2);
  lo << 0.05, 2.0;
  hi << 0.1, 4.0;
  return Benchmark{"test1",
                   resolution,
                   SeparableControlSystem(n, 1, std::move(drift), std::move(control)),
                   std::move(cost),
                   ControlGrid::cubic(-2.0, 4.0 / 109.0, 110),
                   std::move(ens),
                   ParameterDomain(lo, hi),
                   StepperConfig{Scheme::implicit_euler, 1e-2}};
}

Benchmark build_test2(int resolution) {
  check_resolution(resolution);
  const SquareGrid grid{resolution};
  const Index n = grid.size();
  const SparseMatrix A = SparseMatrix(0.2 * laplacian(grid)) -
                         upwind_advection(grid, [](double, double) { return Vector::Ones(2); });
  const Vector b = indicator(grid, [](double x1, double x2) {
    return x1 >= 0.2 && x1 <= 0.6 && x2 >= 0.2 && x2 <= 0.6;
  });

  std::vector<DriftTerm> drift;
  drift.push_back(DriftTerm::linear_term(constant_coefficient(1.0), A));
  drift.push_back(DriftTerm::nonlinear_term(
      parameter_component(0),
      [](const Vector& y) -> Vector { return y - y.cwiseProduct(y).cwiseProduct(y); },
      [](const Vector& y) -> SparseMatrix {
        SparseMatrix J(y.size(), y.size());
        J.reserve(Eigen::VectorXi::Constant(y.size(), 1));
        for (Index i = 0; i < y.size(); ++i) J.insert(i, i) = 1.0 - 3.0 * y(i) * y(i);
        J.makeCompressed();
        return J;
      }));
  std::vector<ControlTerm> control;
  control.push_back(ControlTerm::constant_term(constant_coefficient(1.0), Matrix(b)));

  SparseMatrix I(n, n);
  I.setIdentity();
  QuadraticCost cost;
  cost.state_terms.push_back({constant_coefficient(10.0), I, Matrix()});
  cost.control_weight = [](const Vector&) { return Matrix::Identity(1, 1); };
  cost.discount = 1e-3;

  GaussianEnsemble ens;
  ens.node_coords = grid.coordinates();
  ens.mean = Vector::Zero(n);
  ens.scale = 0.45;
  ens.decay = 5.0;
  ens.boundary_weight = tent;

  return Benchmark{"test2",
                   resolution,
                   SeparableControlSystem(n, 1, std::move(drift), std::move(control)),
                   std::move(cost),
                   ControlGrid::uniform(-60.0, 60.0, 121),
                   std::move(ens),
                   ParameterDomain(Vector::Constant(1, 2.0), Vector::Constant(1, 7.0)),
                   StepperConfig{Scheme::explicit_euler, 1e-3}};
}

Benchmark build_test3(int resolution) {
  check_resolution(resolution);
  const SquareGrid grid{resolution};
  const Index nc = grid.size();
  const Index n = 2 * nc;
  const SparseMatrix L = laplacian(grid);
  SparseMatrix A(n, n);
  {
    std::vector<Eigen::Triplet<double>> t;
    for (int k = 0; k < L.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(L, k); it; ++it) {
        t.emplace_back(it.row(), it.col(), it.value());
        t.emplace_back(nc + it.row(), nc + it.col(), it.value());
      }
    }
    A.setFromTriplets(t.begin(), t.end());
  }
  const Vector ball = indicator(grid, [](double x1, double x2) {
    return (x1 - 0.5) * (x1 - 0.5) + (x2 - 0.25) * (x2 - 0.25) <= 0.04;
  });
  Matrix B = Matrix::Zero(n, 2);
  B.col(0).head(nc) = ball;
  B.col(1).tail(nc) = ball;

  const Convection conv{grid};
  std::vector<DriftTerm> drift;
  drift.push_back(DriftTerm::linear_term(constant_coefficient(1e-4), A));
  drift.push_back(DriftTerm::nonlinear_term(
      constant_coefficient(1.0), [conv](const Vector& y) { return conv.field(y); },
      [conv](const Vector& y) { return conv.jacobian(y); }));
  std::vector<ControlTerm> control;
  control.push_back(ControlTerm::constant_term(constant_coefficient(1.0), B));

  const double h2 = grid.h() * grid.h();
  Vector c1 = Vector::Zero(n), c2 = Vector::Zero(n);
  c1.head(nc) = h2 * ball;
  c2.tail(nc) = h2 * ball;
  QuadraticCost cost;
  cost.state_terms.push_back({[](const Vector& mu) { return mu(0) * mu(0); }, row_matrix(c1),
                              Matrix::Identity(1, 1)});
  cost.state_terms.push_back({[](const Vector& mu) { return mu(1) * mu(1); }, row_matrix(c2),
                              Matrix::Identity(1, 1)});
  cost.control_weight = [](const Vector&) { return Matrix::Identity(2, 2); };
  cost.discount = 1e-4;

  const Matrix X = grid.coordinates();
  GaussianEnsemble ens;
  ens.node_coords.resize(n, 2);
  ens.node_coords << X, X;
  ens.mean = Vector::Zero(n);
  ens.mean.tail(nc).setConstant(-1.0);
  ens.scale = 0.2;
  ens.decay = 1.0;
  ens.groups.assign(static_cast<std::size_t>(n), 0);
  for (Index p = nc; p < n; ++p) ens.groups[static_cast<std::size_t>(p)] = 1;

  const ControlGrid axis = ControlGrid::cubic(-3.0, 0.1875, 33);
  return Benchmark{"test3",
                   resolution,
                   SeparableControlSystem(n, 2, std::move(drift), std::move(control)),
                   std::move(cost),
                   ControlGrid::product({axis, axis}),
                   std::move(ens),
                   ParameterDomain(Vector::Constant(2, 0.01), Vector::Constant(2, 5.0)),
                   StepperConfig{Scheme::explicit_euler, 5e-3}};
}

Benchmark make_benchmark(const std::string& id, int resolution) {
  if (id == "test1") return build_test1(resolution > 0 ? resolution : kTest1Resolution);
  if (id == "test2") return build_test2(resolution > 0 ? resolution : kTest2Resolution);
  if (id == "test3") return build_test3(resolution > 0 ? resolution : kTest3Resolution);
  throw InvalidInput("unknown benchmark '" + id + "'");
}

ProblemFamily linearized_family(const Benchmark& bench) {
  const SeparableControlSystem* sys = &bench.system;
  const QuadraticCost* cost = &bench.cost;
  return [sys, cost](const Vector& mu) {
    const Index n = sys->state_dim();
    const Linearization lin = linearize(*sys, Vector::Zero(n), Vector::Zero(sys->control_dim()), mu);
    return AreProblem{lin.A, lin.B, cost->state_weight(mu), cost->control_weight(mu), cost->discount};
  };
}

namespace {

ControlGrid scalar_controls(const nlohmann::json& j) {
  const std::string kind = j.value("kind", std::string("uniform"));
  const int count = j.at("count").get<int>();
  if (kind == "uniform") return ControlGrid::uniform(j.at("lo").get<double>(), j.at("hi").get<double>(), count);
  if (kind == "cubic") return ControlGrid::cubic(j.at("start").get<double>(), j.at("step").get<double>(), count);
  throw InvalidInput("unknown control grid kind '" + kind + "'");
}

}  // namespace

void apply_overrides(Benchmark& bench, const nlohmann::json& overrides) {
  require(overrides.is_object(), "overrides must be a JSON object");
  for (const auto& [key, value] : overrides.items()) {
    if (key == "controls") {
      const ControlGrid axis = scalar_controls(value);
      const Index m = bench.system.control_dim();
      bench.controls = m == 1 ? axis : ControlGrid::product(std::vector<ControlGrid>(static_cast<std::size_t>(m), axis));
    } else if (key == "discount") {
      bench.cost.discount = value.get<double>();
      require(bench.cost.discount > 0.0, "discount must be positive");
    } else if (key == "ensemble") {
      if (value.contains("scale")) bench.ensemble.scale = value.at("scale").get<double>();
      if (value.contains("decay")) bench.ensemble.decay = value.at("decay").get<double>();
    } else if (key == "stepper") {
      if (value.contains("dt")) bench.stepper.dt = value.at("dt").get<double>();
      if (value.contains("scheme")) {
        const auto name = value.at("scheme").get<std::string>();
        if (name == "explicit_euler") {
          bench.stepper.scheme = Scheme::explicit_euler;
        } else if (name == "implicit_euler") {
          bench.stepper.scheme = Scheme::implicit_euler;
        } else {
          throw InvalidInput("unknown scheme '" + name + "'");
        }
      }
      require(bench.stepper.dt > 0.0, "stepper dt must be positive");
    } else {
      throw InvalidInput("unknown override '" + key + "'");
    }
  }
}

}  // namespace hjbrom
