#pragma once

#include "hjbrom/hjb.hpp"
#include "hjbrom/model.hpp"
#include "hjbrom/reduced.hpp"
#include "hjbrom/riccati.hpp"

#include <memory>
#include <random>
#include <vector>

namespace hjbrom::testing {

inline SparseMatrix sparse(const Matrix& dense) { return dense.sparseView(0.0, 0.0); }

inline Matrix random_matrix(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Matrix out(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) out(i, j) = normal(rng);
  return out;
}

inline Vector random_vector(Index n, std::mt19937_64& rng) { return random_matrix(n, 1, rng); }

/// A - shift·I with the spectrum of A pushed into the left half plane.
inline Matrix random_stable(Index n, std::mt19937_64& rng) {
  Matrix A = random_matrix(n, n, rng);
  const double abscissa = spectral_abscissa(A);
  return A - (abscissa + 1.0) * Matrix::Identity(n, n);
}

inline Matrix random_orthonormal(Index n, Index l, std::mt19937_64& rng) {
  Eigen::HouseholderQR<Matrix> qr(random_matrix(n, l, rng));
  return qr.householderQ() * Matrix::Identity(n, l);
}

/// ẏ = A y + B u with constant coefficients.
inline SeparableControlSystem linear_system(const Matrix& A, const Matrix& B) {
  return SeparableControlSystem(A.rows(), B.cols(),
                                {DriftTerm::linear_term(constant_coefficient(1.0), sparse(A))},
                                {ControlTerm::constant_term(constant_coefficient(1.0), B)});
}

/// yᵀ Q y + uᵀ R u.
inline QuadraticCost quadratic_cost(const Matrix& Q, const Matrix& R, double discount) {
  QuadraticCost cost;
  cost.state_terms.push_back(
      {constant_coefficient(1.0), sparse(Matrix::Identity(Q.rows(), Q.rows())), Q});
  cost.control_weight = [R](const Vector&) { return R; };
  cost.discount = discount;
  return cost;
}

inline UnivariateGrid uniform_axis(double lo, double hi, int count) {
  UnivariateGrid axis;
  for (int i = 0; i < count; ++i) axis.nodes.push_back(lo + (hi - lo) * i / (count - 1));
  return axis;
}

inline Vector vec(std::initializer_list<double> values) {
  Vector out(static_cast<Index>(values.size()));
  Index i = 0;
  for (double v : values) out(i++) = v;
  return out;
}

/// Linear-quadratic problem posed directly on a tensor grid (identity basis).
struct LinearInstance {
  SeparableControlSystem system;
  QuadraticCost cost;
  ReducedBasis basis;
  TensorGrid grid;
  ControlGrid controls;
  Vector mu = Vector::Zero(1);
  EvaluationTable table;

  LinearInstance(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R, double discount,
                 TensorGrid g, ControlGrid u)
      : system(linear_system(A, B)),
        cost(quadratic_cost(Q, R, discount)),
        basis(Matrix::Identity(A.rows(), A.rows())),
        grid(std::move(g)),
        controls(std::move(u)),
        table(build_tables(system, cost, basis, grid)) {}

  LinearInstance(const LinearInstance&) = delete;
  LinearInstance& operator=(const LinearInstance&) = delete;

  [[nodiscard]] TableDynamics dynamics() const {
    return TableDynamics(table, coefficients(system, cost, mu));
  }
  [[nodiscard]] NodeData data() const { return dynamics().evaluate(); }
};

inline TensorGrid cube_grid(Index dim, int points, double half_width) {
  return TensorGrid(std::vector<UnivariateGrid>(static_cast<std::size_t>(dim),
                                                uniform_axis(-half_width, half_width, points)));
}

/// Coupled, open-loop unstable 2D LTI problem with two inputs on [-1,1]².
inline std::unique_ptr<LinearInstance> planar_lq(int points, int controls_per_axis) {
  const Matrix A = (Matrix(2, 2) << 0.5, 1.0, 0.0, -0.5).finished();
  const ControlGrid axis = ControlGrid::uniform(-3.0, 3.0, controls_per_axis);
  return std::make_unique<LinearInstance>(A, Matrix::Identity(2, 2), Matrix::Identity(2, 2),
                                          Matrix::Identity(2, 2), 1e-3, cube_grid(2, points, 1.0),
                                          ControlGrid::product({axis, axis}));
}

/// Random 3D linear instance with a scalar control.
inline std::unique_ptr<LinearInstance> random_cube_instance(int points, std::mt19937_64& rng) {
  const Matrix A = random_matrix(3, 3, rng);
  const Matrix B = random_matrix(3, 1, rng);
  return std::make_unique<LinearInstance>(A, B, Matrix::Identity(3, 3), Matrix::Identity(1, 1), 0.5,
                                          cube_grid(3, points, 1.0),
                                          ControlGrid::uniform(-2.0, 2.0, 9));
}

}  // namespace hjbrom::testing
