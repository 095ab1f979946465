#include "support.hpp"

#include "hjbrom/hjb.hpp"

#include <doctest.h>

#include <cmath>

using namespace hjbrom;
using namespace hjbrom::testing;

namespace {

SLConfig quick_config(double dt, double discount) {
  SLConfig cfg;
  cfg.dt = dt;
  cfg.discount = discount;
  cfg.vi_tol = 1e-12;
  cfg.pi_tol = 1e-12;
  cfg.pe_tol = 1e-12;
  return cfg;
}

/// ẏ = 0 with g = 1 through a single control u = 1 and R = 1.
std::unique_ptr<LinearInstance> frozen_unit_cost(Index dim) {
  return std::make_unique<LinearInstance>(Matrix::Zero(dim, dim), Matrix::Zero(dim, 1),
                                          Matrix::Zero(dim, dim), Matrix::Identity(1, 1), 0.5,
                                          cube_grid(dim, 5, 1.0), ControlGrid({vec({1.0})}));
}

/// ẏ = A y + B u with g ≡ 0 through the single control u = 0.
std::unique_ptr<LinearInstance> zero_cost(std::mt19937_64& rng) {
  return std::make_unique<LinearInstance>(random_matrix(2, 2, rng), random_matrix(2, 1, rng),
                                          Matrix::Zero(2, 2), Matrix::Identity(1, 1), 0.5,
                                          cube_grid(2, 7, 1.0), ControlGrid({vec({0.0})}));
}

double running_cost(const NodeData& data, const ControlGrid& controls, Index j, int k) {
  const Vector& u = controls[static_cast<std::size_t>(k)];
  return data.state_cost(j) + u.dot(data.control_weight * u);
}

Vector foot_point(const TensorGrid& grid, const NodeData& data, const ControlGrid& controls,
                  Index j, int k, double dt) {
  const Vector& u = controls[static_cast<std::size_t>(k)];
  return grid.node(j) + dt * (data.drift.col(j) + data.control_at(j) * u);
}

}  // namespace

TEST_CASE("interpolation reproduces nodes and affine data") {
  const TensorGrid grid({UnivariateGrid{{-1.0, -0.2, 0.0, 0.5, 2.0}}});
  ValueField field{grid, Vector(5), 100.0};
  for (Index k = 0; k < 5; ++k) field.values(k) = 2.0 * grid.node(k)(0);
  for (Index k = 0; k < 5; ++k) CHECK(interpolate(field, grid.node(k)) == field.values(k));
  for (Index k = 0; k + 1 < 5; ++k) {
    const double mid = 0.5 * (grid.axis(0).nodes[k] + grid.axis(0).nodes[k + 1]);
    CHECK(interpolate(field, vec({mid})) == doctest::Approx(2.0 * mid).epsilon(1e-15));
  }
  CHECK(interpolate(field, vec({2.5})) == 100.0);
  CHECK(interpolate(field, vec({-1.0 - 1e-12})) == 100.0);
  CHECK(interpolate_clamped(field, vec({2.5})) == field.values(4));
}

TEST_CASE("bilinear weights match the four-corner formula") {
  std::mt19937_64 rng(1);
  const TensorGrid grid({UnivariateGrid{{-1.0, -0.3, 0.1, 1.0}}, UnivariateGrid{{0.0, 0.5, 2.0}}});
  ValueField field{grid, random_vector(grid.size(), rng), 0.0};
  std::uniform_real_distribution<double> ux(-1.0, 1.0), uy(0.0, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    const Vector x = vec({ux(rng), uy(rng)});
    const auto& ax = grid.axis(0).nodes;
    const auto& ay = grid.axis(1).nodes;
    Index i = 0, j = 0;
    while (i + 2 < static_cast<Index>(ax.size()) && x(0) > ax[i + 1]) ++i;
    while (j + 2 < static_cast<Index>(ay.size()) && x(1) > ay[j + 1]) ++j;
    const double tx = (x(0) - ax[i]) / (ax[i + 1] - ax[i]);
    const double ty = (x(1) - ay[j]) / (ay[j + 1] - ay[j]);
    auto v = [&](Index a, Index b) { return field.values(grid.flat_index({a, b})); };
    const double oracle = (1 - tx) * (1 - ty) * v(i, j) + tx * (1 - ty) * v(i + 1, j) +
                          (1 - tx) * ty * v(i, j + 1) + tx * ty * v(i + 1, j + 1);
    CHECK(std::abs(interpolate(field, x) - oracle) <= 1e-14);
  }
}

TEST_CASE("interpolation weights are a partition of unity") {
  std::mt19937_64 rng(2);
  const TensorGrid grid = cube_grid(3, 4, 1.0);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Stencil st;
  for (int trial = 0; trial < 200; ++trial) {
    const Vector x = vec({u(rng), u(rng), u(rng)});
    REQUIRE(interpolation_stencil(grid, x.data(), st));
    CHECK(st.count <= 8);
    double sum = 0.0;
    for (int c = 0; c < st.count; ++c) {
      CHECK(st.weight[c] >= 0.0);
      sum += st.weight[c];
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
  }
  const Vector outside = vec({0.0, 1.5, 0.0});
  CHECK_FALSE(interpolation_stencil(grid, outside.data(), st));
}

TEST_CASE("sweep of a zero problem stays zero") {
  std::mt19937_64 rng(3);
  const auto inst = zero_cost(rng);
  const NodeData data = inst->data();
  const SLConfig cfg = quick_config(0.1, 0.5);
  ValueField field{inst->grid, Vector::Zero(inst->grid.size()), 0.0};
  CHECK(vi_sweep(field, data, inst->controls, cfg).values.isZero(0.0));
  const SolveReport vi = value_iteration(field, inst->dynamics(), inst->controls, cfg);
  CHECK(vi.converged);
  CHECK(vi.field.values.cwiseAbs().maxCoeff() <= cfg.vi_tol);
  const SolveReport pi = policy_iteration(field, inst->dynamics(), inst->controls, cfg);
  CHECK(pi.converged);
  CHECK(pi.iterations <= 1);
  CHECK(pi.field.values.cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(policy_evaluation(field, data, inst->controls, pi.policy, cfg).isZero(1e-14));
}

TEST_CASE("frozen dynamics with unit cost") {
  const auto inst = frozen_unit_cost(2);
  const NodeData data = inst->data();
  const SLConfig cfg = quick_config(0.1, 0.5);
  const double beta = cfg.beta();
  std::mt19937_64 rng(4);
  ValueField field{inst->grid, random_vector(inst->grid.size(), rng), 50.0};
  const Vector swept = vi_sweep(field, data, inst->controls, cfg).values;
  CHECK((swept - (beta * field.values.array() + cfg.dt).matrix()).cwiseAbs().maxCoeff() <= 1e-14);

  const double fixed = cfg.dt / (1.0 - beta);
  const SolveReport vi = value_iteration(field, inst->dynamics(), inst->controls, cfg);
  CHECK((vi.field.values.array() - fixed).abs().maxCoeff() <= 1e-9);
  const std::vector<int> policy(static_cast<std::size_t>(inst->grid.size()), 0);
  const Vector pe = policy_evaluation(field, data, inst->controls, policy, cfg);
  CHECK((pe.array() - fixed).abs().maxCoeff() <= 1e-12 * fixed);
}

TEST_CASE("SL operator is a monotone contraction") {
  std::mt19937_64 rng(5);
  const auto inst = random_cube_instance(6, rng);
  const NodeData data = inst->data();
  const SLConfig cfg = quick_config(0.2, 0.5);
  const double penalty = default_penalty(data, inst->controls, cfg);
  const Index H = inst->grid.size();
  std::uniform_real_distribution<double> u(0.0, penalty);
  for (int trial = 0; trial < 100; ++trial) {
    Vector v1(H), v2(H);
    for (Index i = 0; i < H; ++i) {
      v1(i) = u(rng);
      v2(i) = u(rng);
    }
    const Vector s1 = vi_sweep({inst->grid, v1, penalty}, data, inst->controls, cfg).values;
    const Vector s2 = vi_sweep({inst->grid, v2, penalty}, data, inst->controls, cfg).values;
    CHECK((s1 - s2).cwiseAbs().maxCoeff() <=
          cfg.beta() * (v1 - v2).cwiseAbs().maxCoeff() + 1e-12);

    const Vector upper = v1.cwiseMax(v2);
    const Vector su = vi_sweep({inst->grid, upper, penalty}, data, inst->controls, cfg).values;
    CHECK((su - s1).minCoeff() >= -1e-12);
  }
}

TEST_CASE("policy evaluation satisfies the frozen-policy equation node-wise") {
  std::mt19937_64 rng(6);
  const auto inst = random_cube_instance(5, rng);
  const NodeData data = inst->data();
  SLConfig cfg = quick_config(0.1, 0.5);
  const ValueField init = initial_field(inst->grid, data, inst->controls, cfg);
  std::uniform_int_distribution<int> pick(0, static_cast<int>(inst->controls.size()) - 1);
  std::vector<int> policy(static_cast<std::size_t>(inst->grid.size()));
  for (int& k : policy) k = pick(rng);
  for (Index limit : {Index(0), Index(30000)}) {
    cfg.direct_solve_max = limit;
    double residual = 0.0;
    const Vector V = policy_evaluation(init, data, inst->controls, policy, cfg, &residual);
    const ValueField solved{inst->grid, V, init.penalty};
    double worst = 0.0;
    for (Index j = 0; j < inst->grid.size(); ++j) {
      const int k = policy[static_cast<std::size_t>(j)];
      const double rhs =
          cfg.beta() * interpolate(solved, foot_point(inst->grid, data, inst->controls, j, k, cfg.dt)) +
          cfg.dt * running_cost(data, inst->controls, j, k);
      worst = std::max(worst, std::abs(V(j) - rhs));
    }
    CHECK(worst <= 1e-10 * (1.0 + V.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("policy and value iteration reach the same fixed point") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 3; ++trial) {
    const auto inst = random_cube_instance(5, rng);
    const SLConfig cfg = quick_config(0.1, 0.5);
    const ValueField init = initial_field(inst->grid, inst->data(), inst->controls, cfg);
    const SolveReport vi = value_iteration(init, inst->dynamics(), inst->controls, cfg);
    const SolveReport pi = policy_iteration(init, inst->dynamics(), inst->controls, cfg);
    REQUIRE(vi.converged);
    REQUIRE(pi.converged);
    CHECK((vi.field.values - pi.field.values).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK(pi.iterations <= vi.iterations);
  }
}

TEST_CASE("one-dimensional LQ problem against the Riccati solution") {
  const double discount = 1e-3;
  LinearInstance inst(Matrix::Zero(1, 1), Matrix::Identity(1, 1), Matrix::Identity(1, 1),
                      Matrix::Identity(1, 1), discount, cube_grid(1, 401, 1.0),
                      ControlGrid::uniform(-2.0, 2.0, 801));
  SLConfig cfg = quick_config(0.01, discount);
  cfg.vi_tol = 1e-10;
  cfg.vi_max_iter = 100000;
  const ValueField init = initial_field(inst.grid, inst.data(), inst.controls, cfg);
  const SolveReport vi = value_iteration(init, inst.dynamics(), inst.controls, cfg);
  REQUIRE(vi.converged);

  const AreProblem prob{Matrix::Zero(1, 1), Matrix::Identity(1, 1), Matrix::Identity(1, 1),
                        Matrix::Identity(1, 1), discount};
  const AreSolution are = solve_are(prob);
  const double p = are.P(0, 0);
  const double K = lqr_gain(prob, are)(0, 0);

  double err = 0.0, scale = 0.0;
  for (Index j = 0; j < inst.grid.size(); ++j) {
    if (!inst.grid.interior(j)) continue;
    const double x = inst.grid.node(j)(0);
    const double exact = p * x * x;
    err = std::max(err, std::abs(vi.field.values(j) - exact));
    scale = std::max(scale, exact);
    CHECK(vi.field.values(j) >= 0.0);
    if (std::abs(x) >= 0.25) CHECK(std::abs(vi.field.values(j) - exact) <= 0.05 * exact);
  }
  CHECK(err <= 0.05 * scale);
  CHECK(std::abs(vi.field.values(inst.grid.flat_index({200}))) <= 1e-12);

  const double spacing = 4.0 / 800;
  const HjbController controller(vi.field, inst.basis, inst.system, inst.cost, inst.controls,
                                 inst.mu, cfg);
  for (double x = -0.9; x <= 0.9; x += 0.05) {
    CHECK(std::abs(controller(0.0, vec({x}))(0) + K * x) <= spacing + 1e-12);
  }
}

TEST_CASE("feedback with a single admissible control") {
  const auto inst = frozen_unit_cost(2);
  const SLConfig cfg = quick_config(0.1, 0.5);
  const ValueField field = initial_field(inst->grid, inst->data(), inst->controls, cfg);
  const HjbController controller(field, inst->basis, inst->system, inst->cost, inst->controls,
                                 inst->mu, cfg);
  CHECK(controller(0.0, vec({0.3, -0.2}))(0) == 1.0);
  CHECK(controller.index(vec({5.0, 5.0})) == 0);
  CHECK(controller.saturations() == 1);
}

TEST_CASE("feedback ties go to the lowest control index") {
  LinearInstance inst(Matrix::Zero(1, 1), Matrix::Zero(1, 1), Matrix::Identity(1, 1),
                      Matrix::Identity(1, 1), 0.5, cube_grid(1, 5, 1.0),
                      ControlGrid::uniform(-1.0, 1.0, 3));
  const SLConfig cfg = quick_config(0.1, 0.5);
  const ValueField field{inst.grid, Vector::Zero(5), 1.0};
  const HjbController controller(field, inst.basis, inst.system, inst.cost, inst.controls,
                                 inst.mu, cfg);
  CHECK(controller.index(vec({0.2})) == 1);

  LinearInstance flat(Matrix::Zero(1, 1), Matrix::Zero(1, 1), Matrix::Identity(1, 1),
                      Matrix::Zero(1, 1), 0.5, cube_grid(1, 5, 1.0), ControlGrid::uniform(-1.0, 1.0, 3));
  flat.cost.control_weight = [](const Vector&) { return Matrix(Matrix::Zero(1, 1)); };
  const HjbController tie(field, flat.basis, flat.system, flat.cost, flat.controls, flat.mu, cfg);
  CHECK(tie.index(vec({0.2})) == 0);
}

TEST_CASE("transfer of an affine field") {
  const TensorGrid coarse = cube_grid(2, 3, 1.0);
  const TensorGrid fine = cube_grid(2, 9, 1.5);
  ValueField field{coarse, Vector(coarse.size()), 7.0};
  for (Index k = 0; k < coarse.size(); ++k) {
    const Vector x = coarse.node(k);
    field.values(k) = 1.0 + 2.0 * x(0) - x(1);
  }
  const ValueField moved = transfer(field, fine);
  CHECK(moved.penalty == 7.0);
  for (Index k = 0; k < fine.size(); ++k) {
    const Vector x = fine.node(k).cwiseMax(-1.0).cwiseMin(1.0);
    CHECK(moved.values(k) == doctest::Approx(1.0 + 2.0 * x(0) - x(1)).epsilon(1e-14));
  }
}

TEST_CASE("configuration validation") {
  SLConfig cfg;
  cfg.discount = 0.0;
  CHECK_THROWS_AS(cfg.validate(), InvalidInput);
  cfg = SLConfig{};
  cfg.pe_tol = 0.0;
  CHECK_THROWS_AS(cfg.validate(), InvalidInput);
  CHECK_NOTHROW(SLConfig{}.validate());
}
