#include "support.hpp"

#include "hjbrom/basis.hpp"
#include "hjbrom/bench.hpp"
#include "hjbrom/domain.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace hjbrom;
using namespace hjbrom::testing;

namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// Standard normal quantile by bisection on the erfc-based CDF.
double normal_quantile(double p) {
  double lo = -10.0, hi = 10.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (normal_cdf(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

GaussianEnsemble scalar_ensemble(Index n) {
  GaussianEnsemble ens;
  ens.node_coords = Matrix::Zero(n, 1);
  for (Index i = 0; i < n; ++i) ens.node_coords(i, 0) = 10.0 * i;
  ens.mean = Vector::Zero(n);
  return ens;
}

}  // namespace

TEST_CASE("snapshots of a frozen system are the initial draws") {
  const auto sys = linear_system(Matrix::Zero(3, 3), Matrix::Zero(3, 1));
  const GaussianEnsemble ens = scalar_ensemble(3);
  SnapshotOptions opt;
  opt.count = 7;
  opt.seed = 21;
  const SnapshotSet set = collect_snapshots(sys, ens, vec({0}), opt);
  const auto draws = sample_initial(ens, 7, 21);
  REQUIRE(set.states.cols() == 7);
  for (Index j = 0; j < 7; ++j) CHECK(set.states.col(j) == draws[static_cast<std::size_t>(j)]);
}

TEST_CASE("snapshot column count discounts diverged draws") {
  SeparableControlSystem blowup(
      1, 1,
      {DriftTerm::nonlinear_term(constant_coefficient(1.0),
                                 [](const Vector& y) { return Vector(y.cwiseProduct(y)); })},
      {});
  const GaussianEnsemble ens = scalar_ensemble(1);
  SnapshotOptions opt;
  opt.count = 40;
  opt.times = {0.0, 1.0, 20.0};
  opt.stepper = {Scheme::explicit_euler, 0.01};
  const SnapshotSet set = collect_snapshots(blowup, ens, vec({0}), opt);
  CHECK(set.skipped > 0);
  CHECK(set.accepted + set.skipped == 40);
  CHECK(set.states.cols() == 3 * set.accepted);
}

TEST_CASE("advection-diffusion snapshots from 100 uncontrolled runs") {
  const Benchmark bench = build_test1(10);
  SnapshotOptions opt;
  opt.count = 100;
  opt.times = {0.0, 0.5, 1.0};
  opt.stepper = bench.stepper;
  const SnapshotSet set = collect_snapshots(bench.system, bench.ensemble, vec({0.08, 3.0}), opt);
  CHECK(set.accepted == 100);
  CHECK(set.states.cols() == 300);
  CHECK(set.states.rows() == bench.system.state_dim());
}

TEST_CASE("component fit") {
  CHECK(fit_component(std::vector<double>{-1.0, 1.0}).std == 1.0);
  const auto zero = fit_component(std::vector<double>(5, 0.0));
  CHECK(zero.floored);
  CHECK(zero.std == kStdFloor);

  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal(0.0, 2.0);
  std::vector<double> draws(100000);
  for (double& d : draws) d = normal(rng);
  const double s = fit_component(draws).std;
  CHECK(s >= 1.98);
  CHECK(s <= 2.02);

  std::vector<double> flipped(draws);
  for (double& d : flipped) d = -d;
  CHECK(fit_component(flipped).std == s);
}

TEST_CASE("equal-mass grid quantiles") {
  const UnivariateGrid g = equal_mass_grid({1.0, 0, false}, 3, 0.25);
  REQUIRE(g.size() == 3);
  CHECK(g.nodes[0] == doctest::Approx(normal_quantile(0.25)).epsilon(1e-12));
  CHECK(g.nodes[0] == doctest::Approx(-0.6744897501960817).epsilon(1e-12));
  CHECK(g.nodes[1] == 0.0);
  CHECK(g.nodes[2] == -g.nodes[0]);

  for (int H : {3, 5, 9, 25}) {
    const UnivariateGrid one = equal_mass_grid({1.0, 0, false}, H, 0.01);
    const UnivariateGrid two = equal_mass_grid({2.0, 0, false}, H, 0.01);
    for (int k = 0; k < H; ++k) CHECK(two.nodes[k] == 2.0 * one.nodes[k]);
  }
}

TEST_CASE("equal-mass grid structure") {
  for (int H : {3, 5, 7, 11, 25, 31}) {
    for (double alpha : {0.005, 0.05, 0.2}) {
      const double std = 0.37;
      const UnivariateGrid g = equal_mass_grid({std, 0, false}, H, alpha);
      REQUIRE(g.size() == static_cast<std::size_t>(H));
      CHECK(g.nodes[H / 2] == 0.0);
      const double target = (1.0 - 2.0 * alpha) / (H - 1);
      for (int k = 0; k + 1 < H; ++k) {
        const double mass = normal_cdf(g.nodes[k + 1] / std) - normal_cdf(g.nodes[k] / std);
        CHECK(std::abs(mass - target) <= 1e-10);
      }
      CHECK(normal_cdf(g.nodes[0] / std) == doctest::Approx(alpha).epsilon(1e-10));
      for (int k = 0; k < H; ++k) CHECK(g.nodes[k] == -g.nodes[H - 1 - k]);
      for (int k = H / 2; k + 2 < H; ++k)
        CHECK(g.nodes[k + 2] - g.nodes[k + 1] > g.nodes[k + 1] - g.nodes[k]);
    }
  }
  CHECK_THROWS_AS((void)equal_mass_grid({1.0, 0, false}, 4), InvalidInput);
  CHECK_THROWS_AS((void)equal_mass_grid({1.0, 0, false}, 1), InvalidInput);
}

TEST_CASE("equidistant grid spans the equal-mass interval") {
  const UnivariateGrid a = equal_mass_grid({1.5, 0, false}, 11, 0.005);
  const UnivariateGrid b = equidistant_grid({1.5, 0, false}, 11, 0.005);
  CHECK(b.lower() == doctest::Approx(a.lower()));
  CHECK(b.upper() == doctest::Approx(a.upper()));
  CHECK(b.nodes[5] == doctest::Approx(0.0));
  for (int k = 0; k + 1 < 11; ++k)
    CHECK(b.nodes[k + 1] - b.nodes[k] == doctest::Approx(b.nodes[1] - b.nodes[0]));
}

TEST_CASE("tensor grid enumeration") {
  const TensorGrid grid({uniform_axis(0, 1, 3), uniform_axis(-1, 1, 5), uniform_axis(2, 3, 4)});
  CHECK(grid.size() == 60);
  for (Index k = 0; k < grid.size(); ++k) {
    const auto multi = grid.multi_index(k);
    CHECK(grid.flat_index(multi) == k);
    const Vector x = grid.node(k);
    for (Index j = 0; j < 3; ++j) CHECK(x(j) == grid.axis(j).nodes[multi[j]]);
  }
  CHECK(grid.multi_index(1)[2] == 1);
  CHECK(grid.lower() == vec({0, -1, 2}));
  CHECK(grid.upper() == vec({1, 1, 3}));
  CHECK(grid.nodes().cols() == 60);
}

TEST_CASE("one-dimensional grid from data") {
  std::mt19937_64 rng(4);
  const Matrix Y = random_matrix(6, 50, rng);
  const ReducedBasis basis = pod(Y, 0.0, 1);
  const TensorGrid grid = make_grid(fit_reduced(Y, basis), {{3}, 0.005, GridKind::equal_mass});
  REQUIRE(grid.size() == 3);
  CHECK(grid.axis(0).nodes[1] == 0.0);
  CHECK(grid.axis(0).nodes[0] < 0.0);

  const TensorGrid flipped = make_grid(fit_reduced(-Y, basis), {{3}, 0.005, GridKind::equal_mass});
  CHECK(flipped.axis(0).nodes == grid.axis(0).nodes);
}

TEST_CASE("projection fit uses the transpose of the basis") {
  Matrix psi = Matrix::Zero(3, 1);
  psi(1, 0) = 1.0;
  Matrix Y = Matrix::Zero(3, 4);
  Y.row(1) << 3, -3, 3, -3;
  Y.row(0) << 100, 100, 100, 100;
  const auto fits = fit_reduced(Y, ReducedBasis(psi));
  REQUIRE(fits.size() == 1);
  CHECK(fits[0].std == 3.0);
}

TEST_CASE("Burgers grid with 15 points per reduced axis") {
  const Benchmark bench = build_test3(10);
  SnapshotOptions snaps;
  snaps.count = 20;
  snaps.stepper = bench.stepper;
  const Vector mu = bench.domain.center();
  const SnapshotSet set = collect_snapshots(bench.system, bench.ensemble, mu, snaps);
  const ReducedBasis basis = pod(set.states, 0.0, 2);
  const TensorGrid grid =
      build_grid(bench.system, bench.ensemble, basis, mu, snaps, {{15}, 0.005, GridKind::equal_mass});
  CHECK(grid.dim() == 2);
  CHECK(grid.size() == 225);
}
