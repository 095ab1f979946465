#include "support.hpp"

#include "hjbrom/basis.hpp"
#include "hjbrom/bench.hpp"

#include <doctest.h>

#include <cmath>

using namespace hjbrom;
using namespace hjbrom::testing;

namespace {

/// A(μ) = A0 + μ_0 A1, with fixed B, Q, R.
struct Family {
  Matrix A0, A1, B, Q, R;

  Family(Index n, std::mt19937_64& rng) {
    A0 = random_stable(n, rng);
    A1 = 0.3 * random_matrix(n, n, rng);
    B = random_matrix(n, 1, rng);
    const Matrix C = random_matrix(2, n, rng);
    Q = C.transpose() * C + 1e-2 * Matrix::Identity(n, n);
    R = Matrix::Identity(1, 1);
  }

  [[nodiscard]] AreProblem operator()(const Vector& mu) const {
    return AreProblem{A0 + mu(0) * A1, B, Q, R, 0.1};
  }
};

}  // namespace

TEST_CASE("POD of a rank-one matrix") {
  const Vector v = vec({1, 2, 2});
  const Matrix X = v * vec({1, -3, 0.5}).transpose();
  const ReducedBasis basis = pod(X, 1e-12);
  REQUIRE(basis.size() == 1);
  CHECK(std::abs(std::abs(basis.matrix().col(0).dot(v / 3.0)) - 1.0) <= 1e-14);
}

TEST_CASE("POD energy threshold") {
  const Matrix X = (Matrix(2, 2) << 2, 0, 0, 1).finished();
  CHECK(pod(X, 0.2).size() == 1);
  CHECK(pod(X, 0.19).size() == 2);
}

TEST_CASE("POD truncation error equals the singular value tail") {
  std::mt19937_64 rng(9);
  const Matrix X = random_matrix(8, 6, rng);
  const Vector sigma = Eigen::JacobiSVD<Matrix>(X).singularValues();
  for (Index k = 1; k <= 5; ++k) {
    const Matrix psi = pod(X, 0.0, k).matrix();
    REQUIRE(psi.cols() == k);
    const double err = (X - psi * (psi.transpose() * X)).squaredNorm();
    CHECK(std::abs(err - sigma.tail(6 - k).squaredNorm()) <= 1e-10);
  }
}

TEST_CASE("POD rejects all-zero input") {
  CHECK_THROWS_AS((void)pod(Matrix::Zero(4, 3), 0.1), InvalidInput);
}

TEST_CASE("basis append keeps columns orthonormal") {
  std::mt19937_64 rng(10);
  ReducedBasis basis = ReducedBasis::empty(10);
  for (int round = 0; round < 4; ++round) {
    basis.append(random_matrix(10, 2, rng), 2);
    CHECK(basis.orthonormality_error() <= 1e-12);
  }
  CHECK(basis.size() == 8);
  const Index kept = basis.append(basis.matrix().leftCols(3), 3);
  CHECK(kept == 0);
}

TEST_CASE("error indicator limits") {
  std::mt19937_64 rng(12);
  const Family family(6, rng);
  const AreProblem p = family(vec({0.5}));
  CHECK(error_indicator(p, ReducedBasis::empty(6)) == doctest::Approx(1.0).epsilon(1e-15));
  const ReducedBasis full(random_orthonormal(6, 6, rng));
  CHECK(error_indicator(p, full) <= 1e-8);
}

TEST_CASE("error indicator matches the lifted residual") {
  std::mt19937_64 rng(13);
  const Family family(6, rng);
  const AreProblem p = family(vec({0.2}));
  const Matrix psi = random_orthonormal(6, 3, rng);
  AreProblem small{psi.transpose() * p.A * psi, psi.transpose() * p.B,
                   psi.transpose() * p.Q * psi, p.R, p.discount};
  const Matrix lifted = psi * solve_are(small).P * psi.transpose();
  const double oracle = are_residual(p, lifted).norm() / p.Q.norm();
  CHECK(error_indicator(p, ReducedBasis(psi)) == doctest::Approx(oracle).epsilon(1e-10));
}

TEST_CASE("greedy returns the initial basis when already accurate") {
  std::mt19937_64 rng(14);
  const Family family(5, rng);
  const ReducedBasis start(random_orthonormal(5, 2, rng));
  const GreedyResult r = lrfg({{vec({0.0}), vec({1.0})}, 10.0, 1e-4, 5}, start, family);
  CHECK(r.iterations == 0);
  CHECK(r.basis.matrix() == start.matrix());
}

TEST_CASE("greedy on a single parameter converges in one step") {
  std::mt19937_64 rng(15);
  const Family family(5, rng);
  const GreedyResult r = lrfg({{vec({0.4})}, 1e-6, 1e-14, 10}, {}, family);
  CHECK(r.iterations == 1);
  CHECK(error_indicator(family(vec({0.4})), r.basis) <= 1e-6);
}

TEST_CASE("greedy selects the worst training parameter") {
  std::mt19937_64 rng(16);
  const Family family(6, rng);
  const ReducedBasis start(random_orthonormal(6, 1, rng));
  const std::vector<Vector> train{vec({-1.0}), vec({1.5})};
  const double d0 = error_indicator(family(train[0]), start);
  const double d1 = error_indicator(family(train[1]), start);
  const GreedyResult r = lrfg({train, 1e-8, 1e-4, 3}, start, family);
  REQUIRE(!r.selected.empty());
  CHECK(r.selected.front()(0) == (d0 >= d1 ? train[0](0) : train[1](0)));
}

TEST_CASE("empty-basis ties go to the larger state weight, then the lower index") {
  std::mt19937_64 rng(18);
  const Family base(5, rng);
  const ProblemFamily scaled = [&](const Vector& mu) {
    AreProblem p = base(vec({0.0}));
    p.Q *= mu(0);
    return p;
  };
  const std::vector<Vector> train{vec({0.5}), vec({4.0}), vec({2.0}), vec({4.0})};
  for (const auto& mu : train) CHECK(error_indicator(scaled(mu), ReducedBasis::empty(5)) == 1.0);
  const GreedyResult r = lrfg({train, 1e-8, 1e-4, 1}, {}, scaled);
  REQUIRE(r.selected.size() == 1);
  CHECK(r.selected.front()(0) == 4.0);

  const std::vector<Vector> same{vec({0.3}), vec({-0.2})};
  const ProblemFamily constant = [&](const Vector&) { return base(vec({0.0})); };
  CHECK(lrfg({same, 1e-8, 1e-4, 1}, {}, constant).selected.front()(0) == 0.3);
}

TEST_CASE("greedy history and orthonormality") {
  std::mt19937_64 rng(17);
  const Family family(8, rng);
  std::vector<Vector> train;
  for (int i = 0; i < 5; ++i) train.push_back(vec({-1.0 + 0.5 * i}));
  for (Index cap = 1; cap <= 6; ++cap) {
    const GreedyResult r = lrfg({train, 1e-12, 0.3, cap}, {}, family);
    CHECK(r.basis.size() <= cap);
    CHECK(r.basis.orthonormality_error() <= 1e-12);
    for (std::size_t i = 1; i < r.history.size(); ++i)
      CHECK(r.history[i] <= r.history[i - 1] + 1e-10);
  }
}

TEST_CASE("partition accepted at the root") {
  const ParameterDomain domain(vec({0, 0}), vec({1, 2}));
  const auto p = adaptive_partition(domain, 0.5, 3, [](const ParameterBox&) {
    return BoxFit{ReducedBasis(Matrix::Identity(2, 1)), 0.1};
  });
  REQUIRE(p.size() == 1);
  CHECK(p.boxes[0].lower == domain.lower());
  CHECK(p.boxes[0].upper == domain.upper());
  CHECK(locate(p, vec({0.7, 1.9})) == 0);
}

TEST_CASE("synthetic width indicator gives a uniform depth-two tree") {
  for (Index q : {1, 2, 3}) {
    const ParameterDomain domain(Vector::Zero(q), Vector::LinSpaced(q, 1.0, 2.0));
    const Vector width = domain.upper() - domain.lower();
    const auto p = adaptive_partition(domain, 0.5, 5, [&](const ParameterBox& box) {
      const bool fine = (((box.upper - box.lower).array() / width.array()) <= 0.25 + 1e-15).all();
      return BoxFit{ReducedBasis(Matrix::Identity(2, 1)), fine ? 0.0 : 1.0};
    });
    CHECK(p.size() == static_cast<std::size_t>(std::pow(4, q)));
    for (const auto& b : p.boxes) CHECK(b.level == 2);
  }
}

TEST_CASE("partition tiles the domain") {
  const ParameterDomain domain(vec({0.05, 2.0}), vec({0.1, 4.0}));
  const auto p = adaptive_partition(domain, 0.5, 4, [](const ParameterBox& box) {
    const double corner = (box.lower(0) <= 0.05 + 1e-12 && box.upper(1) >= 4.0 - 1e-12) ? 1.0 : 0.0;
    return BoxFit{ReducedBasis(Matrix::Identity(2, 1)), corner};
  });
  double volume = 0.0;
  for (const auto& b : p.boxes) volume += b.volume();
  CHECK(std::abs(volume - domain.volume()) <= 1e-12 * domain.volume());
  CHECK(p.max_level() == 4);

  std::mt19937_64 rng(18);
  std::uniform_real_distribution<double> u01;
  for (int i = 0; i < 10000; ++i) {
    const Vector mu = domain.lower() + (domain.upper() - domain.lower())
                                           .cwiseProduct(vec({u01(rng), u01(rng)}));
    const std::size_t k = locate(p, mu);
    CHECK_UNARY(p.boxes[k].contains(mu));
  }
}

TEST_CASE("locate tie rule and rejection") {
  const ParameterDomain domain(vec({0.0}), vec({1.0}));
  const auto p = adaptive_partition(domain, 0.5, 1, [](const ParameterBox& box) {
    return BoxFit{ReducedBasis(Matrix::Identity(1, 1)), box.level == 0 ? 1.0 : 0.0};
  });
  REQUIRE(p.size() == 2);
  CHECK(locate(p, vec({0.25})) == 0);
  CHECK(locate(p, vec({0.75})) == 1);
  for (int run = 0; run < 3; ++run) CHECK(locate(p, vec({0.5})) == 0);
  CHECK_THROWS_AS((void)locate(p, vec({1.5})), InvalidInput);
}

TEST_CASE("advection-diffusion partition respects size and depth caps") {
  const Benchmark bench = build_test1(10);
  const ParameterPartition p =
      adaptive_partition(bench.domain, {3, 0.9, 1e-4, 5, 3}, linearized_family(bench));
  CHECK(p.max_level() <= 3);
  for (const auto& b : p.bases) {
    CHECK(b.size() <= 5);
    CHECK(b.orthonormality_error() <= 1e-12);
  }
}
