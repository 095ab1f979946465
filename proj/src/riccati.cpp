#include "hjbrom/riccati.hpp"

#include <lapacke.h>

#include <cmath>
#include <limits>
#include <optional>
#include <sstream>

namespace hjbrom {

namespace {

struct SchurForm {
  Matrix T;
  Matrix U;
  double abscissa = 0.0;
};

SchurForm real_schur(const Matrix& A) {
  const lapack_int n = static_cast<lapack_int>(A.rows());
  SchurForm form;
  form.T = A;
  form.U.resize(n, n);
  Vector wr(n), wi(n);
  lapack_int sdim = 0;
  const lapack_int info = LAPACKE_dgees(LAPACK_COL_MAJOR, 'V', 'N', nullptr, n, form.T.data(), n,
                                        &sdim, wr.data(), wi.data(), form.U.data(), n);
  if (info != 0) throw SolverError("real Schur decomposition failed");
  form.abscissa = n > 0 ? wr.maxCoeff() : -std::numeric_limits<double>::infinity();
  return form;
}

/// Solves Aᵀ X + X A + C = 0 given A = U T Uᵀ.
Matrix lyapunov_from_schur(const SchurForm& form, const Matrix& C) {
  const lapack_int n = static_cast<lapack_int>(form.T.rows());
  Matrix Y = -(form.U.transpose() * C * form.U);
  double scale = 1.0;
  const lapack_int info = LAPACKE_dtrsyl(LAPACK_COL_MAJOR, 'T', 'N', 1, n, n, form.T.data(), n,
                                         form.T.data(), n, Y.data(), n, &scale);
  if (info < 0) throw SolverError("Sylvester solve rejected its input");
  Y /= scale;
  Matrix X = form.U * Y * form.U.transpose();
  return 0.5 * (X + X.transpose());
}

/// Stabilizing solution from sign(H), H the Hamiltonian of the shifted problem.
std::optional<Matrix> sign_function_solution(const Matrix& At, const Matrix& G, const Matrix& Q) {
  const Index n = At.rows();
  Matrix Z(2 * n, 2 * n);
  Z << At, -G, -Q, -At.transpose();
  bool scaling = true;
  for (int it = 0; it < 100; ++it) {
    Eigen::PartialPivLU<Matrix> lu(Z);
    const Matrix& lu_matrix = lu.matrixLU();
    double logdet = 0.0;
    for (Index i = 0; i < 2 * n; ++i) {
      const double d = std::abs(lu_matrix(i, i));
      if (!(d > 0.0) || !std::isfinite(d)) return std::nullopt;
      logdet += std::log(d);
    }
    const double c = scaling ? std::exp(logdet / static_cast<double>(2 * n)) : 1.0;
    Matrix next = 0.5 * (Z / c + c * lu.inverse());
    if (!next.allFinite()) return std::nullopt;
    const double change = (next - Z).lpNorm<1>() / std::max(next.lpNorm<1>(), 1e-300);
    Z = std::move(next);
    if (change < 1e-2) scaling = false;
    if (change < 1e-13) break;
  }
  Matrix lhs(2 * n, n);
  Matrix rhs(2 * n, n);
  lhs << Z.topRightCorner(n, n), Z.bottomRightCorner(n, n) + Matrix::Identity(n, n);
  rhs << -(Z.topLeftCorner(n, n) + Matrix::Identity(n, n)), -Z.bottomLeftCorner(n, n);
  Matrix P = lhs.colPivHouseholderQr().solve(rhs);
  if (!P.allFinite()) return std::nullopt;
  return Matrix(0.5 * (P + P.transpose()));
}

}  // namespace

Matrix AreProblem::shifted() const {
  return A - 0.5 * discount * Matrix::Identity(A.rows(), A.cols());
}

void AreProblem::validate() const {
  const Index n = A.rows();
  require(A.cols() == n, "ARE: A must be square");
  require(B.rows() == n && B.cols() >= 1, "ARE: B has wrong shape");
  require(Q.rows() == n && Q.cols() == n, "ARE: Q has wrong shape");
  require(R.rows() == B.cols() && R.cols() == B.cols(), "ARE: R has wrong shape");
  require(discount >= 0.0, "ARE: discount must be non-negative");
  Eigen::LLT<Matrix> llt(R);
  require(llt.info() == Eigen::Success, "ARE: R must be symmetric positive definite");
}

Matrix are_residual(const AreProblem& problem, const Matrix& P) {
  const Matrix At = problem.shifted();
  const Matrix PB = P * problem.B;
  return At.transpose() * P + P * At - PB * problem.R.ldlt().solve(PB.transpose()) + problem.Q;
}

double spectral_abscissa(const Matrix& A) { return real_schur(A).abscissa; }

Matrix solve_lyapunov(const Matrix& A, const Matrix& C) {
  require(A.rows() == A.cols() && C.rows() == A.rows() && C.cols() == A.cols(),
          "Lyapunov: shape mismatch");
  return lyapunov_from_schur(real_schur(A), C);
}

AreSolution solve_are(const AreProblem& problem) {
  problem.validate();
  const Index n = problem.state_dim();
  const Matrix At = problem.shifted();
  const auto Rinv_Bt = problem.R.ldlt().solve(problem.B.transpose()).eval();
  const Matrix G = problem.B * Rinv_Bt;
  const double qnorm = problem.Q.norm();

  if (qnorm == 0.0 && spectral_abscissa(At) < 0.0) {
    return AreSolution{Matrix::Zero(n, n), 0.0, 0};
  }
  const double tolerance = 1e-9 * qnorm;
  const double strict = 1e-12 * qnorm;

  Matrix P;
  if (auto initial = sign_function_solution(At, G, problem.Q)) {
    P = std::move(*initial);
  } else if (spectral_abscissa(At) < 0.0) {
    P = Matrix::Zero(n, n);
  } else {
    throw SolverError("ARE: no stabilizing initial gain (pair not stabilizable?)");
  }

  AreSolution best{P, are_residual(problem, P).norm(), 0};
  if (best.residual_norm <= strict && spectral_abscissa(At - G * P) < 0.0) return best;

  double previous = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= 100; ++it) {
    const Matrix K = Rinv_Bt * P;
    const SchurForm closed = real_schur(At - problem.B * K);
    if (closed.abscissa >= 0.0) {
      if (it == 1 && spectral_abscissa(At) < 0.0 && P.norm() > 0.0) {
        P.setZero();  // restart from the zero gain
        continue;
      }
      break;
    }
    P = lyapunov_from_schur(closed, problem.Q + K.transpose() * problem.R * K);
    const double res = are_residual(problem, P).norm();
    if (res < best.residual_norm) best = AreSolution{P, res, it};
    if (res <= strict) break;
    if (res <= tolerance && res > 0.5 * previous) break;
    previous = res;
  }
  if (!(best.residual_norm <= tolerance)) {
    std::ostringstream msg;
    msg << "ARE: Newton-Kleinman stalled at residual " << best.residual_norm
        << " (tolerance " << tolerance << ")";
    throw SolverError(msg.str());
  }
  return best;
}

Matrix lqr_gain(const AreProblem& problem, const AreSolution& solution) {
  return problem.R.ldlt().solve(problem.B.transpose() * solution.P);
}

double lqr_value(const AreSolution& solution, const Vector& x) {
  return x.dot(solution.P * x);
}

}  // namespace hjbrom
