#pragma once

#include "hjbrom/types.hpp"

namespace hjbrom {

/// Discounted continuous-time ARE data; the discount enters only as the
/// spectral shift A - (λ/2) I.
struct AreProblem {
  Matrix A;
  Matrix B;
  Matrix Q;
  Matrix R;
  double discount = 0.0;

  [[nodiscard]] Index state_dim() const { return A.rows(); }
  [[nodiscard]] Matrix shifted() const;
  void validate() const;
};

struct AreSolution {
  Matrix P;
  double residual_norm = 0.0;  // ‖ℛ(P)‖_F, recomputed from P
  int iterations = 0;          // Newton–Kleinman refinement steps
};

/// ℛ(P) = Ãᵀ P + P Ã - P B R⁻¹ Bᵀ P + Q with Ã = A - (λ/2) I.
Matrix are_residual(const AreProblem& problem, const Matrix& P);

/// Stabilizing PSD solution. A matrix-sign initializer on the Hamiltonian
/// supplies a stabilizing gain, Newton–Kleinman drives the residual to
/// 1e-9·‖Q‖_F or below. Throws SolverError when that is not reached.
AreSolution solve_are(const AreProblem& problem);

/// K = R⁻¹ Bᵀ P.
Matrix lqr_gain(const AreProblem& problem, const AreSolution& solution);

/// xᵀ P x.
double lqr_value(const AreSolution& solution, const Vector& x);

/// Symmetric X with Aᵀ X + X A + C = 0 for symmetric C (Bartels–Stewart on a
/// real Schur form).
Matrix solve_lyapunov(const Matrix& A, const Matrix& C);

/// max Re λ(A).
double spectral_abscissa(const Matrix& A);

}  // namespace hjbrom
