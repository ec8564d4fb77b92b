#pragma once

#include <optional>

#include <Eigen/Dense>

namespace icac {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// (M + Mᵀ) / 2
Matrix symmetrize(const Matrix& m);

// Induced ∞-norm (maximum absolute row sum). Zero for empty matrices.
double inf_norm(const Matrix& m);

double spectral_norm(const Matrix& m);

double spectral_radius(const Matrix& m);

// Smallest eigenvalue of the symmetric part of `m`; +inf for an empty matrix.
double min_eigenvalue(const Matrix& m);

// Eigenvalue clipping onto the PSD cone.
Matrix project_psd(const Matrix& m);

// Symmetric square root of a PSD matrix (negative eigenvalues clipped).
Matrix psd_sqrt(const Matrix& m);

// Moore–Penrose pseudoinverse of a symmetric PSD matrix; eigenvalues below
// rel_tol·λ_max are treated as zero.
Matrix pinv_psd(const Matrix& m, double rel_tol);

// Orthogonal projector onto the kernel complement used by pinv_psd, i.e.
// M M† for the same truncation.
Matrix range_projector_psd(const Matrix& m, double rel_tol);

// log det of a symmetric positive definite matrix, or nullopt when the
// Cholesky factorization fails.
std::optional<double> log_det_pd(const Matrix& m);

// Solve X·A = B for symmetric positive definite A via Cholesky, i.e. B·A⁻¹.
// Returns nullopt if A is not numerically positive definite.
std::optional<Matrix> right_solve_pd(const Matrix& b, const Matrix& a);

// Orthonormal basis of the controllable subspace of (A, B).
Matrix controllable_basis(const Matrix& a, const Matrix& b);

// Orthonormal basis of the right-invariant subspace of A belonging to the
// eigenvalues with |λ| ≥ 1 − tol (spectral projector via the matrix sign
// function of a Cayley transform).
Matrix unstable_subspace_basis(const Matrix& a, double tol);

// Orthonormal basis of the orthogonal complement of range(m).
Matrix orthogonal_complement(const Matrix& m);

// Stabilizing solution X of X = A X Aᵀ + Q for stable A (Kronecker solve).
Matrix solve_discrete_lyapunov(const Matrix& a, const Matrix& q);

}  // namespace icac
