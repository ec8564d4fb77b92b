#include "icac/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Eigenvalues>

#include "icac/errors.hpp"

namespace icac {

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

double inf_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  return m.cwiseAbs().rowwise().sum().maxCoeff();
}

double spectral_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

double spectral_radius(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> es(m, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

double min_eigenvalue(const Matrix& m) {
  if (m.size() == 0) return std::numeric_limits<double>::infinity();
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m),
                                           Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

Matrix project_psd(const Matrix& m) {
  if (m.size() == 0) return m;
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m));
  const Vector clipped = es.eigenvalues().cwiseMax(0.0);
  return symmetrize(es.eigenvectors() * clipped.asDiagonal() *
                    es.eigenvectors().transpose());
}

Matrix psd_sqrt(const Matrix& m) {
  if (m.size() == 0) return m;
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m));
  const Vector root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

namespace {

// Eigenpairs of a symmetric PSD matrix above rel_tol·λ_max.
void retained_spectrum(const Matrix& m, double rel_tol, Matrix& vectors,
                       Vector& values) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m));
  const double lmax = std::max(es.eigenvalues().maxCoeff(), 0.0);
  const double cut = rel_tol * lmax;
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    if (lmax > 0.0 && es.eigenvalues()(i) > cut) keep.push_back(i);
  }
  vectors.resize(m.rows(), static_cast<Eigen::Index>(keep.size()));
  values.resize(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    const auto col = static_cast<Eigen::Index>(k);
    vectors.col(col) = es.eigenvectors().col(keep[k]);
    values(col) = es.eigenvalues()(keep[k]);
  }
}

}  // namespace

Matrix pinv_psd(const Matrix& m, double rel_tol) {
  if (m.size() == 0) return m;
  Matrix vectors;
  Vector values;
  retained_spectrum(m, rel_tol, vectors, values);
  return vectors * values.cwiseInverse().asDiagonal() * vectors.transpose();
}

Matrix range_projector_psd(const Matrix& m, double rel_tol) {
  if (m.size() == 0) return m;
  Matrix vectors;
  Vector values;
  retained_spectrum(m, rel_tol, vectors, values);
  return vectors * vectors.transpose();
}

std::optional<double> log_det_pd(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::LLT<Matrix> llt(symmetrize(m));
  if (llt.info() != Eigen::Success) return std::nullopt;
  const Vector d = llt.matrixLLT().diagonal();
  if ((d.array() <= 0.0).any()) return std::nullopt;
  return 2.0 * d.array().log().sum();
}

std::optional<Matrix> right_solve_pd(const Matrix& b, const Matrix& a) {
  Eigen::LLT<Matrix> llt(symmetrize(a));
  if (llt.info() != Eigen::Success) return std::nullopt;
  if ((llt.matrixLLT().diagonal().array() <= 0.0).any()) return std::nullopt;
  // B A⁻¹ = (A⁻¹ Bᵀ)ᵀ
  Matrix x = llt.solve(b.transpose()).transpose();
  if (!x.allFinite()) return std::nullopt;
  return x;
}

Matrix controllable_basis(const Matrix& a, const Matrix& b) {
  const Eigen::Index n = a.rows();
  const double tol =
      1e-10 * std::max({1.0, spectral_norm(b), spectral_norm(a)});
  Matrix basis(n, 0);
  Matrix candidates = b;
  for (Eigen::Index step = 0; step <= n && candidates.cols() > 0; ++step) {
    // Remove components already spanned, then orthonormalize what is left.
    Matrix residual = candidates - basis * (basis.transpose() * candidates);
    if (residual.cols() == 0) break;
    Eigen::JacobiSVD<Matrix> svd(residual, Eigen::ComputeThinU);
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i) {
      if (svd.singularValues()(i) > tol) ++rank;
    }
    if (rank == 0) break;
    Matrix grown(n, basis.cols() + rank);
    grown << basis, svd.matrixU().leftCols(rank);
    // Re-orthonormalize to keep the basis numerically clean.
    Eigen::HouseholderQR<Matrix> qr(grown);
    basis = qr.householderQ() * Matrix::Identity(n, grown.cols());
    candidates = a * svd.matrixU().leftCols(rank);
  }
  return basis;
}

Matrix unstable_subspace_basis(const Matrix& a, double tol) {
  const Eigen::Index n = a.rows();
  if (n == 0) return Matrix(0, 0);
  const Eigen::VectorXcd eig = Eigen::EigenSolver<Matrix>(a, false).eigenvalues();
  double largest_stable = 0.0;
  double smallest_unstable = std::numeric_limits<double>::infinity();
  Eigen::Index unstable = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mod = std::abs(eig(i));
    if (mod >= 1.0 - tol) {
      ++unstable;
      smallest_unstable = std::min(smallest_unstable, mod);
    } else {
      largest_stable = std::max(largest_stable, mod);
    }
  }
  if (unstable == 0) return Matrix(n, 0);
  if (unstable == n) return Matrix::Identity(n, n);

  // Rescale so the split radius becomes the unit circle, then map it to the
  // imaginary axis: c = (z + 1)/(z − 1) sends |z| > 1 to Re c > 0.
  const double radius = std::sqrt(std::max(largest_stable, 1e-300) *
                                  smallest_unstable);
  const Matrix scaled = a / radius;
  const Matrix eye = Matrix::Identity(n, n);
  Matrix x = (scaled - eye).partialPivLu().solve(scaled + eye);
  for (int it = 0; it < 100; ++it) {
    const Eigen::PartialPivLU<Matrix> lu(x);
    const double det = std::abs(lu.determinant());
    const double mu =
        det > 0.0 && std::isfinite(det)
            ? std::pow(det, -1.0 / static_cast<double>(n))
            : 1.0;
    const Matrix next = 0.5 * (mu * x + lu.inverse() / mu);
    const double change = (next - x).cwiseAbs().maxCoeff();
    x = next;
    if (change <= 1e-13 * (1.0 + x.cwiseAbs().maxCoeff())) break;
  }
  const Matrix projector = 0.5 * (eye + x);
  Eigen::JacobiSVD<Matrix> svd(projector, Eigen::ComputeThinU);
  return svd.matrixU().leftCols(unstable);
}

Matrix orthogonal_complement(const Matrix& m) {
  const Eigen::Index n = m.rows();
  if (m.cols() == 0) return Matrix::Identity(n, n);
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullU);
  const auto& sv = svd.singularValues();
  const double thresh = static_cast<double>(std::max(m.rows(), m.cols())) *
                        std::numeric_limits<double>::epsilon() *
                        (sv.size() ? sv(0) : 0.0);
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > thresh) ++rank;
  }
  return svd.matrixU().rightCols(n - rank);
}

Matrix solve_discrete_lyapunov(const Matrix& a, const Matrix& q) {
  const Eigen::Index n = a.rows();
  if (n == 0) return q;
  // vec(X) = (I − A⊗A)⁻¹ vec(Q)
  const Eigen::Index nn = n * n;
  Matrix system = Matrix::Identity(nn, nn);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      system.block(i * n, j * n, n, n) -= a(i, j) * a;
    }
  }
  Eigen::Map<const Vector> rhs(q.data(), nn);
  Eigen::PartialPivLU<Matrix> lu(system);
  Vector sol = lu.solve(rhs);
  if (!sol.allFinite()) {
    throw Error(ErrorCode::kNumericalFailure,
                "Lyapunov equation is singular (A has reciprocal eigenvalues)");
  }
  return symmetrize(Eigen::Map<Matrix>(sol.data(), n, n));
}

}  // namespace icac
