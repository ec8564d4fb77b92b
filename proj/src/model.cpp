#include "icac/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "icac/errors.hpp"

namespace icac {
namespace {

std::string shape(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void expect_shape(const Matrix& m, const char* name, Eigen::Index rows,
                  Eigen::Index cols) {
  if (m.rows() != rows || m.cols() != cols) {
    throw Error(ErrorCode::kDimensionMismatch,
                std::string(name) + " is " + shape(m) + ", expected " +
                    std::to_string(rows) + "x" + std::to_string(cols));
  }
  if (!m.allFinite()) {
    throw Error(ErrorCode::kConfig,
                std::string(name) + " has non-finite entries");
  }
}

Matrix symmetric_or_throw(const Matrix& m, const char* name) {
  const double scale = 1.0 + m.cwiseAbs().maxCoeff();
  if (m.size() > 0 &&
      (m - m.transpose()).cwiseAbs().maxCoeff() > kSymmetryTol * scale) {
    throw Error(ErrorCode::kNotPsd, std::string(name) + " is not symmetric");
  }
  return symmetrize(m);
}

Matrix psd_or_throw(const Matrix& raw, const char* name) {
  Matrix m = symmetric_or_throw(raw, name);
  if (m.size() == 0) return m;
  const double lmin = min_eigenvalue(m);
  if (lmin < -kPsdTol * (1.0 + spectral_norm(m))) {
    std::ostringstream os;
    os << name << " is not positive semidefinite (most negative eigenvalue "
       << lmin << ")";
    throw Error(ErrorCode::kNotPsd, os.str());
  }
  // Only touch the matrix when clipping is actually needed, so already-valid
  // inputs come back bit-identical.
  return lmin < 0.0 ? project_psd(m) : m;
}

Matrix pd_or_throw(const Matrix& raw, const char* name) {
  Matrix m = symmetric_or_throw(raw, name);
  const double lmin = min_eigenvalue(m);
  const double floor = 16.0 * std::numeric_limits<double>::epsilon() *
                       static_cast<double>(m.rows()) * spectral_norm(m);
  if (!(lmin > floor)) {
    std::ostringstream os;
    os << name << " is not positive definite (smallest eigenvalue " << lmin
       << ")";
    throw Error(ErrorCode::kNotPd, os.str());
  }
  return m;
}

// Numerical rank with threshold max-dim · eps · σ_max.
template <typename Svd>
Eigen::Index numerical_rank(const Svd& svd, Eigen::Index rows,
                            Eigen::Index cols) {
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) == 0.0) return 0;
  const double thresh = static_cast<double>(std::max(rows, cols)) *
                        std::numeric_limits<double>::epsilon() * sv(0);
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > thresh) ++rank;
  }
  return rank;
}

template <typename Select>
PbhResult pbh_columns(const Matrix& a, const Matrix& c, Select unstable) {
  const Eigen::Index n = a.rows();
  PbhResult result;
  if (n == 0) return result;
  Eigen::EigenSolver<Matrix> es(a, false);
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::complex<double> lambda = es.eigenvalues()(i);
    if (!unstable(lambda)) continue;
    Eigen::MatrixXcd stacked(n + c.rows(), n);
    stacked.topRows(n) = a.cast<std::complex<double>>();
    stacked.topRows(n).diagonal().array() -= lambda;
    stacked.bottomRows(c.rows()) = c.cast<std::complex<double>>();
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(stacked, Eigen::ComputeFullV);
    if (numerical_rank(svd, stacked.rows(), stacked.cols()) < n) {
      result.holds = false;
      result.witness = PbhWitness{lambda, svd.matrixV().col(n - 1)};
      return result;
    }
  }
  return result;
}

template <typename Select>
PbhResult pbh_rows(const Matrix& a, const Matrix& b, Select unstable) {
  // [A − λI, B] loses row rank iff [Aᵀ − λI; Bᵀ] loses column rank; a null
  // vector x of the latter satisfies xᵀA = λxᵀ, xᵀB = 0.
  return pbh_columns(a.transpose(), b.transpose(), unstable);
}

}  // namespace

LqgSystem validate_system(const LqgSystem& in) {
  LqgSystem sys = in;
  const Eigen::Index r = sys.F.rows();
  if (sys.F.cols() != r) {
    throw Error(ErrorCode::kDimensionMismatch,
                "F must be square, got " + shape(sys.F));
  }
  if (r == 0) {
    throw Error(ErrorCode::kDimensionMismatch, "state dimension is zero");
  }
  const Eigen::Index p = sys.G.cols();
  const Eigen::Index l = sys.H.rows();
  if (p == 0 || l == 0) {
    throw Error(ErrorCode::kDimensionMismatch,
                "input and output dimensions must be positive");
  }
  if (sys.L.size() == 0) sys.L = Matrix::Zero(r, l);
  if (sys.Sigma1.size() == 0) sys.Sigma1 = Matrix::Zero(r, r);

  expect_shape(sys.F, "F", r, r);
  expect_shape(sys.G, "G", r, p);
  expect_shape(sys.H, "H", l, r);
  expect_shape(sys.J, "J", l, p);
  expect_shape(sys.W, "W", r, r);
  expect_shape(sys.V, "V", l, l);
  expect_shape(sys.L, "L", r, l);
  expect_shape(sys.Sigma1, "Sigma1", r, r);
  expect_shape(sys.Q, "Q", r, r);
  expect_shape(sys.R, "R", p, p);

  sys.W = psd_or_throw(sys.W, "W");
  sys.Sigma1 = psd_or_throw(sys.Sigma1, "Sigma1");
  sys.Q = psd_or_throw(sys.Q, "Q");
  sys.V = pd_or_throw(sys.V, "V");
  sys.R = pd_or_throw(sys.R, "R");

  Matrix joint(r + l, r + l);
  joint << sys.W, sys.L, sys.L.transpose(), sys.V;
  const double lmin = min_eigenvalue(joint);
  if (lmin < -kPsdTol * (1.0 + spectral_norm(joint))) {
    std::ostringstream os;
    os << "joint noise covariance [[W, L], [L', V]] is not positive "
          "semidefinite (most negative eigenvalue "
       << lmin << ")";
    throw Error(ErrorCode::kNotPsd, os.str());
  }
  return sys;
}

PbhResult pbh_detectable(const Matrix& a, const Matrix& c, double tol) {
  return pbh_columns(a, c, [tol](std::complex<double> z) {
    return std::abs(z) >= 1.0 - tol;
  });
}

PbhResult pbh_stabilizable(const Matrix& a, const Matrix& b, double tol) {
  return pbh_rows(a, b, [tol](std::complex<double> z) {
    return std::abs(z) >= 1.0 - tol;
  });
}

PbhResult pbh_unit_circle_controllable(const Matrix& a, const Matrix& b,
                                       double tol) {
  return pbh_rows(a, b, [tol](std::complex<double> z) {
    return std::abs(std::abs(z) - 1.0) <= tol;
  });
}

AssumptionReport check_assumptions(const LqgSystem& sys) {
  AssumptionReport report;
  report.detectable_FH = pbh_detectable(sys.F, sys.H);
  report.stabilizable_FG = pbh_stabilizable(sys.F, sys.G);

  const Matrix v_inv_h = sys.V.llt().solve(sys.H);
  const Matrix v_inv_lt = sys.V.llt().solve(sys.L.transpose());
  const Matrix f_s = sys.F - sys.L * v_inv_h;
  const Matrix w_s = project_psd(sys.W - sys.L * v_inv_lt);
  report.unit_circle_controllable =
      pbh_unit_circle_controllable(f_s, psd_sqrt(w_s));

  auto note = [&report](const char* what, const PbhResult& r) {
    report.notes.push_back(std::string(what) +
                           (r.holds ? ": holds" : ": FAILS (" + describe(r) +
                                                      ")"));
  };
  note("(F, H) detectable", report.detectable_FH);
  note("(F, G) stabilizable", report.stabilizable_FG);
  note("(F_s, W_s^1/2) controllable on the unit circle",
       report.unit_circle_controllable);
  if (sys.Q.isZero(0.0)) {
    report.notes.emplace_back(
        "Q = 0: stabilizability of (F, G) is not required");
  }
  return report;
}

LqgSystem from_isi_channel(const IsiChannel& ch) {
  LqgSystem sys;
  sys.F = ch.F;
  sys.G = ch.G;
  sys.H = ch.H;
  sys.J = ch.J;
  sys.W = ch.W;
  sys.V = ch.V;
  sys.L = ch.L;
  sys.Q = Matrix::Zero(ch.F.rows(), ch.F.cols());
  sys.R = Matrix::Identity(ch.G.cols(), ch.G.cols());
  return validate_system(sys);
}

std::string describe(const PbhResult& result) {
  if (result.holds || !result.witness) return "ok";
  std::ostringstream os;
  const auto& w = *result.witness;
  os << "eigenvalue " << w.eigenvalue.real();
  if (w.eigenvalue.imag() != 0.0) {
    os << (w.eigenvalue.imag() < 0 ? " - " : " + ")
       << std::abs(w.eigenvalue.imag()) << "i";
  }
  os << " (|lambda| = " << std::abs(w.eigenvalue) << "), vector [";
  for (Eigen::Index i = 0; i < w.vector.size(); ++i) {
    if (i) os << ", ";
    os << w.vector(i).real();
    if (w.vector(i).imag() != 0.0) os << "+" << w.vector(i).imag() << "i";
  }
  os << "]";
  return os.str();
}

}  // namespace icac
