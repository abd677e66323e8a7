#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "rfo/errors.hpp"

namespace rfo {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Shared numeric tolerances.
inline constexpr double kSymmetryTol = 1e-12;     // relative, off-diagonal mismatch
inline constexpr double kPsdClampTol = 1e-10;     // eigenvalues in [-tol, 0) clamp to 0
inline constexpr double kStabilityMargin = 1e-9;  // require rho(A) < 1 - margin
inline constexpr int kLyapunovMaxDim = 32;        // vectorized solve is O(n^6)

namespace detail {

inline void require(bool cond, const std::string& what) {
  if (!cond) throw InvalidArgument(what);
}

inline void require_finite(const Matrix& m, const std::string& name) {
  if (!m.allFinite()) throw InvalidArgument(name + " has non-finite entries");
}

}  // namespace detail

// ============================================================================
// Basic spectral quantities
// ============================================================================

// Largest absolute eigenvalue. Empty matrices have an empty spectrum; return 0.
[[nodiscard]] inline double spectral_radius(const Matrix& a) {
  detail::require(a.rows() == a.cols(), "spectral_radius: matrix must be square");
  detail::require_finite(a, "spectral_radius: matrix");
  if (a.rows() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> es(a, /*computeEigenvectors=*/false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

// Largest singular value (operator 2-norm).
[[nodiscard]] inline double operator_norm(const Matrix& a) {
  detail::require_finite(a, "operator_norm: matrix");
  if (a.size() == 0) return 0.0;
  return a.jacobiSvd().singularValues()(0);
}

// Extreme eigenvalues of a symmetric matrix (symmetry is the caller's
// responsibility; Eigen reads only the lower triangle).
[[nodiscard]] inline double min_eigenvalue(const Matrix& sym) {
  detail::require(sym.rows() == sym.cols(), "min_eigenvalue: matrix must be square");
  if (sym.rows() == 0) return 0.0;
  return Eigen::SelfAdjointEigenSolver<Matrix>(sym, Eigen::EigenvaluesOnly).eigenvalues()(0);
}

[[nodiscard]] inline double max_eigenvalue(const Matrix& sym) {
  detail::require(sym.rows() == sym.cols(), "max_eigenvalue: matrix must be square");
  if (sym.rows() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(sym.rows() - 1);
}

// Kronecker product, dense. Small inputs only (Lyapunov vectorization).
[[nodiscard]] inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

// ============================================================================
// Definite matrix value types
// ============================================================================

namespace detail {

inline Matrix symmetrized_or_throw(Matrix m, const std::string& name) {
  require(m.rows() == m.cols(), name + ": matrix must be square");
  require_finite(m, name);
  if (m.rows() == 0) return m;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  const double skew = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (skew > kSymmetryTol * scale)
    throw InvalidArgument(name + ": matrix is not symmetric (skew " + std::to_string(skew) + ")");
  return 0.5 * (m + m.transpose());
}

}  // namespace detail

// Symmetric matrix with eigenvalues >= 0 (values in [-1e-10, 0) are treated as
// rounding noise and accepted). Construction validates once; afterwards the
// wrapped matrix can be used freely.
class SymPosSemiDef {
 public:
  SymPosSemiDef() : m_(Matrix::Zero(0, 0)) {}  // empty placeholder, dim() == 0
  explicit SymPosSemiDef(Matrix m) : m_(detail::symmetrized_or_throw(std::move(m), "SymPosSemiDef")) {
    if (m_.rows() > 0 && min_eigenvalue(m_) < -kPsdClampTol)
      throw NotPositiveSemiDefinite("SymPosSemiDef: eigenvalue below -1e-10");
  }

  [[nodiscard]] static SymPosSemiDef identity(Eigen::Index n) { return SymPosSemiDef(Matrix::Identity(n, n)); }
  [[nodiscard]] static SymPosSemiDef scaled_identity(Eigen::Index n, double s) {
    return SymPosSemiDef(s * Matrix::Identity(n, n));
  }
  [[nodiscard]] static SymPosSemiDef diagonal(const Vector& d) {
    return SymPosSemiDef(Matrix(d.asDiagonal()));
  }

  [[nodiscard]] const Matrix& matrix() const { return m_; }
  [[nodiscard]] Eigen::Index dim() const { return m_.rows(); }

 private:
  Matrix m_;
};

// Symmetric matrix with strictly positive eigenvalues.
class SymPosDef {
 public:
  explicit SymPosDef(Matrix m) : m_(detail::symmetrized_or_throw(std::move(m), "SymPosDef")) {
    if (m_.rows() > 0 && min_eigenvalue(m_) <= 0.0)
      throw NotPositiveSemiDefinite("SymPosDef: matrix is not positive definite");
  }

  [[nodiscard]] static SymPosDef identity(Eigen::Index n) { return SymPosDef(Matrix::Identity(n, n)); }

  [[nodiscard]] const Matrix& matrix() const { return m_; }
  [[nodiscard]] Eigen::Index dim() const { return m_.rows(); }
  [[nodiscard]] SymPosSemiDef as_semidef() const { return SymPosSemiDef(m_); }

 private:
  Matrix m_;
};

// ============================================================================
// Lyapunov equation and weighted norms
// ============================================================================

// Solves A^T P A - P + Qbar = 0 for the unique P > 0 of a Schur-stable A by
// vectorization: (I - A^T (x) A^T) vec(P) = vec(Qbar). Exact up to linear-solve
// rounding; restricted to n <= 32 because the system is n^2 x n^2.
[[nodiscard]] inline SymPosDef solve_discrete_lyapunov(const Matrix& a, const SymPosDef& qbar) {
  detail::require(a.rows() == a.cols(), "solve_discrete_lyapunov: A must be square");
  detail::require(a.rows() == qbar.dim(), "solve_discrete_lyapunov: A and Qbar dimensions differ");
  detail::require(a.rows() <= kLyapunovMaxDim, "solve_discrete_lyapunov: n > 32 not supported");
  detail::require_finite(a, "solve_discrete_lyapunov: A");
  if (spectral_radius(a) >= 1.0 - kStabilityMargin)
    throw UnstableSystem("solve_discrete_lyapunov: spectral radius not inside the unit circle");

  const Eigen::Index n = a.rows();
  const Matrix at = a.transpose();
  Matrix lhs = Matrix::Identity(n * n, n * n) - kron(at, at);
  Vector rhs = Eigen::Map<const Vector>(qbar.matrix().data(), n * n);
  Vector vec_p = lhs.partialPivLu().solve(rhs);
  Matrix p = Eigen::Map<const Matrix>(vec_p.data(), n, n);
  p = 0.5 * (p + p.transpose());

  const double residual = (at * p * a - p + qbar.matrix()).cwiseAbs().maxCoeff();
  const double scale = std::max(1.0, qbar.matrix().cwiseAbs().maxCoeff());
  if (residual > 1e-9 * scale)
    throw ConvergenceFailure("solve_discrete_lyapunov: residual " + std::to_string(residual));
  return SymPosDef(p);
}

// Symmetric PSD square root via eigendecomposition: S = V sqrt(D) V^T.
[[nodiscard]] inline Matrix psd_sqrt(const SymPosSemiDef& m) {
  if (m.dim() == 0) return m.matrix();
  Eigen::SelfAdjointEigenSolver<Matrix> es(m.matrix());
  Vector lam = es.eigenvalues();
  for (Eigen::Index i = 0; i < lam.size(); ++i) {
    if (lam(i) < -kPsdClampTol)
      throw NotPositiveSemiDefinite("psd_sqrt: eigenvalue below -1e-10");
    lam(i) = std::sqrt(std::max(lam(i), 0.0));
  }
  Matrix s = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (s + s.transpose());
}

// sqrt(x^T P x). The quadratic form of a PD matrix can round slightly negative
// for tiny x; clamp at zero.
[[nodiscard]] inline double weighted_norm(const Vector& x, const SymPosDef& p) {
  detail::require(x.size() == p.dim(), "weighted_norm: dimension mismatch");
  if (x.size() == 0) return 0.0;
  const double q = x.dot(p.matrix() * x);
  return std::sqrt(std::max(q, 0.0));
}

}  // namespace rfo
