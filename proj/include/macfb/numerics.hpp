// SPDX-License-Identifier: Apache-2.0
//
// Dense complex Hermitian linear algebra used throughout the library:
// validated Hermitian PSD matrices, deterministic eigendecomposition and
// the log2 det(I + s*G) capacity kernel.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <utility>

namespace macfb {

using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;
using Complex = std::complex<double>;

/// Numerical tolerances. The defaults are fixed project-wide; they are
/// grouped in one struct so call sites that need to loosen or tighten a
/// check can do so explicitly.
struct Tolerances {
  double hermitian = 1e-10;     ///< relative max-norm Hermitian residual
  double psd = 1e-9;            ///< allowed negative eigenvalue, relative to the largest
  double eig_residual = 1e-8;   ///< eigenpair residual, relative to the largest eigenvalue
  double phase = 1e-12;         ///< modulus below which an entry cannot anchor a phase
};

inline bool is_finite(const CMatrix& a) {
  return a.allFinite();
}

/// Max-norm Hermitian residual ||A - A*||_max / (1 + ||A||_max).
inline double herm_residual(const CMatrix& a) {
  if (a.rows() != a.cols()) return std::numeric_limits<double>::infinity();
  const double scale = 1.0 + a.cwiseAbs().maxCoeff();
  return (a - a.adjoint()).cwiseAbs().maxCoeff() / scale;
}

inline bool is_hermitian(const CMatrix& a, double tol) {
  return a.rows() == a.cols() && herm_residual(a) <= tol;
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues sorted descending.
/// Columns of `vectors` are orthonormal eigenvectors in matching order.
struct EigenSystem {
  RVector values;
  CMatrix vectors;
};

namespace detail {

/// Rotates each column by a unit phase so that its first entry with modulus
/// above `phase_tol` becomes real and positive. Makes the decomposition of a
/// matrix with non-degenerate spectrum reproducible across runs.
inline void canonicalize_phases(CMatrix& vectors, double phase_tol) {
  for (Eigen::Index j = 0; j < vectors.cols(); ++j) {
    for (Eigen::Index i = 0; i < vectors.rows(); ++i) {
      const double m = std::abs(vectors(i, j));
      if (m > phase_tol) {
        vectors.col(j) *= std::conj(vectors(i, j)) / m;
        break;
      }
    }
  }
}

/// Hermitian eigendecomposition without a PSD requirement. The input is
/// symmetrized before factoring, so callers may pass products that are
/// Hermitian only up to rounding.
inline EigenSystem herm_eig_unchecked(const CMatrix& a, double phase_tol = Tolerances{}.phase) {
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(a);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("herm_eig: eigendecomposition failed to converge");
  }
  EigenSystem out;
  out.values = solver.eigenvalues().reverse();
  out.vectors = solver.eigenvectors().rowwise().reverse();
  canonicalize_phases(out.vectors, phase_tol);
  return out;
}

}  // namespace detail

inline EigenSystem herm_eig(const CMatrix& a, const Tolerances& tol = {}) {
  if (a.rows() != a.cols()) {
    throw std::invalid_argument("herm_eig: matrix must be square");
  }
  if (!is_finite(a)) {
    throw std::invalid_argument("herm_eig: matrix has non-finite entries");
  }
  if (herm_residual(a) > tol.hermitian) {
    throw std::invalid_argument("herm_eig: matrix is not Hermitian within tolerance");
  }
  return detail::herm_eig_unchecked(a, tol.phase);
}

/// A validated Hermitian positive semidefinite matrix. Construction checks
/// the Hermitian residual and the smallest eigenvalue, symmetrizes the
/// stored matrix and keeps the eigendecomposition for reuse.
class HermitianPsd {
 public:
  explicit HermitianPsd(CMatrix a, const Tolerances& tol = {}) {
    if (a.rows() != a.cols()) {
      throw std::invalid_argument("HermitianPsd: matrix must be square");
    }
    if (!is_finite(a)) {
      throw std::invalid_argument("HermitianPsd: matrix has non-finite entries");
    }
    if (herm_residual(a) > tol.hermitian) {
      throw std::invalid_argument("HermitianPsd: matrix is not Hermitian within tolerance");
    }
    mat_ = 0.5 * (a + a.adjoint());
    eig_ = detail::herm_eig_unchecked(mat_, tol.phase);
    const double largest = eig_.values.size() > 0 ? std::max(eig_.values(0), 0.0) : 0.0;
    const double smallest = eig_.values.size() > 0 ? eig_.values(eig_.values.size() - 1) : 0.0;
    if (smallest < -tol.psd * largest) {
      throw std::invalid_argument("HermitianPsd: matrix is indefinite beyond tolerance");
    }
  }

  Eigen::Index dim() const { return mat_.rows(); }
  const CMatrix& mat() const { return mat_; }
  const EigenSystem& eig() const { return eig_; }
  double trace() const { return mat_.trace().real(); }

 private:
  CMatrix mat_;
  EigenSystem eig_;
};

inline EigenSystem herm_eig(const HermitianPsd& a) { return a.eig(); }

/// Hermitian square root V sqrt(L) V*, with eigenvalues clamped at zero.
inline CMatrix psd_sqrt(const HermitianPsd& a) {
  const EigenSystem& e = a.eig();
  RVector roots = e.values.cwiseMax(0.0).cwiseSqrt();
  return e.vectors * roots.asDiagonal() * e.vectors.adjoint();
}

namespace detail {

/// log2 det(I + scale*G) for a Hermitian G that is PSD by construction.
/// Cholesky on the shifted matrix; falls back to the eigenvalue sum when the
/// factorization fails near the PSD boundary. Throws if G turns out
/// indefinite beyond `psd_tol`.
inline double log2_det_i_plus_gram(double scale, const CMatrix& g, double psd_tol = Tolerances{}.psd) {
  const Eigen::Index n = g.rows();
  if (n == 0) return 0.0;
  CMatrix shifted = scale * g;
  for (Eigen::Index i = 0; i < n; ++i) shifted(i, i) += 1.0;
  Eigen::LLT<CMatrix> llt(shifted);
  if (llt.info() == Eigen::Success) {
    double bits = 0.0;
    const auto& l = llt.matrixLLT();
    for (Eigen::Index i = 0; i < n; ++i) bits += std::log2(l(i, i).real());
    return 2.0 * bits;
  }
  EigenSystem e = herm_eig_unchecked(g);
  const double largest = std::max(e.values(0), 0.0);
  if (e.values(n - 1) < -psd_tol * largest) {
    throw std::invalid_argument("log2_det_i_plus: matrix is indefinite beyond tolerance");
  }
  double bits = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    bits += std::log2(1.0 + scale * std::max(e.values(i), 0.0));
  }
  return bits;
}

}  // namespace detail

/// log2 det(I + scale*G) in bits, scale = 1/sigma^2 > 0.
inline double log2_det_i_plus(double scale, const HermitianPsd& g) {
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw std::invalid_argument("log2_det_i_plus: scale must be positive and finite");
  }
  return detail::log2_det_i_plus_gram(scale, g.mat());
}

/// Overload for matrices that are Hermitian PSD by construction (channel
/// Gramians on the Monte Carlo path). Checks the Hermitian residual only.
inline double log2_det_i_plus(double scale, const CMatrix& g, const Tolerances& tol = {}) {
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw std::invalid_argument("log2_det_i_plus: scale must be positive and finite");
  }
  if (herm_residual(g) > tol.hermitian) {
    throw std::invalid_argument("log2_det_i_plus: matrix is not Hermitian within tolerance");
  }
  return detail::log2_det_i_plus_gram(scale, 0.5 * (g + g.adjoint()), tol.psd);
}

}  // namespace macfb
