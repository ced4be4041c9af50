#include "gmmest/linalg.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>

namespace gmmest {

CMatrix unitary_dft(Eigen::Index n) {
  CMatrix f(n, n);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      // reduce the index product first so large n keeps full phase accuracy
      const auto r = (i * j) % n;
      const double phase = -2.0 * kPi * static_cast<double>(r) / static_cast<double>(n);
      f(i, j) = std::polar(scale, phase);
    }
  }
  return f;
}

CMatrix kron(const CMatrix& a, const CMatrix& b) {
  CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

CVector kron(const CVector& a, const CVector& b) {
  CVector out(a.size() * b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) out.segment(i * b.size(), b.size()) = a(i) * b;
  return out;
}

double hermitian_defect(const CMatrix& m) {
  if (m.rows() != m.cols()) return std::numeric_limits<double>::infinity();
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.adjoint()).cwiseAbs().maxCoeff() / scale;
}

double min_eig_ratio(const CMatrix& hermitian) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(hermitian, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  const double top = std::max(std::abs(ev.minCoeff()), std::abs(ev.maxCoeff()));
  if (top == 0.0) return 0.0;
  return ev.minCoeff() / top;
}

HermitianFactor::HermitianFactor(const CMatrix& s, const std::string& label) {
  require_dim(s.rows() == s.cols(), label + ": factorization needs a square matrix");
  Eigen::LLT<CMatrix> llt(s);
  if (llt.info() != Eigen::Success)
    throw NumericError(label + ": Cholesky factorization failed (matrix not positive definite)");
  lower_ = llt.matrixL();
  logdet_ = 0.0;
  for (Eigen::Index i = 0; i < lower_.rows(); ++i) {
    const double d = lower_(i, i).real();
    if (!(d > 0.0) || !std::isfinite(d))
      throw NumericError(label + ": Cholesky factor has a non-positive pivot");
    logdet_ += 2.0 * std::log(d);
  }
}

CVector HermitianFactor::whiten(const CVector& x) const {
  return lower_.triangularView<Eigen::Lower>().solve(x);
}

CMatrix HermitianFactor::whiten(const CMatrix& x) const {
  return lower_.triangularView<Eigen::Lower>().solve(x);
}

CVector HermitianFactor::solve(const CVector& x) const {
  CVector z = whiten(x);
  return lower_.adjoint().triangularView<Eigen::Upper>().solve(z);
}

CMatrix HermitianFactor::solve(const CMatrix& x) const {
  CMatrix z = whiten(x);
  return lower_.adjoint().triangularView<Eigen::Upper>().solve(z);
}

}  // namespace gmmest
