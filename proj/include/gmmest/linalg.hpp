#pragma once

// Dense complex linear-algebra vocabulary shared by every module.

#include <Eigen/Dense>

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace gmmest {

using cplx = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;
using RMatrix = Eigen::MatrixXd;

inline constexpr double kPi = 3.14159265358979323846;

// Error taxonomy. Every failure surfaced by the library is one of these.
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct InvariantError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UnsupportedError : std::logic_error {
  using std::logic_error::logic_error;
};
struct DivergedError : std::runtime_error {
  DivergedError(const std::string& what, int iteration)
      : std::runtime_error(what), iteration_(iteration) {}
  int iteration() const noexcept { return iteration_; }

 private:
  int iteration_;
};

inline void require_dim(bool ok, const std::string& what) {
  if (!ok) throw DimensionError(what);
}

// Unitary DFT matrix, F(i, j) = exp(-2*pi*j*i*j/n) / sqrt(n).
CMatrix unitary_dft(Eigen::Index n);

CMatrix kron(const CMatrix& a, const CMatrix& b);
CVector kron(const CVector& a, const CVector& b);

// max |M - M^H| / max(1, max |M|)
double hermitian_defect(const CMatrix& m);

// Smallest eigenvalue divided by the largest (absolute) one; used by the
// PSD checks which allow -1e-10 * lambda_max.
double min_eig_ratio(const CMatrix& hermitian);

// Cholesky factor of a Hermitian PD matrix with a named failure.
class HermitianFactor {
 public:
  HermitianFactor() = default;
  explicit HermitianFactor(const CMatrix& s, const std::string& label = "matrix");

  Eigen::Index dim() const { return lower_.rows(); }
  double logdet() const { return logdet_; }
  const CMatrix& lower() const { return lower_; }

  // L^{-1} x
  CVector whiten(const CVector& x) const;
  CMatrix whiten(const CMatrix& x) const;
  // S^{-1} x
  CVector solve(const CVector& x) const;
  CMatrix solve(const CMatrix& x) const;
  // x^H S^{-1} x
  double quad_form(const CVector& x) const { return whiten(x).squaredNorm(); }

 private:
  CMatrix lower_;
  double logdet_ = 0.0;
};

}  // namespace gmmest
