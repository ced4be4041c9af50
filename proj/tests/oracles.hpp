#pragma once

// Brute-force reference computations shared by the tests. Everything here
// uses explicit inverses and determinants on purpose.

#include "gmmest/gmm.hpp"
#include "gmmest/linalg.hpp"
#include "gmmest/rng.hpp"

#include <Eigen/LU>

#include <cmath>
#include <vector>

namespace oracle {

using namespace gmmest;

// density of N_C(mu, C) at x, computed directly (no logs)
inline double gaussian_pdf(const CVector& x, const CVector& mu, const CMatrix& c) {
  const double m = static_cast<double>(x.size());
  const CVector d = x - mu;
  const double quad = (d.adjoint() * c.inverse() * d)(0, 0).real();
  return std::exp(-quad) / (std::pow(kPi, m) * c.determinant().real());
}

inline double gaussian_logpdf(const CVector& x, const CVector& mu, const CMatrix& c) {
  const double m = static_cast<double>(x.size());
  const CVector d = x - mu;
  const double quad = (d.adjoint() * c.inverse() * d)(0, 0).real();
  return -m * std::log(kPi) - std::log(c.determinant().real()) - quad;
}

// C A^H (A C A^H + Sigma)^{-1} (y - A mu) + mu
inline CVector lmmse(const CMatrix& c, const CVector& mu, const CMatrix& a, const CMatrix& sigma,
                     const CVector& y) {
  const CMatrix s = a * c * a.adjoint() + sigma;
  return c * a.adjoint() * s.inverse() * (y - a * mu) + mu;
}

inline CMatrix random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c) {
  CMatrix m(r, c);
  for (Eigen::Index j = 0; j < c; ++j) m.col(j) = rng.complex_normal_vector(r);
  return m;
}

// Hermitian PD matrix with eigenvalues roughly in [floor, floor + 2]
inline CMatrix random_pd(Rng& rng, Eigen::Index n, double floor = 0.2) {
  const CMatrix b = random_matrix(rng, n, n);
  CMatrix c = b * b.adjoint() / static_cast<double>(n);
  c.diagonal().array() += floor;
  return 0.5 * (c + c.adjoint());
}

inline RVector random_weights(Rng& rng, Eigen::Index k) {
  RVector w(k);
  for (Eigen::Index i = 0; i < k; ++i) w(i) = 0.2 + rng.uniform();
  return w / w.sum();
}

inline Gmm random_gmm(Rng& rng, Eigen::Index k, Eigen::Index n, double mean_var = 1.0) {
  std::vector<CVector> means;
  std::vector<CMatrix> covs;
  for (Eigen::Index i = 0; i < k; ++i) {
    means.push_back(rng.complex_normal_vector(n, mean_var));
    covs.push_back(random_pd(rng, n));
  }
  return Gmm::full(random_weights(rng, k), means, covs);
}

inline double rel_err(const CVector& a, const CVector& b) {
  return (a - b).norm() / std::max(1e-300, b.norm());
}

}  // namespace oracle
