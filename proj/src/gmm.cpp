#include "gmmest/gmm.hpp"

#include <cmath>
#include <limits>

namespace gmmest {

std::string to_string(CovStructure s) {
  switch (s) {
    case CovStructure::full: return "full";
    case CovStructure::circulant: return "circulant";
    case CovStructure::kronecker: return "kronecker";
  }
  return "?";
}

CovStructure cov_structure_from_string(const std::string& s) {
  if (s == "full") return CovStructure::full;
  if (s == "circulant") return CovStructure::circulant;
  if (s == "kronecker") return CovStructure::kronecker;
  throw ConfigError("unknown covariance structure '" + s + "'");
}

namespace {

// C = F^H diag(c) F is circulant with first column ifft(c).
CMatrix circulant_from_spectrum(const RVector& c) {
  const Eigen::Index n = c.size();
  CVector col(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    cplx acc = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
      const auto r = (i * k) % n;
      acc += c(k) * std::polar(1.0, 2.0 * kPi * static_cast<double>(r) / static_cast<double>(n));
    }
    col(i) = acc / static_cast<double>(n);
  }
  CMatrix out(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index l = 0; l < n; ++l) out(i, l) = col((i - l + n) % n);
  return out;
}

void check_psd(const CMatrix& c, const std::string& label) {
  if (hermitian_defect(c) > 1e-10) throw InvariantError(label + " is not Hermitian");
  if (min_eig_ratio(c) < -1e-10) throw InvariantError(label + " is not positive semidefinite");
}

}  // namespace

void Gmm::validate() const {
  const Eigen::Index k = components();
  if (k == 0) throw InvariantError("GMM has no components");
  if (static_cast<Eigen::Index>(means.size()) != k || static_cast<Eigen::Index>(covs.size()) != k)
    throw InvariantError("GMM component arrays disagree in length");
  if ((weights.array() < 0.0).any()) throw InvariantError("GMM weight is negative");
  if (std::abs(weights.sum() - 1.0) > 1e-12) throw InvariantError("GMM weights do not sum to one");
  const Eigen::Index n = dim();
  for (Eigen::Index i = 0; i < k; ++i) {
    if (means[i].size() != n || covs[i].rows() != n || covs[i].cols() != n)
      throw InvariantError("GMM component " + std::to_string(i) + " has inconsistent dimensions");
    if (!means[i].allFinite() || !covs[i].allFinite())
      throw InvariantError("GMM component " + std::to_string(i) + " is not finite");
  }
  switch (structure) {
    case CovStructure::full:
      for (Eigen::Index i = 0; i < k; ++i) check_psd(covs[i], "covariance " + std::to_string(i));
      break;
    case CovStructure::circulant:
      if (static_cast<Eigen::Index>(spectra.size()) != k)
        throw InvariantError("circulant GMM needs one spectrum per component");
      for (Eigen::Index i = 0; i < k; ++i) {
        if (spectra[i].size() != n || (spectra[i].array() <= 0.0).any())
          throw InvariantError("circulant spectrum " + std::to_string(i) + " must be positive");
        if (hermitian_defect(covs[i]) > 1e-10)
          throw InvariantError("covariance " + std::to_string(i) + " is not Hermitian");
      }
      break;
    case CovStructure::kronecker:
      if (!tx || !rx) throw InvariantError("Kronecker GMM is missing its factors");
      if (tx->components() * rx->components() != k || tx->dim() * rx->dim() != n)
        throw InvariantError("Kronecker factors do not match the combined GMM");
      tx->validate();
      rx->validate();
      for (Eigen::Index i = 0; i < k; ++i)
        if (hermitian_defect(covs[i]) > 1e-10)
          throw InvariantError("covariance " + std::to_string(i) + " is not Hermitian");
      break;
  }
}

Gmm Gmm::full(RVector weights, std::vector<CVector> means, std::vector<CMatrix> covs) {
  Gmm g;
  g.weights = std::move(weights);
  g.means = std::move(means);
  g.covs = std::move(covs);
  g.structure = CovStructure::full;
  return g;
}

Gmm Gmm::circulant(RVector weights, std::vector<CVector> means, std::vector<RVector> spectra) {
  Gmm g;
  g.weights = std::move(weights);
  g.means = std::move(means);
  g.structure = CovStructure::circulant;
  g.covs.reserve(spectra.size());
  for (const auto& c : spectra) g.covs.push_back(circulant_from_spectrum(c));
  g.spectra = std::move(spectra);
  return g;
}

double complex_gaussian_logpdf(const CVector& x, const CVector& mu, const HermitianFactor& cov) {
  require_dim(x.size() == mu.size() && x.size() == cov.dim(),
              "complex_gaussian_logpdf: dimension mismatch");
  const double m = static_cast<double>(x.size());
  return -m * std::log(kPi) - cov.logdet() - cov.quad_form(x - mu);
}

double normalize_log_weights(RVector& log_w) {
  const double top = log_w.maxCoeff();
  if (!std::isfinite(top)) throw NumericError("log-weights are not finite");
  log_w = (log_w.array() - top).exp();
  const double total = log_w.sum();
  log_w /= total;
  return top + std::log(total);
}

GmmDensity::GmmDensity(const Gmm& gmm) {
  const Eigen::Index k = gmm.components();
  require_dim(k > 0, "GmmDensity: empty mixture");
  log_weights_ = gmm.weights.array().log();
  means_ = gmm.means;
  factors_.reserve(static_cast<std::size_t>(k));
  for (Eigen::Index i = 0; i < k; ++i)
    factors_.emplace_back(gmm.covs[i], "GMM covariance " + std::to_string(i));
}

RVector GmmDensity::joint_log(const CVector& x) const {
  RVector out(components());
  for (Eigen::Index k = 0; k < components(); ++k)
    out(k) = log_weights_(k) + complex_gaussian_logpdf(x, means_[k], factors_[k]);
  return out;
}

RMatrix GmmDensity::joint_log(const CMatrix& x) const {
  const double n = static_cast<double>(x.rows());
  RMatrix out(components(), x.cols());
  for (Eigen::Index k = 0; k < components(); ++k) {
    require_dim(x.rows() == means_[k].size(), "GmmDensity: dimension mismatch");
    CMatrix z = x.colwise() - means_[k];
    factors_[k].lower().triangularView<Eigen::Lower>().solveInPlace(z);
    out.row(k) = (-z.colwise().squaredNorm().array()) +
                 (log_weights_(k) - n * std::log(kPi) - factors_[k].logdet());
  }
  return out;
}

double GmmDensity::logpdf(const CVector& x) const {
  RVector lw = joint_log(x);
  return normalize_log_weights(lw);
}

RVector GmmDensity::responsibilities(const CVector& x) const {
  RVector lw = joint_log(x);
  normalize_log_weights(lw);
  return lw;
}

RVector responsibilities(const CVector& x, const Gmm& gmm) {
  return GmmDensity(gmm).responsibilities(x);
}

double gmm_logpdf(const CVector& x, const Gmm& gmm) { return GmmDensity(gmm).logpdf(x); }

std::int64_t full_covariance_parameters(std::int64_t n, std::int64_t k) {
  return k * n * (n + 1) / 2;
}

std::int64_t kronecker_covariance_parameters(std::int64_t n_rx, std::int64_t k_rx,
                                             std::int64_t n_tx, std::int64_t k_tx) {
  return full_covariance_parameters(n_rx, k_rx) + full_covariance_parameters(n_tx, k_tx);
}

}  // namespace gmmest
