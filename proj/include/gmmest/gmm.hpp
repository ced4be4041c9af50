#pragma once

#include "gmmest/linalg.hpp"

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace gmmest {

enum class CovStructure { full, circulant, kronecker };

std::string to_string(CovStructure s);
CovStructure cov_structure_from_string(const std::string& s);

/// K-component circular complex Gaussian mixture.
///
/// `covs` always holds the dense N x N covariances. The structure tag records
/// how they were parameterized:
///   - circulant: covs[k] = F^H diag(spectra[k]) F with F the unitary DFT,
///   - kronecker: component k = i * K_rx + j has covariance
///     tx.covs[i] (x) rx.covs[j] and mean tx.means[i] (x) rx.means[j].
struct Gmm {
  RVector weights;
  std::vector<CVector> means;
  std::vector<CMatrix> covs;
  CovStructure structure = CovStructure::full;
  std::vector<RVector> spectra;
  std::shared_ptr<const Gmm> tx;
  std::shared_ptr<const Gmm> rx;

  Eigen::Index components() const { return weights.size(); }
  Eigen::Index dim() const { return means.empty() ? 0 : means.front().size(); }

  // Throws InvariantError when weights, Hermitian symmetry or PSD-ness fail.
  void validate() const;

  static Gmm full(RVector weights, std::vector<CVector> means, std::vector<CMatrix> covs);
  static Gmm circulant(RVector weights, std::vector<CVector> means, std::vector<RVector> spectra);
};

// log N_C(x; mu, C) with C given through its Cholesky factor.
double complex_gaussian_logpdf(const CVector& x, const CVector& mu, const HermitianFactor& cov);

/// Factorized mixture for repeated density evaluation.
class GmmDensity {
 public:
  explicit GmmDensity(const Gmm& gmm);

  Eigen::Index components() const { return static_cast<Eigen::Index>(factors_.size()); }

  // log p(k) + log N_C(x; mu_k, C_k) for every k
  RVector joint_log(const CVector& x) const;
  // same for a batch of column samples, result is K x M
  RMatrix joint_log(const CMatrix& x) const;

  double logpdf(const CVector& x) const;
  RVector responsibilities(const CVector& x) const;

 private:
  RVector log_weights_;
  std::vector<CVector> means_;
  std::vector<HermitianFactor> factors_;
};

// Posterior p(k | x) computed with log-sum-exp.
RVector responsibilities(const CVector& x, const Gmm& gmm);
double gmm_logpdf(const CVector& x, const Gmm& gmm);

// Normalizes a vector of log-weights in place into probabilities; returns
// the log of the normalizer.
double normalize_log_weights(RVector& log_w);

struct EmOptions {
  int max_iterations = 500;
  // stop once the objective improves by less than this (absolute)
  double tolerance = 1e-6;
  // covariance floor, relative to the average per-dimension data power
  double regularization = 1e-6;
  int kmeans_iterations = 10;
  std::uint64_t seed = 0;
};

struct FitReport {
  // Per-iteration objective: mean log-likelihood of the data minus the
  // covariance-floor penalty (lambda / M) * sum_k tr(C_k^{-1}). EM ascends
  // this exactly, so it is nondecreasing except across reseed events.
  std::vector<double> loglik_trace;
  // Plain mean log-likelihood for the same iterates.
  std::vector<double> data_loglik_trace;
  int iterations = 0;
  bool converged = false;
  // iterations after which an empty component was re-seeded
  std::vector<int> reseeded_at;
};

struct FitResult {
  Gmm gmm;
  FitReport report;
};

// EM fit of a K-component GMM to the columns of `data` (N x M).
// structure must be full or circulant; see fit_kronecker for the other one.
FitResult em_fit(const CMatrix& data, Eigen::Index k, CovStructure structure,
                 const EmOptions& opts = {});

struct KroneckerShape {
  Eigen::Index n_rx = 0;
  Eigen::Index n_tx = 0;
  Eigen::Index k_rx = 1;
  Eigen::Index k_tx = 1;
};

// Splits samples of vec(H), H in C^{n_rx x n_tx} (column stacked), into
//   first:  the rows of every H, transposed (not conjugated), dim n_tx
//   second: the columns of every H, dim n_rx
// Rows are transposed without conjugation so E[r r^H] is proportional to
// C_tx when Cov(vec H) = C_tx (x) C_rx.
std::pair<CMatrix, CMatrix> rows_cols_split(const CMatrix& data, Eigen::Index n_rx,
                                            Eigen::Index n_tx);

// Combines a transmit- and receive-side GMM into a K_tx*K_rx component GMM on
// vec(H); mixing weights come from one E-step over `data`.
Gmm kron_combine(const Gmm& tx, const Gmm& rx, const CMatrix& data);

struct KroneckerFit {
  Gmm gmm;
  FitReport tx_report;
  FitReport rx_report;
};

// Fits both sides with em_fit on rows_cols_split output. Transmit covariances
// are divided by the mean per-entry data power so that a separable Gaussian
// is recovered at the right scale.
KroneckerFit fit_kronecker(const CMatrix& data, const KroneckerShape& shape,
                           const EmOptions& opts = {});

// Covariance parameter counts: K N (N + 1) / 2 for full covariances,
// K_rx N_rx (N_rx + 1) / 2 + K_tx N_tx (N_tx + 1) / 2 for Kronecker ones.
std::int64_t full_covariance_parameters(std::int64_t n, std::int64_t k);
std::int64_t kronecker_covariance_parameters(std::int64_t n_rx, std::int64_t k_rx,
                                             std::int64_t n_tx, std::int64_t k_tx);

// Binary model file ("GMMP"): see docs/formats.md.
void write_gmm(std::ostream& out, const Gmm& gmm);
Gmm read_gmm(std::istream& in);
void save_gmm(const std::string& path, const Gmm& gmm);
Gmm load_gmm(const std::string& path);

}  // namespace gmmest
