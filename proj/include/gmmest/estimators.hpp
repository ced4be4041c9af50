#pragma once

#include "gmmest/channel_models.hpp"
#include "gmmest/gmm.hpp"
#include "gmmest/observation.hpp"

#include <memory>
#include <optional>
#include <vector>

namespace gmmest {

/// Mixture-of-LMMSE conditional mean estimator for a fixed GMM prior and
/// observation model.
///
/// Everything that depends only on (gmm, A, Sigma) is computed once here:
/// projected means A mu_k, the Cholesky factor of S_k = A C_k A^H + Sigma
/// (after adding 1e-12 tr(S_k) / m to the diagonal) and the filters
/// W_k = C_k A^H S_k^{-1}. The GMM itself is shared, never copied or modified,
/// so re-running precompute at another noise level is cheap.
class GmmEstimator {
 public:
  static GmmEstimator precompute(std::shared_ptr<const Gmm> gmm, const ObservationModel& model);
  static GmmEstimator precompute(const Gmm& gmm, const ObservationModel& model);
  // Arbitrary Hermitian PD noise covariance; never has the FFT fast path.
  static GmmEstimator precompute(std::shared_ptr<const Gmm> gmm, const CMatrix& a,
                                 const CMatrix& noise_cov);

  const Gmm& gmm() const { return *gmm_; }
  std::shared_ptr<const Gmm> shared_gmm() const { return gmm_; }
  Eigen::Index components() const { return static_cast<Eigen::Index>(filters_.size()); }
  Eigen::Index m() const { return a_.rows(); }
  Eigen::Index n() const { return a_.cols(); }

  const CMatrix& filter(Eigen::Index k) const;
  const CVector& projected_mean(Eigen::Index k) const;
  const HermitianFactor& observation_factor(Eigen::Index k) const;

  // W_k (y - A mu_k) + mu_k
  CVector component_lmmse(const CVector& y, Eigen::Index k) const;
  // log p(k) + log N_C(y; A mu_k, S_k)
  RVector observation_joint_log(const CVector& y) const;
  RVector observation_responsibilities(const CVector& y) const;
  double observation_logpdf(const CVector& y) const;

  CVector estimate(const CVector& y) const;
  // estimate() for every column of ys
  CMatrix estimate_batch(const CMatrix& ys) const;

  bool has_fast_path() const { return fast_.has_value(); }
  // Per-component Fourier-domain filter d_k = c_k / (c_k + sigma2).
  const RVector& fast_filter(Eigen::Index k) const;
  // FFT implementation of estimate(); UnsupportedError without a fast path.
  CVector estimate_circulant_fast(const CVector& y) const;

 private:
  struct FastPath {
    std::vector<RVector> shrink;    // d_k
    std::vector<RVector> obs_var;   // c_k + sigma2
    std::vector<CVector> mean_dft;  // F mu_k
    RVector log_norm;               // log p(k) - N log pi - sum log(c_k + sigma2)
  };

  void check_index(Eigen::Index k) const;

  std::shared_ptr<const Gmm> gmm_;
  CMatrix a_;
  RVector log_weights_;
  std::vector<CVector> projected_means_;
  std::vector<HermitianFactor> factors_;
  std::vector<CMatrix> filters_;
  std::optional<FastPath> fast_;
};

/// Conditional mean under a known GMM prior, for convergence experiments.
/// Requires a square A with 2-norm condition number below 1e8.
class ExactCmeOracle {
 public:
  ExactCmeOracle(const SyntheticGmmPrior& prior, const ObservationModel& model);
  ExactCmeOracle(const Gmm& prior, const ObservationModel& model);

  CVector exact_cme(const CVector& y) const { return est_.estimate(y); }
  CMatrix exact_cme_batch(const CMatrix& ys) const { return est_.estimate_batch(ys); }
  const GmmEstimator& estimator() const { return est_; }

 private:
  GmmEstimator est_;
};

double condition_number(const CMatrix& a);

}  // namespace gmmest
