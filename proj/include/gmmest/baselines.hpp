#pragma once

#include "gmmest/observation.hpp"

#include <vector>

namespace gmmest {

/// Least squares, h = A^+ y with the pseudoinverse computed once.
class LsEstimator {
 public:
  explicit LsEstimator(const ObservationModel& model);
  CVector estimate(const CVector& y) const;
  CMatrix estimate_batch(const CMatrix& ys) const { return pinv_ * ys; }
  const CMatrix& pinv() const { return pinv_; }

 private:
  CMatrix pinv_;
};

CVector ls_estimate(const ObservationModel& model, const CVector& y);

// (1 / M) sum_m h_m h_m^H over the columns of train, no mean removal.
CMatrix sample_covariance(const CMatrix& train);

// C A^H (A C A^H + Sigma)^{-1} computed through a Cholesky solve; the
// observation covariance gets the same 1e-12 tr / m diagonal loading as the
// GMM estimator.
CMatrix lmmse_filter(const CMatrix& cov, const ObservationModel& model);

/// Zero-mean LMMSE with a fixed covariance (the training sample covariance).
class SampleCovLmmse {
 public:
  SampleCovLmmse(const CMatrix& cov, const ObservationModel& model);
  static SampleCovLmmse from_training(const CMatrix& train, const ObservationModel& model);

  CVector estimate(const CVector& y) const { return filter_ * y; }
  CMatrix estimate_batch(const CMatrix& ys) const { return filter_ * ys; }
  const CMatrix& filter() const { return filter_; }
  const CMatrix& covariance() const { return cov_; }

 private:
  CMatrix cov_;
  CMatrix filter_;
};

CVector sample_cov_lmmse(const CMatrix& train, const ObservationModel& model, const CVector& y);

// LMMSE with the true per-sample covariance; factorizes for every call.
CVector genie_lmmse(const CMatrix& c_delta, const ObservationModel& model, const CVector& y);

enum class DictionaryKind { dft_oversampled, kron_dft };

/// Columns d_l(i) = exp(j 2 pi i l / L) / sqrt(N), L = oversampling * N; the
/// Kronecker variant is D_tx (x) D_rx, matching vec(H) of an n_rx x n_tx H.
struct Dictionary {
  CMatrix d;
  int oversampling = 1;
  DictionaryKind kind = DictionaryKind::dft_oversampled;

  Eigen::Index atoms() const { return d.cols(); }
};

Dictionary dft_dictionary(Eigen::Index n, int oversampling);
Dictionary kron_dft_dictionary(Eigen::Index n_rx, Eigen::Index n_tx, int oversampling);
// Oversampled DFT on the channel dimension, Kronecker of per-side DFTs for
// MIMO models. oversampling must be 2 or 4.
Dictionary build_dictionary(const ObservationModel& model, int oversampling);

/// Orthogonal matching pursuit on the effective dictionary A D.
class Omp {
 public:
  Omp(const ObservationModel& model, const Dictionary& dict);

  struct Path {
    std::vector<Eigen::Index> support;  // atoms in selection order
    std::vector<CVector> estimates;     // D s for orders 1..size
    std::vector<CVector> residuals;     // y - A D s for orders 1..size
  };

  // Greedy path up to s_max atoms (0 means m); stops early once y is fully
  // explained.
  Path run(const CVector& y, Eigen::Index s_max = 0) const;

  // Estimate at the order minimizing ||h_true - D s||, smallest order on ties.
  CVector genie(const CVector& y, const CVector& h_true, Eigen::Index s_max = 0) const;

  const CMatrix& effective() const { return ad_; }

 private:
  CMatrix d_;
  CMatrix ad_;
  RVector col_norms_;
};

CVector omp_genie(const ObservationModel& model, const Dictionary& dict, const CVector& y,
                  const CVector& h_true, Eigen::Index s_max = 0);

struct AmpOptions {
  int iterations = 100;
  // threshold factor relative to the residual RMS; <= 0 selects
  // 1.1 * sqrt(ln L)
  double alpha = 0.0;
};

/// Complex AMP with soft thresholding and Onsager correction on the
/// column-normalized effective dictionary.
class Amp {
 public:
  Amp(const ObservationModel& model, const Dictionary& dict, AmpOptions opts = {});
  CVector estimate(const CVector& y) const;
  double alpha() const { return alpha_; }

 private:
  CMatrix d_scaled_;  // D diag(1 / ||A d_l||)
  CMatrix b_;         // A D diag(1 / ||A d_l||)
  int iterations_;
  double alpha_;
};

CVector amp_estimate(const ObservationModel& model, const Dictionary& dict, const CVector& y,
                     int iterations = 100);

}  // namespace gmmest
