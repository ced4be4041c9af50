#include "gmmest/estimators.hpp"

#include <Eigen/SVD>
#include <unsupported/Eigen/FFT>

#include <cmath>

namespace gmmest {

namespace {

constexpr Eigen::Index kBatchBlock = 512;

HermitianFactor regularized_factor(CMatrix s, Eigen::Index k) {
  const double m = static_cast<double>(s.rows());
  s.diagonal().array() += 1e-12 * s.trace().real() / m;
  return HermitianFactor(s, "observation covariance of component " + std::to_string(k));
}

Eigen::FFT<double>& thread_fft() {
  thread_local Eigen::FFT<double> fft;
  return fft;
}

// unitary DFT of x
CVector dft(const CVector& x) {
  CVector out(x.size());
  thread_fft().fwd(out.data(), x.data(), static_cast<int>(x.size()));
  return out / std::sqrt(static_cast<double>(x.size()));
}

// inverse unitary DFT of x
CVector idft(const CVector& x) {
  CVector out(x.size());
  thread_fft().inv(out.data(), x.data(), static_cast<int>(x.size()));
  return out * std::sqrt(static_cast<double>(x.size()));
}

}  // namespace

GmmEstimator GmmEstimator::precompute(std::shared_ptr<const Gmm> gmm, const CMatrix& a,
                                      const CMatrix& noise_cov) {
  if (!gmm) throw InvariantError("precompute: no GMM given");
  const Eigen::Index kk = gmm->components();
  require_dim(a.cols() == gmm->dim(), "precompute: A does not match the GMM dimension");
  require_dim(noise_cov.rows() == a.rows() && noise_cov.cols() == a.rows(),
              "precompute: noise covariance does not match A");
  GmmEstimator est;
  est.gmm_ = std::move(gmm);
  est.a_ = a;
  est.log_weights_ = est.gmm_->weights.array().log();
  for (Eigen::Index k = 0; k < kk; ++k) {
    const CMatrix& c = est.gmm_->covs[static_cast<std::size_t>(k)];
    const CMatrix ac = a * c;
    CMatrix s = ac * a.adjoint() + noise_cov;
    s = 0.5 * (s + s.adjoint()).eval();
    est.factors_.push_back(regularized_factor(std::move(s), k));
    est.filters_.push_back(est.factors_.back().solve(ac).adjoint());
    est.projected_means_.push_back(a * est.gmm_->means[static_cast<std::size_t>(k)]);
  }
  return est;
}

GmmEstimator GmmEstimator::precompute(std::shared_ptr<const Gmm> gmm,
                                      const ObservationModel& model) {
  const double s2 = model.sigma2();
  GmmEstimator est =
      precompute(gmm, model.a(), CMatrix(s2 * CMatrix::Identity(model.m(), model.m())));
  const Gmm& g = *est.gmm_;
  if (g.structure == CovStructure::circulant && model.is_identity()) {
    const double n = static_cast<double>(g.dim());
    FastPath fp;
    fp.log_norm.resize(g.components());
    for (Eigen::Index k = 0; k < g.components(); ++k) {
      const RVector& c = g.spectra[static_cast<std::size_t>(k)];
      RVector var = c.array() + s2;
      fp.shrink.push_back(c.array() / var.array());
      fp.log_norm(k) = est.log_weights_(k) - n * std::log(kPi) - var.array().log().sum();
      fp.obs_var.push_back(std::move(var));
      fp.mean_dft.push_back(dft(g.means[static_cast<std::size_t>(k)]));
    }
    est.fast_ = std::move(fp);
  }
  return est;
}

GmmEstimator GmmEstimator::precompute(const Gmm& gmm, const ObservationModel& model) {
  return precompute(std::make_shared<const Gmm>(gmm), model);
}

void GmmEstimator::check_index(Eigen::Index k) const {
  if (k < 0 || k >= components())
    throw std::out_of_range("component index " + std::to_string(k) + " out of range");
}

const CMatrix& GmmEstimator::filter(Eigen::Index k) const {
  check_index(k);
  return filters_[static_cast<std::size_t>(k)];
}

const CVector& GmmEstimator::projected_mean(Eigen::Index k) const {
  check_index(k);
  return projected_means_[static_cast<std::size_t>(k)];
}

const HermitianFactor& GmmEstimator::observation_factor(Eigen::Index k) const {
  check_index(k);
  return factors_[static_cast<std::size_t>(k)];
}

CVector GmmEstimator::component_lmmse(const CVector& y, Eigen::Index k) const {
  check_index(k);
  require_dim(y.size() == m(), "component_lmmse: observation dimension mismatch");
  const auto i = static_cast<std::size_t>(k);
  return filters_[i] * (y - projected_means_[i]) + gmm_->means[i];
}

RVector GmmEstimator::observation_joint_log(const CVector& y) const {
  require_dim(y.size() == m(), "observation_joint_log: observation dimension mismatch");
  RVector out(components());
  for (Eigen::Index k = 0; k < components(); ++k) {
    const auto i = static_cast<std::size_t>(k);
    out(k) = log_weights_(k) + complex_gaussian_logpdf(y, projected_means_[i], factors_[i]);
  }
  return out;
}

RVector GmmEstimator::observation_responsibilities(const CVector& y) const {
  RVector lw = observation_joint_log(y);
  normalize_log_weights(lw);
  return lw;
}

double GmmEstimator::observation_logpdf(const CVector& y) const {
  RVector lw = observation_joint_log(y);
  return normalize_log_weights(lw);
}

CVector GmmEstimator::estimate(const CVector& y) const {
  const RVector p = observation_responsibilities(y);
  CVector out = CVector::Zero(n());
  for (Eigen::Index k = 0; k < components(); ++k)
    if (p(k) > 0.0) out += p(k) * component_lmmse(y, k);
  return out;
}

CMatrix GmmEstimator::estimate_batch(const CMatrix& ys) const {
  require_dim(ys.rows() == m(), "estimate_batch: observation dimension mismatch");
  const Eigen::Index kk = components();
  const double log_pi_m = static_cast<double>(m()) * std::log(kPi);
  CMatrix out(n(), ys.cols());
  for (Eigen::Index start = 0; start < ys.cols(); start += kBatchBlock) {
    const Eigen::Index b = std::min(kBatchBlock, ys.cols() - start);
    const auto block = ys.middleCols(start, b);
    RMatrix jl(kk, b);
    for (Eigen::Index k = 0; k < kk; ++k) {
      const auto i = static_cast<std::size_t>(k);
      CMatrix z = block.colwise() - projected_means_[i];
      factors_[i].lower().triangularView<Eigen::Lower>().solveInPlace(z);
      jl.row(k) = (-z.colwise().squaredNorm().array()) +
                  (log_weights_(k) - log_pi_m - factors_[i].logdet());
    }
    for (Eigen::Index t = 0; t < b; ++t) {
      RVector col = jl.col(t);
      normalize_log_weights(col);
      jl.col(t) = col;
    }
    auto dst = out.middleCols(start, b);
    dst.setZero();
    for (Eigen::Index k = 0; k < kk; ++k) {
      const auto i = static_cast<std::size_t>(k);
      CMatrix est = filters_[i] * (block.colwise() - projected_means_[i]);
      est.colwise() += gmm_->means[i];
      dst += est * jl.row(k).transpose().cast<cplx>().asDiagonal();
    }
  }
  return out;
}

const RVector& GmmEstimator::fast_filter(Eigen::Index k) const {
  if (!fast_) throw UnsupportedError("fast_filter: estimator has no circulant fast path");
  check_index(k);
  return fast_->shrink[static_cast<std::size_t>(k)];
}

CVector GmmEstimator::estimate_circulant_fast(const CVector& y) const {
  if (!fast_)
    throw UnsupportedError(
        "estimate_circulant_fast: needs a circulant GMM, A = I and white noise");
  require_dim(y.size() == m(), "estimate_circulant_fast: observation dimension mismatch");
  const FastPath& fp = *fast_;
  const Eigen::Index kk = components();
  const CVector yf = dft(y);
  RVector lw(kk);
  std::vector<CVector> diffs(static_cast<std::size_t>(kk));
  for (Eigen::Index k = 0; k < kk; ++k) {
    const auto i = static_cast<std::size_t>(k);
    diffs[i] = yf - fp.mean_dft[i];
    lw(k) = fp.log_norm(k) - (diffs[i].array().abs2() / fp.obs_var[i].array()).sum();
  }
  normalize_log_weights(lw);
  CVector acc = CVector::Zero(yf.size());
  for (Eigen::Index k = 0; k < kk; ++k) {
    const auto i = static_cast<std::size_t>(k);
    if (lw(k) == 0.0) continue;
    acc += lw(k) * (fp.mean_dft[i] + (fp.shrink[i].cast<cplx>().array() * diffs[i].array()).matrix());
  }
  return idft(acc);
}

double condition_number(const CMatrix& a) {
  Eigen::JacobiSVD<CMatrix> svd(a);
  const RVector& s = svd.singularValues();
  if (s.size() == 0) return std::numeric_limits<double>::infinity();
  const double lo = s(s.size() - 1);
  return lo > 0.0 ? s(0) / lo : std::numeric_limits<double>::infinity();
}

namespace {

GmmEstimator oracle_estimator(const Gmm& prior, const ObservationModel& model) {
  if (model.m() != model.n())
    throw UnsupportedError("exact CME oracle: the convergence guarantee needs a square A");
  if (!(condition_number(model.a()) < 1e8))
    throw UnsupportedError("exact CME oracle: A is not invertible (condition number >= 1e8)");
  prior.validate();
  return GmmEstimator::precompute(prior, model);
}

}  // namespace

ExactCmeOracle::ExactCmeOracle(const SyntheticGmmPrior& prior, const ObservationModel& model)
    : est_(oracle_estimator(prior.gmm(), model)) {}

ExactCmeOracle::ExactCmeOracle(const Gmm& prior, const ObservationModel& model)
    : est_(oracle_estimator(prior, model)) {}

}  // namespace gmmest
