#include "gmmest/baselines.hpp"

#include <Eigen/QR>

#include <cmath>

namespace gmmest {

LsEstimator::LsEstimator(const ObservationModel& model) {
  if (model.is_identity()) {
    pinv_ = CMatrix::Identity(model.n(), model.n());
    return;
  }
  Eigen::CompleteOrthogonalDecomposition<CMatrix> cod(model.a());
  pinv_ = cod.pseudoInverse();
}

CVector LsEstimator::estimate(const CVector& y) const {
  require_dim(y.size() == pinv_.cols(), "ls_estimate: observation dimension mismatch");
  return pinv_ * y;
}

CVector ls_estimate(const ObservationModel& model, const CVector& y) {
  return LsEstimator(model).estimate(y);
}

CMatrix sample_covariance(const CMatrix& train) {
  require_dim(train.cols() >= 1, "sample_covariance: empty training set");
  CMatrix c = CMatrix::Zero(train.rows(), train.rows());
  c.selfadjointView<Eigen::Lower>().rankUpdate(train, 1.0 / static_cast<double>(train.cols()));
  return c.selfadjointView<Eigen::Lower>();
}

CMatrix lmmse_filter(const CMatrix& cov, const ObservationModel& model) {
  require_dim(cov.rows() == model.n() && cov.cols() == model.n(),
              "lmmse_filter: covariance does not match the model");
  const CMatrix ac = model.a() * cov;
  CMatrix s = ac * model.a().adjoint();
  s = 0.5 * (s + s.adjoint()).eval();
  s.diagonal().array() += model.sigma2();
  s.diagonal().array() += 1e-12 * s.trace().real() / static_cast<double>(s.rows());
  return HermitianFactor(s, "LMMSE observation covariance").solve(ac).adjoint();
}

SampleCovLmmse::SampleCovLmmse(const CMatrix& cov, const ObservationModel& model)
    : cov_(cov), filter_(lmmse_filter(cov, model)) {}

SampleCovLmmse SampleCovLmmse::from_training(const CMatrix& train,
                                             const ObservationModel& model) {
  return SampleCovLmmse(sample_covariance(train), model);
}

CVector sample_cov_lmmse(const CMatrix& train, const ObservationModel& model, const CVector& y) {
  require_dim(y.size() == model.m(), "sample_cov_lmmse: observation dimension mismatch");
  return SampleCovLmmse::from_training(train, model).estimate(y);
}

CVector genie_lmmse(const CMatrix& c_delta, const ObservationModel& model, const CVector& y) {
  require_dim(y.size() == model.m(), "genie_lmmse: observation dimension mismatch");
  return lmmse_filter(c_delta, model) * y;
}

Dictionary dft_dictionary(Eigen::Index n, int oversampling) {
  require_dim(n >= 1, "dft_dictionary: dimension must be positive");
  if (oversampling < 1) throw ConfigError("dft_dictionary: oversampling must be positive");
  const Eigen::Index l = n * oversampling;
  Dictionary dict;
  dict.d.resize(n, l);
  dict.oversampling = oversampling;
  dict.kind = DictionaryKind::dft_oversampled;
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (Eigen::Index j = 0; j < l; ++j)
    for (Eigen::Index i = 0; i < n; ++i)
      dict.d(i, j) =
          std::polar(scale, 2.0 * kPi * static_cast<double>((i * j) % l) / static_cast<double>(l));
  return dict;
}

Dictionary kron_dft_dictionary(Eigen::Index n_rx, Eigen::Index n_tx, int oversampling) {
  const Dictionary rx = dft_dictionary(n_rx, oversampling);
  const Dictionary tx = dft_dictionary(n_tx, oversampling);
  return Dictionary{kron(tx.d, rx.d), oversampling, DictionaryKind::kron_dft};
}

Dictionary build_dictionary(const ObservationModel& model, int oversampling) {
  if (oversampling != 2 && oversampling != 4)
    throw ConfigError("build_dictionary: oversampling must be 2 or 4");
  if (model.kind() == ObservationKind::mimo_pilot)
    return kron_dft_dictionary(model.n_rx(), model.n_tx(), oversampling);
  return dft_dictionary(model.n(), oversampling);
}

Omp::Omp(const ObservationModel& model, const Dictionary& dict) : d_(dict.d) {
  require_dim(dict.d.rows() == model.n(), "Omp: dictionary does not match the model");
  ad_ = model.a() * dict.d;
  col_norms_ = ad_.colwise().norm().transpose();
}

Omp::Path Omp::run(const CVector& y, Eigen::Index s_max) const {
  require_dim(y.size() == ad_.rows(), "Omp: observation dimension mismatch");
  const Eigen::Index m = ad_.rows();
  const Eigen::Index l = ad_.cols();
  if (s_max <= 0) s_max = m;
  s_max = std::min({s_max, m, l});

  Path path;
  const double y_norm = y.norm();
  if (y_norm == 0.0) return path;

  CMatrix q(m, s_max);
  CMatrix r = CMatrix::Zero(s_max, s_max);
  CVector qy(s_max);
  std::vector<bool> usable(static_cast<std::size_t>(l));
  for (Eigen::Index j = 0; j < l; ++j) usable[static_cast<std::size_t>(j)] = col_norms_(j) > 0.0;
  CVector resid = y;
  Eigen::Index s = 0;
  while (s < s_max && resid.norm() > 1e-12 * y_norm) {
    const RVector corr = (ad_.adjoint() * resid).cwiseAbs().cwiseQuotient(col_norms_);
    Eigen::Index best = -1;
    for (Eigen::Index j = 0; j < l; ++j)
      if (usable[static_cast<std::size_t>(j)] && (best < 0 || corr(j) > corr(best))) best = j;
    if (best < 0) break;
    usable[static_cast<std::size_t>(best)] = false;

    // Gram-Schmidt with one reorthogonalization pass
    CVector v = ad_.col(best);
    CVector coef = CVector::Zero(s);
    for (int pass = 0; pass < 2; ++pass) {
      const CVector c = q.leftCols(s).adjoint() * v;
      v -= q.leftCols(s) * c;
      coef += c;
    }
    const double vn = v.norm();
    if (vn <= 1e-10 * col_norms_(best)) continue;  // numerically dependent atom
    q.col(s) = v / vn;
    r.col(s).head(s) = coef;
    r(s, s) = vn;
    qy(s) = q.col(s).dot(y);
    ++s;

    path.support.push_back(best);
    const CVector x = r.topLeftCorner(s, s).triangularView<Eigen::Upper>().solve(qy.head(s));
    CVector h = CVector::Zero(d_.rows());
    for (Eigen::Index i = 0; i < s; ++i) h += x(i) * d_.col(path.support[static_cast<std::size_t>(i)]);
    resid = y - q.leftCols(s) * qy.head(s);
    path.estimates.push_back(std::move(h));
    path.residuals.push_back(resid);
  }
  return path;
}

CVector Omp::genie(const CVector& y, const CVector& h_true, Eigen::Index s_max) const {
  require_dim(h_true.size() == d_.rows(), "omp_genie: channel dimension mismatch");
  const Path path = run(y, s_max);
  if (path.estimates.empty()) return CVector::Zero(d_.rows());
  std::size_t best = 0;
  double best_err = (h_true - path.estimates[0]).squaredNorm();
  for (std::size_t i = 1; i < path.estimates.size(); ++i) {
    const double err = (h_true - path.estimates[i]).squaredNorm();
    if (err < best_err) {
      best_err = err;
      best = i;
    }
  }
  return path.estimates[best];
}

CVector omp_genie(const ObservationModel& model, const Dictionary& dict, const CVector& y,
                  const CVector& h_true, Eigen::Index s_max) {
  return Omp(model, dict).genie(y, h_true, s_max);
}

Amp::Amp(const ObservationModel& model, const Dictionary& dict, AmpOptions opts)
    : iterations_(opts.iterations) {
  require_dim(dict.d.rows() == model.n(), "Amp: dictionary does not match the model");
  if (opts.iterations < 1) throw ConfigError("Amp: need at least one iteration");
  const CMatrix ad = model.a() * dict.d;
  RVector inv_norm = ad.colwise().norm().transpose();
  for (Eigen::Index j = 0; j < inv_norm.size(); ++j)
    inv_norm(j) = inv_norm(j) > 0.0 ? 1.0 / inv_norm(j) : 0.0;
  b_ = ad * inv_norm.cast<cplx>().asDiagonal();
  d_scaled_ = dict.d * inv_norm.cast<cplx>().asDiagonal();
  alpha_ = opts.alpha > 0.0 ? opts.alpha
                            : 1.1 * std::sqrt(std::log(static_cast<double>(dict.d.cols())));
}

CVector Amp::estimate(const CVector& y) const {
  require_dim(y.size() == b_.rows(), "amp_estimate: observation dimension mismatch");
  const double m = static_cast<double>(b_.rows());
  CVector s = CVector::Zero(b_.cols());
  CVector z = y;
  for (int it = 1; it <= iterations_; ++it) {
    const CVector u = s + b_.adjoint() * z;
    const double tau = alpha_ * z.norm() / std::sqrt(m);
    double onsager = 0.0;
    for (Eigen::Index j = 0; j < u.size(); ++j) {
      const double mag = std::abs(u(j));
      if (mag > tau) {
        s(j) = u(j) * ((mag - tau) / mag);
        onsager += 1.0 - tau / (2.0 * mag);
      } else {
        s(j) = 0.0;
      }
    }
    z = y - b_ * s + (onsager / m) * z;
    if (!z.allFinite() || !s.allFinite())
      throw DivergedError("amp_estimate: iterate became non-finite at iteration " +
                              std::to_string(it),
                          it);
  }
  return d_scaled_ * s;
}

CVector amp_estimate(const ObservationModel& model, const Dictionary& dict, const CVector& y,
                     int iterations) {
  return Amp(model, dict, AmpOptions{iterations, 0.0}).estimate(y);
}

}  // namespace gmmest
