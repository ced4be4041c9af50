#include "gmmest/gmm.hpp"
#include "gmmest/rng.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <limits>

namespace gmmest {

namespace {

// Total responsibility below which a component counts as empty.
constexpr double kEmptyMass = 1e-10;
// Responsibilities below this do not enter the covariance scatter.
constexpr double kNegligible = 1e-13;

CMatrix dft_columns(const CMatrix& x) {
  Eigen::FFT<double> fft;
  const double scale = 1.0 / std::sqrt(static_cast<double>(x.rows()));
  CMatrix out(x.rows(), x.cols());
  CVector col(x.rows());
  CVector spec(x.rows());
  for (Eigen::Index m = 0; m < x.cols(); ++m) {
    col = x.col(m);
    fft.fwd(spec, col);
    out.col(m) = spec * scale;
  }
  return out;
}

CVector idft(const CVector& v) {
  Eigen::FFT<double> fft;
  CVector out(v.size());
  fft.inv(out, v);  // includes 1/n
  return out * std::sqrt(static_cast<double>(v.size()));
}

struct Params {
  RVector weights;
  CMatrix means;                // N x K
  std::vector<CMatrix> covs;    // full structure
  RMatrix vars;                 // N x K, diagonal structure
};

class Em {
 public:
  Em(const CMatrix& x, Eigen::Index k, bool diagonal, const EmOptions& opts)
      : x_(x), k_(k), n_(x.rows()), m_(x.cols()), diagonal_(diagonal), opts_(opts) {
    const CVector centre = x_.rowwise().mean();
    power_ = (x_.colwise() - centre).squaredNorm() / static_cast<double>(m_ * n_);
    if (!(power_ > 0.0) || !std::isfinite(power_)) power_ = 1.0;
    // MAP prior strength: gives a floor of eps * power for a component
    // holding an average share M/K of the data.
    lambda_ = opts_.regularization * power_ * static_cast<double>(m_) / static_cast<double>(k_);
  }

  FitReport run(Params& p) {
    init(p);
    FitReport rep;
    double prev = -std::numeric_limits<double>::infinity();
    RMatrix resp;
    RVector sample_ll;
    for (int it = 0;; ++it) {
      const double penalty = estep(p, resp, sample_ll);
      const double data_ll = sample_ll.mean();
      const double objective = data_ll - lambda_ * penalty / static_cast<double>(m_);
      rep.loglik_trace.push_back(objective);
      rep.data_loglik_trace.push_back(data_ll);
      if (it > 0 && objective - prev < opts_.tolerance &&
          (rep.reseeded_at.empty() || rep.reseeded_at.back() != it)) {
        rep.converged = true;
        break;
      }
      if (it >= opts_.max_iterations) break;
      prev = objective;
      if (mstep(p, resp, sample_ll)) rep.reseeded_at.push_back(it + 1);
      rep.iterations = it + 1;
    }
    return rep;
  }

 private:
  // k-means++ seeding followed by a few Lloyd passes; covariances start at
  // the within-cluster scatter.
  void init(Params& p) {
    Rng rng(opts_.seed, 0x6b6d65616e73ULL);
    const RVector xn = x_.colwise().squaredNorm();
    CMatrix centres(n_, k_);
    RVector d2(m_);
    auto first = static_cast<Eigen::Index>(rng.uniform() * static_cast<double>(m_));
    centres.col(0) = x_.col(first);
    d2 = (x_.colwise() - centres.col(0)).colwise().squaredNorm().transpose();
    for (Eigen::Index c = 1; c < k_; ++c) {
      Eigen::Index pick;
      if (d2.sum() > 0.0) {
        pick = rng.categorical(d2);
      } else {
        pick = static_cast<Eigen::Index>(rng.uniform() * static_cast<double>(m_));
      }
      centres.col(c) = x_.col(pick);
      d2 = d2.cwiseMin((x_.colwise() - centres.col(c)).colwise().squaredNorm().transpose());
    }

    std::vector<Eigen::Index> label(static_cast<std::size_t>(m_), 0);
    for (int pass = 0; pass <= opts_.kmeans_iterations; ++pass) {
      const RVector cn = centres.colwise().squaredNorm();
      const RMatrix cross = (centres.adjoint() * x_).real();
      bool changed = false;
      for (Eigen::Index m = 0; m < m_; ++m) {
        Eigen::Index best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (Eigen::Index c = 0; c < k_; ++c) {
          const double d = xn(m) + cn(c) - 2.0 * cross(c, m);
          if (d < best_d) {
            best_d = d;
            best = c;
          }
        }
        if (label[static_cast<std::size_t>(m)] != best) changed = true;
        label[static_cast<std::size_t>(m)] = best;
      }
      if (pass == opts_.kmeans_iterations || (pass > 0 && !changed)) break;
      CMatrix sums = CMatrix::Zero(n_, k_);
      RVector counts = RVector::Zero(k_);
      for (Eigen::Index m = 0; m < m_; ++m) {
        sums.col(label[static_cast<std::size_t>(m)]) += x_.col(m);
        counts(label[static_cast<std::size_t>(m)]) += 1.0;
      }
      for (Eigen::Index c = 0; c < k_; ++c)
        if (counts(c) > 0.0) centres.col(c) = sums.col(c) / counts(c);
    }

    RMatrix hard = RMatrix::Zero(k_, m_);
    for (Eigen::Index m = 0; m < m_; ++m) hard(label[static_cast<std::size_t>(m)], m) = 1.0;
    p.weights = RVector::Zero(k_);
    p.means = centres;
    p.covs.assign(diagonal_ ? 0 : static_cast<std::size_t>(k_), CMatrix());
    p.vars = RMatrix::Zero(diagonal_ ? n_ : 0, diagonal_ ? k_ : 0);
    for (Eigen::Index c = 0; c < k_; ++c) {
      const double count = hard.row(c).sum();
      if (count > 0.0) {
        p.weights(c) = count;
        update_component(p, c, hard.row(c).transpose(), count, /*update_mean=*/true);
      } else {
        p.weights(c) = 1.0;
        set_broad(p, c);
      }
    }
    p.weights /= p.weights.sum();
  }

  void set_broad(Params& p, Eigen::Index c) {
    if (diagonal_) {
      p.vars.col(c).setConstant(power_);
    } else {
      p.covs[static_cast<std::size_t>(c)] = CMatrix::Identity(n_, n_) * power_;
    }
  }

  // Sets mean (optionally) and covariance of component c from soft counts r.
  // Samples with r below kNegligible are left out of the scatter sum.
  void update_component(Params& p, Eigen::Index c, const RVector& r, double mass,
                        bool update_mean) {
    if (update_mean) p.means.col(c) = (x_ * r.cast<cplx>()) / mass;
    if (diagonal_) {
      const CMatrix d = x_.colwise() - p.means.col(c);
      p.vars.col(c) = (d.cwiseAbs2() * r).array() + lambda_;
      p.vars.col(c) /= mass;
      return;
    }
    Eigen::Index used = 0;
    for (Eigen::Index m = 0; m < m_; ++m)
      if (r(m) > kNegligible) ++used;
    work_.resize(n_, used);
    Eigen::Index j = 0;
    for (Eigen::Index m = 0; m < m_; ++m)
      if (r(m) > kNegligible) work_.col(j++) = (x_.col(m) - p.means.col(c)) * std::sqrt(r(m));
    CMatrix s = CMatrix::Zero(n_, n_);
    s.selfadjointView<Eigen::Lower>().rankUpdate(work_);
    CMatrix full = s.selfadjointView<Eigen::Lower>();
    full.diagonal().array() += lambda_;
    p.covs[static_cast<std::size_t>(c)] = full / mass;
  }

  // Fills resp (K x M) with responsibilities and sample_ll with per-sample
  // mixture log-likelihoods; returns sum_k tr(C_k^{-1}).
  double estep(const Params& p, RMatrix& resp, RVector& sample_ll) {
    resp.resize(k_, m_);
    double penalty = 0.0;
    const double log_pi_n = static_cast<double>(n_) * std::log(kPi);
    for (Eigen::Index c = 0; c < k_; ++c) {
      const double lw = std::log(p.weights(c));
      if (diagonal_) {
        const CMatrix d = x_.colwise() - p.means.col(c);
        const RVector v = p.vars.col(c);
        const double logdet = v.array().log().sum();
        resp.row(c) = -(v.cwiseInverse().transpose() * d.cwiseAbs2()).array() +
                      (lw - log_pi_n - logdet);
        penalty += v.cwiseInverse().sum();
      } else {
        HermitianFactor f(p.covs[static_cast<std::size_t>(c)],
                          "EM covariance " + std::to_string(c));
        CMatrix inv_l = CMatrix::Identity(n_, n_);
        f.lower().triangularView<Eigen::Lower>().solveInPlace(inv_l);
        // whitened residuals L^{-1} (x - mu) as one matrix product
        work_.noalias() = inv_l * x_;
        work_.colwise() -= inv_l * p.means.col(c);
        resp.row(c) = (-work_.colwise().squaredNorm().array()) + (lw - log_pi_n - f.logdet());
        penalty += inv_l.squaredNorm();
      }
    }
    sample_ll.resize(m_);
    for (Eigen::Index m = 0; m < m_; ++m) {
      auto col = resp.col(m);
      const double top = col.maxCoeff();
      col = (col.array() - top).exp();
      const double total = col.sum();
      col /= total;
      sample_ll(m) = top + std::log(total);
    }
    return penalty;
  }

  // Returns true when an empty component had to be re-seeded.
  bool mstep(Params& p, const RMatrix& resp, const RVector& sample_ll) {
    bool reseeded = false;
    for (Eigen::Index c = 0; c < k_; ++c) {
      const RVector r = resp.row(c).transpose();
      const double mass = r.sum();
      if (mass < kEmptyMass) {
        Eigen::Index worst = 0;
        sample_ll.minCoeff(&worst);
        p.means.col(c) = x_.col(worst);
        set_broad(p, c);
        p.weights(c) = 1.0 / static_cast<double>(m_);
        reseeded = true;
        continue;
      }
      p.weights(c) = mass / static_cast<double>(m_);
      update_component(p, c, r, mass, true);
    }
    p.weights /= p.weights.sum();
    return reseeded;
  }

  const CMatrix& x_;
  Eigen::Index k_, n_, m_;
  bool diagonal_;
  EmOptions opts_;
  double power_ = 1.0;
  double lambda_ = 0.0;
  CMatrix work_;
};

}  // namespace

FitResult em_fit(const CMatrix& data, Eigen::Index k, CovStructure structure,
                 const EmOptions& opts) {
  if (structure == CovStructure::kronecker)
    throw UnsupportedError("em_fit: use fit_kronecker for Kronecker-structured mixtures");
  if (k < 1) throw ConfigError("em_fit: need at least one component");
  if (data.cols() < k)
    throw ConfigError("em_fit: " + std::to_string(k) + " components but only " +
                      std::to_string(data.cols()) + " samples");
  if (data.rows() < 1) throw DimensionError("em_fit: empty samples");
  if (!data.allFinite()) throw ConfigError("em_fit: data contains non-finite values");

  FitResult out;
  Params p;
  if (structure == CovStructure::full) {
    Em em(data, k, false, opts);
    out.report = em.run(p);
    std::vector<CVector> means;
    std::vector<CMatrix> covs;
    for (Eigen::Index c = 0; c < k; ++c) {
      means.emplace_back(p.means.col(c));
      CMatrix& cov = p.covs[static_cast<std::size_t>(c)];
      covs.emplace_back(0.5 * (cov + cov.adjoint()));
    }
    out.gmm = Gmm::full(p.weights, std::move(means), std::move(covs));
  } else {
    // Circulant covariances are diagonal in the DFT basis.
    const CMatrix xf = dft_columns(data);
    Em em(xf, k, true, opts);
    out.report = em.run(p);
    std::vector<CVector> means;
    std::vector<RVector> spectra;
    for (Eigen::Index c = 0; c < k; ++c) {
      means.push_back(idft(p.means.col(c)));
      spectra.emplace_back(p.vars.col(c));
    }
    out.gmm = Gmm::circulant(p.weights, std::move(means), std::move(spectra));
  }
  return out;
}

std::pair<CMatrix, CMatrix> rows_cols_split(const CMatrix& data, Eigen::Index n_rx,
                                            Eigen::Index n_tx) {
  require_dim(n_rx > 0 && n_tx > 0 && data.rows() == n_rx * n_tx,
              "rows_cols_split: sample dimension must equal n_rx * n_tx");
  const Eigen::Index m = data.cols();
  CMatrix tx(n_tx, m * n_rx);
  CMatrix rx(n_rx, m * n_tx);
  for (Eigen::Index s = 0; s < m; ++s) {
    const Eigen::Map<const CMatrix> h(data.col(s).data(), n_rx, n_tx);
    for (Eigen::Index j = 0; j < n_tx; ++j) rx.col(s * n_tx + j) = h.col(j);
    for (Eigen::Index i = 0; i < n_rx; ++i) tx.col(s * n_rx + i) = h.row(i).transpose();
  }
  return {tx, rx};
}

Gmm kron_combine(const Gmm& tx, const Gmm& rx, const CMatrix& data) {
  const Eigen::Index n = tx.dim() * rx.dim();
  require_dim(data.rows() == n, "kron_combine: data dimension must equal N_tx * N_rx");
  require_dim(data.cols() > 0, "kron_combine: no data for the E-step");
  Gmm g;
  g.structure = CovStructure::kronecker;
  const Eigen::Index k = tx.components() * rx.components();
  g.weights.resize(k);
  for (Eigen::Index i = 0; i < tx.components(); ++i) {
    for (Eigen::Index j = 0; j < rx.components(); ++j) {
      g.weights(i * rx.components() + j) = tx.weights(i) * rx.weights(j);
      g.means.push_back(kron(tx.means[i], rx.means[j]));
      g.covs.push_back(kron(tx.covs[i], rx.covs[j]));
    }
  }
  g.weights /= g.weights.sum();
  // one E-step with means and covariances held fixed
  const RMatrix joint = GmmDensity(g).joint_log(data);
  RVector mass = RVector::Zero(k);
  for (Eigen::Index m = 0; m < data.cols(); ++m) {
    RVector lw = joint.col(m);
    normalize_log_weights(lw);
    mass += lw;
  }
  g.weights = mass / mass.sum();
  g.tx = std::make_shared<const Gmm>(tx);
  g.rx = std::make_shared<const Gmm>(rx);
  return g;
}

KroneckerFit fit_kronecker(const CMatrix& data, const KroneckerShape& shape,
                           const EmOptions& opts) {
  auto [tx_data, rx_data] = rows_cols_split(data, shape.n_rx, shape.n_tx);
  EmOptions tx_opts = opts;
  tx_opts.seed = Rng::mix(opts.seed ^ 0x7478ULL);
  EmOptions rx_opts = opts;
  rx_opts.seed = Rng::mix(opts.seed ^ 0x7278ULL);
  FitResult tx = em_fit(tx_data, shape.k_tx, CovStructure::full, tx_opts);
  FitResult rx = em_fit(rx_data, shape.k_rx, CovStructure::full, rx_opts);
  // Row samples carry the average receive power and column samples the
  // average transmit power, so the plain product counts the per-entry power
  // twice. Divide it out of the transmit factor.
  const double power = data.squaredNorm() / static_cast<double>(data.size());
  if (power > 0.0)
    for (auto& c : tx.gmm.covs) c /= power;
  KroneckerFit out;
  out.gmm = kron_combine(tx.gmm, rx.gmm, data);
  out.tx_report = std::move(tx.report);
  out.rx_report = std::move(rx.report);
  return out;
}

}  // namespace gmmest
