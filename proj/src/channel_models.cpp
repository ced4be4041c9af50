#include "gmmest/channel_models.hpp"

#include <Eigen/Eigenvalues>

#include <array>
#include <cmath>
#include <numeric>

namespace gmmest {

void ClusterParams::validate() const {
  if (angles.empty() || angles.size() != gains.size())
    throw InvariantError("ClusterParams: need one gain per cluster angle");
  double total = 0.0;
  for (double g : gains) {
    if (!(g >= 0.0)) throw InvariantError("ClusterParams: gains must be nonnegative");
    total += g;
  }
  if (std::abs(total - 1.0) > 1e-12) throw InvariantError("ClusterParams: gains must sum to one");
  for (double a : angles)
    if (!(a >= 0.0 && a < 2.0 * kPi)) throw InvariantError("ClusterParams: angle outside [0, 2 pi)");
  if (!(angle_spread > 0.0)) throw InvariantError("ClusterParams: angle spread must be positive");
}

CVector steering_vector(double theta, Eigen::Index n) {
  require_dim(n >= 1, "steering_vector: need at least one antenna");
  CVector a(n);
  const double s = std::sin(theta);
  for (Eigen::Index i = 0; i < n; ++i) a(i) = std::polar(1.0, kPi * static_cast<double>(i) * s);
  return a;
}

double wrap_angle(double theta) {
  double w = std::remainder(theta, 2.0 * kPi);  // [-pi, pi]
  if (w <= -kPi) w += 2.0 * kPi;
  return w;
}

double laplacian_power_density(double theta, const ClusterParams& params) {
  const double s = params.angle_spread;
  double g = 0.0;
  for (std::size_t c = 0; c < params.angles.size(); ++c) {
    const double u = wrap_angle(theta - params.angles[c]);
    g += params.gains[c] / (std::sqrt(2.0) * s) * std::exp(-std::sqrt(2.0) * std::abs(u) / s);
  }
  return g;
}

namespace {

constexpr int kTaylorOrder = 6;

// Taylor coefficients of exp(j alpha sin(theta + v)) around v = 0.
std::array<cplx, kTaylorOrder + 1> phase_taylor(double alpha, double theta) {
  std::array<cplx, kTaylorOrder + 1> s{};
  double fact = 1.0;
  for (int m = 1; m <= kTaylorOrder; ++m) {
    fact *= m;
    s[m] = cplx(0.0, alpha * std::sin(theta + m * kPi / 2.0) / fact);
  }
  std::array<cplx, kTaylorOrder + 1> e{};
  e[0] = std::polar(1.0, alpha * std::sin(theta));
  for (int n = 1; n <= kTaylorOrder; ++n) {
    cplx acc = 0.0;
    for (int m = 1; m <= n; ++m) acc += static_cast<double>(m) * s[m] * e[n - m];
    e[n] = acc / static_cast<double>(n);
  }
  return e;
}

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// Euler-Maclaurin correction (to subtract from the trapezoidal sum) for a
// node where the integrand behaves like amp * exp(-rate |v|) * F(theta + v).
cplx cusp_correction(double amp, double rate, double alpha, double theta, double h) {
  static constexpr std::array<double, 4> kBernoulli = {1.0 / 12.0, -1.0 / 720.0, 1.0 / 30240.0,
                                                       -1.0 / 1209600.0};
  const auto e = phase_taylor(alpha, theta);
  cplx total = 0.0;
  double h_pow = 1.0;
  for (int k = 1; k <= 4; ++k) {
    h_pow *= h * h;
    const int n = 2 * k - 1;
    cplx jump = 0.0;
    double jfact = 1.0;
    for (int j = 0; j < n; j += 2) {
      if (j > 0) jfact *= static_cast<double>(j) * static_cast<double>(j - 1);
      jump += binomial(n, j) * std::pow(rate, n - j) * jfact * e[static_cast<std::size_t>(j)];
    }
    total += kBernoulli[static_cast<std::size_t>(k - 1)] * h_pow * 2.0 * amp * jump;
  }
  return total;
}

// First column r(d) = integral of one cluster's density times exp(j pi d sin).
void accumulate_cluster(double centre, double gain, double spread, Eigen::Index n, int q,
                        Eigen::VectorXcd& r) {
  const double kappa = std::sqrt(2.0) / spread;
  const double peak = gain * kappa / 2.0;
  // the jump series needs kappa * h well below one
  const double needed = std::ceil(4.0 * kPi * kappa);
  if (needed > q) q = static_cast<int>(needed) + (static_cast<int>(needed) % 2);
  const double h = 2.0 * kPi / q;
  Eigen::ArrayXcd weight(q);
  Eigen::ArrayXcd phasor(q);
  for (int i = 0; i < q; ++i) {
    const double u = -kPi + i * h;
    weight(i) = h * peak * std::exp(-kappa * std::abs(u));
    phasor(i) = std::polar(1.0, kPi * std::sin(centre + u));
  }
  const double valley = peak * std::exp(-kappa * kPi);
  for (Eigen::Index d = 0; d < n; ++d) {
    const double alpha = kPi * static_cast<double>(d);
    cplx sum = weight.sum();
    sum -= cusp_correction(peak, kappa, alpha, centre, h);
    sum -= cusp_correction(valley, -kappa, alpha, centre + kPi, h);
    r(d) += sum;
    weight *= phasor;
  }
}

CMatrix hermitian_toeplitz(const Eigen::VectorXcd& r) {
  const Eigen::Index n = r.size();
  CMatrix c(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    c(i, i) = r(0).real();
    for (Eigen::Index l = 0; l < i; ++l) {
      c(i, l) = r(i - l);
      c(l, i) = std::conj(r(i - l));
    }
  }
  return c;
}

}  // namespace

SpatialCovariance spatial_covariance(const ClusterParams& params, Eigen::Index n,
                                     int quad_points, ArraySide side) {
  params.validate();
  require_dim(n >= 1, "spatial_covariance: need at least one antenna");
  if (quad_points < 64) throw ConfigError("spatial_covariance: quadrature grid needs >= 64 points");
  const int q = quad_points + (quad_points % 2);
  Eigen::VectorXcd r = Eigen::VectorXcd::Zero(n);
  for (std::size_t c = 0; c < params.angles.size(); ++c) {
    if (params.gains[c] == 0.0) continue;
    accumulate_cluster(params.angles[c], params.gains[c], params.angle_spread, n, q, r);
  }
  const double diag = r(0).real();
  if (!(diag > 0.0)) throw NumericError("spatial_covariance: zero power");
  r /= diag;
  return {hermitian_toeplitz(r), side};
}

CMatrix psd_sqrt_factor(const CMatrix& c) {
  require_dim(c.rows() == c.cols(), "psd_sqrt_factor: matrix must be square");
  Eigen::SelfAdjointEigenSolver<CMatrix> es(c);
  if (es.info() != Eigen::Success) throw NumericError("psd_sqrt_factor: eigendecomposition failed");
  const RVector root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.cast<cplx>().asDiagonal();
}

ClusterParams draw_cluster_params(Rng& rng, int n_clusters, double angle_spread) {
  ClusterParams p;
  p.angle_spread = angle_spread;
  for (int c = 0; c < n_clusters; ++c) p.angles.push_back(2.0 * kPi * rng.uniform());
  double total = 0.0;
  for (int c = 0; c < n_clusters; ++c) {
    const double g = rng.normal();
    p.gains.push_back(g * g);
    total += g * g;
  }
  for (double& g : p.gains) g /= total;
  return p;
}

ChannelSample draw_3gpp_sample(Rng& rng, const ThreeGppConfig& cfg) {
  if (cfg.n_clusters < 1) throw ConfigError("draw_3gpp_sample: need at least one cluster");
  require_dim(cfg.n_rx >= 1 && cfg.n_tx >= 1, "draw_3gpp_sample: antenna counts must be positive");
  ClusterParams rx = draw_cluster_params(rng, cfg.n_clusters, cfg.angle_spread);
  const CMatrix c_rx = spatial_covariance(rx, cfg.n_rx, cfg.quad_points, ArraySide::rx).matrix;
  ChannelSample out;
  if (cfg.n_tx == 1) {
    out.cov = c_rx;
    out.h = psd_sqrt_factor(c_rx) * rng.complex_normal_vector(cfg.n_rx);
    return out;
  }
  // departure angles per cluster; path gains are shared with the receive side
  ClusterParams tx = rx;
  for (auto& a : tx.angles) a = 2.0 * kPi * rng.uniform();
  const CMatrix c_tx = spatial_covariance(tx, cfg.n_tx, cfg.quad_points, ArraySide::tx).matrix;
  out.cov = kron(c_tx, c_rx);
  const CMatrix l_rx = psd_sqrt_factor(c_rx);
  const CMatrix l_tx = psd_sqrt_factor(c_tx);
  CMatrix z(cfg.n_rx, cfg.n_tx);
  for (Eigen::Index j = 0; j < cfg.n_tx; ++j) z.col(j) = rng.complex_normal_vector(cfg.n_rx);
  const CMatrix h = l_rx * z * l_tx.transpose();
  out.h = Eigen::Map<const CVector>(h.data(), h.size());
  return out;
}

ChannelSample draw_3gpp_sample(Rng& rng, int n_clusters, Eigen::Index n_rx, Eigen::Index n_tx) {
  ThreeGppConfig cfg;
  cfg.n_clusters = n_clusters;
  cfg.n_rx = n_rx;
  cfg.n_tx = n_tx;
  return draw_3gpp_sample(rng, cfg);
}

ChannelSample draw_wideband_sample(Rng& rng, const WidebandConfig& cfg) {
  require_dim(cfg.n_c >= 1 && cfg.n_t >= 1, "draw_wideband_sample: empty grid");
  if (cfg.n_paths < 1) throw ConfigError("draw_wideband_sample: need at least one path");
  const Eigen::Index n = cfg.n_c * cfg.n_t;
  ChannelSample out;
  out.h = CVector::Zero(n);
  out.cov = CMatrix::Zero(n, n);
  const double power = 1.0 / cfg.n_paths;
  for (int l = 0; l < cfg.n_paths; ++l) {
    const double delay = cfg.max_delay * rng.uniform();
    const double doppler = cfg.max_doppler * std::cos(2.0 * kPi * rng.uniform());
    CVector freq(cfg.n_c);
    CVector time(cfg.n_t);
    for (Eigen::Index c = 0; c < cfg.n_c; ++c)
      freq(c) = std::polar(1.0, -2.0 * kPi * delay * static_cast<double>(c));
    for (Eigen::Index t = 0; t < cfg.n_t; ++t)
      time(t) = std::polar(1.0, 2.0 * kPi * doppler * static_cast<double>(t));
    const CVector v = kron(time, freq);
    out.h += rng.complex_normal(power) * v;
    out.cov.noalias() += power * v * v.adjoint();
  }
  return out;
}

SyntheticGmmPrior::SyntheticGmmPrior(Gmm gmm, std::uint64_t rng_seed)
    : gmm_(std::move(gmm)), seed_(rng_seed) {
  gmm_.validate();
  for (const auto& c : gmm_.covs) roots_.push_back(psd_sqrt_factor(c));
}

CVector draw_synthetic_gmm_sample(Rng& rng, const SyntheticGmmPrior& prior) {
  const Eigen::Index k = rng.categorical(prior.gmm().weights);
  return prior.gmm().means[static_cast<std::size_t>(k)] +
         prior.root(k) * rng.complex_normal_vector(prior.gmm().dim());
}

namespace {

template <typename Draw>
Dataset generate(std::uint64_t seed, Eigen::Index n, Eigen::Index count, bool keep,
                 std::uint64_t first_index, Draw&& draw) {
  Dataset ds;
  ds.samples.resize(n, count);
  if (keep) ds.covariances.reserve(static_cast<std::size_t>(count));
  for (Eigen::Index i = 0; i < count; ++i) {
    Rng rng(seed, first_index + static_cast<std::uint64_t>(i));
    ChannelSample s = draw(rng);
    ds.samples.col(i) = s.h;
    if (keep) ds.covariances.push_back(std::move(s.cov));
  }
  return ds;
}

}  // namespace

Dataset generate_3gpp_dataset(std::uint64_t seed, const ThreeGppConfig& cfg, Eigen::Index count,
                              bool keep_covariances, std::uint64_t first_index) {
  return generate(seed, cfg.n_rx * cfg.n_tx, count, keep_covariances, first_index,
                  [&](Rng& rng) { return draw_3gpp_sample(rng, cfg); });
}

Dataset generate_wideband_dataset(std::uint64_t seed, const WidebandConfig& cfg,
                                  Eigen::Index count, bool keep_covariances,
                                  std::uint64_t first_index) {
  return generate(seed, cfg.n_c * cfg.n_t, count, keep_covariances, first_index,
                  [&](Rng& rng) { return draw_wideband_sample(rng, cfg); });
}

Dataset generate_gmm_dataset(std::uint64_t seed, const SyntheticGmmPrior& prior,
                             Eigen::Index count, std::uint64_t first_index) {
  return generate(seed, prior.gmm().dim(), count, false, first_index, [&](Rng& rng) {
    return ChannelSample{draw_synthetic_gmm_sample(rng, prior), CMatrix()};
  });
}

}  // namespace gmmest
