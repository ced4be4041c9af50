#pragma once

#include "gmmest/gmm.hpp"
#include "gmmest/linalg.hpp"
#include "gmmest/rng.hpp"

#include <cstdint>
#include <vector>

namespace gmmest {

/// Main propagation clusters of one link: center angles, power weights and a
/// common Laplacian angle spread (standard deviation, radians).
struct ClusterParams {
  std::vector<double> angles;
  std::vector<double> gains;
  double angle_spread = 2.0 * kPi / 180.0;

  void validate() const;
};

enum class ArraySide { rx, tx };

struct SpatialCovariance {
  CMatrix matrix;
  ArraySide side = ArraySide::rx;
};

inline constexpr int kDefaultQuadPoints = 720;
inline constexpr double kDefaultAngleSpread = 2.0 * kPi / 180.0;

// ULA steering vector, entry i = exp(j pi i sin(theta)).
CVector steering_vector(double theta, Eigen::Index n);

// Wrap into (-pi, pi].
double wrap_angle(double theta);

// Sum of weighted Laplace densities centered at the cluster angles.
double laplacian_power_density(double theta, const ClusterParams& params);

/// Integral of g(theta) a(theta) a(theta)^H over [-pi, pi], normalized to
/// trace n.
///
/// Each cluster is integrated on its own uniform grid of `quad_points` nodes
/// centered on the cluster angle, so the cusps of the Laplace density (at the
/// center and at the antipode) sit on nodes. The trapezoidal sum is then
/// corrected with the Euler-Maclaurin jump terms of those cusps up to h^8,
/// which restores the spectral accuracy the rule has for smooth periodic
/// integrands. An odd quad_points is rounded up to the next even count, and
/// very narrow clusters get a finer grid (step at most spread / (2 sqrt 2)).
SpatialCovariance spatial_covariance(const ClusterParams& params, Eigen::Index n,
                                     int quad_points = kDefaultQuadPoints,
                                     ArraySide side = ArraySide::rx);

struct ThreeGppConfig {
  int n_clusters = 1;
  Eigen::Index n_rx = 32;
  Eigen::Index n_tx = 1;
  double angle_spread = kDefaultAngleSpread;
  int quad_points = kDefaultQuadPoints;
};

struct ChannelSample {
  CVector h;
  CMatrix cov;
};

// Random cluster parameters for one link: angles uniform on [0, 2 pi), gains
// |g|^2 of i.i.d. standard normals normalized to sum one.
ClusterParams draw_cluster_params(Rng& rng, int n_clusters, double angle_spread);

// h ~ N_C(0, C_delta), C_delta = C_tx (x) C_rx (receive side only for SIMO).
ChannelSample draw_3gpp_sample(Rng& rng, const ThreeGppConfig& cfg);
ChannelSample draw_3gpp_sample(Rng& rng, int n_clusters, Eigen::Index n_rx, Eigen::Index n_tx);

/// Synthetic doubly-selective channel on an n_c x n_t time-frequency grid.
///
/// Each of `n_paths` paths has a delay uniform on [0, max_delay] and a Doppler
/// max_doppler * cos(phi) with phi uniform. Both are phase slopes in cycles,
/// per subcarrier and per time symbol respectively. Gains are i.i.d.
/// N_C(0, 1 / n_paths). The conditional covariance given the path geometry is
/// returned for genie baselines; h = vec(H) with trace(cov) = n_c * n_t.
struct WidebandConfig {
  Eigen::Index n_c = 24;
  Eigen::Index n_t = 14;
  int n_paths = 6;
  double max_delay = 0.05;
  double max_doppler = 0.02;
};

ChannelSample draw_wideband_sample(Rng& rng, const WidebandConfig& cfg);

/// Ground-truth GMM prior with cached sampling factors.
class SyntheticGmmPrior {
 public:
  SyntheticGmmPrior(Gmm gmm, std::uint64_t rng_seed);

  const Gmm& gmm() const { return gmm_; }
  std::uint64_t rng_seed() const { return seed_; }
  // square-root factor B_k with B_k B_k^H = C_k
  const CMatrix& root(Eigen::Index k) const { return roots_[static_cast<std::size_t>(k)]; }

 private:
  Gmm gmm_;
  std::uint64_t seed_;
  std::vector<CMatrix> roots_;
};

CVector draw_synthetic_gmm_sample(Rng& rng, const SyntheticGmmPrior& prior);

// Factor B with B B^H = C for a Hermitian PSD matrix via its
// eigendecomposition; negative rounding eigenvalues are clipped to zero.
CMatrix psd_sqrt_factor(const CMatrix& c);

// Datasets are N x M, one sample per column; sample i uses stream Rng(seed, i),
// so any slice can be regenerated independently.
struct Dataset {
  CMatrix samples;
  std::vector<CMatrix> covariances;  // empty unless requested
};

Dataset generate_3gpp_dataset(std::uint64_t seed, const ThreeGppConfig& cfg, Eigen::Index count,
                              bool keep_covariances = false, std::uint64_t first_index = 0);
Dataset generate_wideband_dataset(std::uint64_t seed, const WidebandConfig& cfg,
                                  Eigen::Index count, bool keep_covariances = false,
                                  std::uint64_t first_index = 0);
Dataset generate_gmm_dataset(std::uint64_t seed, const SyntheticGmmPrior& prior,
                             Eigen::Index count, std::uint64_t first_index = 0);

}  // namespace gmmest
