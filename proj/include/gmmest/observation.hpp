#pragma once

#include "gmmest/linalg.hpp"
#include "gmmest/rng.hpp"

#include <json.hpp>

#include <string>
#include <utility>
#include <vector>

namespace gmmest {

enum class ObservationKind { simo_identity, mimo_pilot, wideband_selection };
enum class PilotLayout { block, comb, lattice };

std::string to_string(ObservationKind k);
std::string to_string(PilotLayout l);
PilotLayout pilot_layout_from_string(const std::string& s);

/// Pilot positions on an n_c x n_t resource grid, as (carrier, time) pairs.
struct PilotPattern {
  PilotLayout layout = PilotLayout::block;
  Eigen::Index n_c = 0;
  Eigen::Index n_t = 0;
  Eigen::Index n_p = 0;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> positions;

  // Throws InvariantError on duplicates, out-of-grid entries or a count
  // mismatch.
  void validate() const;
};

/// Deterministic placements:
///   block:   fill time symbols in order, carriers 0.. within each symbol;
///   comb:    q = n_p / n_t carriers per symbol at floor(i * n_c / q), every
///            symbol (n_p must be a multiple of n_t, q <= n_c);
///   lattice: comb, with the carriers of odd symbols shifted by
///            floor(spacing / 2), spacing = floor(n_c / q).
PilotPattern make_pattern(PilotLayout layout, Eigen::Index n_c, Eigen::Index n_t,
                          Eigen::Index n_p);

/// y = A h + n with n ~ N_C(0, sigma2 I).
///
/// sigma2 = 0 is accepted for noiseless experiments.
class ObservationModel {
 public:
  ObservationKind kind() const { return kind_; }
  const CMatrix& a() const { return a_; }
  double sigma2() const { return sigma2_; }
  Eigen::Index m() const { return a_.rows(); }
  Eigen::Index n() const { return a_.cols(); }

  // mimo_pilot only
  Eigen::Index n_rx() const { return n_rx_; }
  Eigen::Index n_tx() const { return n_tx_; }
  const CMatrix& pilots() const { return pilots_; }
  bool custom_pilots() const { return custom_pilots_; }
  // wideband_selection only
  const PilotPattern& pattern() const { return pattern_; }

  // True when A is exactly the identity.
  bool is_identity() const { return kind_ == ObservationKind::simo_identity; }

  // Same A at another noise level.
  ObservationModel with_sigma2(double sigma2) const;

  friend ObservationModel simo_model(Eigen::Index n, double sigma2);
  friend ObservationModel mimo_model_with_pilots(Eigen::Index n_rx, const CMatrix& pilots,
                                                 double sigma2);
  friend ObservationModel mimo_model(Eigen::Index n_rx, Eigen::Index n_tx, Eigen::Index n_p,
                                     double sigma2);
  friend ObservationModel wideband_model(const PilotPattern& pattern, double sigma2);

 private:
  ObservationKind kind_ = ObservationKind::simo_identity;
  CMatrix a_;
  double sigma2_ = 0.0;
  Eigen::Index n_rx_ = 0;
  Eigen::Index n_tx_ = 0;
  CMatrix pilots_;
  bool custom_pilots_ = false;
  PilotPattern pattern_;
};

ObservationModel simo_model(Eigen::Index n, double sigma2);

// P(t, p) = exp(-2 pi j t p / max(n_tx, n_p)) / sqrt(n_tx): the first n_p
// columns of the n_tx-point unitary DFT when n_p <= n_tx. Columns have unit
// norm in every case.
CMatrix dft_pilot_matrix(Eigen::Index n_tx, Eigen::Index n_p);

// Y = H P + N with H in C^{n_rx x n_tx}, i.e. A = P^T (x) I_{n_rx}.
ObservationModel mimo_model(Eigen::Index n_rx, Eigen::Index n_tx, Eigen::Index n_p,
                            double sigma2);
// Same with a caller-supplied n_tx x n_p pilot matrix.
ObservationModel mimo_model_with_pilots(Eigen::Index n_rx, const CMatrix& pilots, double sigma2);

// Selection of vec(H), H in C^{n_c x n_t}; position (c, t) is index c + n_c t.
ObservationModel wideband_model(const PilotPattern& pattern, double sigma2);

CVector observe(Rng& rng, const ObservationModel& model, const CVector& h);
// Columnwise observe for a batch of channels.
CMatrix observe_batch(Rng& rng, const ObservationModel& model, const CMatrix& h);

double sigma2_from_snr_db(double snr_db);
double snr_db_from_sigma2(double sigma2);

// Descriptor without matrix payload; A is rebuilt on load. Models with
// custom pilots are not serializable.
nlohmann::json to_json(const ObservationModel& model);
ObservationModel observation_model_from_json(const nlohmann::json& j);

}  // namespace gmmest
