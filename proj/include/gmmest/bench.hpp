#pragma once

#include "gmmest/baselines.hpp"
#include "gmmest/channel_models.hpp"
#include "gmmest/estimators.hpp"
#include "gmmest/gmm.hpp"
#include "gmmest/observation.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace gmmest {

enum class Scenario { simo_3gpp, mimo_3gpp, wideband_synthetic, synthetic_gmm };

std::string to_string(Scenario s);
Scenario scenario_from_string(const std::string& s);

/// One estimator entry of a benchmark configuration.
///
/// name is one of gmm, ls, sample_cov_lmmse, genie_lmmse, omp_genie, amp,
/// exact_cme (synthetic_gmm only).
struct EstimatorSpec {
  std::string name;
  Eigen::Index k = 1;
  CovStructure structure = CovStructure::full;
  Eigen::Index k_tx = 1;
  Eigen::Index k_rx = 1;
  int oversampling = 0;  // 0: 4 for omp_genie, 2 for amp
  int iterations = 100;  // amp
  Eigen::Index s_max = 0;  // omp_genie, 0 means m

  // CSV identifier, e.g. "gmm_full", "ls", "amp".
  std::string id() const;
  // Number of mixture components the estimator uses (0 for non-GMM ones).
  Eigen::Index components() const;
};

/// Random ground-truth mixture: weights proportional to 1 + U[0, 1), means
/// ~ N_C(0, mean_var I), covariances B B^H / N + floor I rescaled to trace
/// N * cov_scale with B i.i.d. N_C(0, 1).
struct SyntheticPriorSpec {
  Eigen::Index components = 8;
  Eigen::Index dim = 8;
  double mean_var = 2.0;
  double cov_scale = 0.5;
  double cov_floor = 0.05;
};

Gmm make_random_gmm(Rng& rng, const SyntheticPriorSpec& spec);

struct ScenarioConfig {
  Scenario scenario = Scenario::simo_3gpp;
  Eigen::Index n_rx = 32;
  Eigen::Index n_tx = 1;
  Eigen::Index n_p = 1;
  Eigen::Index n_c = 24;
  Eigen::Index n_t = 14;
  PilotLayout layout = PilotLayout::block;
  int n_clusters = 1;
  double angle_spread_deg = 2.0;
  int quad_points = kDefaultQuadPoints;
  WidebandConfig wideband;
  SyntheticPriorSpec synthetic;

  std::vector<EstimatorSpec> estimators;
  std::vector<double> snr_grid_db;
  Eigen::Index m_train = 100000;
  Eigen::Index t_test = 10000;
  std::uint64_t master_seed = 0;
  EmOptions em;

  // sweep-k
  std::vector<Eigen::Index> k_list;
  std::vector<Eigen::Index> m_list;
  double sweep_snr_db = 10.0;
  CovStructure sweep_structure = CovStructure::full;

  // converge
  std::vector<Eigen::Index> k_ladder{1, 2, 4, 8, 16};
  double ball_radius = 0.0;  // <= 0: no restriction
  Eigen::Index ball_points = 100;
  double converge_snr_db = 0.0;

  Eigen::Index channel_dim() const;
  // Throws ConfigError on inconsistent settings.
  void validate() const;
};

inline constexpr int kConfigVersion = 1;

// Parses a versioned JSON document; unknown keys are rejected.
ScenarioConfig parse_config(const nlohmann::json& j);
ScenarioConfig load_config(const std::string& path);
nlohmann::json to_json(const ScenarioConfig& cfg);

ObservationModel scenario_model(const ScenarioConfig& cfg, double sigma2);
SyntheticGmmPrior scenario_prior(const ScenarioConfig& cfg);
// Channels for training (stream indices [0, count)) and testing (a disjoint
// index range); the test set keeps per-sample covariances when available.
Dataset training_set(const ScenarioConfig& cfg, Eigen::Index count);
Dataset test_set(const ScenarioConfig& cfg, Eigen::Index count);

// Fits the GMM described by spec (name "gmm") on the columns of train.
std::shared_ptr<const Gmm> fit_gmm(const CMatrix& train, const EstimatorSpec& spec,
                                   const ScenarioConfig& cfg, std::uint64_t seed);

enum class RowStatus { ok, failed, skipped };

struct ExperimentRow {
  std::string scenario;
  std::string estimator;
  Eigen::Index k = 0;
  Eigen::Index m = 0;
  double snr_db = 0.0;
  double nmse = 0.0;
  double wall_time_ms = 0.0;  // median time per estimate
  std::uint64_t seed = 0;
  RowStatus status = RowStatus::ok;
  std::string message;
  // ||h_t - h_hat_t||^2 / N per test sample (not written to CSV)
  std::vector<double> errors;
};

struct ExperimentResult {
  std::vector<ExperimentRow> rows;

  // First row matching (estimator id, K, M, snr); throws if absent.
  const ExperimentRow& find(const std::string& estimator, Eigen::Index k, Eigen::Index m,
                            double snr_db) const;
};

// (1 / (N T)) sum_t ||h_t - h_hat_t||^2 over the columns.
double compute_nmse(const CMatrix& truth, const CMatrix& estimates);
std::vector<double> per_sample_errors(const CMatrix& truth, const CMatrix& estimates);

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};
MeanSe mean_and_se(const std::vector<double>& x);
// Mean and standard error of a - b over paired samples.
MeanSe paired_difference(const std::vector<double>& a, const std::vector<double>& b);

// Observations of the test channels shared by every estimator of one cell;
// run_snr_sweep uses cell = index into snr_grid_db, run_component_sweep 0.
CMatrix noisy_observations(const ScenarioConfig& cfg, const ObservationModel& model,
                           const CMatrix& h, std::uint64_t cell);

ExperimentResult run_snr_sweep(const ScenarioConfig& cfg);
ExperimentResult run_component_sweep(const ScenarioConfig& cfg,
                                     const std::vector<Eigen::Index>& k_list,
                                     const std::vector<Eigen::Index>& m_list);

struct ConvergenceRow {
  Eigen::Index k = 0;
  Eigen::Index m = 0;
  double max_discrepancy = 0.0;
  double mean_discrepancy = 0.0;
  double se_discrepancy = 0.0;
  std::vector<double> discrepancies;
};

struct ConvergenceResult {
  ExperimentResult result;
  std::vector<ConvergenceRow> table;
  CMatrix ball_observations;
};

// Replaces the EM fit for a given K, e.g. to inject the true parameters.
using FitOverride = std::function<std::shared_ptr<const Gmm>(Eigen::Index k)>;

ConvergenceResult run_convergence_study(const ScenarioConfig& cfg,
                                        const FitOverride& fit_override = {});

// Header scenario,estimator,K,M,snr_db,nmse,wall_time_ms,seed; rows sorted by
// (scenario, estimator, K, M, snr_db). Failed or skipped cells carry the
// word "failed" or "skipped" in the nmse column. With timing off the
// wall_time_ms column is written as 0 so that reruns are byte-identical.
void write_csv(std::ostream& out, const ExperimentResult& result, bool timing = true);
void emit_csv(const ExperimentResult& result, const std::string& path, bool timing = true);
void write_convergence_csv(std::ostream& out, const std::vector<ConvergenceRow>& table);

}  // namespace gmmest
