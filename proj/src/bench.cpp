#include "gmmest/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <tuple>

namespace gmmest {

std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::simo_3gpp: return "simo_3gpp";
    case Scenario::mimo_3gpp: return "mimo_3gpp";
    case Scenario::wideband_synthetic: return "wideband_synthetic";
    case Scenario::synthetic_gmm: return "synthetic_gmm";
  }
  return "?";
}

Scenario scenario_from_string(const std::string& s) {
  if (s == "simo_3gpp") return Scenario::simo_3gpp;
  if (s == "mimo_3gpp") return Scenario::mimo_3gpp;
  if (s == "wideband_synthetic") return Scenario::wideband_synthetic;
  if (s == "synthetic_gmm") return Scenario::synthetic_gmm;
  throw ConfigError("unknown scenario '" + s + "'");
}

namespace {

const std::set<std::string> kEstimatorNames = {"gmm",       "ls",  "sample_cov_lmmse", "genie_lmmse",
                                               "omp_genie", "amp", "exact_cme"};

}  // namespace

std::string EstimatorSpec::id() const {
  if (name == "gmm") return "gmm_" + to_string(structure);
  return name;
}

Eigen::Index EstimatorSpec::components() const {
  if (name != "gmm") return 0;
  return structure == CovStructure::kronecker ? k_tx * k_rx : k;
}

Gmm make_random_gmm(Rng& rng, const SyntheticPriorSpec& spec) {
  const Eigen::Index k = spec.components;
  const Eigen::Index n = spec.dim;
  if (k < 1 || n < 1) throw ConfigError("make_random_gmm: need positive component count and dim");
  RVector w(k);
  for (Eigen::Index i = 0; i < k; ++i) w(i) = 1.0 + rng.uniform();
  w /= w.sum();
  std::vector<CVector> means;
  std::vector<CMatrix> covs;
  for (Eigen::Index i = 0; i < k; ++i) {
    means.push_back(rng.complex_normal_vector(n, spec.mean_var));
    CMatrix b(n, n);
    for (Eigen::Index j = 0; j < n; ++j) b.col(j) = rng.complex_normal_vector(n);
    CMatrix c = b * b.adjoint() / static_cast<double>(n);
    c.diagonal().array() += spec.cov_floor;
    c *= static_cast<double>(n) * spec.cov_scale / c.trace().real();
    covs.push_back(0.5 * (c + c.adjoint()));
  }
  return Gmm::full(w, std::move(means), std::move(covs));
}

Eigen::Index ScenarioConfig::channel_dim() const {
  switch (scenario) {
    case Scenario::simo_3gpp: return n_rx;
    case Scenario::mimo_3gpp: return n_rx * n_tx;
    case Scenario::wideband_synthetic: return n_c * n_t;
    case Scenario::synthetic_gmm: return synthetic.dim;
  }
  return 0;
}

void ScenarioConfig::validate() const {
  if (snr_grid_db.empty()) throw ConfigError("config: snr_grid_db must not be empty");
  if (t_test < 1) throw ConfigError("config: T_test must be at least 1");
  if (m_train < 1) throw ConfigError("config: M_train must be at least 1");
  if (n_rx < 1 || n_tx < 1 || n_p < 1 || n_c < 1 || n_t < 1)
    throw ConfigError("config: dimensions must be positive");
  if (n_clusters < 1) throw ConfigError("config: n_clusters must be at least 1");
  if (!(angle_spread_deg > 0.0)) throw ConfigError("config: angle_spread_deg must be positive");
  if (scenario == Scenario::simo_3gpp && n_tx != 1)
    throw ConfigError("config: simo_3gpp needs n_tx = 1");
  if (scenario == Scenario::wideband_synthetic && n_p > n_c * n_t)
    throw ConfigError("config: more pilots than resource elements");
  for (const auto& e : estimators) {
    if (!kEstimatorNames.count(e.name)) throw ConfigError("config: unknown estimator '" + e.name + "'");
    if (e.name == "gmm" && e.structure == CovStructure::kronecker &&
        scenario != Scenario::mimo_3gpp && scenario != Scenario::wideband_synthetic)
      throw ConfigError("config: Kronecker GMMs need a two-dimensional channel");
    if (e.name == "gmm" && e.components() < 1) throw ConfigError("config: K must be positive");
    if (e.name == "exact_cme" && scenario != Scenario::synthetic_gmm)
      throw ConfigError("config: exact_cme is only defined for synthetic_gmm");
    if ((e.name == "omp_genie" || e.name == "amp") && e.oversampling != 0 && e.oversampling != 2 &&
        e.oversampling != 4)
      throw ConfigError("config: dictionary oversampling must be 2 or 4");
    if (e.name == "amp" && e.iterations < 1) throw ConfigError("config: AMP needs iterations >= 1");
  }
  if (sweep_structure == CovStructure::kronecker)
    throw ConfigError("config: component sweeps support full and circulant GMMs");
  if (ball_points < 1) throw ConfigError("config: ball_points must be at least 1");
}

namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError("config: " + where + " must be an object");
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key)) throw ConfigError("config: unknown key '" + key + "' in " + where);
}

template <typename T>
void read(const json& j, const char* key, T& dst) {
  if (j.contains(key)) {
    try {
      dst = j.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(std::string("config: bad value for '") + key + "': " + e.what());
    }
  }
}

EstimatorSpec parse_estimator(const json& j) {
  reject_unknown(j, {"name", "K", "structure", "K_tx", "K_rx", "oversampling", "iterations", "s_max"},
                 "estimator");
  EstimatorSpec e;
  if (!j.contains("name")) throw ConfigError("config: estimator without a name");
  read(j, "name", e.name);
  read(j, "K", e.k);
  std::string structure = "full";
  read(j, "structure", structure);
  e.structure = cov_structure_from_string(structure);
  read(j, "K_tx", e.k_tx);
  read(j, "K_rx", e.k_rx);
  read(j, "oversampling", e.oversampling);
  read(j, "iterations", e.iterations);
  read(j, "s_max", e.s_max);
  return e;
}

}  // namespace

ScenarioConfig parse_config(const json& j) {
  reject_unknown(j,
                 {"version", "scenario", "dims", "pilot_layout", "n_clusters", "angle_spread_deg",
                  "quad_points", "wideband", "synthetic", "estimators", "snr_grid_db", "M_train",
                  "T_test", "master_seed", "em", "sweep", "convergence"},
                 "config");
  if (!j.contains("version") || j.at("version") != kConfigVersion)
    throw ConfigError("config: version must be " + std::to_string(kConfigVersion));
  if (!j.contains("scenario")) throw ConfigError("config: missing scenario");
  ScenarioConfig c;
  c.scenario = scenario_from_string(j.at("scenario").get<std::string>());
  if (j.contains("dims")) {
    const json& d = j.at("dims");
    reject_unknown(d, {"n_rx", "n_tx", "n_p", "n_c", "n_t"}, "dims");
    read(d, "n_rx", c.n_rx);
    read(d, "n_tx", c.n_tx);
    read(d, "n_p", c.n_p);
    read(d, "n_c", c.n_c);
    read(d, "n_t", c.n_t);
  }
  if (c.scenario == Scenario::mimo_3gpp && !(j.contains("dims") && j.at("dims").contains("n_p")))
    c.n_p = c.n_tx;
  std::string layout = "block";
  read(j, "pilot_layout", layout);
  c.layout = pilot_layout_from_string(layout);
  read(j, "n_clusters", c.n_clusters);
  read(j, "angle_spread_deg", c.angle_spread_deg);
  read(j, "quad_points", c.quad_points);
  if (j.contains("wideband")) {
    const json& w = j.at("wideband");
    reject_unknown(w, {"n_paths", "max_delay", "max_doppler"}, "wideband");
    read(w, "n_paths", c.wideband.n_paths);
    read(w, "max_delay", c.wideband.max_delay);
    read(w, "max_doppler", c.wideband.max_doppler);
  }
  if (j.contains("synthetic")) {
    const json& s = j.at("synthetic");
    reject_unknown(s, {"components", "dim", "mean_var", "cov_scale", "cov_floor"}, "synthetic");
    read(s, "components", c.synthetic.components);
    read(s, "dim", c.synthetic.dim);
    read(s, "mean_var", c.synthetic.mean_var);
    read(s, "cov_scale", c.synthetic.cov_scale);
    read(s, "cov_floor", c.synthetic.cov_floor);
  }
  if (j.contains("estimators")) {
    if (!j.at("estimators").is_array()) throw ConfigError("config: estimators must be a list");
    for (const auto& e : j.at("estimators")) c.estimators.push_back(parse_estimator(e));
  }
  read(j, "snr_grid_db", c.snr_grid_db);
  read(j, "M_train", c.m_train);
  read(j, "T_test", c.t_test);
  read(j, "master_seed", c.master_seed);
  if (j.contains("em")) {
    const json& e = j.at("em");
    reject_unknown(e, {"max_iterations", "tolerance", "regularization", "kmeans_iterations"}, "em");
    read(e, "max_iterations", c.em.max_iterations);
    read(e, "tolerance", c.em.tolerance);
    read(e, "regularization", c.em.regularization);
    read(e, "kmeans_iterations", c.em.kmeans_iterations);
  }
  if (j.contains("sweep")) {
    const json& s = j.at("sweep");
    reject_unknown(s, {"K_list", "M_list", "snr_db", "structure"}, "sweep");
    read(s, "K_list", c.k_list);
    read(s, "M_list", c.m_list);
    read(s, "snr_db", c.sweep_snr_db);
    std::string structure = "full";
    read(s, "structure", structure);
    c.sweep_structure = cov_structure_from_string(structure);
  }
  if (j.contains("convergence")) {
    const json& s = j.at("convergence");
    reject_unknown(s, {"K_ladder", "ball_radius", "ball_points", "snr_db"}, "convergence");
    read(s, "K_ladder", c.k_ladder);
    read(s, "ball_radius", c.ball_radius);
    read(s, "ball_points", c.ball_points);
    read(s, "snr_db", c.converge_snr_db);
  }
  c.validate();
  return c;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

json to_json(const ScenarioConfig& c) {
  json j;
  j["version"] = kConfigVersion;
  j["scenario"] = to_string(c.scenario);
  j["dims"] = {{"n_rx", c.n_rx}, {"n_tx", c.n_tx}, {"n_p", c.n_p}, {"n_c", c.n_c}, {"n_t", c.n_t}};
  j["pilot_layout"] = to_string(c.layout);
  j["n_clusters"] = c.n_clusters;
  j["angle_spread_deg"] = c.angle_spread_deg;
  j["quad_points"] = c.quad_points;
  j["wideband"] = {{"n_paths", c.wideband.n_paths},
                   {"max_delay", c.wideband.max_delay},
                   {"max_doppler", c.wideband.max_doppler}};
  j["synthetic"] = {{"components", c.synthetic.components}, {"dim", c.synthetic.dim},
                    {"mean_var", c.synthetic.mean_var},     {"cov_scale", c.synthetic.cov_scale},
                    {"cov_floor", c.synthetic.cov_floor}};
  auto ests = json::array();
  for (const auto& e : c.estimators)
    ests.push_back({{"name", e.name},
                    {"K", e.k},
                    {"structure", to_string(e.structure)},
                    {"K_tx", e.k_tx},
                    {"K_rx", e.k_rx},
                    {"oversampling", e.oversampling},
                    {"iterations", e.iterations},
                    {"s_max", e.s_max}});
  j["estimators"] = ests;
  j["snr_grid_db"] = c.snr_grid_db;
  j["M_train"] = c.m_train;
  j["T_test"] = c.t_test;
  j["master_seed"] = c.master_seed;
  j["em"] = {{"max_iterations", c.em.max_iterations},
             {"tolerance", c.em.tolerance},
             {"regularization", c.em.regularization},
             {"kmeans_iterations", c.em.kmeans_iterations}};
  j["sweep"] = {{"K_list", c.k_list},
                {"M_list", c.m_list},
                {"snr_db", c.sweep_snr_db},
                {"structure", to_string(c.sweep_structure)}};
  j["convergence"] = {{"K_ladder", c.k_ladder},
                      {"ball_radius", c.ball_radius},
                      {"ball_points", c.ball_points},
                      {"snr_db", c.converge_snr_db}};
  return j;
}

namespace {

constexpr std::uint64_t kTestIndexBase = std::uint64_t{1} << 40;

std::uint64_t derived_seed(std::uint64_t master, std::uint64_t tag) {
  return Rng::mix(master ^ Rng::mix(tag));
}

ThreeGppConfig three_gpp(const ScenarioConfig& cfg) {
  ThreeGppConfig g;
  g.n_clusters = cfg.n_clusters;
  g.n_rx = cfg.n_rx;
  g.n_tx = cfg.scenario == Scenario::mimo_3gpp ? cfg.n_tx : 1;
  g.angle_spread = cfg.angle_spread_deg * kPi / 180.0;
  g.quad_points = cfg.quad_points;
  return g;
}

WidebandConfig wideband(const ScenarioConfig& cfg) {
  WidebandConfig w = cfg.wideband;
  w.n_c = cfg.n_c;
  w.n_t = cfg.n_t;
  return w;
}

Dataset scenario_dataset(const ScenarioConfig& cfg, Eigen::Index count, bool keep,
                         std::uint64_t first) {
  const std::uint64_t seed = derived_seed(cfg.master_seed, 0x6368616e6e656cULL);
  switch (cfg.scenario) {
    case Scenario::simo_3gpp:
    case Scenario::mimo_3gpp:
      return generate_3gpp_dataset(seed, three_gpp(cfg), count, keep, first);
    case Scenario::wideband_synthetic:
      return generate_wideband_dataset(seed, wideband(cfg), count, keep, first);
    case Scenario::synthetic_gmm:
      return generate_gmm_dataset(seed, scenario_prior(cfg), count, first);
  }
  return {};
}

}  // namespace

ObservationModel scenario_model(const ScenarioConfig& cfg, double sigma2) {
  switch (cfg.scenario) {
    case Scenario::simo_3gpp: return simo_model(cfg.n_rx, sigma2);
    case Scenario::mimo_3gpp: return mimo_model(cfg.n_rx, cfg.n_tx, cfg.n_p, sigma2);
    case Scenario::wideband_synthetic:
      return wideband_model(make_pattern(cfg.layout, cfg.n_c, cfg.n_t, cfg.n_p), sigma2);
    case Scenario::synthetic_gmm: return simo_model(cfg.synthetic.dim, sigma2);
  }
  throw ConfigError("scenario_model: unknown scenario");
}

SyntheticGmmPrior scenario_prior(const ScenarioConfig& cfg) {
  const std::uint64_t seed = derived_seed(cfg.master_seed, 0x7072696f72ULL);
  Rng rng(seed);
  return SyntheticGmmPrior(make_random_gmm(rng, cfg.synthetic), seed);
}

Dataset training_set(const ScenarioConfig& cfg, Eigen::Index count) {
  return scenario_dataset(cfg, count, false, 0);
}

Dataset test_set(const ScenarioConfig& cfg, Eigen::Index count) {
  return scenario_dataset(cfg, count, true, kTestIndexBase);
}

std::shared_ptr<const Gmm> fit_gmm(const CMatrix& train, const EstimatorSpec& spec,
                                   const ScenarioConfig& cfg, std::uint64_t seed) {
  EmOptions opts = cfg.em;
  opts.seed = seed;
  if (spec.structure == CovStructure::kronecker) {
    KroneckerShape shape;
    if (cfg.scenario == Scenario::mimo_3gpp) {
      shape.n_rx = cfg.n_rx;
      shape.n_tx = cfg.n_tx;
    } else if (cfg.scenario == Scenario::wideband_synthetic) {
      shape.n_rx = cfg.n_c;
      shape.n_tx = cfg.n_t;
    } else {
      throw ConfigError("fit_gmm: Kronecker GMMs need a two-dimensional channel");
    }
    shape.k_tx = spec.k_tx;
    shape.k_rx = spec.k_rx;
    return std::make_shared<const Gmm>(fit_kronecker(train, shape, opts).gmm);
  }
  return std::make_shared<const Gmm>(em_fit(train, spec.k, spec.structure, opts).gmm);
}

const ExperimentRow& ExperimentResult::find(const std::string& estimator, Eigen::Index k,
                                            Eigen::Index m, double snr_db) const {
  for (const auto& r : rows)
    if (r.estimator == estimator && r.k == k && r.m == m && std::abs(r.snr_db - snr_db) < 1e-9)
      return r;
  throw std::out_of_range("no result row for " + estimator + " K=" + std::to_string(k) +
                          " M=" + std::to_string(m) + " snr=" + std::to_string(snr_db));
}

std::vector<double> per_sample_errors(const CMatrix& truth, const CMatrix& estimates) {
  require_dim(truth.rows() == estimates.rows() && truth.cols() == estimates.cols(),
              "compute_nmse: truth and estimates differ in shape");
  std::vector<double> e(static_cast<std::size_t>(truth.cols()));
  const double n = static_cast<double>(truth.rows());
  for (Eigen::Index t = 0; t < truth.cols(); ++t)
    e[static_cast<std::size_t>(t)] = (truth.col(t) - estimates.col(t)).squaredNorm() / n;
  return e;
}

double compute_nmse(const CMatrix& truth, const CMatrix& estimates) {
  require_dim(truth.cols() >= 1, "compute_nmse: no samples");
  return mean_and_se(per_sample_errors(truth, estimates)).mean;
}

MeanSe mean_and_se(const std::vector<double>& x) {
  MeanSe out;
  if (x.empty()) return out;
  const double n = static_cast<double>(x.size());
  double sum = 0.0;
  for (double v : x) sum += v;
  out.mean = sum / n;
  if (x.size() > 1) {
    double ss = 0.0;
    for (double v : x) ss += (v - out.mean) * (v - out.mean);
    out.se = std::sqrt(ss / (n - 1.0) / n);
  }
  return out;
}

MeanSe paired_difference(const std::vector<double>& a, const std::vector<double>& b) {
  require_dim(a.size() == b.size(), "paired_difference: sample counts differ");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  return mean_and_se(d);
}

namespace {

constexpr Eigen::Index kTimingChunk = 500;

using BatchFn = std::function<CMatrix(const CMatrix& ys, Eigen::Index start)>;

struct Evaluation {
  CMatrix estimates;
  double median_ms = 0.0;
};

Evaluation evaluate(const BatchFn& fn, const CMatrix& ys) {
  Evaluation ev;
  ev.estimates.resize(0, ys.cols());
  std::vector<double> per_estimate;
  for (Eigen::Index start = 0; start < ys.cols(); start += kTimingChunk) {
    const Eigen::Index b = std::min(kTimingChunk, ys.cols() - start);
    const auto t0 = std::chrono::steady_clock::now();
    CMatrix part = fn(ys.middleCols(start, b), start);
    const auto t1 = std::chrono::steady_clock::now();
    if (ev.estimates.rows() == 0) ev.estimates.resize(part.rows(), ys.cols());
    ev.estimates.middleCols(start, b) = part;
    per_estimate.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count() /
                           static_cast<double>(b));
  }
  std::sort(per_estimate.begin(), per_estimate.end());
  const std::size_t n = per_estimate.size();
  ev.median_ms = n == 0 ? 0.0
                        : (n % 2 ? per_estimate[n / 2]
                                 : 0.5 * (per_estimate[n / 2 - 1] + per_estimate[n / 2]));
  return ev;
}

template <typename PerColumn>
BatchFn columnwise(PerColumn f) {
  return [f](const CMatrix& ys, Eigen::Index start) {
    CMatrix out;
    for (Eigen::Index t = 0; t < ys.cols(); ++t) {
      CVector h = f(CVector(ys.col(t)), start + t);
      if (t == 0) out.resize(h.size(), ys.cols());
      out.col(t) = h;
    }
    return out;
  };
}

// SNR-independent state of one configured estimator.
struct Trained {
  EstimatorSpec spec;
  std::shared_ptr<const Gmm> gmm;
  CMatrix cov;
  Dictionary dict;
  std::string error;
  std::uint64_t seed = 0;
};

BatchFn make_evaluator(const Trained& tr, const ObservationModel& model, const Dataset& test,
                       const ScenarioConfig& cfg) {
  const std::string& name = tr.spec.name;
  if (name == "gmm") {
    auto est = std::make_shared<GmmEstimator>(GmmEstimator::precompute(tr.gmm, model));
    return [est](const CMatrix& ys, Eigen::Index) { return est->estimate_batch(ys); };
  }
  if (name == "ls") {
    auto ls = std::make_shared<LsEstimator>(model);
    return [ls](const CMatrix& ys, Eigen::Index) { return ls->estimate_batch(ys); };
  }
  if (name == "sample_cov_lmmse") {
    auto sc = std::make_shared<SampleCovLmmse>(tr.cov, model);
    return [sc](const CMatrix& ys, Eigen::Index) { return sc->estimate_batch(ys); };
  }
  if (name == "genie_lmmse") {
    if (test.covariances.empty())
      throw UnsupportedError("genie_lmmse: scenario provides no per-sample covariances");
    const Dataset* ts = &test;
    return columnwise([ts, model](const CVector& y, Eigen::Index t) {
      return genie_lmmse(ts->covariances[static_cast<std::size_t>(t)], model, y);
    });
  }
  if (name == "omp_genie") {
    auto omp = std::make_shared<Omp>(model, tr.dict);
    const Dataset* ts = &test;
    const Eigen::Index s_max = tr.spec.s_max;
    return columnwise([omp, ts, s_max](const CVector& y, Eigen::Index t) {
      return omp->genie(y, ts->samples.col(t), s_max);
    });
  }
  if (name == "amp") {
    auto amp = std::make_shared<Amp>(model, tr.dict, AmpOptions{tr.spec.iterations, 0.0});
    return columnwise([amp](const CVector& y, Eigen::Index) { return amp->estimate(y); });
  }
  if (name == "exact_cme") {
    auto oracle = std::make_shared<ExactCmeOracle>(scenario_prior(cfg), model);
    return [oracle](const CMatrix& ys, Eigen::Index) { return oracle->exact_cme_batch(ys); };
  }
  throw ConfigError("unknown estimator '" + name + "'");
}

Trained train_estimator(const EstimatorSpec& spec, const CMatrix& train, const ScenarioConfig& cfg,
                        std::uint64_t seed) {
  Trained tr;
  tr.spec = spec;
  tr.seed = seed;
  try {
    if (spec.name == "gmm") {
      if (spec.components() > train.cols())
        throw ConfigError("more components than training samples");
      tr.gmm = fit_gmm(train, spec, cfg, seed);
    } else if (spec.name == "sample_cov_lmmse") {
      tr.cov = sample_covariance(train);
    } else if (spec.name == "omp_genie" || spec.name == "amp") {
      const int os = spec.oversampling != 0 ? spec.oversampling : (spec.name == "amp" ? 2 : 4);
      tr.dict = build_dictionary(scenario_model(cfg, 1.0), os);
    }
  } catch (const std::exception& e) {
    tr.error = e.what();
  }
  return tr;
}

ExperimentRow base_row(const ScenarioConfig& cfg, const Trained& tr, double snr_db) {
  ExperimentRow row;
  row.scenario = to_string(cfg.scenario);
  row.estimator = tr.spec.id();
  row.k = tr.spec.components();
  row.m = cfg.m_train;
  row.snr_db = snr_db;
  row.seed = tr.seed;
  return row;
}

void run_cell(ExperimentRow& row, const Trained& tr, const ObservationModel& model,
              const Dataset& test, const CMatrix& ys, const ScenarioConfig& cfg) {
  if (!tr.error.empty()) {
    row.status = RowStatus::failed;
    row.message = tr.error;
    return;
  }
  try {
    const Evaluation ev = evaluate(make_evaluator(tr, model, test, cfg), ys);
    row.errors = per_sample_errors(test.samples, ev.estimates);
    row.nmse = mean_and_se(row.errors).mean;
    row.wall_time_ms = ev.median_ms;
  } catch (const std::exception& e) {
    row.status = RowStatus::failed;
    row.message = e.what();
  }
}

}  // namespace

CMatrix noisy_observations(const ScenarioConfig& cfg, const ObservationModel& model,
                           const CMatrix& h, std::uint64_t cell) {
  Rng rng(derived_seed(cfg.master_seed, 0x6e6f697365ULL), cell);
  return observe_batch(rng, model, h);
}

ExperimentResult run_snr_sweep(const ScenarioConfig& cfg) {
  cfg.validate();
  const Dataset train = training_set(cfg, cfg.m_train);
  const Dataset test = test_set(cfg, cfg.t_test);
  std::vector<Trained> trained;
  for (std::size_t i = 0; i < cfg.estimators.size(); ++i)
    trained.push_back(train_estimator(cfg.estimators[i], train.samples, cfg,
                                      derived_seed(cfg.master_seed, 0x666974000ULL + i)));
  ExperimentResult res;
  for (std::size_t s = 0; s < cfg.snr_grid_db.size(); ++s) {
    const double snr = cfg.snr_grid_db[s];
    const ObservationModel model = scenario_model(cfg, sigma2_from_snr_db(snr));
    const CMatrix ys = noisy_observations(cfg, model, test.samples, s);
    for (const auto& tr : trained) {
      ExperimentRow row = base_row(cfg, tr, snr);
      run_cell(row, tr, model, test, ys, cfg);
      res.rows.push_back(std::move(row));
    }
  }
  return res;
}

ExperimentResult run_component_sweep(const ScenarioConfig& cfg,
                                     const std::vector<Eigen::Index>& k_list,
                                     const std::vector<Eigen::Index>& m_list) {
  cfg.validate();
  if (k_list.empty() || m_list.empty()) throw ConfigError("component sweep: empty K or M list");
  for (auto v : k_list)
    if (v < 1) throw ConfigError("component sweep: K must be positive");
  for (auto v : m_list)
    if (v < 1) throw ConfigError("component sweep: M must be positive");
  const Eigen::Index m_max = *std::max_element(m_list.begin(), m_list.end());
  const Dataset train = training_set(cfg, m_max);
  const Dataset test = test_set(cfg, cfg.t_test);
  const ObservationModel model = scenario_model(cfg, sigma2_from_snr_db(cfg.sweep_snr_db));
  const CMatrix ys = noisy_observations(cfg, model, test.samples, 0);

  ExperimentResult res;
  std::uint64_t cell = 0;
  for (Eigen::Index m : m_list) {
    for (Eigen::Index k : k_list) {
      EstimatorSpec spec;
      spec.name = "gmm";
      spec.k = k;
      spec.structure = cfg.sweep_structure;
      const std::uint64_t seed = derived_seed(cfg.master_seed, 0x63656c6c000ULL + cell++);
      ScenarioConfig cell_cfg = cfg;
      cell_cfg.m_train = m;
      Trained tr;
      tr.spec = spec;
      tr.seed = seed;
      ExperimentRow row = base_row(cell_cfg, tr, cfg.sweep_snr_db);
      if (k > m) {
        row.status = RowStatus::skipped;
        row.message = "K exceeds M";
        res.rows.push_back(std::move(row));
        continue;
      }
      tr = train_estimator(spec, train.samples.leftCols(m), cfg, seed);
      run_cell(row, tr, model, test, ys, cfg);
      res.rows.push_back(std::move(row));
    }
  }
  return res;
}

ConvergenceResult run_convergence_study(const ScenarioConfig& cfg,
                                        const FitOverride& fit_override) {
  cfg.validate();
  if (cfg.scenario != Scenario::synthetic_gmm)
    throw ConfigError("convergence study needs the synthetic_gmm scenario");
  const SyntheticGmmPrior prior = scenario_prior(cfg);
  const ObservationModel model = scenario_model(cfg, sigma2_from_snr_db(cfg.converge_snr_db));
  const ExactCmeOracle oracle(prior, model);

  // fixed test observations inside the ball
  Rng rng(derived_seed(cfg.master_seed, 0x62616c6cULL));
  CMatrix hs(model.n(), cfg.ball_points);
  CMatrix ys(model.m(), cfg.ball_points);
  Eigen::Index found = 0;
  for (Eigen::Index tries = 0; found < cfg.ball_points; ++tries) {
    if (tries >= 1000 * cfg.ball_points)
      throw ConfigError("convergence study: ball radius too small to collect test points");
    const CVector h = draw_synthetic_gmm_sample(rng, prior);
    const CVector y = observe(rng, model, h);
    if (cfg.ball_radius > 0.0 && y.norm() > cfg.ball_radius) continue;
    hs.col(found) = h;
    ys.col(found) = y;
    ++found;
  }
  const CMatrix exact = oracle.exact_cme_batch(ys);

  ConvergenceResult out;
  out.ball_observations = ys;
  const Dataset train = training_set(cfg, cfg.m_train);
  {
    ExperimentRow row;
    row.scenario = to_string(cfg.scenario);
    row.estimator = "exact_cme";
    row.k = prior.gmm().components();
    row.m = cfg.m_train;
    row.snr_db = cfg.converge_snr_db;
    row.seed = prior.rng_seed();
    row.errors = per_sample_errors(hs, exact);
    row.nmse = mean_and_se(row.errors).mean;
    out.result.rows.push_back(std::move(row));
  }
  for (std::size_t c = 0; c < cfg.k_ladder.size(); ++c) {
    const Eigen::Index k = cfg.k_ladder[c];
    ExperimentRow row;
    row.scenario = to_string(cfg.scenario);
    row.estimator = "gmm_full";
    row.k = k;
    row.m = cfg.m_train;
    row.snr_db = cfg.converge_snr_db;
    row.seed = derived_seed(cfg.master_seed, 0x636f6e76000ULL + c);
    if (k > cfg.m_train) {
      row.status = RowStatus::skipped;
      row.message = "K exceeds M";
      out.result.rows.push_back(std::move(row));
      continue;
    }
    try {
      EstimatorSpec spec;
      spec.name = "gmm";
      spec.k = k;
      std::shared_ptr<const Gmm> gmm =
          fit_override ? fit_override(k) : fit_gmm(train.samples, spec, cfg, row.seed);
      const GmmEstimator est = GmmEstimator::precompute(gmm, model);
      const auto t0 = std::chrono::steady_clock::now();
      const CMatrix approx = est.estimate_batch(ys);
      const auto t1 = std::chrono::steady_clock::now();
      row.wall_time_ms = std::chrono::duration<double, std::milli>(t1 - t0).count() /
                         static_cast<double>(ys.cols());
      row.errors = per_sample_errors(hs, approx);
      row.nmse = mean_and_se(row.errors).mean;
      ConvergenceRow cr;
      cr.k = k;
      cr.m = cfg.m_train;
      for (Eigen::Index t = 0; t < ys.cols(); ++t)
        cr.discrepancies.push_back((exact.col(t) - approx.col(t)).norm());
      const MeanSe ms = mean_and_se(cr.discrepancies);
      cr.mean_discrepancy = ms.mean;
      cr.se_discrepancy = ms.se;
      cr.max_discrepancy = *std::max_element(cr.discrepancies.begin(), cr.discrepancies.end());
      out.table.push_back(std::move(cr));
    } catch (const std::exception& e) {
      row.status = RowStatus::failed;
      row.message = e.what();
    }
    out.result.rows.push_back(std::move(row));
  }
  return out;
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_csv(std::ostream& out, const ExperimentResult& result, bool timing) {
  std::vector<const ExperimentRow*> rows;
  for (const auto& r : result.rows) rows.push_back(&r);
  std::stable_sort(rows.begin(), rows.end(), [](const ExperimentRow* a, const ExperimentRow* b) {
    return std::tie(a->scenario, a->estimator, a->k, a->m, a->snr_db) <
           std::tie(b->scenario, b->estimator, b->k, b->m, b->snr_db);
  });
  out << "scenario,estimator,K,M,snr_db,nmse,wall_time_ms,seed\n";
  for (const auto* r : rows) {
    std::string nmse = fmt(r->nmse);
    if (r->status == RowStatus::failed) nmse = "failed";
    if (r->status == RowStatus::skipped) nmse = "skipped";
    out << r->scenario << ',' << r->estimator << ',' << r->k << ',' << r->m << ',' << fmt(r->snr_db)
        << ',' << nmse << ',' << fmt(timing ? r->wall_time_ms : 0.0) << ',' << r->seed << '\n';
  }
}

void emit_csv(const ExperimentResult& result, const std::string& path, bool timing) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_csv(out, result, timing);
  out.flush();
  if (!out) throw std::runtime_error("error writing '" + path + "'");
}

void write_convergence_csv(std::ostream& out, const std::vector<ConvergenceRow>& table) {
  out << "K,M,max_discrepancy,mean_discrepancy,se_discrepancy\n";
  for (const auto& r : table)
    out << r.k << ',' << r.m << ',' << fmt(r.max_discrepancy) << ',' << fmt(r.mean_discrepancy)
        << ',' << fmt(r.se_discrepancy) << '\n';
}

}  // namespace gmmest
