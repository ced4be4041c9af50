// Acceptance checks. Each criterion prints one PASS/FAIL line; thresholds are
// fixed below. Run with --criterion N to select one.

#include "gmmest/baselines.hpp"
#include "gmmest/bench.hpp"
#include "gmmest/channel_models.hpp"
#include "gmmest/estimators.hpp"
#include "gmmest/gmm.hpp"
#include "oracles.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

using namespace gmmest;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

CMatrix sigma_eye(double s2, Eigen::Index m) { return s2 * CMatrix::Identity(m, m); }

double vec_rel(const RVector& a, const RVector& b) { return (a - b).norm() / b.norm(); }

// Random observation model with channel dimension n <= 8.
ObservationModel random_model(Rng& rng, Eigen::Index n, int variant) {
  const double s2 = 0.05 + rng.uniform();
  if (variant == 1 && n % 2 == 0) return mimo_model(n / 2, 2, 1 + (n % 4 == 0), s2);
  if (variant == 2 && n >= 4) {
    const Eigen::Index n_t = 2, n_c = n / 2;
    if (n_c * n_t == n) return wideband_model(make_pattern(PilotLayout::comb, n_c, n_t, n_t * (n_c > 2 ? 2 : 1)), s2);
  }
  return simo_model(n, s2);
}

// ---------------------------------------------------------------------------

Outcome criterion1() {
  Outcome o;
  Rng rng(101);
  double e_lmmse = 0, e_logpdf = 0, e_resp = 0, e_est = 0;
  for (int i = 0; i < 100; ++i) {
    const Eigen::Index n = 1 + i % 8;
    const Eigen::Index k = 1 + i % 4;
    const Gmm g = oracle::random_gmm(rng, k, n, 2.0);
    auto shared = std::make_shared<const Gmm>(g);
    CMatrix a, noise;
    if (i % 4 == 3) {
      // general A and noise covariance
      a = oracle::random_matrix(rng, std::max<Eigen::Index>(1, n - 1), n);
      noise = oracle::random_pd(rng, a.rows(), 0.1);
    } else {
      const ObservationModel model = random_model(rng, n, i % 3);
      a = model.a();
      noise = sigma_eye(model.sigma2(), model.m());
    }
    const GmmEstimator est = GmmEstimator::precompute(shared, a, noise);
    const Eigen::Index c = rng.categorical(g.weights);
    const CVector h = g.means[c] + psd_sqrt_factor(g.covs[c]) * rng.complex_normal_vector(n);
    const CVector y = a * h + psd_sqrt_factor(noise) * rng.complex_normal_vector(a.rows());

    RVector p(k);
    CVector want = CVector::Zero(n);
    std::vector<CVector> comp;
    for (Eigen::Index j = 0; j < k; ++j) {
      const CMatrix s = a * g.covs[j] * a.adjoint() + noise;
      p(j) = g.weights(j) * oracle::gaussian_pdf(y, a * g.means[j], s);
      comp.push_back(oracle::lmmse(g.covs[j], g.means[j], a, noise, y));
      e_lmmse = std::max(e_lmmse, oracle::rel_err(est.component_lmmse(y, j), comp.back()));
      const double lp = complex_gaussian_logpdf(h, g.means[j], HermitianFactor(g.covs[j]));
      const double lw = oracle::gaussian_logpdf(h, g.means[j], g.covs[j]);
      e_logpdf = std::max(e_logpdf, std::abs(lp - lw) / std::abs(lw));
    }
    p /= p.sum();
    for (Eigen::Index j = 0; j < k; ++j) want += p(j) * comp[static_cast<std::size_t>(j)];
    e_resp = std::max(e_resp, vec_rel(est.observation_responsibilities(y), p));
    e_est = std::max(e_est, oracle::rel_err(est.estimate(y), want));
  }
  const double tol = 1e-10;
  o.detail << "max rel err: lmmse " << e_lmmse << ", logpdf " << e_logpdf << ", resp " << e_resp
           << ", estimate " << e_est << " (tol " << tol << ")";
  o.require(e_lmmse < tol && e_logpdf < tol && e_resp < tol && e_est < tol, "tolerance");
  return o;
}

Outcome criterion2() {
  Outcome o;
  Rng rng(202);
  RVector w(2);
  w << 0.4, 0.6;
  CMatrix c1(2, 2), c2(2, 2);
  c1 << 1.2, cplx(0.4, 0.3), cplx(0.4, -0.3), 0.7;
  c2 << 0.5, cplx(-0.1, 0.2), cplx(-0.1, -0.2), 1.0;
  CVector m1(2), m2(2);
  m1 << cplx(2.0, 0.5), cplx(-1.0, 1.0);
  m2 << cplx(-1.0, -1.0), cplx(0.5, -0.5);
  const Gmm g = Gmm::full(w, {m1, m2}, {c1, c2});
  const double s2 = 0.5;
  const GmmEstimator est = GmmEstimator::precompute(g, simo_model(2, s2));
  const SyntheticGmmPrior prior(g, 0);
  const Eigen::Index count = 1000000;
  CMatrix hs(2, count);
  for (Eigen::Index i = 0; i < count; ++i) hs.col(i) = draw_synthetic_gmm_sample(rng, prior);
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    const CVector y = draw_synthetic_gmm_sample(rng, prior) + rng.complex_normal_vector(2, s2);
    // likelihood of y given each prior draw: N_C(y; h, s2 I)
    const RVector logw = -(hs.colwise() - y).colwise().squaredNorm().transpose() / s2;
    const RVector wts = (logw.array() - logw.maxCoeff()).exp();
    const CVector mc = hs * wts.cast<cplx>() / wts.sum();
    worst = std::max(worst, oracle::rel_err(est.estimate(y), mc));
  }
  o.detail << "max rel deviation from importance-sampling CME over 20 y: " << worst << " (tol 1e-2)";
  o.require(worst < 1e-2, "tolerance");
  return o;
}

Outcome criterion3() {
  Outcome o;
  ScenarioConfig cfg;
  cfg.scenario = Scenario::synthetic_gmm;
  cfg.synthetic.components = 8;
  cfg.synthetic.dim = 8;
  cfg.m_train = 100000;
  cfg.t_test = 100;
  cfg.snr_grid_db = {0.0};
  cfg.estimators = {EstimatorSpec{"exact_cme"}};
  cfg.master_seed = 303;
  cfg.k_ladder = {1, 2, 4, 8, 16};
  cfg.ball_points = 100;
  cfg.ball_radius = 6.0;
  cfg.converge_snr_db = 0.0;
  cfg.em.max_iterations = 300;
  const ConvergenceResult r = run_convergence_study(cfg);
  o.require(r.table.size() == 5, "ladder incomplete");
  if (r.table.size() != 5) return o;
  o.detail << "mean discrepancy:";
  for (const auto& row : r.table) o.detail << " K=" << row.k << ":" << row.mean_discrepancy;
  for (std::size_t i = 1; i < r.table.size(); ++i) {
    const MeanSe d = paired_difference(r.table[i].discrepancies, r.table[i - 1].discrepancies);
    o.require(d.mean <= 2.0 * d.se, "increase from K=" + std::to_string(r.table[i - 1].k) +
                                        " to K=" + std::to_string(r.table[i].k));
  }
  const double ratio = r.table[3].mean_discrepancy / r.table[0].mean_discrepancy;
  o.detail << "; disc(8)/disc(1) = " << ratio << " (need < 1/3)";
  o.require(ratio < 1.0 / 3.0, "disc(8) < disc(1)/3");
  return o;
}

ScenarioConfig simo_config(int clusters, std::uint64_t seed) {
  ScenarioConfig cfg;
  cfg.scenario = Scenario::simo_3gpp;
  cfg.n_rx = 32;
  cfg.n_clusters = clusters;
  cfg.t_test = 10000;
  cfg.master_seed = seed;
  cfg.estimators = {EstimatorSpec{"ls"}};
  cfg.snr_grid_db = {10.0};
  return cfg;
}

Outcome criterion4() {
  Outcome o;
  ScenarioConfig cfg = simo_config(3, 404);
  cfg.sweep_snr_db = 10.0;
  cfg.em.max_iterations = 100;
  const ExperimentResult big = run_component_sweep(cfg, {1, 16}, {100000});
  const ExperimentResult small = run_component_sweep(cfg, {8, 64}, {1000});
  const ExperimentRow& k1 = big.find("gmm_full", 1, 100000, 10.0);
  const ExperimentRow& k16 = big.find("gmm_full", 16, 100000, 10.0);
  const ExperimentRow& k8 = small.find("gmm_full", 8, 1000, 10.0);
  const ExperimentRow& k64 = small.find("gmm_full", 64, 1000, 10.0);
  for (const auto* r : {&k1, &k16, &k8, &k64}) o.require(r->status == RowStatus::ok, r->message);
  if (!o.pass) return o;
  const MeanSe gain = paired_difference(k1.errors, k16.errors);
  const MeanSe over = paired_difference(k64.errors, k8.errors);
  o.detail << "M=1e5: nmse K=1 " << k1.nmse << ", K=16 " << k16.nmse << " (diff " << gain.mean
           << ", se " << gain.se << "); M=1e3: nmse K=8 " << k8.nmse << ", K=64 " << k64.nmse
           << " (diff " << over.mean << ", se " << over.se << ")";
  o.require(gain.mean > 2.0 * gain.se, "K=16 better than K=1 at M=1e5");
  o.require(over.mean > 2.0 * over.se, "K=64 worse than K=8 at M=1e3");
  return o;
}

Outcome criterion5() {
  Outcome o;
  ScenarioConfig cfg = simo_config(1, 505);
  cfg.m_train = 100000;
  cfg.snr_grid_db = {-10.0, 0.0, 10.0, 20.0};
  cfg.em.max_iterations = 50;
  EstimatorSpec gmm{"gmm"};
  gmm.k = 64;
  cfg.estimators = {EstimatorSpec{"genie_lmmse"}, gmm, EstimatorSpec{"sample_cov_lmmse"},
                    EstimatorSpec{"ls"}, EstimatorSpec{"omp_genie"}, EstimatorSpec{"amp"}};
  const ExperimentResult r = run_snr_sweep(cfg);
  for (const auto& row : r.rows) o.require(row.status == RowStatus::ok, row.estimator + ": " + row.message);
  if (!o.pass) return o;
  for (double snr : cfg.snr_grid_db) {
    const double genie = r.find("genie_lmmse", 0, cfg.m_train, snr).nmse;
    o.detail << snr << " dB:";
    for (const auto& row : r.rows) {
      if (row.snr_db != snr) continue;
      o.detail << ' ' << row.estimator << '=' << row.nmse;
      if (row.estimator != "genie_lmmse")
        o.require(genie <= row.nmse, "genie above " + row.estimator + " at " + std::to_string(snr) + " dB");
    }
    o.detail << "; ";
  }
  const double ratio = r.find("gmm_full", 64, cfg.m_train, 10.0).nmse /
                       r.find("genie_lmmse", 0, cfg.m_train, 10.0).nmse;
  o.detail << "gmm/genie at 10 dB = " << ratio << " (need <= 1.3)";
  o.require(ratio <= 1.3, "gmm within 1.3x genie at 10 dB");
  const auto& g0 = r.find("gmm_full", 64, cfg.m_train, 0.0).errors;
  const auto& s0 = r.find("sample_cov_lmmse", 0, cfg.m_train, 0.0).errors;
  const auto& l0 = r.find("ls", 0, cfg.m_train, 0.0).errors;
  const MeanSe a = paired_difference(s0, g0);
  const MeanSe b = paired_difference(l0, s0);
  o.require(a.mean > 2.0 * a.se, "gmm < sample cov at 0 dB");
  o.require(b.mean > 2.0 * b.se, "sample cov < ls at 0 dB");
  return o;
}

Outcome criterion6() {
  Outcome o;
  Rng rng(606);
  const Eigen::Index n = 1024, k = 16;
  std::vector<CVector> means;
  std::vector<RVector> spectra;
  for (Eigen::Index i = 0; i < k; ++i) {
    means.push_back(rng.complex_normal_vector(n, 0.1));
    RVector c(n);
    for (Eigen::Index j = 0; j < n; ++j) c(j) = 0.01 + 2.0 * rng.uniform();
    spectra.push_back(c);
  }
  const Gmm g = Gmm::circulant(oracle::random_weights(rng, k), means, spectra);
  const GmmEstimator est = GmmEstimator::precompute(g, simo_model(n, 0.1));
  o.require(est.has_fast_path(), "fast path available");
  if (!o.pass) return o;
  const SyntheticGmmPrior prior(g, 0);
  std::vector<CVector> ys;
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    ys.push_back(draw_synthetic_gmm_sample(rng, prior) + rng.complex_normal_vector(n, 0.1));
    worst = std::max(worst, oracle::rel_err(est.estimate_circulant_fast(ys.back()), est.estimate(ys.back())));
  }
  auto median_ms = [&](const std::function<CVector(const CVector&)>& f) {
    std::vector<double> times;
    for (const auto& y : ys) {
      const auto t0 = Clock::now();
      const CVector h = f(y);
      times.push_back(seconds_since(t0) * 1e3);
      if (!h.allFinite()) times.back() = 1e300;
    }
    std::nth_element(times.begin(), times.begin() + 50, times.end());
    return times[50];
  };
  const double dense = median_ms([&](const CVector& y) { return est.estimate(y); });
  const double fast = median_ms([&](const CVector& y) { return est.estimate_circulant_fast(y); });
  o.detail << "max rel diff " << worst << " (tol 1e-8); median ms dense " << dense << ", fast "
           << fast << " (ratio " << fast / dense << ", need < 0.5)";
  o.require(worst < 1e-8, "fast equals dense");
  o.require(fast < 0.5 * dense, "fast path speedup");
  return o;
}

Outcome criterion7() {
  Outcome o;
  const auto full = full_covariance_parameters(32 * 4, 32);
  const auto kr = kronecker_covariance_parameters(32, 8, 4, 4);
  o.detail << "parameters full " << full << ", kronecker " << kr;
  o.require(full == 264192, "full count 264192");
  o.require(kr == 4264, "kronecker count 4264");

  ScenarioConfig cfg;
  cfg.scenario = Scenario::mimo_3gpp;
  cfg.n_rx = 8;
  cfg.n_tx = 2;
  cfg.n_p = 2;
  cfg.n_clusters = 3;
  cfg.m_train = 500;
  cfg.t_test = 10000;
  cfg.master_seed = 707;
  cfg.snr_grid_db = {10.0};
  EstimatorSpec f{"gmm"};
  f.k = 8;
  EstimatorSpec kspec{"gmm"};
  kspec.structure = CovStructure::kronecker;
  kspec.k_tx = 2;
  kspec.k_rx = 4;
  cfg.estimators = {f, kspec};
  const ExperimentResult r = run_snr_sweep(cfg);
  for (const auto& row : r.rows) o.require(row.status == RowStatus::ok, row.message);
  if (!o.pass) return o;
  const ExperimentRow& rf = r.find("gmm_full", 8, 500, 10.0);
  const ExperimentRow& rk = r.find("gmm_kronecker", 8, 500, 10.0);
  const MeanSe d = paired_difference(rf.errors, rk.errors);
  o.detail << "; M=500 at 10 dB: nmse full " << rf.nmse << ", kronecker " << rk.nmse << " (diff "
           << d.mean << ", se " << d.se << ")";
  o.require(d.mean > 2.0 * d.se, "kronecker beats full");
  return o;
}

// Property suites, small instances.
Outcome criterion8() {
  Outcome o;
  Rng rng(808);
  int checks = 0;
  auto check = [&](bool ok, const std::string& what) {
    ++checks;
    o.require(ok, what);
  };

  // EM monotonicity over the corpus
  std::vector<std::pair<std::string, CMatrix>> corpus;
  for (int i = 0; i < 4; ++i) {
    const Gmm g = oracle::random_gmm(rng, 3, 3 + i, 3.0);
    corpus.emplace_back("gmm" + std::to_string(i), generate_gmm_dataset(10 + i, SyntheticGmmPrior(g, 0), 1500).samples);
  }
  ThreeGppConfig tg;
  tg.n_rx = 8;
  tg.n_clusters = 3;
  corpus.emplace_back("3gpp_simo", generate_3gpp_dataset(11, tg, 2000).samples);
  tg.n_rx = 4;
  tg.n_tx = 2;
  corpus.emplace_back("3gpp_mimo", generate_3gpp_dataset(12, tg, 2000).samples);
  WidebandConfig wb;
  wb.n_c = 6;
  wb.n_t = 3;
  corpus.emplace_back("wideband", generate_wideband_dataset(13, wb, 2000).samples);
  CMatrix dup(3, 90);
  for (Eigen::Index i = 0; i < 90; ++i) dup.col(i) = CVector::Constant(3, cplx(i % 4, -(i % 2)));
  corpus.emplace_back("duplicates", dup);
  for (const auto& [name, data] : corpus) {
    for (CovStructure s : {CovStructure::full, CovStructure::circulant}) {
      for (Eigen::Index k : {1, 3, 6}) {
        const FitResult fit = em_fit(data, k, s);
        const auto& tr = fit.report.loglik_trace;
        bool mono = true;
        for (std::size_t i = 1; i < tr.size(); ++i) {
          const bool reseed = std::find(fit.report.reseeded_at.begin(), fit.report.reseeded_at.end(),
                                        static_cast<int>(i)) != fit.report.reseeded_at.end();
          if (!reseed && tr[i] < tr[i - 1] - 1e-8) mono = false;
        }
        check(mono, "EM monotone on " + name);
        // Hermitian PSD preservation
        bool psd = true;
        for (const auto& c : fit.gmm.covs)
          psd = psd && hermitian_defect(c) < 1e-10 && min_eig_ratio(c) > -1e-10;
        check(psd, "fitted covariances Hermitian PSD on " + name);
      }
    }
  }
  for (int i = 0; i < 10; ++i) {
    ClusterParams p = draw_cluster_params(rng, 1 + i % 3, (0.5 + i) * kPi / 180.0);
    const CMatrix c = spatial_covariance(p, 8 + i).matrix;
    check(hermitian_defect(c) < 1e-12 && min_eig_ratio(c) > -1e-10, "spatial covariance Hermitian PSD");
  }

  // responsibilities: normalization and permutation equivariance
  for (int i = 0; i < 50; ++i) {
    const Eigen::Index k = 2 + i % 5, n = 1 + i % 6;
    const Gmm g = oracle::random_gmm(rng, k, n, 2.0);
    const CVector x = rng.complex_normal_vector(n, 4.0);
    const RVector r = responsibilities(x, g);
    check(std::abs(r.sum() - 1.0) < 1e-12 && (r.array() >= 0).all(), "responsibilities normalized");
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(k));
    std::iota(perm.begin(), perm.end(), 0);
    std::rotate(perm.begin(), perm.begin() + 1, perm.end());
    Gmm q = g;
    for (Eigen::Index j = 0; j < k; ++j) {
      q.weights(j) = g.weights(perm[j]);
      q.means[j] = g.means[perm[j]];
      q.covs[j] = g.covs[perm[j]];
    }
    const RVector rq = responsibilities(x, q);
    double dev = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) dev = std::max(dev, std::abs(rq(j) - r(perm[j])));
    check(dev < 1e-12, "responsibilities permutation equivariant");
  }

  // LS residual orthogonality
  for (int i = 0; i < 20; ++i) {
    const ObservationModel model = mimo_model(2 + i % 4, 2, 2 + i % 3, 0.1);
    const CVector y = rng.complex_normal_vector(model.m(), 3.0);
    const CVector h = ls_estimate(model, y);
    check((model.a().adjoint() * (y - model.a() * h)).norm() < 1e-8, "LS residual orthogonal");
  }

  // OMP genie order optimality against every order
  for (int i = 0; i < 30; ++i) {
    const ObservationModel model = i % 2 ? simo_model(6, 0.2) : mimo_model(3, 2, 2, 0.2);
    const Dictionary dict = build_dictionary(model, i % 3 ? 2 : 4);
    const CVector h = rng.complex_normal_vector(model.n());
    const CVector y = observe(rng, model, h);
    const Omp omp(model, dict);
    const Omp::Path path = omp.run(y);
    const double best = (omp.genie(y, h) - h).norm();
    bool ok = !path.estimates.empty();
    for (const auto& e : path.estimates) ok = ok && best <= (e - h).norm();
    check(ok, "OMP genie order optimal");
  }

  // noiseless limit, A = I
  for (int i = 0; i < 20; ++i) {
    const Eigen::Index n = 2 + i % 6;
    const Gmm g = oracle::random_gmm(rng, 1 + i % 4, n);
    const CVector y = rng.complex_normal_vector(n, 2.0);
    check(oracle::rel_err(GmmEstimator::precompute(g, simo_model(n, 1e-12)).estimate(y), y) < 1e-9,
          "sigma2 -> 0 gives y");
    std::vector<RVector> spectra;
    std::vector<CVector> means;
    for (Eigen::Index j = 0; j < g.components(); ++j) {
      spectra.emplace_back(RVector::Constant(n, 0.5 + j));
      means.push_back(g.means[j]);
    }
    const Gmm c = Gmm::circulant(g.weights, means, spectra);
    check(oracle::rel_err(GmmEstimator::precompute(c, simo_model(n, 0.0)).estimate_circulant_fast(y), y) < 1e-12,
          "noiseless circulant fast path gives y");
  }
  o.detail << checks << " property checks";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::vector<int> selected;
  app.add_option("--criterion", selected, "criteria to run (default all)")->check(CLI::Range(1, 8));
  CLI11_PARSE(app, argc, argv);
  if (selected.empty()) selected = {1, 2, 3, 4, 5, 6, 7, 8};

  const std::vector<std::function<Outcome()>> criteria = {
      criterion1, criterion2, criterion3, criterion4,
      criterion5, criterion6, criterion7, criterion8};
  bool all = true;
  for (int c : selected) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = criteria[static_cast<std::size_t>(c - 1)]();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "exception: " << e.what();
    }
    std::printf("criterion %d %s (%.1f s): %s\n", c, o.pass ? "PASS" : "FAIL", seconds_since(t0),
                o.detail.str().c_str());
    std::fflush(stdout);
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
