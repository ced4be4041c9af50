#include "gmmest/baselines.hpp"
#include "gmmest/channel_models.hpp"
#include "gmmest/estimators.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <cstring>

using namespace gmmest;

namespace {

Gmm random_circulant(Rng& rng, Eigen::Index k, Eigen::Index n) {
  std::vector<CVector> means;
  std::vector<RVector> spectra;
  for (Eigen::Index i = 0; i < k; ++i) {
    means.push_back(rng.complex_normal_vector(n));
    RVector c(n);
    for (Eigen::Index j = 0; j < n; ++j) c(j) = 0.05 + 2.0 * rng.uniform();
    spectra.push_back(c);
  }
  return Gmm::circulant(oracle::random_weights(rng, k), means, spectra);
}

CMatrix sigma_eye(double s2, Eigen::Index m) { return s2 * CMatrix::Identity(m, m); }

}  // namespace

TEST_CASE("scalar lmmse filter") {
  const double c = 2.5, s2 = 0.7;
  const Gmm g = Gmm::full(RVector::Ones(1), {CVector::Zero(4)}, {c * CMatrix::Identity(4, 4)});
  const GmmEstimator est = GmmEstimator::precompute(g, simo_model(4, s2));
  const CMatrix want = (c / (c + s2)) * CMatrix::Identity(4, 4);
  CHECK((est.filter(0) - want).cwiseAbs().maxCoeff() < 1e-12);
  Rng rng(1);
  const CVector y = rng.complex_normal_vector(4);
  CHECK(oracle::rel_err(est.component_lmmse(y, 0), (c / (c + s2)) * y) < 1e-11);
  CHECK(oracle::rel_err(est.estimate(y), (c / (c + s2)) * y) < 1e-11);
}

TEST_CASE("filters satisfy W S = C A^H") {
  Rng rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const Gmm g = oracle::random_gmm(rng, 3, 6);
    const ObservationModel model = trial % 2 == 0 ? mimo_model(3, 2, 1, 0.3) : simo_model(6, 0.1);
    const GmmEstimator est = GmmEstimator::precompute(g, model);
    for (Eigen::Index k = 0; k < 3; ++k) {
      const CMatrix& a = model.a();
      const CMatrix s = a * g.covs[k] * a.adjoint() + sigma_eye(model.sigma2(), model.m());
      const CMatrix lhs = est.filter(k) * s;
      const CMatrix rhs = g.covs[k] * a.adjoint();
      CHECK((lhs - rhs).norm() / rhs.norm() < 1e-8);
      const CMatrix& l = est.observation_factor(k).lower();
      CHECK((l * l.adjoint() - s).norm() / s.norm() < 1e-10);
    }
  }
}

TEST_CASE("precompute at another noise level leaves the model alone") {
  Rng rng(3);
  auto g = std::make_shared<const Gmm>(oracle::random_gmm(rng, 2, 4));
  std::stringstream before;
  write_gmm(before, *g);
  const GmmEstimator a = GmmEstimator::precompute(g, simo_model(4, 1.0));
  const GmmEstimator b = GmmEstimator::precompute(g, simo_model(4, 0.01));
  CHECK(a.shared_gmm() == g);
  CHECK(b.shared_gmm() == g);
  std::stringstream after;
  write_gmm(after, *g);
  CHECK(before.str() == after.str());
  CHECK((a.filter(0) - b.filter(0)).norm() > 1e-3);
}

TEST_CASE("component lmmse") {
  Rng rng(4);
  SUBCASE("vanishing covariance returns the mean") {
    const CVector mu = rng.complex_normal_vector(3);
    const Gmm g = Gmm::full(RVector::Ones(1), {mu}, {1e-12 * CMatrix::Identity(3, 3)});
    const GmmEstimator est = GmmEstimator::precompute(g, simo_model(3, 1.0));
    CHECK(oracle::rel_err(est.component_lmmse(rng.complex_normal_vector(3, 10.0), 0), mu) < 1e-9);
  }
  SUBCASE("dense formula") {
    for (int trial = 0; trial < 20; ++trial) {
      auto g = std::make_shared<const Gmm>(oracle::random_gmm(rng, 2, 4));
      const CMatrix a = oracle::random_matrix(rng, 3, 4);
      const CMatrix noise = oracle::random_pd(rng, 3, 0.1);
      const GmmEstimator est = GmmEstimator::precompute(g, a, noise);
      const CVector y = rng.complex_normal_vector(3, 2.0);
      for (Eigen::Index k = 0; k < 2; ++k) {
        const CVector want = oracle::lmmse(g->covs[k], g->means[k], a, noise, y);
        CHECK(oracle::rel_err(est.component_lmmse(y, k), want) < 1e-10);
      }
    }
  }
  SUBCASE("index checks") {
    const GmmEstimator est =
        GmmEstimator::precompute(oracle::random_gmm(rng, 2, 2), simo_model(2, 1.0));
    CHECK_THROWS_AS(est.component_lmmse(CVector::Zero(2), 2), std::out_of_range);
    CHECK_THROWS_AS(est.filter(-1), std::out_of_range);
  }
}

TEST_CASE("factorization failures name the component") {
  const Gmm g = Gmm::full(RVector::Constant(2, 0.5), {CVector::Zero(2), CVector::Zero(2)},
                          {CMatrix::Identity(2, 2), -CMatrix::Identity(2, 2)});
  try {
    (void)GmmEstimator::precompute(g, simo_model(2, 0.0));
    FAIL("expected a NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find('1') != std::string::npos);
  }
}

TEST_CASE("observation responsibilities") {
  Rng rng(5);
  SUBCASE("single component") {
    const GmmEstimator est =
        GmmEstimator::precompute(oracle::random_gmm(rng, 1, 3), simo_model(3, 0.5));
    const RVector r = est.observation_responsibilities(rng.complex_normal_vector(3));
    REQUIRE(r.size() == 1);
    CHECK(r(0) == 1.0);
  }
  SUBCASE("huge noise returns the prior weights") {
    const Gmm g = oracle::random_gmm(rng, 4, 3);
    const GmmEstimator est = GmmEstimator::precompute(g, simo_model(3, 1e8));
    for (int i = 0; i < 10; ++i) {
      const CVector h = rng.complex_normal_vector(3);
      const CVector y = h + rng.complex_normal_vector(3, 1e8);
      CHECK((est.observation_responsibilities(y) - g.weights).cwiseAbs().maxCoeff() < 1e-3);
    }
  }
  SUBCASE("matches the explicit observation-space mixture") {
    for (int trial = 0; trial < 10; ++trial) {
      const Gmm g = oracle::random_gmm(rng, 3, 4);
      const ObservationModel model = mimo_model(2, 2, 1, 0.2);
      const CMatrix& a = model.a();
      std::vector<CVector> means;
      std::vector<CMatrix> covs;
      for (Eigen::Index k = 0; k < 3; ++k) {
        means.push_back(a * g.means[k]);
        covs.push_back(a * g.covs[k] * a.adjoint() + sigma_eye(0.2, 2));
      }
      const Gmm obs = Gmm::full(g.weights, means, covs);
      const GmmEstimator est = GmmEstimator::precompute(g, model);
      const CVector y = rng.complex_normal_vector(2, 3.0);
      const RVector r = est.observation_responsibilities(y);
      CHECK(std::abs(r.sum() - 1.0) < 1e-12);
      CHECK((r - responsibilities(y, obs)).cwiseAbs().maxCoeff() < 1e-10);
      CHECK(est.observation_logpdf(y) == doctest::Approx(gmm_logpdf(y, obs)).epsilon(1e-10));
    }
  }
}

TEST_CASE("estimate is the responsibility-weighted sum of component estimates") {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const Gmm g = oracle::random_gmm(rng, 4, 5, 3.0);
    const ObservationModel model = trial % 2 ? simo_model(5, 0.4) : simo_model(5, 2.0);
    const GmmEstimator est = GmmEstimator::precompute(g, model);
    const CVector y = rng.complex_normal_vector(5, 4.0);
    // independent recomputation from the dense oracles
    RVector p(4);
    for (Eigen::Index k = 0; k < 4; ++k)
      p(k) = g.weights(k) * oracle::gaussian_pdf(y, g.means[k], g.covs[k] + sigma_eye(model.sigma2(), 5));
    p /= p.sum();
    CVector want = CVector::Zero(5);
    for (Eigen::Index k = 0; k < 4; ++k)
      want += p(k) * oracle::lmmse(g.covs[k], g.means[k], model.a(), sigma_eye(model.sigma2(), 5), y);
    CHECK(oracle::rel_err(est.estimate(y), want) < 1e-10);

    const RVector r = est.observation_responsibilities(y);
    CVector sum = CVector::Zero(5);
    for (Eigen::Index k = 0; k < 4; ++k) sum += r(k) * est.component_lmmse(y, k);
    CHECK(oracle::rel_err(est.estimate(y), sum) < 1e-12);
  }
}

TEST_CASE("scalar estimates lie in the hull of the component estimates") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    RVector w = oracle::random_weights(rng, 3);
    std::vector<CVector> means;
    std::vector<CMatrix> covs;
    for (int k = 0; k < 3; ++k) {
      means.push_back(CVector::Constant(1, cplx(3.0 * rng.normal(), 0.0)));
      covs.push_back(CMatrix::Constant(1, 1, 0.1 + rng.uniform()));
    }
    const Gmm g = Gmm::full(w, means, covs);
    const GmmEstimator est = GmmEstimator::precompute(g, simo_model(1, 0.5));
    const CVector y = CVector::Constant(1, cplx(4.0 * rng.normal(), 0.0));
    double lo = 1e300, hi = -1e300;
    for (Eigen::Index k = 0; k < 3; ++k) {
      const double v = est.component_lmmse(y, k)(0).real();
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    const double got = est.estimate(y)(0).real();
    CHECK(got >= lo - 1e-12);
    CHECK(got <= hi + 1e-12);
  }
}

TEST_CASE("estimate limits") {
  Rng rng(8);
  const Gmm g = oracle::random_gmm(rng, 3, 4);
  SUBCASE("one component is plain lmmse") {
    const Gmm one = oracle::random_gmm(rng, 1, 4);
    const GmmEstimator est = GmmEstimator::precompute(one, simo_model(4, 0.3));
    const CVector y = rng.complex_normal_vector(4);
    CHECK(oracle::rel_err(est.estimate(y), est.component_lmmse(y, 0)) < 1e-14);
  }
  SUBCASE("vanishing noise returns y") {
    const GmmEstimator est = GmmEstimator::precompute(g, simo_model(4, 1e-12));
    const CVector y = rng.complex_normal_vector(4);
    CHECK(oracle::rel_err(est.estimate(y), y) < 1e-9);
  }
  SUBCASE("noise sequence converges to y") {
    const CVector y = rng.complex_normal_vector(4);
    double prev = 1e300;
    for (double s2 : {1e-2, 1e-4, 1e-6, 1e-8, 1e-10}) {
      const double err =
          oracle::rel_err(GmmEstimator::precompute(g, simo_model(4, s2)).estimate(y), y);
      CHECK(err < prev);
      prev = err;
    }
    CHECK(prev < 1e-8);
  }
  SUBCASE("batch matches single") {
    const GmmEstimator est = GmmEstimator::precompute(g, simo_model(4, 0.2));
    const CMatrix ys = oracle::random_matrix(rng, 4, 1100);
    const CMatrix batch = est.estimate_batch(ys);
    for (Eigen::Index t = 0; t < ys.cols(); t += 37)
      CHECK(oracle::rel_err(batch.col(t), est.estimate(CVector(ys.col(t)))) < 1e-12);
  }
}

TEST_CASE("monte carlo conditional mean") {
  Rng rng(9);
  RVector w(2);
  w << 0.35, 0.65;
  CMatrix c1(2, 2), c2(2, 2);
  c1 << 1.0, cplx(0.5, 0.2), cplx(0.5, -0.2), 0.8;
  c2 << 0.6, cplx(-0.2, 0.1), cplx(-0.2, -0.1), 1.2;
  CVector m1(2), m2(2);
  m1 << cplx(1.5, 0.5), cplx(-1.0, 0.0);
  m2 << cplx(-1.0, -0.5), cplx(1.0, 1.0);
  const Gmm g = Gmm::full(w, {m1, m2}, {c1, c2});
  const double s2 = 0.5;
  const GmmEstimator est = GmmEstimator::precompute(g, simo_model(2, s2));

  const SyntheticGmmPrior prior(g, 0);
  const Eigen::Index count = 1000000;
  CMatrix hs(2, count);
  for (Eigen::Index i = 0; i < count; ++i) hs.col(i) = draw_synthetic_gmm_sample(rng, prior);

  for (int trial = 0; trial < 20; ++trial) {
    const CVector y = draw_synthetic_gmm_sample(rng, prior) + rng.complex_normal_vector(2, s2);
    // E[h | y] = sum_i h_i p(y | h_i) / sum_i p(y | h_i) over prior draws
    const RVector logw = -(hs.colwise() - y).colwise().squaredNorm().transpose() / s2;
    const double top = logw.maxCoeff();
    const RVector wts = (logw.array() - top).exp();
    const CVector mc = hs * wts.cast<cplx>() / wts.sum();
    CHECK(oracle::rel_err(est.estimate(y), mc) < 1e-2);
  }
}

TEST_CASE("circulant fast path") {
  Rng rng(10);
  SUBCASE("filter arithmetic") {
    const double s2 = 0.8;
    const Gmm g = Gmm::circulant(RVector::Ones(1), {CVector::Zero(8)}, {RVector::Constant(8, s2)});
    const GmmEstimator est = GmmEstimator::precompute(g, simo_model(8, s2));
    REQUIRE(est.has_fast_path());
    CHECK((est.fast_filter(0).array() - 0.5).abs().maxCoeff() < 1e-15);
  }
  SUBCASE("noiseless") {
    const Gmm g = random_circulant(rng, 3, 8);
    const GmmEstimator est = GmmEstimator::precompute(g, simo_model(8, 0.0));
    for (Eigen::Index k = 0; k < 3; ++k)
      CHECK((est.fast_filter(k).array() - 1.0).abs().maxCoeff() == 0.0);
    const CVector y = rng.complex_normal_vector(8);
    CHECK(oracle::rel_err(est.estimate_circulant_fast(y), y) < 1e-12);
  }
  SUBCASE("agrees with the dense path") {
    for (Eigen::Index n : {7, 16, 64}) {
      const Gmm g = random_circulant(rng, 5, n);
      for (double s2 : {0.01, 0.5, 5.0}) {
        const GmmEstimator est = GmmEstimator::precompute(g, simo_model(n, s2));
        REQUIRE(est.has_fast_path());
        for (int t = 0; t < 10; ++t) {
          const CVector y = rng.complex_normal_vector(n, 3.0);
          CHECK(oracle::rel_err(est.estimate_circulant_fast(y), est.estimate(y)) < 1e-8);
        }
      }
    }
  }
  SUBCASE("fast path only for circulant identity models") {
    const GmmEstimator full = GmmEstimator::precompute(oracle::random_gmm(rng, 2, 4), simo_model(4, 1.0));
    CHECK_FALSE(full.has_fast_path());
    CHECK_THROWS_AS(full.estimate_circulant_fast(CVector::Zero(4)), UnsupportedError);
    CHECK_THROWS_AS(full.fast_filter(0), UnsupportedError);
    auto circ = std::make_shared<const Gmm>(random_circulant(rng, 2, 4));
    const GmmEstimator general =
        GmmEstimator::precompute(circ, CMatrix::Identity(4, 4), sigma_eye(0.5, 4));
    CHECK_FALSE(general.has_fast_path());
  }
}

TEST_CASE("exact conditional mean oracle") {
  Rng rng(11);
  SUBCASE("one true component is the true lmmse") {
    const Gmm g = Gmm::full(RVector::Ones(1), {CVector::Zero(3)}, {oracle::random_pd(rng, 3)});
    const ObservationModel model = simo_model(3, 0.4);
    const ExactCmeOracle orc(SyntheticGmmPrior(g, 0), model);
    const CVector y = rng.complex_normal_vector(3);
    CHECK(oracle::rel_err(orc.exact_cme(y),
                          oracle::lmmse(g.covs[0], g.means[0], model.a(), sigma_eye(0.4, 3), y)) <
          1e-10);
  }
  SUBCASE("same as the estimator built from the prior") {
    const Gmm g = oracle::random_gmm(rng, 4, 3);
    const ObservationModel model = simo_model(3, 0.4);
    const ExactCmeOracle orc(g, model);
    const GmmEstimator est = GmmEstimator::precompute(g, model);
    const CVector y = rng.complex_normal_vector(3);
    CHECK((orc.exact_cme(y) - est.estimate(y)).norm() == 0.0);
  }
  SUBCASE("needs an invertible square A") {
    const Gmm g = oracle::random_gmm(rng, 2, 4);
    CHECK_THROWS_AS(ExactCmeOracle(g, mimo_model(2, 2, 1, 0.1)), UnsupportedError);
    CHECK_NOTHROW(ExactCmeOracle(g, mimo_model(2, 2, 2, 0.1)));
    CHECK(condition_number(CMatrix::Identity(3, 3)) == doctest::Approx(1.0));
  }
}

TEST_CASE("true prior estimate beats the alternatives") {
  Rng rng(12);
  const Gmm g = oracle::random_gmm(rng, 3, 4, 4.0);
  const SyntheticGmmPrior prior(g, 0);
  const ObservationModel model = simo_model(4, 1.0);
  const GmmEstimator est = GmmEstimator::precompute(g, model);
  const Eigen::Index trials = 10000;
  // 0: true prior, 1: LS, 2..4: single-component lmmse
  RMatrix err(5, trials);
  for (Eigen::Index t = 0; t < trials; ++t) {
    const CVector h = draw_synthetic_gmm_sample(rng, prior);
    const CVector y = observe(rng, model, h);
    err(0, t) = (est.estimate(y) - h).squaredNorm();
    err(1, t) = (y - h).squaredNorm();
    for (Eigen::Index k = 0; k < 3; ++k) err(2 + k, t) = (est.component_lmmse(y, k) - h).squaredNorm();
  }
  for (Eigen::Index j = 1; j < 5; ++j) {
    const RVector d = (err.row(j) - err.row(0)).transpose();
    const double mean = d.mean();
    const double se = std::sqrt((d.array() - mean).square().sum() / (trials - 1.0) / trials);
    CHECK(mean > 2.0 * se);
  }
}

TEST_CASE("estimate time grows linearly in K") {
  Rng rng(13);
  const Eigen::Index n = 48;
  const ObservationModel model = simo_model(n, 0.1);
  auto median_time = [&](Eigen::Index k) {
    std::vector<CVector> means;
    std::vector<CMatrix> covs;
    for (Eigen::Index i = 0; i < k; ++i) {
      means.push_back(CVector::Zero(n));
      covs.push_back(CMatrix::Identity(n, n) * (1.0 + 0.01 * static_cast<double>(i)));
    }
    const GmmEstimator est =
        GmmEstimator::precompute(Gmm::full(RVector::Constant(k, 1.0 / k), means, covs), model);
    const CVector y = rng.complex_normal_vector(n);
    std::vector<double> times;
    CVector sink = CVector::Zero(n);
    for (int rep = 0; rep < 41; ++rep) {
      const auto t0 = std::chrono::steady_clock::now();
      for (int i = 0; i < 20; ++i) sink += est.estimate(y);
      const auto t1 = std::chrono::steady_clock::now();
      times.push_back(std::chrono::duration<double>(t1 - t0).count());
    }
    CHECK(sink.allFinite());
    std::nth_element(times.begin(), times.begin() + 20, times.end());
    return times[20];
  };
  const double ratio = median_time(32) / median_time(16);
  MESSAGE("time ratio K=32 / K=16: " << ratio);
  CHECK(ratio > 2.0 * 0.7);
  CHECK(ratio < 2.0 * 1.3);
}
