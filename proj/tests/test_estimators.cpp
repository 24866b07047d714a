#include <doctest.h>

#include <cmath>

#include "pairlot/dgp.hpp"
#include "pairlot/estimators.hpp"
#include "pairlot/oracle.hpp"
#include "test_support.hpp"

using namespace pairlot;

TEST_CASE("toy dataset: pairwise contrast enumerates to 1.75") {
  const TrialDataset d = testing::toy4_dataset();
  const EstimateResult r = plot_unadj_pairwise(d, 2, 0.05, 0);
  CHECK(r.point == doctest::Approx(1.75).epsilon(1e-12));
  CHECK_THROWS_AS(plot_unadj_pairwise(d, 3, 0.05, 0), std::invalid_argument);
}

TEST_CASE("toy dataset: fast estimator matches the pairwise route to 1e-10") {
  const TrialDataset d = testing::toy4_dataset();
  const EstimateResult fast = plot_unadj_fast(d, 2);
  CHECK(std::fabs(fast.point - 1.75) < 1e-10);
  CHECK(fast.se > 0.0);
}

TEST_CASE("all T = tau at t = tau reduces to the difference in means") {
  TrialDataset d = testing::toy4_dataset();
  d.ice_time = {2, 2, 2, 2};
  d.outcomes << 1, 2, 3, 5, 6, 7, 2, 4, 1, 0, 1, 2;
  const double expect = (3.0 + 7.0) / 2 - (1.0 + 2.0) / 2;
  CHECK(plot_unadj_pairwise(d, 2, 0.05, 0).point == doctest::Approx(expect).epsilon(1e-12));
  CHECK(plot_unadj_fast(d, 2).point == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("fast and pairwise agree on random datasets to 1e-10") {
  Xoshiro256pp rng(97);
  for (int rep = 0; rep < 50; ++rep) {
    const TrialDataset d = testing::random_dataset(rng);
    const int t = rng.uniform_int(d.tau + 1);
    const double fast = plot_unadj_fast(d, t).point;
    const double pair = plot_unadj_pairwise(d, t, 0.05, 0).point;
    CHECK(std::fabs(fast - pair) < 1e-10);
  }
}

TEST_CASE("reduction chain: adjusted and cplot equal fast when L is empty") {
  Xoshiro256pp rng(101);
  for (int rep = 0; rep < 25; ++rep) {
    const TrialDataset d = testing::random_dataset(rng, 150, 5, rep % 2 ? 0 : 2);
    const TrialDataset blind = strip_covariates(d);
    NuisanceOptions opts;
    opts.folds = 1;
    const NuisanceFit marginal = fit_nuisance(blind, opts);
    const int t = rng.uniform_int(d.tau + 1);
    const double fast = plot_unadj_fast(d, t).point;
    const double adj = plot_adjusted(blind, marginal, t).point;
    const double cond = cplot(blind, marginal, t).point;
    CHECK(std::fabs(adj - fast) < 1e-10);
    CHECK(std::fabs(cond - fast) < 1e-10);
  }
}

TEST_CASE("influence contributions average to the point estimate") {
  Xoshiro256pp rng(55);
  const TrialDataset d = testing::random_dataset(rng, 120, 5, 2);
  NuisanceOptions opts;
  opts.folds = 2;
  opts.seed = 7;
  opts.learners.tree.n_trees = 8;
  const NuisanceFit fit = fit_nuisance(d, opts);
  for (const EstimateResult& r :
       {plot_adjusted(d, fit, d.tau), cplot(d, fit, d.tau),
        ratio_estimand(d, fit, d.tau, RatioKind::PLOT)}) {
    REQUIRE(!r.if_contributions.empty());
    CHECK(std::fabs(mean(r.if_contributions) - r.point) < 1e-10);
    CHECK(r.se == doctest::Approx(sample_sd(r.if_contributions) / std::sqrt(d.n)).epsilon(1e-12));
  }
}

TEST_CASE("toy dataset ratio: treated 3.75, control 2.0, ratio 1.875") {
  const TrialDataset d = testing::toy4_dataset();
  NuisanceOptions opts;
  opts.folds = 1;
  const NuisanceFit marginal = fit_nuisance(d, opts);
  const EstimateResult r = ratio_estimand(d, marginal, 2, RatioKind::PLOT);
  CHECK(r.point == doctest::Approx(1.875).epsilon(1e-10));
  const EstimateResult rc = ratio_estimand(d, marginal, 2, RatioKind::CPLOT);
  CHECK(rc.point == doctest::Approx(1.875).epsilon(1e-10));
}

TEST_CASE("ratio guards a near-zero denominator") {
  TrialDataset d = testing::toy4_dataset();
  d.outcomes(2, 0) = 0.0;
  d.outcomes(2, 1) = 0.0;
  d.outcomes(3, 0) = 0.0;
  d.outcomes(3, 1) = 0.0;
  d.outcomes(3, 2) = 0.0;  // all control outcomes zero
  NuisanceOptions opts;
  opts.folds = 1;
  const NuisanceFit marginal = fit_nuisance(d, opts);
  CHECK_THROWS_WITH_AS(ratio_estimand(d, marginal, 2, RatioKind::PLOT),
                       doctest::Contains("denominator below threshold"), std::runtime_error);
}

TEST_CASE("identical-arm null ratio is one in expectation") {
  DgpConfig cfg;
  cfg.setting = Setting::example;
  cfg.n = 4000;
  cfg.seed = 12;
  cfg.example = {1.0, 0.0, 1.0, 0.0, 1.0};
  cfg.null_ice = true;
  // shift outcomes so the denominator is safely away from zero
  auto [data, panel] = generate(cfg);
  for (int i = 0; i < data.n; ++i)
    for (int t = 0; t <= data.tau; ++t)
      if (data.observed(i, t)) data.outcomes(i, t) += 5.0;
  NuisanceOptions opts;
  opts.folds = 1;
  const NuisanceFit marginal = fit_nuisance(strip_covariates(data), opts);
  const EstimateResult r =
      ratio_estimand(strip_covariates(data), marginal, data.tau, RatioKind::PLOT);
  CHECK(std::fabs(r.point - 1.0) < 3.0 * r.se + 0.02);
}

TEST_CASE("adding a constant to every outcome leaves additive estimates unchanged") {
  DgpConfig cfg;
  cfg.setting = Setting::example;
  cfg.n = 150;
  cfg.seed = 9;
  cfg.example = {1.0, 1.0, 1.0, 0.0, 1.0};
  const auto [data, panel] = generate(cfg);
  TrialDataset shifted = data;
  for (int i = 0; i < data.n; ++i)
    for (int t = 0; t <= data.tau; ++t)
      if (data.observed(i, t)) shifted.outcomes(i, t) += 17.5;

  NuisanceOptions opts;
  opts.folds = 3;
  opts.seed = 31;
  opts.learners.tree.n_trees = 10;
  const NuisanceFit f1 = fit_nuisance(data, opts);
  const NuisanceFit f2 = fit_nuisance(shifted, opts);

  CHECK(std::fabs(plot_unadj_fast(data, data.tau).point -
                  plot_unadj_fast(shifted, data.tau).point) < 1e-10);
  CHECK(std::fabs(plot_adjusted(data, f1, data.tau).point -
                  plot_adjusted(shifted, f2, data.tau).point) < 1e-10);
  CHECK(std::fabs(cplot(data, f1, data.tau).point - cplot(shifted, f2, data.tau).point) < 1e-10);
}

TEST_CASE("the horizon cap is inactive above the largest ICE time") {
  Xoshiro256pp rng(77);
  TrialDataset d = testing::random_dataset(rng, 100, 5, 0);
  for (auto& t_ice : d.ice_time) t_ice = std::min(t_ice, 2);
  for (int i = 0; i < d.n; ++i)
    for (int t = 0; t <= d.tau; ++t)
      if (t > d.ice_time[static_cast<std::size_t>(i)])
        d.outcomes(i, t) = std::numeric_limits<double>::quiet_NaN();
  REQUIRE(validate(d).ok());
  const double at3 = plot_unadj_fast(d, 3).point;
  const double at4 = plot_unadj_fast(d, 4).point;
  const double at5 = plot_unadj_fast(d, 5).point;
  CHECK(std::fabs(at3 - at4) < 1e-12);
  CHECK(std::fabs(at4 - at5) < 1e-12);
}

TEST_CASE("wald test") {
  EstimateResult r;
  r.point = 0.0;
  r.se = 0.5;
  const WaldTest w0 = wald_test(r, 0.0);
  CHECK(w0.z == doctest::Approx(0.0));
  CHECK(w0.p_value == doctest::Approx(1.0));
  r.point = 1.96 * r.se;
  CHECK(wald_test(r, 0.0).p_value == doctest::Approx(0.05).epsilon(1e-3));
  r.se = 0.0;
  CHECK_THROWS_AS(wald_test(r, 0.0), std::invalid_argument);
}

TEST_CASE("bootstrap SE broadly agrees with the IF-based SE") {
  Xoshiro256pp rng(202);
  const TrialDataset d = testing::random_dataset(rng, 180, 4, 0);
  const EstimateResult pair = plot_unadj_pairwise(d, d.tau, 0.05, 300, 4);
  const EstimateResult fast = plot_unadj_fast(d, d.tau);
  CHECK(pair.se > 0.3 * fast.se);
  CHECK(pair.se < 3.0 * fast.se);
  CHECK(pair.ci_lo_percentile < pair.ci_hi_percentile);
}

TEST_CASE("adjusted estimator with oracle nuisances is unbiased on the null example") {
  DgpConfig base;
  base.setting = Setting::example;
  base.n = 250;
  base.example = {1.0, 0.0, 0.0, 0.0, 1.0};
  const int reps = 60;
  double acc = 0.0, acc2 = 0.0;
  for (int k = 0; k < reps; ++k) {
    DgpConfig cfg = base;
    cfg.seed = 5000 + static_cast<std::uint64_t>(k);
    const auto [data, panel] = generate(cfg);
    const NuisanceFit oracle = oracle_nuisance(cfg, data);
    const double est = plot_adjusted(data, oracle, data.tau).point;
    acc += est;
    acc2 += est * est;
  }
  const double mean_est = acc / reps;
  const double sd_est = std::sqrt((acc2 - reps * mean_est * mean_est) / (reps - 1));
  CHECK(std::fabs(mean_est) < 3.0 * sd_est / std::sqrt(static_cast<double>(reps)));
}

TEST_CASE("results csv row shape") {
  const TrialDataset d = testing::toy4_dataset();
  const EstimateResult r = plot_unadj_fast(d, 2);
  const std::string row = results_csv_row(r);
  CHECK(row.find("PLOT_unadj,2,1.75") == 0);
  CHECK(results_csv_header() == "estimand_id,t,point,se,ci_lo,ci_hi,n_used,flags");
}
