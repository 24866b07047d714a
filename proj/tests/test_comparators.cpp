#include <doctest.h>

#include <cmath>

#include "pairlot/comparators.hpp"
#include "pairlot/dgp.hpp"
#include "test_support.hpp"

using namespace pairlot;

TEST_CASE("locf on the toy dataset is 1.0") {
  const EstimateResult r = locf(testing::toy4_dataset());
  CHECK(r.point == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.se > 0.0);
}

TEST_CASE("locf with everyone at tau is the plain difference in means") {
  TrialDataset d = testing::toy4_dataset();
  d.ice_time = {2, 2, 2, 2};
  d.outcomes << 1, 2, 3, 5, 6, 7, 2, 4, 1, 0, 1, 2;
  CHECK(locf(d).point == doctest::Approx((3.0 + 7.0) / 2 - (1.0 + 2.0) / 2));
}

TEST_CASE("survivors_only requires survivors in both arms") {
  const TrialDataset d = testing::toy4_dataset();  // one survivor per arm only
  CHECK_THROWS_AS(survivors_only(d), std::runtime_error);
}

TEST_CASE("sace and ipcw preconditions") {
  const TrialDataset d = testing::toy4_dataset();
  CHECK_THROWS_AS(sace(d, 1, 0.05, 0), std::invalid_argument);
  CHECK_THROWS_AS(ipcw(d, 1), std::invalid_argument);
}

namespace {

// arm-independent survival, constant baseline outcome: weights are constant,
// so sace/ipcw collapse onto the survivor contrast
TrialDataset weight_free_dataset() {
  Xoshiro256pp rng(5150);
  const int n = 300, tau = 3;
  TrialDataset d;
  d.n = n;
  d.tau = tau;
  d.d = 0;
  d.covariates.resize(n, 0);
  d.arm.resize(static_cast<std::size_t>(n));
  d.ice_time.resize(static_cast<std::size_t>(n));
  d.outcomes.resize(n, tau + 1);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (int i = 0; i < n; ++i) {
    d.arm[static_cast<std::size_t>(i)] = i % 2;
    const int t_ice = rng.bernoulli(0.6) ? tau : rng.uniform_int(tau);
    d.ice_time[static_cast<std::size_t>(i)] = t_ice;
    d.outcomes(i, 0) = 1.0;  // constant baseline: the Y0 column drops out
    for (int t = 1; t <= tau; ++t)
      d.outcomes(i, t) = t <= t_ice ? rng.normal() + 0.4 * d.arm[static_cast<std::size_t>(i)] : nan;
  }
  return d;
}

}  // namespace

TEST_CASE("with no usable covariates sace and ipcw coincide with survivors_only") {
  const TrialDataset d = weight_free_dataset();
  const double surv = survivors_only(d).point;
  const double sace_pt = sace(d, d.tau, 0.05, 0).point;
  const double ipcw_pt = ipcw(d, d.tau).point;
  CHECK(std::fabs(sace_pt - surv) < 1e-8);
  CHECK(std::fabs(ipcw_pt - surv) < 1e-8);
}

TEST_CASE("ipcw reduces to the unweighted regression when survival is certain") {
  TrialDataset d = weight_free_dataset();
  for (auto& t_ice : d.ice_time) t_ice = d.tau;
  for (int i = 0; i < d.n; ++i)
    for (int t = 1; t <= d.tau; ++t)
      if (std::isnan(d.outcomes(i, t))) d.outcomes(i, t) = 0.0;
  const double surv = survivors_only(d).point;
  CHECK(std::fabs(ipcw(d, d.tau).point - surv) < 1e-8);
}

TEST_CASE("comparators are deterministic given the bootstrap seed") {
  DgpConfig cfg;
  cfg.setting = Setting::setting2;
  cfg.n = 200;
  cfg.seed = 88;
  const auto [data, panel] = generate(cfg);
  const EstimateResult a = sace(data, data.tau, 0.05, 50, 1234);
  const EstimateResult b = sace(data, data.tau, 0.05, 50, 1234);
  CHECK(a.point == b.point);
  CHECK(a.se == b.se);
  const EstimateResult c = locf(data);
  const EstimateResult e = locf(data);
  CHECK(c.point == e.point);
}

TEST_CASE("setting 2 comparator biases have the documented signs") {
  // single moderate-size replicate; the full magnitude gates live in the
  // acceptance suite
  DgpConfig cfg;
  cfg.setting = Setting::setting2;
  cfg.n = 2500;
  cfg.seed = 404;
  const auto [data, panel] = generate(cfg);
  CHECK(survivors_only(data).point < -0.4);
  CHECK(locf(data).point < -0.05);
  CHECK(ipcw(data, data.tau).point < -0.15);
}
