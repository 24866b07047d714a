#include <doctest.h>

#include <cmath>

#include "pairlot/dgp.hpp"
#include "pairlot/harness.hpp"

using namespace pairlot;

namespace {

DgpConfig make_config(Setting s, int n = 250, std::uint64_t seed = 11) {
  DgpConfig cfg;
  cfg.setting = s;
  cfg.n = n;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("config validation") {
  DgpConfig cfg = make_config(Setting::setting1);
  cfg.p_treat = 1.0;
  CHECK_THROWS_AS(check_config(cfg), std::invalid_argument);
  cfg.p_treat = 0.5;
  cfg.n = 1;
  CHECK_THROWS_AS(check_config(cfg), std::invalid_argument);
  cfg.n = 10;
  cfg.tau = 0;
  CHECK_THROWS_AS(check_config(cfg), std::invalid_argument);
  cfg.tau = 5;
  cfg.example.beta1 = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(check_config(cfg), std::invalid_argument);
  CHECK_THROWS_AS(setting_from_string("setting9"), std::invalid_argument);
}

TEST_CASE("same seed gives bit-identical datasets") {
  for (Setting s : {Setting::setting1, Setting::setting2, Setting::setting3, Setting::example}) {
    const DgpConfig cfg = make_config(s, 60, 99);
    const auto [d1, p1] = generate(cfg);
    const auto [d2, p2] = generate(cfg);
    CHECK(d1.ice_time == d2.ice_time);
    CHECK(d1.arm == d2.arm);
    CHECK((p1.y_treated.array() == p2.y_treated.array()).all());
    CHECK((p1.y_control.array() == p2.y_control.array()).all());
    bool identical_observed = true;
    for (int i = 0; i < d1.n; ++i)
      for (int t = 0; t <= d1.tau; ++t)
        if (d1.observed(i, t) && d1.outcomes(i, t) != d2.outcomes(i, t)) identical_observed = false;
    CHECK(identical_observed);
  }
}

TEST_CASE("factual data equal the counterfactual panel filtered through the arm") {
  for (Setting s : {Setting::setting1, Setting::setting2, Setting::setting3, Setting::example}) {
    const auto [data, panel] = generate(make_config(s, 200, 5));
    CHECK(validate(data).ok());
    CHECK(consistent(panel, data));
  }
}

TEST_CASE("setting 3 outcomes are binary with Y(0) = 0") {
  const auto [data, panel] = generate(make_config(Setting::setting3, 300, 3));
  CHECK(data.binary_outcomes());
  for (int i = 0; i < data.n; ++i) {
    CHECK(data.outcomes(i, 0) == 0.0);
    CHECK(panel.y_treated(i, 0) == 0.0);
  }
}

TEST_CASE("setting 2 never produces T = 0") {
  const auto [data, panel] = generate(make_config(Setting::setting2, 4000, 17));
  for (int i = 0; i < data.n; ++i) {
    CHECK(panel.t_control[static_cast<std::size_t>(i)] >= 1);
    CHECK(panel.t_treated[static_cast<std::size_t>(i)] >= 1);
  }
}

TEST_CASE("example with all time-varying terms off is constant in t") {
  DgpConfig cfg = make_config(Setting::example, 50, 7);
  cfg.example = {2.5, 0.0, 0.0, 0.0, 0.0};  // beta0=2.5, eps_sd=0
  const auto [data, panel] = generate(cfg);
  for (int i = 0; i < data.n; ++i) {
    const double expected = 2.5 * data.covariates(i, 0);
    for (int t = 0; t <= data.tau; ++t) {
      CHECK(panel.y_treated(i, t) == doctest::Approx(expected).epsilon(1e-12));
      CHECK(panel.y_control(i, t) == doctest::Approx(expected).epsilon(1e-12));
    }
  }
}

TEST_CASE("t distribution table guards and column sums") {
  const DgpConfig cfg = make_config(Setting::setting3);
  CHECK_THROWS_AS(t_distribution_table(cfg, 100), std::invalid_argument);
  const Eigen::MatrixXd table = t_distribution_table(cfg, 20000);
  CHECK(table.col(0).sum() == doctest::Approx(100.0).epsilon(1e-9));
  CHECK(table.col(1).sum() == doctest::Approx(100.0).epsilon(1e-9));
}

TEST_CASE("t distribution matches the generative reference at n = 1e5") {
  for (Setting s : {Setting::setting1, Setting::setting2, Setting::setting3}) {
    const TTableComparison cmp = compare_t_table(make_config(s, 250, 2024), 100000);
    INFO(to_string(s), ": max dev ", cmp.max_abs_dev);
    CHECK(cmp.pass);
  }
}

TEST_CASE("true estimand is zero for the null example and nonzero for (1,1,0)") {
  DgpConfig cfg = make_config(Setting::example, 250, 31);
  cfg.example = {1.0, 0.0, 0.0, 0.0, 1.0};
  const TrueEstimandResult null_res = true_estimand(cfg, Estimand::PLOT, 5, 200000);
  CHECK(std::fabs(null_res.value) < 3.0 * null_res.mc_se);

  cfg.example = {1.0, 1.0, 1.0, 0.0, 1.0};
  const TrueEstimandResult plot_res = true_estimand(cfg, Estimand::PLOT, 5, 200000);
  CHECK(plot_res.value < -0.55);
  CHECK(plot_res.value > -0.78);
  const TrueEstimandResult cplot_res = true_estimand(cfg, Estimand::CPLOT, 5, 200000);
  CHECK(std::fabs(cplot_res.value) < 3.0 * cplot_res.mc_se + 0.01);
}

TEST_CASE("identical arms force both estimands to zero") {
  DgpConfig cfg = make_config(Setting::example, 250, 13);
  cfg.example = {1.0, 1.0, 1.0, 1.0, 1.0};
  cfg.null_ice = true;  // T^1 = T^0 by construction
  const TrueEstimandResult plot_res = true_estimand(cfg, Estimand::PLOT, 5, 150000);
  CHECK(std::fabs(plot_res.value) < 3.0 * plot_res.mc_se);
  const TrueEstimandResult cplot_res = true_estimand(cfg, Estimand::CPLOT, 5, 150000);
  CHECK(std::fabs(cplot_res.value) < 3.0 * cplot_res.mc_se);
}

TEST_CASE("closed-form check agrees with the direct contrast on shared draws") {
  DgpConfig cfg = make_config(Setting::example, 250, 77);
  cfg.example = {1.0, 1.0, 1.0, 0.0, 1.0};
  const PairedCheck chk = example_closed_form_check(cfg, 5, 150000);
  CHECK(std::fabs(chk.diff) < 3.0 * chk.diff_se);
}
