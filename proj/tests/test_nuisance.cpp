#include <doctest.h>

#include <cmath>

#include "pairlot/dgp.hpp"
#include "pairlot/nuisance.hpp"
#include "pairlot/oracle.hpp"
#include "test_support.hpp"

using namespace pairlot;

TEST_CASE("propensity is the clipped sample proportion") {
  TrialDataset d = testing::toy4_dataset();
  CHECK(fit_propensity(d) == doctest::Approx(0.5));
  d.arm = {1, 1, 1, 0};
  CHECK(fit_propensity(d) == doctest::Approx(0.75));
  d.arm = {1, 1, 1, 1};
  CHECK_THROWS_AS(fit_propensity(d), std::invalid_argument);
}

TEST_CASE("propensity concentrates around the randomization probability") {
  // binomial(250, 0.5): P(|mean - 0.5| > 0.1) < 1%, so a handful of draws all land inside
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    DgpConfig cfg;
    cfg.setting = Setting::example;
    cfg.n = 250;
    cfg.seed = seed;
    const auto [data, panel] = generate(cfg);
    CHECK(std::fabs(fit_propensity(data) - 0.5) < 0.1);
  }
}

TEST_CASE("no covariates: survival reduces to the sample proportion exactly") {
  Xoshiro256pp rng(41);
  for (int rep = 0; rep < 10; ++rep) {
    const TrialDataset data = testing::random_dataset(rng, 120, 5, 0);
    NuisanceOptions opts;
    opts.folds = 1;
    const NuisanceFit fit = fit_nuisance(data, opts);
    for (int a = 0; a <= 1; ++a) {
      const double n_arm = data.n_arm(a);
      for (int s = -1; s <= data.tau; ++s) {
        int count = 0;
        for (int i = 0; i < data.n; ++i)
          count += data.arm[static_cast<std::size_t>(i)] == a &&
                   data.ice_time[static_cast<std::size_t>(i)] > s;
        const double direct = count / n_arm;
        CHECK(std::fabs(fit.p(a, s, 0) - direct) < 1e-12);
      }
    }
  }
}

TEST_CASE("no covariates: outcome means reduce to stratified sample means exactly") {
  Xoshiro256pp rng(43);
  const TrialDataset data = testing::random_dataset(rng, 150, 4, 0);
  NuisanceOptions opts;
  opts.folds = 1;
  const NuisanceFit fit = fit_nuisance(data, opts);
  for (int a = 0; a <= 1; ++a)
    for (int s = 0; s <= data.tau; ++s)
      for (int utype = 0; utype <= 1; ++utype) {
        const int u = utype == 0 ? s - 1 : s;
        double sum = 0.0;
        int count = 0;
        for (int i = 0; i < data.n; ++i)
          if (data.arm[static_cast<std::size_t>(i)] == a &&
              data.ice_time[static_cast<std::size_t>(i)] > u) {
            sum += data.outcomes(i, s);
            ++count;
          }
        if (count > 0) CHECK(std::fabs(fit.mu(a, s, u, 0) - sum / count) < 1e-12);
      }
}

TEST_CASE("all subjects reaching tau gives survival one before tau") {
  TrialDataset data = testing::toy4_dataset();
  data.ice_time = {2, 2, 2, 2};
  data.outcomes << 1, 2, 3, 5, 6, 7, 2, 4, 1, 0, 1, 2;
  NuisanceOptions opts;
  opts.folds = 1;
  const NuisanceFit fit = fit_nuisance(data, opts);
  for (int a = 0; a <= 1; ++a)
    for (int s = 0; s < data.tau; ++s) CHECK(fit.p(a, s, 0) == doctest::Approx(1.0));
}

TEST_CASE("constant outcomes give constant predictions for every learner") {
  const auto [data0, panel] = generate([] {
    DgpConfig cfg;
    cfg.setting = Setting::setting3;
    cfg.n = 120;
    cfg.seed = 3;
    return cfg;
  }());
  TrialDataset data = data0;
  for (int i = 0; i < data.n; ++i)
    for (int t = 0; t <= data.tau; ++t)
      if (data.observed(i, t)) data.outcomes(i, t) = 0.75;
  NuisanceOptions opts;
  opts.folds = 2;
  opts.seed = 12;
  const NuisanceFit fit = fit_nuisance(data, opts);
  for (int i = 0; i < data.n; ++i)
    for (int s = 0; s <= data.tau; ++s) {
      CHECK(fit.mu(0, s, s - 1, i) == doctest::Approx(0.75).epsilon(1e-9));
      CHECK(fit.mu(1, s, s - 1, i) == doctest::Approx(0.75).epsilon(1e-9));
    }
}

TEST_CASE("survival monotonicity and range invariants hold on fitted nuisances") {
  for (Setting s : {Setting::setting1, Setting::setting3, Setting::example}) {
    DgpConfig cfg;
    cfg.setting = s;
    cfg.n = 120;
    cfg.seed = 8;
    const auto [data, panel] = generate(cfg);
    NuisanceOptions opts;
    opts.folds = 3;
    opts.seed = 21;
    opts.learners.tree.n_trees = 10;
    const NuisanceFit fit = fit_nuisance(data, opts);
    CHECK_NOTHROW(fit.check_invariants());
  }
}

TEST_CASE("out-of-fold canary: a duplicated outlier cannot predict itself") {
  // two copies of an extreme subject pinned to the same fold; with honest
  // out-of-fold prediction neither copy's model saw the outlier outcome
  DgpConfig cfg;
  cfg.setting = Setting::example;
  cfg.n = 80;
  cfg.seed = 5;
  auto [data, panel] = generate(cfg);
  const int tau = data.tau;
  data.covariates(0, 0) = 4.0;
  data.covariates(1, 0) = 4.0;
  data.ice_time[0] = tau;
  data.ice_time[1] = tau;
  data.arm[0] = 1;
  data.arm[1] = 1;
  for (int t = 0; t <= tau; ++t) {
    data.outcomes(0, t) = 250.0;  // wild outlier pair
    data.outcomes(1, t) = 250.0;
  }
  REQUIRE(validate(data).ok());

  NuisanceOptions opts;
  opts.folds = 4;
  opts.seed = 9;
  // memorization-capable library: deep trees, tiny leaves
  opts.learners.tree.n_trees = 20;
  opts.learners.tree.max_depth = 8;
  opts.learners.tree.min_leaf = 1;
  opts.fold_override.assign(static_cast<std::size_t>(data.n), 0);
  for (int i = 0; i < data.n; ++i)
    opts.fold_override[static_cast<std::size_t>(i)] = i % 4;
  opts.fold_override[0] = 0;
  opts.fold_override[1] = 0;  // same fold as the other copy

  const NuisanceFit fit = fit_nuisance(data, opts);
  // the outlier's own outcome is 250; an honest out-of-fold prediction is far away
  CHECK(std::fabs(fit.mu(1, tau, tau - 1, 0) - 250.0) > 1e-6);
  CHECK(std::fabs(fit.mu(1, tau, tau - 1, 0)) < 100.0);

  // negative control: with folds = 1 (in-sample fitting) the same library
  // moves the prediction far toward the duplicated outlier
  NuisanceOptions insample = opts;
  insample.folds = 1;
  insample.fold_override.clear();
  const NuisanceFit leaky = fit_nuisance(data, insample);
  CHECK(std::fabs(leaky.mu(1, tau, tau - 1, 0)) > 100.0);
}

TEST_CASE("setting 3 fitted survival tracks the oracle within 0.02") {
  DgpConfig cfg;
  cfg.setting = Setting::setting3;
  cfg.n = 5000;
  cfg.seed = 123;
  const auto [data, panel] = generate(cfg);
  NuisanceOptions opts;
  opts.folds = 1;
  opts.seed = 55;
  opts.learners.tree.n_trees = 20;
  const NuisanceFit fit = fit_nuisance(data, opts);
  const NuisanceFit oracle = oracle_nuisance(cfg, data);
  double fitted_mean = 0.0, oracle_mean = 0.0;
  for (int i = 0; i < data.n; ++i) {
    fitted_mean += fit.p(1, 4, i);
    oracle_mean += oracle.p(1, 4, i);
  }
  fitted_mean /= data.n;
  oracle_mean /= data.n;
  CHECK(std::fabs(fitted_mean - oracle_mean) < 0.02);
}

TEST_CASE("ridge learner recovers the example model's unit coefficient") {
  DgpConfig cfg;
  cfg.setting = Setting::example;
  cfg.n = 2000;
  cfg.seed = 314;
  cfg.example = {1.0, 0.0, 0.0, 0.0, 0.0};  // mu(L) = L exactly, no noise
  const auto [data, panel] = generate(cfg);
  // long-format rows for arm 1, u = s-1
  std::vector<double> xs, ys;
  for (int i = 0; i < data.n; ++i) {
    if (data.arm[static_cast<std::size_t>(i)] != 1) continue;
    for (int s = 0; s <= data.tau; ++s)
      if (data.ice_time[static_cast<std::size_t>(i)] >= s) {
        xs.push_back(data.covariates(i, 0));
        ys.push_back(data.outcomes(i, s));
      }
  }
  Eigen::MatrixXd x(static_cast<int>(xs.size()), 1);
  Eigen::VectorXd y(static_cast<int>(ys.size()));
  for (std::size_t r = 0; r < xs.size(); ++r) {
    x(static_cast<int>(r), 0) = xs[r];
    y(static_cast<int>(r)) = ys[r];
  }
  LearnerSpec spec;
  auto lib = build_library(spec, false);
  for (auto& learner : lib) {
    if (learner->name().rfind("ridge_0.1", 0) != 0) continue;
    Xoshiro256pp rng(1);
    learner->fit(x, y, rng);
    Eigen::MatrixXd probe(2, 1);
    probe << 1.0, 0.0;
    const Eigen::VectorXd pred = learner->predict(probe);
    CHECK(std::fabs((pred(0) - pred(1)) - 1.0) < 0.05);
  }
}

TEST_CASE("corrupt keeps the invariants and the propensity") {
  Xoshiro256pp rng(61);
  const TrialDataset data = testing::random_dataset(rng, 100, 5, 0);
  NuisanceOptions opts;
  opts.folds = 1;
  const NuisanceFit fit = fit_nuisance(data, opts);
  for (CorruptMode mode : {CorruptMode::constant, CorruptMode::noisy}) {
    const NuisanceFit bad = corrupt(fit, mode, 99);
    CHECK_NOTHROW(bad.check_invariants());
    CHECK(bad.pi_hat == fit.pi_hat);
    if (mode == CorruptMode::constant) {
      CHECK(bad.p(0, 2, 0) == doctest::Approx(0.5));
      CHECK(bad.mu(1, 1, 0, 0) == doctest::Approx(0.0));
    }
  }
  CHECK_THROWS_AS(corrupt_mode_from_string("weird"), std::invalid_argument);
}

TEST_CASE("folds are stratified by arm and end-of-study survival") {
  DgpConfig cfg;
  cfg.setting = Setting::setting2;
  cfg.n = 250;
  cfg.seed = 10;
  const auto [data, panel] = generate(cfg);
  const std::vector<int> fold = make_folds(data, 5, 7);
  for (int a = 0; a <= 1; ++a)
    for (int surv = 0; surv <= 1; ++surv) {
      int count[5] = {0, 0, 0, 0, 0};
      int total = 0;
      for (int i = 0; i < data.n; ++i)
        if (data.arm[static_cast<std::size_t>(i)] == a &&
            (data.ice_time[static_cast<std::size_t>(i)] == data.tau) == (surv == 1)) {
          ++count[fold[static_cast<std::size_t>(i)]];
          ++total;
        }
      if (total < 5) continue;
      int lo = total, hi = 0;
      for (int k = 0; k < 5; ++k) {
        lo = std::min(lo, count[k]);
        hi = std::max(hi, count[k]);
      }
      CHECK(hi - lo <= 1);  // round-robin within stratum
    }
}
