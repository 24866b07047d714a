#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "pairlot/learners.hpp"

using namespace pairlot;

TEST_CASE("single learner gets weight one") {
  Eigen::MatrixXd preds(10, 1);
  Eigen::VectorXd y(10);
  for (int i = 0; i < 10; ++i) {
    preds(i, 0) = i;
    y(i) = i + 0.5;
  }
  const Eigen::VectorXd w = stack_weights(preds, y, false);
  REQUIRE(w.size() == 1);
  CHECK(w(0) == doctest::Approx(1.0));
}

TEST_CASE("dominated learner gets weight ~[1, 0]") {
  // learner 0 predicts y exactly; learner 1 is y + 1, worse at every point
  const int n = 50;
  Eigen::MatrixXd preds(n, 2);
  Eigen::VectorXd y(n);
  Xoshiro256pp rng(1);
  for (int i = 0; i < n; ++i) {
    y(i) = rng.normal();
    preds(i, 0) = y(i);
    preds(i, 1) = y(i) + 1.0;
  }
  const Eigen::VectorXd w = stack_weights(preds, y, false);
  CHECK(w(0) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(w(1) == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("exact convex combination is recovered within 1e-4") {
  const int n = 300;
  Eigen::MatrixXd preds(n, 2);
  Eigen::VectorXd y(n);
  Xoshiro256pp rng(7);
  for (int i = 0; i < n; ++i) {
    preds(i, 0) = rng.normal();
    preds(i, 1) = rng.normal() + 0.5;
    y(i) = 0.3 * preds(i, 0) + 0.7 * preds(i, 1);
  }
  const Eigen::VectorXd w = stack_weights(preds, y, false);
  CHECK(std::fabs(w(0) - 0.3) < 1e-4);
  CHECK(std::fabs(w(1) - 0.7) < 1e-4);
}

TEST_CASE("three-learner recovery and simplex constraints") {
  const int n = 400;
  Eigen::MatrixXd preds(n, 3);
  Eigen::VectorXd y(n);
  Xoshiro256pp rng(3);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < 3; ++j) preds(i, j) = rng.normal();
    y(i) = 0.2 * preds(i, 0) + 0.5 * preds(i, 1) + 0.3 * preds(i, 2);
  }
  const Eigen::VectorXd w = stack_weights(preds, y, false);
  CHECK(w.sum() == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(w.minCoeff() >= 0.0);
  CHECK(std::fabs(w(0) - 0.2) < 1e-3);
  CHECK(std::fabs(w(1) - 0.5) < 1e-3);
}

TEST_CASE("binary stacking uses log-loss and stays on the simplex") {
  const int n = 500;
  Eigen::MatrixXd preds(n, 2);
  Eigen::VectorXd y(n);
  Xoshiro256pp rng(11);
  for (int i = 0; i < n; ++i) {
    const double p = 0.2 + 0.6 * rng.uniform();
    preds(i, 0) = p;                                   // well calibrated
    preds(i, 1) = std::clamp(p + 0.3, 0.0, 1.0);       // biased upward
    y(i) = rng.bernoulli(p) ? 1.0 : 0.0;
  }
  const Eigen::VectorXd w = stack_weights(preds, y, true);
  CHECK(w.sum() == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(w(0) > 0.8);
}

TEST_CASE("ensemble: degenerate targets collapse to the mean learner") {
  LearnerSpec spec;
  Eigen::MatrixXd x(30, 2);
  Eigen::VectorXd y = Eigen::VectorXd::Constant(30, 3.25);
  Xoshiro256pp rng(4);
  for (int i = 0; i < 30; ++i)
    for (int j = 0; j < 2; ++j) x(i, j) = rng.normal();
  EnsembleModel model(spec, false);
  model.fit(x, y, 99);
  REQUIRE(model.weights().size() == 1);
  CHECK(model.learner_names()[0] == "mean");
  CHECK(model.predict(x)(0) == doctest::Approx(3.25));
}

TEST_CASE("ensemble: stacked CV loss never exceeds best single learner") {
  LearnerSpec spec;
  spec.tree.n_trees = 10;
  Xoshiro256pp rng(21);
  for (int rep = 0; rep < 3; ++rep) {
    const int n = 150;
    Eigen::MatrixXd x(n, 3);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < 3; ++j) x(i, j) = rng.normal();
      y(i) = x(i, 0) - 0.5 * x(i, 1) + 0.3 * x(i, 0) * x(i, 2) + rng.normal();
    }
    EnsembleModel model(spec, false);
    model.fit(x, y, 1000 + static_cast<std::uint64_t>(rep));
    CHECK(model.stacked_cv_loss() <= model.best_single_cv_loss() + 1e-8);
  }
}

TEST_CASE("ensemble recovers a linear signal") {
  LearnerSpec spec;
  spec.tree.n_trees = 10;
  const int n = 400;
  Eigen::MatrixXd x(n, 2);
  Eigen::VectorXd y(n);
  Xoshiro256pp rng(31);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = rng.normal();
    x(i, 1) = rng.normal();
    y(i) = 2.0 * x(i, 0) - x(i, 1) + 0.2 * rng.normal();
  }
  EnsembleModel model(spec, false);
  model.fit(x, y, 5);
  Eigen::MatrixXd probe(2, 2);
  probe << 1.0, 0.0, -1.0, 0.0;
  const Eigen::VectorXd pred = model.predict(probe);
  CHECK(pred(0) - pred(1) == doctest::Approx(4.0).epsilon(0.08));
}

TEST_CASE("bagged trees capture a step function that linear learners miss") {
  LearnerSpec spec;
  spec.mean_only = false;
  spec.linear = false;
  spec.ridge_grid.clear();
  spec.piecewise_linear = false;
  spec.tree.n_trees = 40;
  spec.tree.min_leaf = 5;
  const int n = 500;
  Eigen::MatrixXd x(n, 1);
  Eigen::VectorXd y(n);
  Xoshiro256pp rng(8);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = rng.normal();
    y(i) = (x(i, 0) > 0.3 ? 2.0 : -1.0) + 0.1 * rng.normal();
  }
  EnsembleModel model(spec, false);
  model.fit(x, y, 77);
  Eigen::MatrixXd probe(2, 1);
  probe << 1.0, -1.0;
  const Eigen::VectorXd pred = model.predict(probe);
  CHECK(pred(0) > 1.5);
  CHECK(pred(1) < -0.5);
}

TEST_CASE("learner spec validation") {
  LearnerSpec spec;
  spec.ridge_grid = {-1.0};
  CHECK_THROWS_AS(spec.check(), std::invalid_argument);
  spec = LearnerSpec{};
  spec.tree.n_trees = 0;
  CHECK_THROWS_AS(spec.check(), std::invalid_argument);
}
