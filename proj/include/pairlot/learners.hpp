#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "pairlot/rng.hpp"

namespace pairlot {

struct TreeParams {
  int n_trees = 30;
  int max_depth = 3;
  int min_leaf = 10;
};

// Base-learner library for the stacked ensembles. The same spec drives both
// hazard models (binary targets) and outcome regressions.
struct LearnerSpec {
  bool mean_only = true;
  bool linear = true;
  std::vector<double> ridge_grid = {0.1, 1.0, 10.0};  // each grid point joins the stack
  bool trees = true;
  TreeParams tree;
  bool piecewise_linear = true;
  int pwl_knots = 3;
  bool stacking = true;  // false: pick the single learner with best CV loss
  int inner_folds = 5;
  bool s_interactions = true;  // long-format designs include L_j * s columns
  bool s_onehot = false;       // visit index one-hot instead of numeric

  void check() const;  // throws std::invalid_argument
};

class Learner {
 public:
  virtual ~Learner() = default;
  virtual void fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, Xoshiro256pp& rng) = 0;
  virtual Eigen::VectorXd predict(const Eigen::MatrixXd& x) const = 0;
  virtual std::unique_ptr<Learner> fresh() const = 0;
  virtual std::string name() const = 0;
};

std::vector<std::unique_ptr<Learner>> build_library(const LearnerSpec& spec, bool binary);

// Convex stacking weights over the simplex, minimizing CV squared error
// (continuous) or CV log-loss (binary) by projected gradient descent.
// Descent starts at the best single learner, so the stacked CV loss can
// never exceed the best single CV loss. Tolerance 1e-8 on the weight
// update's sup-norm, at most 10^4 iterations.
Eigen::VectorXd stack_weights(const Eigen::MatrixXd& cv_predictions,
                              const Eigen::VectorXd& targets, bool binary, double tol = 1e-8,
                              int max_iter = 10000);

double cv_loss(const Eigen::VectorXd& predictions, const Eigen::VectorXd& targets, bool binary);

class EnsembleModel {
 public:
  EnsembleModel(const LearnerSpec& spec, bool binary) : spec_(spec), binary_(binary) {}

  void fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::uint64_t seed);
  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const;

  const Eigen::VectorXd& weights() const { return weights_; }
  const std::vector<std::string>& learner_names() const { return names_; }
  double stacked_cv_loss() const { return stacked_cv_loss_; }
  double best_single_cv_loss() const { return best_single_cv_loss_; }

 private:
  LearnerSpec spec_;
  bool binary_ = false;
  std::vector<std::unique_ptr<Learner>> fitted_;
  std::vector<std::string> names_;
  Eigen::VectorXd weights_;
  double stacked_cv_loss_ = 0.0;
  double best_single_cv_loss_ = 0.0;
};

}  // namespace pairlot
