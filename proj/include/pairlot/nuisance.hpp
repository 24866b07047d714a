#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "pairlot/dataset.hpp"
#include "pairlot/learners.hpp"

namespace pairlot {

// Cross-fitted nuisance predictions:
//   p(a,s,i)    = P(T > s | A = a, L_i),  s in -1..tau, with p(a,-1,.) = 1
//   mu(a,s,u,i) = E[Y(s) | A = a, L_i, T > u],  u in {s-1, s}
//   pi_hat      = P(A = 1), clipped to [0.01, 0.99]
// For every subject the stored prediction comes from models trained on folds
// not containing that subject (folds >= 2); folds = 1 fits and predicts on
// the full sample.
struct NuisanceFit {
  int n = 0;
  int tau = 0;
  bool binary_outcome = false;
  double pi_hat = 0.5;
  Eigen::VectorXd propensity;  // P(A=1|L_i); constant pi_hat under randomization
  Eigen::MatrixXd p_mat[2];    // (tau+2) x n, row s+1
  Eigen::MatrixXd mu_lag[2];   // (tau+1) x n, u = s-1
  Eigen::MatrixXd mu_cur[2];   // (tau+1) x n, u = s
  std::vector<int> fold_assignment;
  std::vector<std::string> warnings;

  double p(int a, int s, int i) const { return p_mat[a](s + 1, i); }
  double mu(int a, int s, int u, int i) const;
  double prob_arm(int a, int i) const {
    const double p1 = propensity(i);
    return a == 1 ? p1 : 1.0 - p1;
  }

  void allocate(int n_subjects, int tau_horizon);
  // Throws std::logic_error on range or monotonicity violations.
  void check_invariants() const;
};

// pi_hat = mean(A) clipped to [0.01, 0.99]; requires both arms present.
double fit_propensity(const TrialDataset& data);

// K folds stratified jointly by arm and end-of-study survival I(T = tau).
std::vector<int> make_folds(const TrialDataset& data, int folds, std::uint64_t seed);

struct NuisanceOptions {
  LearnerSpec learners;
  int folds = 5;
  std::uint64_t seed = 1;
  std::vector<int> fold_override;  // testing hook; bypasses make_folds when set
};

// Discrete-time hazard stack: per arm and visit s, the stacked learner models
// P(T = s | T >= s, L) on training folds; p is the product of one minus the
// predicted hazards, so survival is monotone in s by construction.
void fit_survival(const TrialDataset& data, const NuisanceOptions& options, NuisanceFit& fit);

// Long-format outcome regressions per arm and conditioning type u in {s-1, s},
// with the visit index as a feature.
void fit_outcome_means(const TrialDataset& data, const NuisanceOptions& options, NuisanceFit& fit);

NuisanceFit fit_nuisance(const TrialDataset& data, const NuisanceOptions& options);

// Marginal (no-covariate) nuisances from the full sample; the L = emptyset
// reduction used by the O(n) unadjusted estimator's variance.
NuisanceFit marginal_nuisance(const TrialDataset& data);

enum class CorruptMode { constant, noisy };
CorruptMode corrupt_mode_from_string(const std::string& name);

// Deliberately misspecified p and mu (propensity left intact); the double
// robustness test instrument.
NuisanceFit corrupt(const NuisanceFit& fit, CorruptMode mode, std::uint64_t seed = 1234);

// Long-format debug dump: subject, a, s, u, p(a,u), mu(a,s,u), fold.
void save_nuisance_csv(const NuisanceFit& fit, const std::string& path);

}  // namespace pairlot
