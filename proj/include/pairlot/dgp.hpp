#pragma once

#include <cstdint>
#include <utility>

#include <Eigen/Dense>

#include "pairlot/dataset.hpp"

namespace pairlot {

enum class Setting { setting1, setting2, setting3, example };

Setting setting_from_string(const std::string& name);
std::string to_string(Setting s);

// Example-model coefficients: Y(t) = beta0*L + beta1*L*t + gamma0*U + gamma1*U*t + eps_t.
struct ExampleParams {
  double beta0 = 1.0;
  double beta1 = 0.0;
  double gamma0 = 0.0;
  double gamma1 = 0.0;
  double eps_sd = 1.0;
};

struct DgpConfig {
  Setting setting = Setting::setting1;
  int n = 250;
  int tau = 5;
  double p_treat = 0.5;
  ExampleParams example;
  std::uint64_t seed = 1;
  bool null_ice = false;  // zero every treatment effect on T (forces T^1 = T^0)
};

void check_config(const DgpConfig& config);  // throws std::invalid_argument

int covariate_dim(Setting s);

// One subject's full counterfactual record plus randomized arm.
struct SubjectDraw {
  Eigen::VectorXd covariates;
  double u_latent = 0.0;  // the unmeasured U (exposed for oracle checks)
  int arm = 0;
  int t_control = 0;
  int t_treated = 0;
  Eigen::VectorXd y_control;
  Eigen::VectorXd y_treated;
};

SubjectDraw draw_subject(const DgpConfig& config, std::uint64_t subject_seed);

// Same draw with the covariate vector pinned (fresh non-L randomness);
// used for covariate-matched pair oracles.
SubjectDraw draw_subject_given_covariates(const DgpConfig& config, std::uint64_t subject_seed,
                                          const Eigen::VectorXd& covariates);

std::pair<TrialDataset, CounterfactualPanel> generate(const DgpConfig& config);

// Per-arm percentage distribution of T from a large simulated sample,
// rows T = 0..tau, columns arm 0/1. Requires n_large >= 10000.
Eigen::MatrixXd t_distribution_table(const DgpConfig& config, long n_large);

enum class Estimand { PLOT, CPLOT };

struct TrueEstimandResult {
  double value = 0.0;
  double mc_se = 0.0;
  long n_pairs = 0;
};

// Monte Carlo evaluation of the pairwise contrast directly on counterfactual
// pairs: independent pairs (PLOT) or covariate-matched pairs (CPLOT).
TrueEstimandResult true_estimand(const DgpConfig& config, Estimand which, int t,
                                 long n_pairs = 1000000, std::uint64_t seed = 9001);

// Example model only: paired difference between the direct contrast and the
// closed-form integrand beta1*(L-L*)*min + gamma1*(U-U*)*min, same draws.
struct PairedCheck {
  double estimand = 0.0;
  double estimand_se = 0.0;
  double closed_form = 0.0;
  double diff = 0.0;   // mean of per-pair (direct - closed form)
  double diff_se = 0.0;
};

PairedCheck example_closed_form_check(const DgpConfig& config, int t, long n_pairs,
                                      std::uint64_t seed = 9001);

}  // namespace pairlot
