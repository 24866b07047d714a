#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pairlot/dataset.hpp"
#include "pairlot/nuisance.hpp"

namespace pairlot {

enum class EstimandId {
  PLOT_unadj,
  PLOT_adj,
  CPLOT,
  PLOT_ratio,
  CPLOT_ratio,
  SACE,
  IPCW,
  LOCF,
  SURVIVORS
};

std::string to_string(EstimandId id);

struct EstimateResult {
  EstimandId estimand = EstimandId::PLOT_unadj;
  std::string method;  // display id, e.g. "PLOTadj-CF"
  int t = 0;
  double point = 0.0;
  double se = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  std::vector<double> if_contributions;  // empty when the SE is bootstrap-only
  int n_used = 0;
  double ci_lo_percentile = 0.0;  // bootstrap methods only
  double ci_hi_percentile = 0.0;
  std::string flags;
};

std::string results_csv_header();
std::string results_csv_row(const EstimateResult& result);

// O(n^2) treated-by-control pairwise contrast at the last joint observation
// time capped at t; subject-level bootstrap SE (B resamples, B = 0 skips the
// bootstrap and reports only the point estimate).
EstimateResult plot_unadj_pairwise(const TrialDataset& data, int t, double alpha = 0.05,
                                   int bootstrap_b = 500, std::uint64_t seed = 2024);

// O(n) algebraic twin of the pairwise estimator: marginal survival
// proportions and arm means only; influence-function SE via the no-covariate
// reduction of the efficient estimator.
EstimateResult plot_unadj_fast(const TrialDataset& data, int t, double alpha = 0.05);

enum class PropensityModel { semiparametric, nonparametric };

// Debiased covariate-adjusted estimator built from the uncentered influence
// functions of eta and gamma; the semiparametric variant replaces P(A=a|L)
// by the scalar P(A=a).
EstimateResult plot_adjusted(const TrialDataset& data, const NuisanceFit& nuisance, int t,
                             PropensityModel variant = PropensityModel::semiparametric,
                             double alpha = 0.05);

EstimateResult cplot(const TrialDataset& data, const NuisanceFit& nuisance, int t,
                     double alpha = 0.05,
                     PropensityModel variant = PropensityModel::semiparametric);

enum class RatioKind { PLOT, CPLOT };

// Ratio of the arm-specific halves; delta-method SE on the joint influence
// function of numerator and denominator.
EstimateResult ratio_estimand(const TrialDataset& data, const NuisanceFit& nuisance, int t,
                              RatioKind which, double alpha = 0.05,
                              PropensityModel variant = PropensityModel::semiparametric);

struct WaldTest {
  double z = 0.0;
  double p_value = 1.0;
};

WaldTest wald_test(const EstimateResult& result, double null_value);

}  // namespace pairlot
