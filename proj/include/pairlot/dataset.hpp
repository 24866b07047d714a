#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace pairlot {

// Longitudinal trial data with a single intercurrent-event time per subject.
// Visits are integer indices 0..tau; outcomes after the ICE are masked (NaN)
// and must never be read by estimators, which only touch indicator-weighted
// terms Y(s)*I(T>u) with u >= s-1.
struct TrialDataset {
  int n = 0;
  int tau = 0;
  int d = 0;
  Eigen::MatrixXd covariates;  // n x d (d may be 0)
  std::vector<int> arm;        // 0/1
  std::vector<int> ice_time;   // T_i in 0..tau
  Eigen::MatrixXd outcomes;    // n x (tau+1), NaN above the ICE

  bool observed(int i, int t) const { return t <= ice_time[static_cast<std::size_t>(i)]; }

  double y(int i, int t) const;  // throws on masked access

  int n_arm(int a) const;
  bool binary_outcomes() const;  // all observed values in {0,1}
};

struct Violation {
  int subject = -1;  // -1: dataset-level
  std::string what;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  std::string to_string() const;
};

ValidationReport validate(const TrialDataset& data);

// Wide CSV: id,A,T,L1..Ld,Y0..Ytau with NA for masked outcomes.
// Round-trips exactly (17 significant digits).
void save_csv(const TrialDataset& data, const std::string& path);
TrialDataset load_csv(const std::string& path);

// Oracle potential outcomes and potential ICE times from a simulator.
struct CounterfactualPanel {
  int n = 0;
  int tau = 0;
  std::vector<int> t_control;  // T^0
  std::vector<int> t_treated;  // T^1
  Eigen::MatrixXd y_control;   // Y^0(t), n x (tau+1)
  Eigen::MatrixXd y_treated;   // Y^1(t)
};

void save_counterfactual_csv(const CounterfactualPanel& panel, const std::string& path);

// Y(t) = Y^A(t) for t <= T and T = T^A, exactly.
bool consistent(const CounterfactualPanel& panel, const TrialDataset& data);

// Drop covariates (the L = emptyset view of the same trial).
TrialDataset strip_covariates(const TrialDataset& data);

}  // namespace pairlot
