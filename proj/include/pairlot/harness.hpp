#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pairlot/dgp.hpp"
#include "pairlot/estimators.hpp"
#include "pairlot/learners.hpp"

namespace pairlot {

// Canonical method identifier; accepts the common spellings
// (PLOT_unadj == PLOTunadj, PLOT_adj_CF == PLOTadj-CF, ...).
std::string normalize_method_id(const std::string& id);  // throws on unknown ids
const std::vector<std::string>& known_methods();

struct MethodSpec {
  std::string id;  // normalized
  int folds = 5;   // nuisance cross-fitting folds for adjusted methods
  int bootstrap_b = 500;
};

struct ExperimentConfig {
  DgpConfig dgp;
  int replicates = 300;
  std::vector<MethodSpec> methods;
  double alpha = 0.05;
  int parallelism = 1;
  double truth = 0.0;  // coverage reference; 0 for the null designs
  int horizon = -1;    // default: tau
  LearnerSpec learners;
};

struct MetricsRow {
  std::string method;
  int n_ok = 0;
  int n_failed = 0;
  double mean_estimate = 0.0;
  double median_estimate = 0.0;
  double sd = 0.0;
  double robust_sd = 0.0;  // MAD * 1.4826
  double mean_se = 0.0;
  double median_se = 0.0;
  double coverage = 0.0;   // in [0,1]
  double rejection = 0.0;  // Wald test of 0 at alpha
  bool degenerate_se_flag = false;  // median SE / mean SE < 1e-3
};

struct ReplicateRecord {
  double point = 0.0;
  double se = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  bool ok = false;
  std::string error;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<MetricsRow> rows;
  // per method, per replicate (replicate order, independent of scheduling)
  std::map<std::string, std::vector<ReplicateRecord>> records;

  std::string metrics_csv() const;
  std::string metrics_markdown() const;
  const MetricsRow& row(const std::string& method) const;  // throws if missing
};

ExperimentResult run_experiment(const ExperimentConfig& config);

// Estimate every requested method on one dataset (the CLI `estimate` path).
std::vector<EstimateResult> estimate_methods(const TrialDataset& data,
                                             const std::vector<MethodSpec>& methods,
                                             const LearnerSpec& learners, int t, double alpha,
                                             std::uint64_t seed);

// ---- reference tables -----------------------------------------------------

struct RefCell {
  std::string method;
  std::string metric;  // "mean" | "sd" | "coverage"
  double paper = 0.0;  // reported value, for display
  double lo = 0.0;
  double hi = 0.0;
  bool gating = false;  // informational rows are reported but never fail
};

// table 1: setting 1; table 2: variant "setting2"/"setting3";
// table 3: variant "000"/"010"/"110"/"111" (the (beta1,gamma0,gamma1) choice)
std::vector<RefCell> reference_table(int table, const std::string& variant = "");

struct ComparisonLine {
  RefCell cell;
  double value = 0.0;
  bool pass = true;
};

struct ComparisonReport {
  std::vector<ComparisonLine> lines;
  bool all_gating_pass = true;
  std::string to_string() const;
};

ComparisonReport compare_to_reference(const ExperimentResult& result,
                                      const std::vector<RefCell>& reference);

// Per-arm T-distribution percentages implied by the generative models
// (rows T = 0..tau, columns arm 0/1), with the per-cell tolerance used by
// the replication gate.
Eigen::MatrixXd reference_t_table(Setting setting);
constexpr double kTTableTolerance = 1.5;  // percentage points

struct TTableComparison {
  Eigen::MatrixXd simulated;
  Eigen::MatrixXd reference;
  double max_abs_dev = 0.0;
  bool pass = true;
  std::string to_string() const;
};

TTableComparison compare_t_table(const DgpConfig& config, long n_large);

}  // namespace pairlot
