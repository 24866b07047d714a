#pragma once

#include <Eigen/Dense>
#include <vector>

namespace pairlot {

struct GlmFit {
  Eigen::VectorXd beta;  // aligned with the design's columns
  bool converged = true;
  bool separation_fallback = false;  // logistic refitted with ridge 1e-4
};

// Weighted least squares; rank-deficiency handled by a column-pivoted QR.
Eigen::VectorXd wls(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                    const Eigen::VectorXd& weights);

// Damped-Newton (weighted) logistic regression. A tiny ridge keeps the
// Hessian invertible; on separation the fit is repeated with ridge 1e-4.
GlmFit logistic(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                const Eigen::VectorXd& weights, double ridge = 1e-8, int max_iter = 100);

// HC0 sandwich variance for WLS with fixed weights.
Eigen::MatrixXd wls_sandwich(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                             const Eigen::VectorXd& weights, const Eigen::VectorXd& beta);

// HC0 sandwich variance for weighted logistic with fixed weights.
Eigen::MatrixXd logistic_sandwich(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                                  const Eigen::VectorXd& weights, const Eigen::VectorXd& beta);

// Drops zero-variance columns (keeps column 0, the intercept).
// Returns the kept original column indices.
std::vector<int> drop_degenerate_columns(Eigen::MatrixXd& design);

}  // namespace pairlot
