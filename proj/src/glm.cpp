#include "pairlot/glm.hpp"

#include <algorithm>
#include <cmath>

#include "pairlot/stats.hpp"

namespace pairlot {

Eigen::VectorXd wls(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                    const Eigen::VectorXd& weights) {
  const Eigen::MatrixXd xw = design.array().colwise() * weights.array().sqrt();
  const Eigen::VectorXd yw = response.array() * weights.array().sqrt();
  return xw.colPivHouseholderQr().solve(yw);
}

namespace {

double logistic_nll(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                    const Eigen::VectorXd& w, const Eigen::VectorXd& beta, double ridge) {
  double nll = 0.0;
  const Eigen::VectorXd eta = x * beta;
  for (int i = 0; i < x.rows(); ++i) {
    const double e = std::clamp(eta(i), -35.0, 35.0);
    nll -= w(i) * (y(i) * e - std::log1p(std::exp(e)));
  }
  return nll + 0.5 * ridge * beta.squaredNorm();
}

GlmFit logistic_once(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                     const Eigen::VectorXd& w, double ridge, int max_iter) {
  const int p = static_cast<int>(x.cols());
  GlmFit fit;
  fit.beta = Eigen::VectorXd::Zero(p);
  double nll = logistic_nll(x, y, w, fit.beta, ridge);
  for (int iter = 0; iter < max_iter; ++iter) {
    const Eigen::VectorXd eta = x * fit.beta;
    Eigen::VectorXd mu(x.rows()), wt(x.rows());
    for (int i = 0; i < x.rows(); ++i) {
      mu(i) = expit(eta(i));
      wt(i) = w(i) * std::max(mu(i) * (1.0 - mu(i)), 1e-10);
    }
    const Eigen::VectorXd grad = x.transpose() * (w.array() * (y - mu).array()).matrix() -
                                 ridge * fit.beta;
    Eigen::MatrixXd hess = x.transpose() * (x.array().colwise() * wt.array()).matrix();
    hess.diagonal().array() += ridge;
    const Eigen::VectorXd step = hess.ldlt().solve(grad);
    double lambda = 1.0;
    Eigen::VectorXd cand;
    double cand_nll = nll;
    bool moved = false;
    for (int h = 0; h < 30; ++h) {
      cand = fit.beta + lambda * step;
      cand_nll = logistic_nll(x, y, w, cand, ridge);
      if (cand_nll <= nll + 1e-12) {
        moved = true;
        break;
      }
      lambda *= 0.5;
    }
    if (!moved) break;
    const double drop = nll - cand_nll;
    fit.beta = cand;
    nll = cand_nll;
    if (drop < 1e-10) return fit;
  }
  fit.converged = false;
  return fit;
}

}  // namespace

GlmFit logistic(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                const Eigen::VectorXd& weights, double ridge, int max_iter) {
  GlmFit fit = logistic_once(design, response, weights, ridge, max_iter);
  const bool separated = !fit.converged || fit.beta.cwiseAbs().maxCoeff() > 30.0;
  if (separated && ridge < 1e-4) {
    fit = logistic_once(design, response, weights, 1e-4, max_iter);
    fit.separation_fallback = true;
  }
  return fit;
}

Eigen::MatrixXd wls_sandwich(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                             const Eigen::VectorXd& weights, const Eigen::VectorXd& beta) {
  const Eigen::VectorXd resid = response - design * beta;
  const Eigen::MatrixXd bread =
      (design.array().colwise() * weights.array()).matrix().transpose() * design;
  const Eigen::MatrixXd bread_inv =
      bread.ldlt().solve(Eigen::MatrixXd::Identity(design.cols(), design.cols()));
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(design.cols(), design.cols());
  for (int i = 0; i < design.rows(); ++i) {
    const double s = weights(i) * resid(i);
    meat.noalias() += s * s * design.row(i).transpose() * design.row(i);
  }
  return bread_inv * meat * bread_inv;
}

Eigen::MatrixXd logistic_sandwich(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                                  const Eigen::VectorXd& weights, const Eigen::VectorXd& beta) {
  const Eigen::VectorXd eta = design * beta;
  Eigen::MatrixXd bread = Eigen::MatrixXd::Zero(design.cols(), design.cols());
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(design.cols(), design.cols());
  for (int i = 0; i < design.rows(); ++i) {
    const double mu = expit(eta(i));
    const Eigen::MatrixXd outer = design.row(i).transpose() * design.row(i);
    bread.noalias() += weights(i) * mu * (1.0 - mu) * outer;
    const double s = weights(i) * (response(i) - mu);
    meat.noalias() += s * s * outer;
  }
  const Eigen::MatrixXd bread_inv =
      bread.ldlt().solve(Eigen::MatrixXd::Identity(design.cols(), design.cols()));
  return bread_inv * meat * bread_inv;
}

std::vector<int> drop_degenerate_columns(Eigen::MatrixXd& design) {
  std::vector<int> keep;
  for (int j = 0; j < design.cols(); ++j) {
    if (j == 0) {
      keep.push_back(j);
      continue;
    }
    const double lo = design.col(j).minCoeff();
    const double hi = design.col(j).maxCoeff();
    if (hi - lo > 1e-12) keep.push_back(j);
  }
  if (static_cast<int>(keep.size()) == design.cols()) return keep;
  Eigen::MatrixXd reduced(design.rows(), static_cast<int>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) reduced.col(static_cast<int>(k)) = design.col(keep[k]);
  design = std::move(reduced);
  return keep;
}

}  // namespace pairlot
