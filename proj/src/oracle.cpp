#include "pairlot/oracle.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <stdexcept>

#include "pairlot/stats.hpp"

namespace pairlot {

namespace {

// Gauss-Hermite nodes/weights via the Golub-Welsch Jacobi matrix, transformed
// so that integral f(u) phi(u) du = sum w_k f(x_k) for standard normal phi.
struct Quadrature {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;
};

const Quadrature& gauss_hermite_40() {
  static const Quadrature quad = [] {
    const int m = 40;
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(m, m);
    for (int k = 1; k < m; ++k) {
      const double b = std::sqrt(k / 2.0);
      jacobi(k, k - 1) = b;
      jacobi(k - 1, k) = b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
    Quadrature q;
    q.nodes = es.eigenvalues() * std::sqrt(2.0);  // physicists' -> standard normal
    q.weights.resize(m);
    for (int k = 0; k < m; ++k) {
      const double v0 = es.eigenvectors()(0, k);
      q.weights(k) = v0 * v0;  // already sums to 1 under the normal weight
    }
    return q;
  }();
  return quad;
}

double weibull_survival(double x, double scale) {
  return std::exp(-std::pow(x / scale, 1.5));
}

}  // namespace

NuisanceFit oracle_nuisance(const DgpConfig& config, const TrialDataset& data) {
  if (config.setting != Setting::example && config.setting != Setting::setting3)
    throw std::invalid_argument("oracle nuisances implemented for the example model and setting 3");
  check_config(config);

  NuisanceFit fit;
  fit.allocate(data.n, data.tau);
  fit.fold_assignment.assign(static_cast<std::size_t>(data.n), 0);
  fit.pi_hat = fit_propensity(data);
  fit.propensity.setConstant(fit.pi_hat);
  fit.binary_outcome = config.setting == Setting::setting3;

  const auto& quad = gauss_hermite_40();
  const double a_ice = config.null_ice ? 0.0 : 1.0;

  for (int i = 0; i < data.n; ++i) {
    const double l = data.covariates(i, 0);
    for (int a = 0; a <= 1; ++a) {
      // survival p(a, s, L): latent integrated out where it enters the scale
      for (int s = 0; s <= data.tau; ++s) {
        double value = 0.0;
        if (s == data.tau) {
          value = 0.0;  // T <= tau
        } else if (config.setting == Setting::setting3) {
          value = weibull_survival(s + 1.0, std::exp(2.5 + a_ice * 0.8 * a + l));
        } else {
          for (int k = 0; k < quad.nodes.size(); ++k) {
            const double u = quad.nodes(k);
            const double scale =
                std::exp(2.2 + a_ice * (1.1 * a + 0.15 * (2.0 * a - 1.0) * u) + l);
            value += quad.weights(k) * weibull_survival(s + 1.0, scale);
          }
        }
        fit.p_mat[a](s + 1, i) = value;
      }

      // outcome means mu(a, s, u, L)
      for (int s = 0; s <= data.tau; ++s) {
        for (int utype = 0; utype <= 1; ++utype) {
          const int u = utype == 0 ? s - 1 : s;
          double value = 0.0;
          if (config.setting == Setting::setting3) {
            if (s == 0) {
              value = 0.0;
            } else {
              // U independent of T given L, so conditioning on T>u drops out
              for (int k = 0; k < quad.nodes.size(); ++k)
                value += quad.weights(k) * expit(0.5 * s + 5.0 * l + quad.nodes(k));
            }
          } else {
            const auto& prm = config.example;
            double cond_u = 0.0;  // E[U | T > u, A = a, L]
            if (u >= 0) {
              double num = 0.0, den = 0.0;
              for (int k = 0; k < quad.nodes.size(); ++k) {
                const double uu = quad.nodes(k);
                const double scale =
                    std::exp(2.2 + a_ice * (1.1 * a + 0.15 * (2.0 * a - 1.0) * uu) + l);
                const double surv =
                    u == data.tau ? 0.0 : weibull_survival(u + 1.0, scale);
                num += quad.weights(k) * uu * surv;
                den += quad.weights(k) * surv;
              }
              cond_u = den > 1e-300 ? num / den : 0.0;
            }
            value = prm.beta0 * l + prm.beta1 * l * s + (prm.gamma0 + prm.gamma1 * s) * cond_u;
          }
          (utype == 0 ? fit.mu_lag[a] : fit.mu_cur[a])(s, i) = value;
        }
      }
    }
  }
  return fit;
}

}  // namespace pairlot
