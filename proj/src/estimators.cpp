#include "pairlot/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "pairlot/rng.hpp"
#include "pairlot/stats.hpp"

namespace pairlot {

std::string to_string(EstimandId id) {
  switch (id) {
    case EstimandId::PLOT_unadj: return "PLOT_unadj";
    case EstimandId::PLOT_adj: return "PLOT_adj";
    case EstimandId::CPLOT: return "CPLOT";
    case EstimandId::PLOT_ratio: return "PLOT_ratio";
    case EstimandId::CPLOT_ratio: return "CPLOT_ratio";
    case EstimandId::SACE: return "SACE";
    case EstimandId::IPCW: return "IPCW";
    case EstimandId::LOCF: return "LOCF";
    case EstimandId::SURVIVORS: return "SURVIVORS";
  }
  throw std::logic_error("bad estimand id");
}

std::string results_csv_header() { return "estimand_id,t,point,se,ci_lo,ci_hi,n_used,flags"; }

std::string results_csv_row(const EstimateResult& r) {
  std::ostringstream os;
  os.precision(17);
  os << to_string(r.estimand) << ',' << r.t << ',' << r.point << ',' << r.se << ',' << r.ci_lo
     << ',' << r.ci_hi << ',' << r.n_used << ',' << (r.flags.empty() ? r.method : r.flags);
  return os.str();
}

namespace {

void require_horizon(const TrialDataset& data, int t) {
  if (t < 0 || t > data.tau)
    throw std::invalid_argument("horizon t must lie in 0..tau (got " + std::to_string(t) + ")");
}

void require_both_arms(const TrialDataset& data) {
  if (data.n_arm(0) == 0 || data.n_arm(1) == 0)
    throw std::invalid_argument("both arms required");
}

double z_quantile(double alpha) { return normal_quantile(1.0 - alpha / 2.0); }

void attach_normal_ci(EstimateResult& r, double alpha) {
  const double z = z_quantile(alpha);
  r.ci_lo = r.point - z * r.se;
  r.ci_hi = r.point + z * r.se;
}

// Y(s) * I(T > u); the indicator guards every read of a possibly masked cell.
double y_ind(const TrialDataset& data, int i, int s, int u) {
  return data.ice_time[static_cast<std::size_t>(i)] > u ? data.outcomes(i, s) : 0.0;
}

struct PlotPieces {
  std::vector<double> subject_sum;  // S_i = sum_s xi_hat(s,s-1) - I(t>s) xi_hat(s,s)
  std::vector<double> num_if;       // treated-half uncentered IF contributions
  std::vector<double> den_if;       // control-half
  double num_hat = 0.0;
  double den_hat = 0.0;
};

// Core of the debiased estimators: eta/gamma AIPW means and the per-subject
// xi compositions, for every (s, u) in the index set up to horizon t.
PlotPieces compute_plot_pieces(const TrialDataset& data, const NuisanceFit& nuis, int t,
                               PropensityModel variant) {
  const int n = data.n;
  PlotPieces out;
  out.subject_sum.assign(static_cast<std::size_t>(n), 0.0);
  out.num_if.assign(static_cast<std::size_t>(n), 0.0);
  out.den_if.assign(static_cast<std::size_t>(n), 0.0);

  std::vector<double> phi_eta[2], phi_gamma[2];
  for (int a = 0; a <= 1; ++a) {
    phi_eta[a].resize(static_cast<std::size_t>(n));
    phi_gamma[a].resize(static_cast<std::size_t>(n));
  }

  for (int s = 0; s <= t; ++s) {
    for (int pass = 0; pass <= 1; ++pass) {
      const int u = pass == 0 ? s - 1 : s;
      if (pass == 1 && t <= s) continue;  // the I(t>s) guard, by loop structure
      double eta_hat[2], gamma_hat[2];
      for (int a = 0; a <= 1; ++a) {
        KahanSum eta_sum, gamma_sum;
        for (int i = 0; i < n; ++i) {
          const double prob =
              variant == PropensityModel::semiparametric
                  ? (a == 1 ? nuis.pi_hat : 1.0 - nuis.pi_hat)
                  : nuis.prob_arm(a, i);
          const double ind_arm = data.arm[static_cast<std::size_t>(i)] == a ? 1.0 : 0.0;
          const double ind_t = data.ice_time[static_cast<std::size_t>(i)] > u ? 1.0 : 0.0;
          const double p_au = nuis.p(a, u, i);
          const double pm = p_au * nuis.mu(a, s, u, i);
          const double pe = p_au + ind_arm / prob * (ind_t - p_au);
          const double pg = pm + ind_arm / prob * (y_ind(data, i, s, u) - pm);
          phi_eta[a][static_cast<std::size_t>(i)] = pe;
          phi_gamma[a][static_cast<std::size_t>(i)] = pg;
          eta_sum.add(pe);
          gamma_sum.add(pg);
        }
        eta_hat[a] = eta_sum.value() / n;
        gamma_hat[a] = gamma_sum.value() / n;
      }
      const double sign = pass == 0 ? 1.0 : -1.0;
      for (int i = 0; i < n; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        const double xi = phi_eta[0][idx] * gamma_hat[1] + eta_hat[0] * phi_gamma[1][idx] -
                          phi_eta[1][idx] * gamma_hat[0] - eta_hat[1] * phi_gamma[0][idx];
        out.subject_sum[idx] += sign * xi;
        // uncentered IF of the product functionals eta0*gamma1 and eta1*gamma0
        out.num_if[idx] += sign * (phi_eta[0][idx] * gamma_hat[1] + eta_hat[0] * phi_gamma[1][idx] -
                                   eta_hat[0] * gamma_hat[1]);
        out.den_if[idx] += sign * (phi_eta[1][idx] * gamma_hat[0] + eta_hat[1] * phi_gamma[0][idx] -
                                   eta_hat[1] * gamma_hat[0]);
      }
      out.num_hat += sign * eta_hat[0] * gamma_hat[1];
      out.den_hat += sign * eta_hat[1] * gamma_hat[0];
    }
  }
  return out;
}

struct CplotPieces {
  std::vector<double> subject_sum;  // per-subject bracket of Eq-style zeta contrasts
  std::vector<double> num_if;       // treated half
  std::vector<double> den_if;       // control half
};

CplotPieces compute_cplot_pieces(const TrialDataset& data, const NuisanceFit& nuis, int t,
                                 PropensityModel variant) {
  const int n = data.n;
  CplotPieces out;
  out.subject_sum.assign(static_cast<std::size_t>(n), 0.0);
  out.num_if.assign(static_cast<std::size_t>(n), 0.0);
  out.den_if.assign(static_cast<std::size_t>(n), 0.0);

  for (int s = 0; s <= t; ++s) {
    for (int pass = 0; pass <= 1; ++pass) {
      const int u = pass == 0 ? s - 1 : s;
      if (pass == 1 && t <= s) continue;
      const double sign = pass == 0 ? 1.0 : -1.0;
      for (int i = 0; i < n; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        const double ind_t = data.ice_time[idx] > u ? 1.0 : 0.0;
        const double yv = y_ind(data, i, s, u);
        double zeta[2];
        for (int a = 0; a <= 1; ++a) {
          const double prob_a =
              variant == PropensityModel::semiparametric
                  ? (a == 1 ? nuis.pi_hat : 1.0 - nuis.pi_hat)
                  : nuis.prob_arm(a, i);
          const double prob_o =
              variant == PropensityModel::semiparametric
                  ? (a == 1 ? 1.0 - nuis.pi_hat : nuis.pi_hat)
                  : nuis.prob_arm(1 - a, i);
          const double ind_a = data.arm[idx] == a ? 1.0 : 0.0;
          const double ind_o = data.arm[idx] == 1 - a ? 1.0 : 0.0;
          const double p_own = nuis.p(a, u, i);
          const double p_other = nuis.p(1 - a, u, i);
          const double m = nuis.mu(a, s, u, i);
          zeta[a] = p_own * p_other * m +
                    ind_o / prob_o * (ind_t - p_other) * p_own * m +
                    p_other * ind_a / prob_a * (yv - p_own * m);
        }
        out.subject_sum[idx] += sign * (zeta[1] - zeta[0]);
        out.num_if[idx] += sign * zeta[1];
        out.den_if[idx] += sign * zeta[0];
      }
    }
  }
  return out;
}

}  // namespace

EstimateResult plot_unadj_pairwise(const TrialDataset& data, int t, double alpha, int bootstrap_b,
                                   std::uint64_t seed) {
  require_horizon(data, t);
  require_both_arms(data);
  const int n = data.n;

  auto pair_estimate = [&data, t](const std::vector<int>& idx) {
    KahanSum sum;
    long pairs = 0;
    for (int i : idx) {
      if (data.arm[static_cast<std::size_t>(i)] != 1) continue;
      for (int j : idx) {
        if (data.arm[static_cast<std::size_t>(j)] != 0) continue;
        const int m = std::min({data.ice_time[static_cast<std::size_t>(i)],
                                data.ice_time[static_cast<std::size_t>(j)], t});
        sum.add(data.outcomes(i, m) - data.outcomes(j, m));
        ++pairs;
      }
    }
    if (pairs == 0) throw std::runtime_error("no treated-control pairs");
    return sum.value() / static_cast<double>(pairs);
  };

  std::vector<int> all(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) all[static_cast<std::size_t>(i)] = i;

  EstimateResult r;
  r.estimand = EstimandId::PLOT_unadj;
  r.method = "PLOTunadj-pairwise";
  r.t = t;
  r.n_used = n;
  r.point = pair_estimate(all);
  r.flags = "pairwise;B=" + std::to_string(bootstrap_b);

  if (bootstrap_b > 0) {
    Xoshiro256pp rng(seed);
    std::vector<double> boot;
    boot.reserve(static_cast<std::size_t>(bootstrap_b));
    std::vector<int> resample(static_cast<std::size_t>(n));
    int attempts = 0;
    while (static_cast<int>(boot.size()) < bootstrap_b && attempts < 20 * bootstrap_b) {
      ++attempts;
      int n1 = 0;
      for (int i = 0; i < n; ++i) {
        resample[static_cast<std::size_t>(i)] = rng.uniform_int(n);
        n1 += data.arm[static_cast<std::size_t>(resample[static_cast<std::size_t>(i)])];
      }
      if (n1 == 0 || n1 == n) continue;  // single-arm resample, redraw
      boot.push_back(pair_estimate(resample));
    }
    r.se = sample_sd(boot);
    attach_normal_ci(r, alpha);
    std::sort(boot.begin(), boot.end());
    const auto lo_idx = static_cast<std::size_t>(std::floor(alpha / 2.0 * (boot.size() - 1)));
    const auto hi_idx = static_cast<std::size_t>(std::ceil((1.0 - alpha / 2.0) * (boot.size() - 1)));
    r.ci_lo_percentile = boot[lo_idx];
    r.ci_hi_percentile = boot[hi_idx];
  }
  return r;
}

EstimateResult plot_unadj_fast(const TrialDataset& data, int t, double alpha) {
  require_horizon(data, t);
  require_both_arms(data);
  const int n = data.n;

  // marginal survival proportions and the raw sample propensity
  const double pi1 = static_cast<double>(data.n_arm(1)) / n;
  std::vector<double> p_arm[2];
  for (int a = 0; a <= 1; ++a) {
    p_arm[a].assign(static_cast<std::size_t>(data.tau + 2), 0.0);
    const double n_a = data.n_arm(a);
    for (int s = -1; s <= data.tau; ++s) {
      int count = 0;
      for (int i = 0; i < n; ++i)
        if (data.arm[static_cast<std::size_t>(i)] == a &&
            data.ice_time[static_cast<std::size_t>(i)] > s)
          ++count;
      p_arm[a][static_cast<std::size_t>(s + 1)] = count / n_a;
    }
  }

  KahanSum total;
  for (int i = 0; i < n; ++i) {
    const double a_i = data.arm[static_cast<std::size_t>(i)];
    for (int s = 0; s <= t; ++s) {
      const double w1 = a_i / pi1 * p_arm[0][static_cast<std::size_t>(s)] -
                        (1.0 - a_i) / (1.0 - pi1) * p_arm[1][static_cast<std::size_t>(s)];
      total.add(y_ind(data, i, s, s - 1) * w1);
      if (t > s) {
        const double w2 = a_i / pi1 * p_arm[0][static_cast<std::size_t>(s + 1)] -
                          (1.0 - a_i) / (1.0 - pi1) * p_arm[1][static_cast<std::size_t>(s + 1)];
        total.add(-y_ind(data, i, s, s) * w2);
      }
    }
  }

  EstimateResult r;
  r.estimand = EstimandId::PLOT_unadj;
  r.method = "PLOTunadj";
  r.t = t;
  r.n_used = n;
  r.point = total.value() / n;
  r.flags = "fast";

  // IF-based SE through the no-covariate nuisance reduction
  const NuisanceFit marginal = marginal_nuisance(data);
  const PlotPieces pieces =
      compute_plot_pieces(strip_covariates(data), marginal, t, PropensityModel::semiparametric);
  r.se = sample_sd(pieces.subject_sum) / std::sqrt(static_cast<double>(n));
  r.if_contributions.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    r.if_contributions[static_cast<std::size_t>(i)] =
        pieces.subject_sum[static_cast<std::size_t>(i)] - r.point;
  attach_normal_ci(r, alpha);
  return r;
}

EstimateResult plot_adjusted(const TrialDataset& data, const NuisanceFit& nuisance, int t,
                             PropensityModel variant, double alpha) {
  require_horizon(data, t);
  require_both_arms(data);
  if (nuisance.n != data.n || nuisance.tau != data.tau)
    throw std::invalid_argument("nuisance fit does not match the dataset");
  const int n = data.n;
  const PlotPieces pieces = compute_plot_pieces(data, nuisance, t, variant);

  KahanSum sum;
  for (double v : pieces.subject_sum) {
    if (!std::isfinite(v)) throw std::runtime_error("non-finite influence contribution");
    sum.add(v);
  }

  EstimateResult r;
  r.estimand = EstimandId::PLOT_adj;
  r.method = variant == PropensityModel::semiparametric ? "PLOTadj" : "PLOTadj-np";
  r.t = t;
  r.n_used = n;
  r.point = sum.value() / (2.0 * n);
  r.se = sample_sd(pieces.subject_sum) / std::sqrt(static_cast<double>(n));
  r.if_contributions.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    r.if_contributions[static_cast<std::size_t>(i)] =
        pieces.subject_sum[static_cast<std::size_t>(i)] - r.point;
  r.flags = variant == PropensityModel::semiparametric ? "semiparametric" : "nonparametric";
  attach_normal_ci(r, alpha);
  return r;
}

EstimateResult cplot(const TrialDataset& data, const NuisanceFit& nuisance, int t, double alpha,
                     PropensityModel variant) {
  require_horizon(data, t);
  require_both_arms(data);
  if (nuisance.n != data.n || nuisance.tau != data.tau)
    throw std::invalid_argument("nuisance fit does not match the dataset");
  const int n = data.n;
  const CplotPieces pieces = compute_cplot_pieces(data, nuisance, t, variant);

  KahanSum sum;
  for (double v : pieces.subject_sum) {
    if (!std::isfinite(v)) throw std::runtime_error("non-finite influence contribution");
    sum.add(v);
  }

  EstimateResult r;
  r.estimand = EstimandId::CPLOT;
  r.method = "CPLOT";
  r.t = t;
  r.n_used = n;
  r.point = sum.value() / n;
  r.se = sample_sd(pieces.subject_sum) / std::sqrt(static_cast<double>(n));
  r.if_contributions = pieces.subject_sum;
  r.flags = variant == PropensityModel::semiparametric ? "semiparametric" : "nonparametric";
  attach_normal_ci(r, alpha);
  return r;
}

EstimateResult ratio_estimand(const TrialDataset& data, const NuisanceFit& nuisance, int t,
                              RatioKind which, double alpha, PropensityModel variant) {
  require_horizon(data, t);
  require_both_arms(data);
  const int n = data.n;

  std::vector<double> num_if, den_if;
  double num_hat, den_hat;
  if (which == RatioKind::PLOT) {
    PlotPieces pieces = compute_plot_pieces(data, nuisance, t, variant);
    num_if = std::move(pieces.num_if);
    den_if = std::move(pieces.den_if);
    num_hat = pieces.num_hat;
    den_hat = pieces.den_hat;
  } else {
    CplotPieces pieces = compute_cplot_pieces(data, nuisance, t, variant);
    num_if = std::move(pieces.num_if);
    den_if = std::move(pieces.den_if);
    num_hat = mean(num_if);
    den_hat = mean(den_if);
  }

  if (std::fabs(den_hat) <= 1e-6)
    throw std::runtime_error("ratio denominator below threshold (|" + std::to_string(den_hat) +
                             "| <= 1e-6)");

  EstimateResult r;
  r.estimand = which == RatioKind::PLOT ? EstimandId::PLOT_ratio : EstimandId::CPLOT_ratio;
  r.method = which == RatioKind::PLOT ? "PLOTratio" : "CPLOTratio";
  r.t = t;
  r.n_used = n;
  r.point = num_hat / den_hat;
  r.if_contributions.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    // first-order delta method around (num_hat, den_hat)
    r.if_contributions[idx] = r.point + (num_if[idx] - num_hat) / den_hat -
                              num_hat / (den_hat * den_hat) * (den_if[idx] - den_hat);
  }
  r.se = sample_sd(r.if_contributions) / std::sqrt(static_cast<double>(n));
  r.flags = "delta-method";
  attach_normal_ci(r, alpha);
  return r;
}

WaldTest wald_test(const EstimateResult& result, double null_value) {
  if (!(result.se > 0.0)) throw std::invalid_argument("wald_test: se must be positive");
  WaldTest w;
  w.z = (result.point - null_value) / result.se;
  w.p_value = 2.0 * (1.0 - normal_cdf(std::fabs(w.z)));
  return w;
}

}  // namespace pairlot
