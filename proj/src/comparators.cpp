#include "pairlot/comparators.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "pairlot/glm.hpp"
#include "pairlot/rng.hpp"
#include "pairlot/stats.hpp"

namespace pairlot {

namespace {

void attach_normal_ci(EstimateResult& r, double alpha) {
  const double z = normal_quantile(1.0 - alpha / 2.0);
  r.ci_lo = r.point - z * r.se;
  r.ci_hi = r.point + z * r.se;
}

// Baseline design [1, L, Y(0)] over the given subjects.
Eigen::MatrixXd baseline_design(const TrialDataset& data, const std::vector<int>& subjects) {
  Eigen::MatrixXd x(static_cast<int>(subjects.size()), data.d + 2);
  for (std::size_t r = 0; r < subjects.size(); ++r) {
    const int i = subjects[r];
    x(static_cast<int>(r), 0) = 1.0;
    for (int j = 0; j < data.d; ++j) x(static_cast<int>(r), 1 + j) = data.covariates(i, j);
    x(static_cast<int>(r), 1 + data.d) = data.outcomes(i, 0);
  }
  return x;
}

Eigen::MatrixXd select_columns(const Eigen::MatrixXd& x, const std::vector<int>& keep) {
  Eigen::MatrixXd out(x.rows(), static_cast<int>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) out.col(static_cast<int>(k)) = x.col(keep[k]);
  return out;
}

}  // namespace

EstimateResult sace(const TrialDataset& data, int t, double alpha, int bootstrap_b,
                    std::uint64_t seed) {
  if (t != data.tau) throw std::invalid_argument("sace targets end-of-study survivors (t = tau)");

  auto point_of = [&data](const std::vector<int>& idx) {
    // per-arm survival model on (L, Y0), then cross-arm survivor weighting
    Eigen::VectorXd beta[2];
    std::vector<int> kept[2];
    for (int a = 0; a <= 1; ++a) {
      std::vector<int> members;
      for (int i : idx)
        if (data.arm[static_cast<std::size_t>(i)] == a) members.push_back(i);
      if (members.empty()) throw std::runtime_error("sace: empty arm");
      Eigen::MatrixXd x = baseline_design(data, members);
      kept[a] = drop_degenerate_columns(x);
      Eigen::VectorXd y(static_cast<int>(members.size()));
      for (std::size_t r = 0; r < members.size(); ++r)
        y(static_cast<int>(r)) =
            data.ice_time[static_cast<std::size_t>(members[r])] == data.tau ? 1.0 : 0.0;
      beta[a] = logistic(x, y, Eigen::VectorXd::Ones(x.rows())).beta;
    }

    double wsum[2] = {0.0, 0.0};
    double wy[2] = {0.0, 0.0};
    bool any[2] = {false, false};
    for (int i : idx) {
      const auto ui = static_cast<std::size_t>(i);
      if (data.ice_time[ui] != data.tau) continue;
      const int a = data.arm[ui];
      const std::vector<int> one = {i};
      Eigen::MatrixXd x = select_columns(baseline_design(data, one), kept[1 - a]);
      const double w = expit((x * beta[1 - a])(0));  // survive under the opposite arm
      wsum[a] += w;
      wy[a] += w * data.outcomes(i, data.tau);
      any[a] = true;
    }
    if (!any[0] || !any[1] || wsum[0] <= 0.0 || wsum[1] <= 0.0)
      throw std::runtime_error("sace: no survivors in an arm");
    return wy[1] / wsum[1] - wy[0] / wsum[0];
  };

  std::vector<int> all(static_cast<std::size_t>(data.n));
  for (int i = 0; i < data.n; ++i) all[static_cast<std::size_t>(i)] = i;

  EstimateResult r;
  r.estimand = EstimandId::SACE;
  r.method = "SACE";
  r.t = t;
  r.n_used = data.n;
  r.point = point_of(all);
  r.flags = "hayden;B=" + std::to_string(bootstrap_b);

  if (bootstrap_b > 0) {
    Xoshiro256pp rng(seed);
    std::vector<double> boot;
    std::vector<int> resample(all.size());
    int attempts = 0;
    while (static_cast<int>(boot.size()) < bootstrap_b && attempts < 20 * bootstrap_b) {
      ++attempts;
      for (auto& v : resample) v = rng.uniform_int(data.n);
      try {
        boot.push_back(point_of(resample));
      } catch (const std::runtime_error&) {
        // degenerate resample (no survivors in an arm), redraw
      }
    }
    if (boot.size() < 2) throw std::runtime_error("sace: bootstrap failed to resample survivors");
    r.se = sample_sd(boot);
    attach_normal_ci(r, alpha);
    std::sort(boot.begin(), boot.end());
    r.ci_lo_percentile = boot[static_cast<std::size_t>(std::floor(alpha / 2.0 * (boot.size() - 1)))];
    r.ci_hi_percentile =
        boot[static_cast<std::size_t>(std::ceil((1.0 - alpha / 2.0) * (boot.size() - 1)))];
  }
  return r;
}

EstimateResult ipcw(const TrialDataset& data, int t, double alpha) {
  if (t != data.tau) throw std::invalid_argument("ipcw targets end-of-study survivors (t = tau)");
  const int tau = data.tau;

  std::vector<int> survivors;
  for (int i = 0; i < data.n; ++i)
    if (data.ice_time[static_cast<std::size_t>(i)] == tau) survivors.push_back(i);
  if (survivors.empty()) throw std::runtime_error("ipcw: no survivors");

  // per-arm pooled discrete-time hazard: event(t') = I(T = t', T < tau) among T >= t',
  // design [1, t', Y(t'-1), Y(0), L]
  Eigen::VectorXd surv_prob = Eigen::VectorXd::Ones(data.n);
  for (int a = 0; a <= 1; ++a) {
    std::vector<int> rows_subject, rows_visit;
    for (int i = 0; i < data.n; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      if (data.arm[ui] != a) continue;
      for (int v = 1; v <= tau; ++v)
        if (data.ice_time[ui] >= v) {
          rows_subject.push_back(i);
          rows_visit.push_back(v);
        }
    }
    if (rows_subject.empty()) throw std::runtime_error("ipcw: empty arm");
    Eigen::MatrixXd x(static_cast<int>(rows_subject.size()), 4 + data.d);
    Eigen::VectorXd y(static_cast<int>(rows_subject.size()));
    for (std::size_t r = 0; r < rows_subject.size(); ++r) {
      const int i = rows_subject[r];
      const int v = rows_visit[r];
      x(static_cast<int>(r), 0) = 1.0;
      x(static_cast<int>(r), 1) = v;
      x(static_cast<int>(r), 2) = data.outcomes(i, v - 1);
      x(static_cast<int>(r), 3) = data.outcomes(i, 0);
      for (int j = 0; j < data.d; ++j) x(static_cast<int>(r), 4 + j) = data.covariates(i, j);
      const int t_ice = data.ice_time[static_cast<std::size_t>(i)];
      y(static_cast<int>(r)) = (t_ice == v && t_ice < tau) ? 1.0 : 0.0;
    }
    std::vector<int> kept = drop_degenerate_columns(x);
    const Eigen::VectorXd beta = logistic(x, y, Eigen::VectorXd::Ones(x.rows())).beta;

    for (int i : survivors) {
      if (data.arm[static_cast<std::size_t>(i)] != a) continue;
      double surv = 1.0;
      for (int v = 1; v <= tau; ++v) {
        Eigen::VectorXd row_full(4 + data.d);
        row_full(0) = 1.0;
        row_full(1) = v;
        row_full(2) = data.outcomes(i, v - 1);
        row_full(3) = data.outcomes(i, 0);
        for (int j = 0; j < data.d; ++j) row_full(4 + j) = data.covariates(i, j);
        double eta = 0.0;
        for (std::size_t k = 0; k < kept.size(); ++k) eta += beta(static_cast<int>(k)) * row_full(kept[k]);
        surv *= 1.0 - expit(eta);
      }
      surv_prob(i) = surv;
    }
  }

  // truncation (probability floor 0.02)
  int truncated = 0;
  for (int i : survivors)
    if (surv_prob(i) < 0.02) {
      surv_prob(i) = 0.02;
      ++truncated;
    }

  // survivor-only outcome model: Y(tau) ~ [1, A, L, Y0], weights 1/P
  Eigen::MatrixXd xs(static_cast<int>(survivors.size()), 3 + data.d);
  Eigen::VectorXd ys(static_cast<int>(survivors.size()));
  Eigen::VectorXd w(static_cast<int>(survivors.size()));
  for (std::size_t r = 0; r < survivors.size(); ++r) {
    const int i = survivors[r];
    xs(static_cast<int>(r), 0) = 1.0;
    xs(static_cast<int>(r), 1) = data.arm[static_cast<std::size_t>(i)];
    for (int j = 0; j < data.d; ++j) xs(static_cast<int>(r), 2 + j) = data.covariates(i, j);
    xs(static_cast<int>(r), 2 + data.d) = data.outcomes(i, 0);
    ys(static_cast<int>(r)) = data.outcomes(i, tau);
    w(static_cast<int>(r)) = 1.0 / surv_prob(i);
  }
  std::vector<int> kept = drop_degenerate_columns(xs);
  int a_col = -1;
  for (std::size_t k = 0; k < kept.size(); ++k)
    if (kept[k] == 1) a_col = static_cast<int>(k);
  if (a_col < 0) throw std::runtime_error("ipcw: treatment column degenerate among survivors");

  const bool binary = data.binary_outcomes();
  Eigen::VectorXd beta;
  Eigen::MatrixXd cov;
  if (binary) {
    beta = logistic(xs, ys, w).beta;
    cov = logistic_sandwich(xs, ys, w, beta);
  } else {
    beta = wls(xs, ys, w);
    cov = wls_sandwich(xs, ys, w, beta);
  }

  EstimateResult r;
  r.estimand = EstimandId::IPCW;
  r.method = "IPCW";
  r.t = t;
  r.n_used = static_cast<int>(survivors.size());
  r.point = beta(a_col);
  r.se = std::sqrt(std::max(cov(a_col, a_col), 0.0));
  r.flags = binary ? "glm-binomial;sandwich" : "wls;sandwich";
  if (truncated * 2 > static_cast<int>(survivors.size()))
    r.flags += ";warn:weight-truncation>50%";
  attach_normal_ci(r, alpha);
  return r;
}

EstimateResult locf(const TrialDataset& data, double alpha) {
  std::vector<double> last[2];
  for (int i = 0; i < data.n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    last[data.arm[ui]].push_back(data.outcomes(i, data.ice_time[ui]));
  }
  const WelchResult wr = welch_diff(last[1], last[0]);
  EstimateResult r;
  r.estimand = EstimandId::LOCF;
  r.method = "LOCF";
  r.t = data.tau;
  r.n_used = data.n;
  r.point = wr.diff;
  r.se = wr.se;
  r.flags = "welch";
  attach_normal_ci(r, alpha);
  return r;
}

EstimateResult survivors_only(const TrialDataset& data, double alpha) {
  std::vector<double> vals[2];
  for (int i = 0; i < data.n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    if (data.ice_time[ui] == data.tau) vals[data.arm[ui]].push_back(data.outcomes(i, data.tau));
  }
  if (vals[0].size() < 2 || vals[1].size() < 2)
    throw std::runtime_error("survivors_only: empty survivor stratum");
  const WelchResult wr = welch_diff(vals[1], vals[0]);
  EstimateResult r;
  r.estimand = EstimandId::SURVIVORS;
  r.method = "Survivors";
  r.t = data.tau;
  r.n_used = static_cast<int>(vals[0].size() + vals[1].size());
  r.point = wr.diff;
  r.se = wr.se;
  r.flags = "welch";
  attach_normal_ci(r, alpha);
  return r;
}

}  // namespace pairlot
