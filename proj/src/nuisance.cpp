#include "pairlot/nuisance.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "pairlot/rng.hpp"

namespace pairlot {

double NuisanceFit::mu(int a, int s, int u, int i) const {
  if (u == s - 1) return mu_lag[a](s, i);
  if (u == s) return mu_cur[a](s, i);
  throw std::logic_error("mu requested outside the (s,u) index set");
}

void NuisanceFit::allocate(int n_subjects, int tau_horizon) {
  n = n_subjects;
  tau = tau_horizon;
  for (int a = 0; a <= 1; ++a) {
    p_mat[a] = Eigen::MatrixXd::Zero(tau + 2, n);
    p_mat[a].row(0).setOnes();  // s = -1
    mu_lag[a] = Eigen::MatrixXd::Zero(tau + 1, n);
    mu_cur[a] = Eigen::MatrixXd::Zero(tau + 1, n);
  }
  propensity = Eigen::VectorXd::Constant(n, 0.5);
  fold_assignment.clear();  // filled by the fitting entry points
}

void NuisanceFit::check_invariants() const {
  for (int a = 0; a <= 1; ++a)
    for (int i = 0; i < n; ++i) {
      if (p_mat[a](0, i) != 1.0) throw std::logic_error("p(a,-1) != 1");
      for (int s = 0; s <= tau; ++s) {
        const double cur = p_mat[a](s + 1, i);
        if (!(cur >= 0.0 && cur <= 1.0)) throw std::logic_error("p outside [0,1]");
        if (cur > p_mat[a](s, i) + 1e-12) throw std::logic_error("p not monotone in s");
      }
    }
  if (!(pi_hat >= 0.01 && pi_hat <= 0.99)) throw std::logic_error("pi_hat outside [0.01,0.99]");
}

double fit_propensity(const TrialDataset& data) {
  if (data.n_arm(0) == 0 || data.n_arm(1) == 0)
    throw std::invalid_argument("fit_propensity: both arms required");
  double m = 0.0;
  for (int v : data.arm) m += v;
  m /= static_cast<double>(data.n);
  return std::clamp(m, 0.01, 0.99);
}

std::vector<int> make_folds(const TrialDataset& data, int folds, std::uint64_t seed) {
  std::vector<int> fold(static_cast<std::size_t>(data.n), 0);
  if (folds <= 1) return fold;
  // four strata: arm x I(T = tau)
  for (int a = 0; a <= 1; ++a)
    for (int surv = 0; surv <= 1; ++surv) {
      std::vector<int> members;
      for (int i = 0; i < data.n; ++i)
        if (data.arm[static_cast<std::size_t>(i)] == a &&
            (data.ice_time[static_cast<std::size_t>(i)] == data.tau) == (surv == 1))
          members.push_back(i);
      Xoshiro256pp rng(derive_seed(seed, 17 + static_cast<std::uint64_t>(2 * a + surv)));
      for (int i = static_cast<int>(members.size()) - 1; i > 0; --i)
        std::swap(members[static_cast<std::size_t>(i)],
                  members[static_cast<std::size_t>(rng.uniform_int(i + 1))]);
      for (std::size_t pos = 0; pos < members.size(); ++pos)
        fold[static_cast<std::size_t>(members[pos])] = static_cast<int>(pos) % folds;
    }
  return fold;
}

namespace {

int effective_folds(const NuisanceOptions& options) { return std::max(options.folds, 1); }

// Fills the fold labels on first use; the fold count is whatever the labels say.
int ensure_folds(const TrialDataset& data, const NuisanceOptions& options, NuisanceFit& fit) {
  if (static_cast<int>(fit.fold_assignment.size()) != data.n) {
    fit.fold_assignment = options.fold_override.empty()
                              ? make_folds(data, effective_folds(options), options.seed)
                              : options.fold_override;
  }
  return 1 + *std::max_element(fit.fold_assignment.begin(), fit.fold_assignment.end());
}

// Long-format design: [L_1..L_d, s] plus optional L_j*s interactions, or a
// one-hot visit index when requested.
Eigen::MatrixXd long_design(const TrialDataset& data, const std::vector<int>& subjects,
                            const std::vector<int>& visits, const LearnerSpec& spec) {
  const int d = data.d;
  const int n_rows = static_cast<int>(subjects.size());
  int cols = d + (spec.s_onehot ? data.tau : 1);
  if (spec.s_interactions && !spec.s_onehot) cols += d;
  Eigen::MatrixXd x(n_rows, cols);
  for (int r = 0; r < n_rows; ++r) {
    const int i = subjects[static_cast<std::size_t>(r)];
    const int s = visits[static_cast<std::size_t>(r)];
    int c = 0;
    for (int j = 0; j < d; ++j) x(r, c++) = data.covariates(i, j);
    if (spec.s_onehot) {
      for (int k = 1; k <= data.tau; ++k) x(r, c++) = s == k ? 1.0 : 0.0;
    } else {
      x(r, c++) = static_cast<double>(s);
      if (spec.s_interactions)
        for (int j = 0; j < d; ++j) x(r, c++) = data.covariates(i, j) * s;
    }
  }
  return x;
}

}  // namespace

void fit_survival(const TrialDataset& data, const NuisanceOptions& options, NuisanceFit& fit) {
  const int k_folds = ensure_folds(data, options, fit);
  const int tau = data.tau;

  for (int a = 0; a <= 1; ++a) {
    Eigen::MatrixXd hazard(tau, std::max(data.n, 1));  // s = 0..tau-1
    for (int fold = 0; fold < k_folds; ++fold) {
      std::vector<int> predict_set;
      for (int i = 0; i < data.n; ++i)
        if (k_folds == 1 || fit.fold_assignment[static_cast<std::size_t>(i)] == fold)
          predict_set.push_back(i);
      if (predict_set.empty()) continue;

      for (int s = 0; s < tau; ++s) {
        std::vector<int> at_risk;
        for (int i = 0; i < data.n; ++i) {
          const bool in_train =
              k_folds == 1 || fit.fold_assignment[static_cast<std::size_t>(i)] != fold;
          if (in_train && data.arm[static_cast<std::size_t>(i)] == a &&
              data.ice_time[static_cast<std::size_t>(i)] >= s)
            at_risk.push_back(i);
        }
        if (at_risk.empty()) {
          for (int i : predict_set) hazard(s, i) = 1.0;
          fit.warnings.push_back("no at-risk training subjects: arm " + std::to_string(a) +
                                 ", s=" + std::to_string(s) + " (hazard fixed to 1)");
          continue;
        }
        if (data.d == 0) {
          // no covariates: the at-risk event proportion, exactly
          double events = 0.0;
          for (int i : at_risk) events += data.ice_time[static_cast<std::size_t>(i)] == s;
          const double h = events / static_cast<double>(at_risk.size());
          for (int i : predict_set) hazard(s, i) = h;
          continue;
        }
        Eigen::MatrixXd x(static_cast<int>(at_risk.size()), data.d);
        Eigen::VectorXd y(static_cast<int>(at_risk.size()));
        for (std::size_t r = 0; r < at_risk.size(); ++r) {
          x.row(static_cast<int>(r)) = data.covariates.row(at_risk[r]);
          y(static_cast<int>(r)) = data.ice_time[static_cast<std::size_t>(at_risk[r])] == s;
        }
        EnsembleModel model(options.learners, /*binary=*/true);
        model.fit(x, y, derive_seed(options.seed, 0x500 + static_cast<std::uint64_t>(a) * 1024 +
                                                      static_cast<std::uint64_t>(fold) * 64 +
                                                      static_cast<std::uint64_t>(s)));
        Eigen::MatrixXd xp(static_cast<int>(predict_set.size()), data.d);
        for (std::size_t r = 0; r < predict_set.size(); ++r)
          xp.row(static_cast<int>(r)) = data.covariates.row(predict_set[r]);
        const Eigen::VectorXd h = model.predict(xp);
        for (std::size_t r = 0; r < predict_set.size(); ++r)
          hazard(s, predict_set[r]) = std::clamp(h(static_cast<int>(r)), 0.0, 1.0);
      }
    }

    fit.p_mat[a].row(0).setOnes();
    for (int i = 0; i < data.n; ++i) {
      double surv = 1.0;
      for (int s = 0; s < tau; ++s) {
        surv *= 1.0 - hazard(s, i);
        fit.p_mat[a](s + 1, i) = surv;
      }
      fit.p_mat[a](tau + 1, i) = 0.0;  // T <= tau always
    }
  }
}

void fit_outcome_means(const TrialDataset& data, const NuisanceOptions& options,
                       NuisanceFit& fit) {
  const int k_folds = ensure_folds(data, options, fit);
  const int tau = data.tau;
  fit.binary_outcome = data.binary_outcomes();

  for (int a = 0; a <= 1; ++a) {
    for (int utype = 0; utype <= 1; ++utype) {  // 0: u = s-1, 1: u = s
      Eigen::MatrixXd& target = utype == 0 ? fit.mu_lag[a] : fit.mu_cur[a];
      for (int fold = 0; fold < k_folds; ++fold) {
        std::vector<int> predict_set;
        for (int i = 0; i < data.n; ++i)
          if (k_folds == 1 || fit.fold_assignment[static_cast<std::size_t>(i)] == fold)
            predict_set.push_back(i);
        if (predict_set.empty()) continue;

        std::vector<int> subj, visit;
        std::vector<double> yval;
        for (int i = 0; i < data.n; ++i) {
          const bool in_train =
              k_folds == 1 || fit.fold_assignment[static_cast<std::size_t>(i)] != fold;
          if (!in_train || data.arm[static_cast<std::size_t>(i)] != a) continue;
          const int t_ice = data.ice_time[static_cast<std::size_t>(i)];
          for (int s = 0; s <= tau; ++s) {
            const int u = utype == 0 ? s - 1 : s;
            if (t_ice > u) {  // at risk at the relevant horizon
              subj.push_back(i);
              visit.push_back(s);
              yval.push_back(data.outcomes(i, s));
            }
          }
        }

        // arm-level fallback for empty strata
        double grand = 0.0;
        if (!yval.empty()) {
          for (double v : yval) grand += v;
          grand /= static_cast<double>(yval.size());
        } else {
          fit.warnings.push_back("empty at-risk outcome stratum: arm " + std::to_string(a) +
                                 ", u=s" + (utype == 0 ? "-1" : "") + " (fallback to 0)");
        }

        if (data.d == 0) {
          // no covariates: stratified means per visit, exactly
          for (int s = 0; s <= tau; ++s) {
            double sum = 0.0;
            int cnt = 0;
            for (std::size_t r = 0; r < subj.size(); ++r)
              if (visit[r] == s) {
                sum += yval[r];
                ++cnt;
              }
            const double value = cnt > 0 ? sum / cnt : grand;
            for (int i : predict_set) target(s, i) = value;
          }
          continue;
        }

        if (yval.empty()) {
          for (int s = 0; s <= tau; ++s)
            for (int i : predict_set) target(s, i) = 0.0;
          continue;
        }

        const Eigen::MatrixXd x = long_design(data, subj, visit, options.learners);
        Eigen::VectorXd y(static_cast<int>(yval.size()));
        for (std::size_t r = 0; r < yval.size(); ++r) y(static_cast<int>(r)) = yval[r];
        EnsembleModel model(options.learners, fit.binary_outcome);
        model.fit(x, y, derive_seed(options.seed, 0x900 + static_cast<std::uint64_t>(a) * 1024 +
                                                      static_cast<std::uint64_t>(utype) * 512 +
                                                      static_cast<std::uint64_t>(fold)));

        std::vector<int> psubj, pvisit;
        for (int i : predict_set)
          for (int s = 0; s <= tau; ++s) {
            psubj.push_back(i);
            pvisit.push_back(s);
          }
        const Eigen::MatrixXd xp = long_design(data, psubj, pvisit, options.learners);
        const Eigen::VectorXd pred = model.predict(xp);
        for (std::size_t r = 0; r < psubj.size(); ++r)
          target(pvisit[r], psubj[r]) = pred(static_cast<int>(r));
      }
    }
  }
}

NuisanceFit fit_nuisance(const TrialDataset& data, const NuisanceOptions& options) {
  if (options.folds < 1) throw std::invalid_argument("folds must be >= 1");
  if (!options.fold_override.empty() &&
      static_cast<int>(options.fold_override.size()) != data.n)
    throw std::invalid_argument("fold_override size mismatch");
  NuisanceFit fit;
  fit.allocate(data.n, data.tau);
  fit.pi_hat = fit_propensity(data);
  fit.propensity.setConstant(fit.pi_hat);
  if (!options.fold_override.empty()) fit.fold_assignment = options.fold_override;
  else fit.fold_assignment = make_folds(data, effective_folds(options), options.seed);
  fit_survival(data, options, fit);
  fit_outcome_means(data, options, fit);
  return fit;
}

NuisanceFit marginal_nuisance(const TrialDataset& data) {
  NuisanceOptions options;
  options.folds = 1;
  const TrialDataset blind = strip_covariates(data);
  return fit_nuisance(blind, options);
}

CorruptMode corrupt_mode_from_string(const std::string& name) {
  if (name == "constant") return CorruptMode::constant;
  if (name == "noisy") return CorruptMode::noisy;
  throw std::invalid_argument("unknown corrupt mode: " + name);
}

NuisanceFit corrupt(const NuisanceFit& fit, CorruptMode mode, std::uint64_t seed) {
  NuisanceFit out = fit;
  Xoshiro256pp rng(seed);
  for (int a = 0; a <= 1; ++a) {
    for (int i = 0; i < out.n; ++i) {
      if (mode == CorruptMode::constant) {
        for (int s = 0; s <= out.tau; ++s) {
          out.p_mat[a](s + 1, i) = 0.5;
          out.mu_lag[a](s, i) = 0.0;
          out.mu_cur[a](s, i) = 0.0;
        }
      } else {
        double floor_p = 1.0;
        for (int s = 0; s <= out.tau; ++s) {
          const double factor = 0.6 + 0.8 * rng.uniform();
          double v = std::clamp(fit.p_mat[a](s + 1, i) * factor, 0.0, 1.0);
          floor_p = std::min(floor_p, v);  // re-monotonize
          out.p_mat[a](s + 1, i) = floor_p;
          out.mu_lag[a](s, i) = fit.mu_lag[a](s, i) * (0.5 + rng.uniform());
          out.mu_cur[a](s, i) = fit.mu_cur[a](s, i) * (0.5 + rng.uniform());
        }
      }
    }
    out.p_mat[a].row(0).setOnes();
  }
  return out;
}

void save_nuisance_csv(const NuisanceFit& fit, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "subject,a,s,u,p_a_u,mu_a_s_u,fold\n";
  for (int i = 0; i < fit.n; ++i)
    for (int a = 0; a <= 1; ++a)
      for (int s = 0; s <= fit.tau; ++s)
        for (int utype = 0; utype <= 1; ++utype) {
          const int u = utype == 0 ? s - 1 : s;
          out << i << ',' << a << ',' << s << ',' << u << ',' << fit.p(a, u, i) << ','
              << fit.mu(a, s, u, i) << ',' << fit.fold_assignment[static_cast<std::size_t>(i)]
              << "\n";
        }
}

}  // namespace pairlot
