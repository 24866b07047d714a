#include "pairlot/dgp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "pairlot/rng.hpp"

namespace pairlot {

namespace {

constexpr double kWeibullShape = 1.5;

// Setting 1: AR(1) correlation 0.5 over 10 covariates; Cholesky cached.
const Eigen::MatrixXd& setting1_chol() {
  static const Eigen::MatrixXd chol = [] {
    Eigen::MatrixXd sigma(10, 10);
    for (int i = 0; i < 10; ++i)
      for (int j = 0; j < 10; ++j) sigma(i, j) = std::pow(0.5, std::abs(i - j));
    return Eigen::MatrixXd(sigma.llt().matrixL());
  }();
  return chol;
}

int floor_capped(double t_ice, int tau) {
  const int f = static_cast<int>(std::floor(t_ice));
  return f > tau ? tau : f;
}

}  // namespace

Setting setting_from_string(const std::string& name) {
  if (name == "setting1") return Setting::setting1;
  if (name == "setting2") return Setting::setting2;
  if (name == "setting3") return Setting::setting3;
  if (name == "example") return Setting::example;
  throw std::invalid_argument("unknown setting: " + name);
}

std::string to_string(Setting s) {
  switch (s) {
    case Setting::setting1: return "setting1";
    case Setting::setting2: return "setting2";
    case Setting::setting3: return "setting3";
    case Setting::example: return "example";
  }
  throw std::logic_error("bad setting enum");
}

void check_config(const DgpConfig& config) {
  if (!(config.p_treat > 0.0 && config.p_treat < 1.0))
    throw std::invalid_argument("p_treat must be in (0,1)");
  if (config.n < 2) throw std::invalid_argument("n must be >= 2");
  if (config.tau < 1) throw std::invalid_argument("tau must be >= 1");
  const auto& e = config.example;
  for (double v : {e.beta0, e.beta1, e.gamma0, e.gamma1, e.eps_sd})
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite example parameter");
  if (e.eps_sd < 0.0) throw std::invalid_argument("eps_sd must be >= 0");
}

int covariate_dim(Setting s) {
  switch (s) {
    case Setting::setting1: return 10;
    case Setting::setting2: return 0;
    case Setting::setting3: return 1;
    case Setting::example: return 1;
  }
  throw std::logic_error("bad setting enum");
}

namespace {

// Shared latent draws per subject; both arms are evaluated on the same
// stream so counterfactual coupling uses common random numbers.
SubjectDraw draw_impl(const DgpConfig& cfg, std::uint64_t seed, const Eigen::VectorXd* fixed_l) {
  Xoshiro256pp rng(seed);
  const int tau = cfg.tau;
  SubjectDraw s;
  s.arm = rng.bernoulli(cfg.p_treat) ? 1 : 0;
  s.y_control.resize(tau + 1);
  s.y_treated.resize(tau + 1);

  const double a_ice = cfg.null_ice ? 0.0 : 1.0;  // scales every arm term in the T model

  switch (cfg.setting) {
    case Setting::setting1: {
      Eigen::VectorXd z(10);
      for (int j = 0; j < 10; ++j) z(j) = rng.normal();
      s.covariates = fixed_l ? *fixed_l : Eigen::VectorXd(setting1_chol() * z);
      const Eigen::VectorXd& l = s.covariates;
      const double u_sq_cov = rng.normal();  // U
      s.u_latent = u_sq_cov;
      const double rand_intercept = rng.normal();  // u
      const double base_y = 0.5 + l(0) + l(1) / 2 + l(2) / 3 + l(7) + l(8) / 2 + l(9) / 3 +
                            2.0 * u_sq_cov * u_sq_cov + rand_intercept;
      for (int t = 0; t <= tau; ++t) {
        const double eps = rng.normal();
        const double y = base_y + 0.2 * t + eps;
        s.y_control(t) = y;
        s.y_treated(t) = y;
      }
      const double v = rng.uniform();
      const double lin = 2.5 - l(3) / 4 - l(4) / 5 - l(5) / 6 + l(7) / 4 + l(8) / 5 + l(9) / 6;
      for (int a = 0; a <= 1; ++a) {
        const double scale =
            std::exp(lin + a_ice * (0.8 * a + 0.2 * (2.0 * a - 1.0) * u_sq_cov * u_sq_cov));
        const double t_ice = scale * std::pow(-std::log(v), 1.0 / kWeibullShape);
        (a == 0 ? s.t_control : s.t_treated) = floor_capped(t_ice, tau);
      }
      break;
    }
    case Setting::setting2: {
      s.covariates.resize(0);
      const double u = rng.normal();
      s.u_latent = u;
      for (int t = 0; t <= tau; ++t) {
        const double y = 0.5 + 0.2 * t + u + rng.normal();
        s.y_control(t) = y;
        s.y_treated(t) = y;
      }
      // Rescue switch at the first visit t >= 1 whose marker exceeds 2.
      // Treated-arm marker drifts at 0.7 per visit, control at 0.2 (the
      // paper's Table 4 pins the treated total slope at 0.7).
      const double slope1 = cfg.null_ice ? 0.2 : 0.7;
      int t0 = tau, t1 = tau;
      bool done0 = false, done1 = false;
      for (int t = 1; t <= tau; ++t) {
        const double noise = rng.normal();
        if (!done0 && 0.2 * t + u + noise > 2.0) {
          t0 = t;
          done0 = true;
        }
        if (!done1 && slope1 * t + u + noise > 2.0) {
          t1 = t;
          done1 = true;
        }
      }
      s.t_control = t0;
      s.t_treated = t1;
      break;
    }
    case Setting::setting3: {
      if (fixed_l) s.covariates = *fixed_l;
      else {
        s.covariates.resize(1);
        s.covariates(0) = rng.normal();
      }
      const double l = s.covariates(0);
      const double u = rng.normal();
      s.u_latent = u;
      s.y_control(0) = 0.0;
      s.y_treated(0) = 0.0;
      for (int t = 1; t <= tau; ++t) {
        const double y = rng.bernoulli(expit(0.5 * t + 5.0 * l + u)) ? 1.0 : 0.0;
        s.y_control(t) = y;
        s.y_treated(t) = y;
      }
      const double v = rng.uniform();
      for (int a = 0; a <= 1; ++a) {
        const double scale = std::exp(2.5 + a_ice * 0.8 * a + l);
        (a == 0 ? s.t_control : s.t_treated) =
            floor_capped(scale * std::pow(-std::log(v), 1.0 / kWeibullShape), tau);
      }
      break;
    }
    case Setting::example: {
      if (fixed_l) s.covariates = *fixed_l;
      else {
        s.covariates.resize(1);
        s.covariates(0) = rng.normal();
      }
      const double l = s.covariates(0);
      const double u = rng.normal();
      s.u_latent = u;
      const auto& p = cfg.example;
      for (int t = 0; t <= tau; ++t) {
        const double eps = rng.normal();
        const double y = p.beta0 * l + p.beta1 * l * t + p.gamma0 * u + p.gamma1 * u * t +
                         p.eps_sd * eps;
        s.y_control(t) = y;
        s.y_treated(t) = y;
      }
      const double v = rng.uniform();
      for (int a = 0; a <= 1; ++a) {
        const double scale =
            std::exp(2.2 + a_ice * (1.1 * a + 0.15 * (2.0 * a - 1.0) * u) + l);
        (a == 0 ? s.t_control : s.t_treated) =
            floor_capped(scale * std::pow(-std::log(v), 1.0 / kWeibullShape), tau);
      }
      break;
    }
  }
  return s;
}

}  // namespace

SubjectDraw draw_subject(const DgpConfig& config, std::uint64_t subject_seed) {
  return draw_impl(config, subject_seed, nullptr);
}

SubjectDraw draw_subject_given_covariates(const DgpConfig& config, std::uint64_t subject_seed,
                                          const Eigen::VectorXd& covariates) {
  return draw_impl(config, subject_seed, &covariates);
}

std::pair<TrialDataset, CounterfactualPanel> generate(const DgpConfig& config) {
  check_config(config);
  const int n = config.n;
  const int tau = config.tau;
  const int d = covariate_dim(config.setting);

  TrialDataset data;
  data.n = n;
  data.tau = tau;
  data.d = d;
  data.covariates.resize(n, d);
  data.arm.resize(static_cast<std::size_t>(n));
  data.ice_time.resize(static_cast<std::size_t>(n));
  data.outcomes.resize(n, tau + 1);

  CounterfactualPanel panel;
  panel.n = n;
  panel.tau = tau;
  panel.t_control.resize(static_cast<std::size_t>(n));
  panel.t_treated.resize(static_cast<std::size_t>(n));
  panel.y_control.resize(n, tau + 1);
  panel.y_treated.resize(n, tau + 1);

  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (int i = 0; i < n; ++i) {
    const SubjectDraw s = draw_subject(config, derive_seed(config.seed, i));
    data.covariates.row(i) = s.covariates.transpose();
    data.arm[static_cast<std::size_t>(i)] = s.arm;
    panel.t_control[static_cast<std::size_t>(i)] = s.t_control;
    panel.t_treated[static_cast<std::size_t>(i)] = s.t_treated;
    panel.y_control.row(i) = s.y_control.transpose();
    panel.y_treated.row(i) = s.y_treated.transpose();
    const int t_ice = s.arm == 1 ? s.t_treated : s.t_control;
    data.ice_time[static_cast<std::size_t>(i)] = t_ice;
    for (int t = 0; t <= tau; ++t)
      data.outcomes(i, t) = t <= t_ice ? (s.arm == 1 ? s.y_treated(t) : s.y_control(t)) : nan;
  }
  return {std::move(data), std::move(panel)};
}

Eigen::MatrixXd t_distribution_table(const DgpConfig& config, long n_large) {
  check_config(config);
  if (n_large < 10000) throw std::invalid_argument("t_distribution_table: n_large must be >= 1e4");
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(config.tau + 1, 2);
  double n_by_arm[2] = {0.0, 0.0};
  for (long i = 0; i < n_large; ++i) {
    const SubjectDraw s = draw_subject(config, derive_seed(config.seed, static_cast<std::uint64_t>(i)));
    const int t_ice = s.arm == 1 ? s.t_treated : s.t_control;
    counts(t_ice, s.arm) += 1.0;
    n_by_arm[s.arm] += 1.0;
  }
  for (int a = 0; a <= 1; ++a)
    if (n_by_arm[a] > 0) counts.col(a) *= 100.0 / n_by_arm[a];
  return counts;
}

TrueEstimandResult true_estimand(const DgpConfig& config, Estimand which, int t, long n_pairs,
                                 std::uint64_t seed) {
  check_config(config);
  if (t < 0 || t > config.tau) throw std::invalid_argument("true_estimand: t out of range");
  KahanSum sum, sumsq;
  for (long k = 0; k < n_pairs; ++k) {
    const auto u64 = static_cast<std::uint64_t>(k);
    const SubjectDraw first = draw_subject(config, derive_seed(seed, 2 * u64));
    const SubjectDraw second =
        which == Estimand::PLOT
            ? draw_subject(config, derive_seed(seed, 2 * u64 + 1))
            : draw_subject_given_covariates(config, derive_seed(seed, 2 * u64 + 1),
                                            first.covariates);
    const int m = std::min({first.t_treated, second.t_control, t});
    const double contrast = first.y_treated(m) - second.y_control(m);
    sum.add(contrast);
    sumsq.add(contrast * contrast);
  }
  TrueEstimandResult res;
  res.n_pairs = n_pairs;
  const double np = static_cast<double>(n_pairs);
  res.value = sum.value() / np;
  const double var = (sumsq.value() - np * res.value * res.value) / (np - 1.0);
  res.mc_se = std::sqrt(var / np);
  return res;
}

PairedCheck example_closed_form_check(const DgpConfig& config, int t, long n_pairs,
                                      std::uint64_t seed) {
  if (config.setting != Setting::example)
    throw std::invalid_argument("closed-form check is defined for the example model only");
  check_config(config);
  KahanSum sum_est, sumsq_est, sum_cf, sum_d, sumsq_d;
  const auto& p = config.example;
  for (long k = 0; k < n_pairs; ++k) {
    const auto u64 = static_cast<std::uint64_t>(k);
    const SubjectDraw first = draw_subject(config, derive_seed(seed, 2 * u64));
    const SubjectDraw second = draw_subject(config, derive_seed(seed, 2 * u64 + 1));
    const int m = std::min({first.t_treated, second.t_control, t});
    const double direct = first.y_treated(m) - second.y_control(m);
    const double closed = p.beta1 * (first.covariates(0) - second.covariates(0)) * m +
                          p.gamma1 * (first.u_latent - second.u_latent) * m;
    sum_est.add(direct);
    sumsq_est.add(direct * direct);
    sum_cf.add(closed);
    const double diff = direct - closed;
    sum_d.add(diff);
    sumsq_d.add(diff * diff);
  }
  const double np = static_cast<double>(n_pairs);
  PairedCheck out;
  out.estimand = sum_est.value() / np;
  out.closed_form = sum_cf.value() / np;
  out.diff = sum_d.value() / np;
  const double var_est = (sumsq_est.value() - np * out.estimand * out.estimand) / (np - 1.0);
  const double var_d = (sumsq_d.value() - np * out.diff * out.diff) / (np - 1.0);
  out.estimand_se = std::sqrt(var_est / np);
  out.diff_se = std::sqrt(var_d / np);
  return out;
}

}  // namespace pairlot
