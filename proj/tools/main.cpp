// pairlot: simulate longitudinal trials with intercurrent events, estimate
// pairwise last-observation-time contrasts, and replicate the reference
// simulation tables.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "pairlot/comparators.hpp"
#include "pairlot/configfile.hpp"
#include "pairlot/dgp.hpp"
#include "pairlot/estimators.hpp"
#include "pairlot/harness.hpp"
#include "pairlot/nuisance.hpp"
#include "pairlot/oracle.hpp"
#include "pairlot/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pairlot;

namespace {

constexpr const char* kVersion = "pairlot 0.1.0";

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

const std::vector<std::string>& allowed_keys() {
  static const std::vector<std::string> keys = {
      "dgp.setting", "dgp.n", "dgp.tau", "dgp.p_treat", "dgp.seed", "dgp.beta0", "dgp.beta1",
      "dgp.gamma0", "dgp.gamma1", "dgp.eps_sd", "dgp.null_ice",
      "nuisance.folds", "nuisance.inner_folds", "nuisance.mean", "nuisance.linear",
      "nuisance.ridge_grid", "nuisance.trees", "nuisance.n_trees", "nuisance.max_depth",
      "nuisance.min_leaf", "nuisance.pwl", "nuisance.pwl_knots", "nuisance.stacking",
      "nuisance.s_interactions", "nuisance.s_onehot",
      "estimate.methods", "estimate.t", "estimate.alpha", "estimate.bootstrap_b",
      "estimate.folds", "estimate.seed",
      "experiment.replicates", "experiment.parallelism", "experiment.truth",
      "output.dir"};
  return keys;
}

ConfigFile load_config(const std::string& path, const std::vector<std::string>& overrides) {
  ConfigFile cfg;
  if (!path.empty()) {
    try {
      cfg = ConfigFile::parse_file(path);
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
  }
  for (const auto& o : overrides) {
    try {
      cfg.apply_override(o, allowed_keys());
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
  }
  return cfg;
}

DgpConfig dgp_from_config(const ConfigFile& cfg) {
  DgpConfig dgp;
  try {
    dgp.setting = setting_from_string(cfg.get_string("dgp.setting", "setting1"));
    dgp.n = cfg.get_int("dgp.n", 250);
    dgp.tau = cfg.get_int("dgp.tau", 5);
    dgp.p_treat = cfg.get_double("dgp.p_treat", 0.5);
    dgp.seed = cfg.get_u64("dgp.seed", 20250901ULL);
    dgp.example.beta0 = cfg.get_double("dgp.beta0", 1.0);
    dgp.example.beta1 = cfg.get_double("dgp.beta1", 0.0);
    dgp.example.gamma0 = cfg.get_double("dgp.gamma0", 0.0);
    dgp.example.gamma1 = cfg.get_double("dgp.gamma1", 0.0);
    dgp.example.eps_sd = cfg.get_double("dgp.eps_sd", 1.0);
    dgp.null_ice = cfg.get_bool("dgp.null_ice", false);
    check_config(dgp);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return dgp;
}

LearnerSpec learners_from_config(const ConfigFile& cfg) {
  LearnerSpec spec;
  try {
    spec.mean_only = cfg.get_bool("nuisance.mean", true);
    spec.linear = cfg.get_bool("nuisance.linear", true);
    if (cfg.has("nuisance.ridge_grid")) {
      spec.ridge_grid.clear();
      for (const auto& tok : cfg.get_list("nuisance.ridge_grid"))
        spec.ridge_grid.push_back(std::stod(tok));
    }
    spec.trees = cfg.get_bool("nuisance.trees", true);
    spec.tree.n_trees = cfg.get_int("nuisance.n_trees", 30);
    spec.tree.max_depth = cfg.get_int("nuisance.max_depth", 3);
    spec.tree.min_leaf = cfg.get_int("nuisance.min_leaf", 10);
    spec.piecewise_linear = cfg.get_bool("nuisance.pwl", true);
    spec.pwl_knots = cfg.get_int("nuisance.pwl_knots", 3);
    spec.stacking = cfg.get_bool("nuisance.stacking", true);
    spec.inner_folds = cfg.get_int("nuisance.inner_folds", 5);
    spec.s_interactions = cfg.get_bool("nuisance.s_interactions", true);
    spec.s_onehot = cfg.get_bool("nuisance.s_onehot", false);
    spec.check();
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return spec;
}

void write_manifest(const fs::path& dir, const std::string& command, const ConfigFile& cfg,
                    const DgpConfig& dgp) {
  json manifest;
  manifest["tool"] = kVersion;
  manifest["command"] = command;
  manifest["resolved"] = json::object();
  for (const auto& [k, v] : cfg.entries()) manifest["resolved"][k] = v;
  manifest["dgp"] = {{"setting", to_string(dgp.setting)}, {"n", dgp.n},     {"tau", dgp.tau},
                     {"p_treat", dgp.p_treat},            {"seed", dgp.seed}};
  std::ofstream out(dir / "manifest.json");
  out << manifest.dump(2) << "\n";
}

fs::path ensure_out_dir(const std::string& out) {
  fs::path dir(out.empty() ? "." : out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory: " + dir.string());
  return dir;
}

int cmd_simulate(const ConfigFile& cfg, const std::string& out, bool counterfactuals) {
  const DgpConfig dgp = dgp_from_config(cfg);
  const fs::path dir = ensure_out_dir(out);
  const auto [data, panel] = generate(dgp);
  const ValidationReport rep = validate(data);
  if (!rep.ok()) throw std::runtime_error("generated dataset failed validation:\n" + rep.to_string());
  save_csv(data, (dir / "dataset.csv").string());
  if (counterfactuals) {
    if (!consistent(panel, data))
      throw std::runtime_error("counterfactual panel inconsistent with the factual dataset");
    save_counterfactual_csv(panel, (dir / "counterfactuals.csv").string());
  }
  write_manifest(dir, "simulate", cfg, dgp);
  std::cout << "wrote " << (dir / "dataset.csv").string() << " (n=" << data.n
            << ", tau=" << data.tau << ", d=" << data.d << ")\n";
  return 0;
}

int cmd_estimate(const ConfigFile& cfg, const std::string& data_path, const std::string& out,
                 const std::string& dump_nuisance) {
  if (data_path.empty()) throw ConfigError("estimate: --data is required");
  const fs::path dir = ensure_out_dir(out);

  std::vector<MethodSpec> methods;
  std::vector<std::string> ids = cfg.get_list("estimate.methods");
  if (ids.empty()) ids = {"PLOT_unadj", "PLOT_adj_CF", "CPLOT_CF", "LOCF"};
  const int folds = cfg.get_int("estimate.folds", 5);
  const int bootstrap_b = cfg.get_int("estimate.bootstrap_b", 500);
  for (const auto& raw : ids) {
    MethodSpec m;
    try {
      m.id = normalize_method_id(raw);
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
    m.folds = folds;
    m.bootstrap_b = bootstrap_b;
    methods.push_back(m);
  }

  const TrialDataset data = load_csv(data_path);
  const ValidationReport rep = validate(data);
  if (!rep.ok())
    throw std::runtime_error("dataset failed validation:\n" + rep.to_string());

  const int t = cfg.get_int("estimate.t", data.tau);
  const double alpha = cfg.get_double("estimate.alpha", 0.05);
  const auto seed = cfg.get_u64("estimate.seed", 4242ULL);
  const LearnerSpec learners = learners_from_config(cfg);

  const std::vector<EstimateResult> results =
      estimate_methods(data, methods, learners, t, alpha, seed);

  std::ofstream res(dir / "results.csv");
  res << results_csv_header() << "\n";
  for (const auto& r : results) res << results_csv_row(r) << "\n";
  std::cout << results_csv_header() << "\n";
  for (const auto& r : results) std::cout << results_csv_row(r) << "\n";

  if (!dump_nuisance.empty()) {
    NuisanceOptions opts;
    opts.learners = learners;
    opts.folds = folds;
    opts.seed = derive_seed(seed, 0xF17 + static_cast<std::uint64_t>(std::max(1, folds)));
    save_nuisance_csv(fit_nuisance(data, opts), dump_nuisance);
  }

  const DgpConfig dgp = dgp_from_config(cfg);  // recorded for provenance only
  write_manifest(dir, "estimate", cfg, dgp);
  return 0;
}

std::vector<MethodSpec> table_methods(int table, int bootstrap_b, int folds) {
  std::vector<std::string> ids;
  if (table == 1 || table == 2)
    ids = {"PLOTunadj", "PLOTadj", "PLOTadj-CF", "CPLOT", "CPLOT-CF", "SACE", "IPCW",
           "Survivors", "LOCF"};
  else
    ids = {"PLOTunadj", "PLOTadj-CF", "CPLOT-CF", "SACE", "IPCW", "Survivors", "LOCF"};
  std::vector<MethodSpec> methods;
  for (const auto& id : ids) methods.push_back({id, folds, bootstrap_b});
  return methods;
}

int cmd_replicate(const ConfigFile& cfg, int table, std::string setting_arg, std::string variant,
                  int replicates, int threads, const std::string& out) {
  if (replicates < 1) throw ConfigError("replicate: --R must be >= 1");
  const fs::path dir = ensure_out_dir(out);

  if (table == 4) {
    const long n_large = cfg.get_long("dgp.n_large", 100000);
    bool all_pass = true;
    std::ostringstream report;
    for (const std::string s : {"setting1", "setting2", "setting3"}) {
      if (!setting_arg.empty() && s != "setting" + setting_arg && s != setting_arg) continue;
      ConfigFile local = cfg;
      local.set("dgp.setting", s);
      DgpConfig dgp = dgp_from_config(local);
      dgp.tau = 5;
      const TTableComparison cmp = compare_t_table(dgp, n_large);
      report << "== " << s << " ==\n" << cmp.to_string();
      all_pass = all_pass && cmp.pass;
    }
    std::cout << report.str();
    std::ofstream(dir / "t_table_comparison.txt") << report.str();
    return all_pass ? 0 : 1;
  }

  ConfigFile local = cfg;
  std::string variant_key;
  if (table == 1) {
    local.set("dgp.setting", "setting1");
  } else if (table == 2) {
    if (setting_arg.empty()) throw ConfigError("replicate --table 2 needs --setting 2 or 3");
    if (setting_arg == "2" || setting_arg == "setting2") local.set("dgp.setting", "setting2");
    else if (setting_arg == "3" || setting_arg == "setting3") local.set("dgp.setting", "setting3");
    else throw ConfigError("replicate --table 2: unknown setting " + setting_arg);
    variant_key = local.get_string("dgp.setting", "");
  } else if (table == 3) {
    if (variant.empty()) variant = "110";
    if (variant != "000" && variant != "010" && variant != "110" && variant != "111")
      throw ConfigError("replicate --table 3: variant must be one of 000,010,110,111");
    local.set("dgp.setting", "example");
    local.set("dgp.beta0", "1");
    local.set("dgp.beta1", std::string(1, variant[0]));
    local.set("dgp.gamma0", std::string(1, variant[1]));
    local.set("dgp.gamma1", std::string(1, variant[2]));
    variant_key = variant;
  } else {
    throw ConfigError("replicate: --table must be 1, 2, 3 or 4");
  }

  ExperimentConfig exp;
  exp.dgp = dgp_from_config(local);
  exp.replicates = replicates;
  exp.methods = table_methods(table, cfg.get_int("estimate.bootstrap_b", 500),
                              cfg.get_int("estimate.folds", 5));
  exp.alpha = cfg.get_double("estimate.alpha", 0.05);
  exp.parallelism = threads > 0 ? threads : cfg.get_int("experiment.parallelism", 1);
  exp.truth = cfg.get_double("experiment.truth", 0.0);
  exp.learners = learners_from_config(cfg);

  const ExperimentResult result = run_experiment(exp);
  const ComparisonReport report = compare_to_reference(result, reference_table(table, variant_key));

  std::ofstream(dir / "metrics.csv") << result.metrics_csv();
  std::ofstream(dir / "metrics.md") << result.metrics_markdown();
  std::ofstream(dir / "comparison.txt") << report.to_string();
  write_manifest(dir, "replicate", local, exp.dgp);

  std::cout << result.metrics_markdown() << "\n" << report.to_string();
  return report.all_gating_pass ? 0 : 1;
}

int cmd_t_table(const ConfigFile& cfg, long n_large, const std::string& out) {
  const DgpConfig dgp = dgp_from_config(cfg);
  const Eigen::MatrixXd table = t_distribution_table(dgp, n_large);
  std::ostringstream os;
  os << "T,arm0_pct,arm1_pct\n";
  os.precision(4);
  for (int t = 0; t < table.rows(); ++t)
    os << t << ',' << table(t, 0) << ',' << table(t, 1) << "\n";
  std::cout << os.str();
  if (!out.empty()) {
    const fs::path dir = ensure_out_dir(out);
    std::ofstream(dir / "t_table.csv") << os.str();
    write_manifest(dir, "t-table", cfg, dgp);
  }
  return 0;
}

int cmd_true_estimand(const ConfigFile& cfg, const std::string& which, int t, long pairs,
                      const std::string& out) {
  const DgpConfig dgp = dgp_from_config(cfg);
  Estimand est;
  if (which == "PLOT") est = Estimand::PLOT;
  else if (which == "CPLOT") est = Estimand::CPLOT;
  else throw ConfigError("true-estimand: --which must be PLOT or CPLOT");
  const int horizon = t >= 0 ? t : dgp.tau;
  const TrueEstimandResult res = true_estimand(dgp, est, horizon, pairs, derive_seed(dgp.seed, 0x0E));
  std::cout.precision(8);
  std::cout << which << " estimand at t=" << horizon << ": " << res.value << " (mc se "
            << res.mc_se << ", pairs " << res.n_pairs << ")\n";
  if (!out.empty()) {
    const fs::path dir = ensure_out_dir(out);
    std::ofstream f(dir / "true_estimand.csv");
    f.precision(17);
    f << "which,t,value,mc_se,n_pairs\n"
      << which << ',' << horizon << ',' << res.value << ',' << res.mc_se << ',' << res.n_pairs
      << "\n";
    write_manifest(dir, "true-estimand", cfg, dgp);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{std::string(kVersion) +
               " - pairwise last-observation-time treatment-effect estimation"};
  app.require_subcommand(1);

  std::string config_path, out_dir, data_path, dump_nuisance;
  std::vector<std::string> overrides;
  bool counterfactuals = false;

  // shared flags, registered per subcommand
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "config file (key = value with [sections])");
    sub->add_option("--set", overrides,
                    "override a config key, e.g. --set dgp.n=500 (repeatable)");
    sub->add_option("--out", out_dir, "output directory (default: current)");
  };

  auto* sim = app.add_subcommand("simulate", "generate a trial dataset from a DGP config");
  add_common(sim);
  int n_flag = -1, tau_flag = -1;
  long seed_flag = -1;
  std::string setting_flag;
  sim->add_option("--n", n_flag, "sample size override");
  sim->add_option("--tau", tau_flag, "horizon override");
  sim->add_option("--seed", seed_flag, "RNG seed override");
  sim->add_option("--setting", setting_flag, "setting1|setting2|setting3|example");
  sim->add_flag("--counterfactuals", counterfactuals, "also write the counterfactual panel");

  auto* est = app.add_subcommand("estimate", "estimate requested methods on a dataset CSV");
  add_common(est);
  est->add_option("--data", data_path, "input dataset CSV")->required();
  std::string methods_flag;
  int t_flag = -1;
  est->add_option("--methods", methods_flag, "comma-separated method ids");
  est->add_option("--t", t_flag, "evaluation horizon (default tau)");
  est->add_option("--dump-nuisance", dump_nuisance, "write nuisance predictions CSV here");

  auto* rep = app.add_subcommand("replicate", "run a Monte Carlo table replication");
  add_common(rep);
  int table_flag = 0, replicates_flag = 300, threads_flag = 0;
  std::string rep_setting, rep_variant;
  rep->add_option("--table", table_flag, "reference table: 1, 2, 3 or 4")->required();
  rep->add_option("--setting", rep_setting, "table 2/4: setting selector (2|3 or name)");
  rep->add_option("--variant", rep_variant, "table 3: coefficient triple 000|010|110|111");
  rep->add_option("--R", replicates_flag, "number of replicates");
  rep->add_option("--threads", threads_flag, "worker threads");

  auto* ttab = app.add_subcommand("t-table", "per-arm distribution of the ICE time");
  add_common(ttab);
  long n_large = 100000;
  ttab->add_option("--n", n_large, "simulated sample size (>= 1e4)");
  std::string tt_setting;
  ttab->add_option("--setting", tt_setting, "setting1|setting2|setting3|example");

  auto* tru = app.add_subcommand("true-estimand", "oracle Monte Carlo value of an estimand");
  add_common(tru);
  std::string which = "PLOT";
  long pairs = 1000000;
  int true_t = -1;
  tru->add_option("--which", which, "PLOT or CPLOT");
  tru->add_option("--t", true_t, "horizon (default tau)");
  tru->add_option("--pairs", pairs, "number of Monte Carlo pairs");
  std::string tru_setting;
  tru->add_option("--setting", tru_setting, "setting override");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    ConfigFile cfg = load_config(config_path, overrides);
    if (sim->parsed()) {
      if (n_flag > 0) cfg.set("dgp.n", std::to_string(n_flag));
      if (tau_flag > 0) cfg.set("dgp.tau", std::to_string(tau_flag));
      if (seed_flag >= 0) cfg.set("dgp.seed", std::to_string(seed_flag));
      if (!setting_flag.empty()) cfg.set("dgp.setting", setting_flag);
      return cmd_simulate(cfg, out_dir, counterfactuals);
    }
    if (est->parsed()) {
      if (!methods_flag.empty()) cfg.set("estimate.methods", methods_flag);
      if (t_flag >= 0) cfg.set("estimate.t", std::to_string(t_flag));
      return cmd_estimate(cfg, data_path, out_dir, dump_nuisance);
    }
    if (rep->parsed())
      return cmd_replicate(cfg, table_flag, rep_setting, rep_variant, replicates_flag,
                           threads_flag, out_dir);
    if (ttab->parsed()) {
      if (!tt_setting.empty()) cfg.set("dgp.setting", tt_setting);
      return cmd_t_table(cfg, n_large, out_dir);
    }
    if (tru->parsed()) {
      if (!tru_setting.empty()) cfg.set("dgp.setting", tru_setting);
      return cmd_true_estimand(cfg, which, true_t, pairs, out_dir);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
