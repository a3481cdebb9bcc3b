// Command-line driver for the hidden-Markov mixture estimation toolkit.
//
// Subcommands: gen, estimate, risk, sweep, calibrate, rates,
// check-concentration. Exit codes: 0 success, 1 invalid cells present,
// 2 config or validation errors.

#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mml/estimators.hpp"
#include "mml/harness.hpp"
#include "mml/io.hpp"
#include "mml/model.hpp"

namespace {

struct CommonOpts {
  std::string config_path;
  std::vector<std::string> sets;
  std::string out_path;
  std::optional<std::uint64_t> seed;
  int threads = 0;
};

void add_common(CLI::App* sub, CommonOpts& opts, bool with_config = true) {
  if (with_config)
    sub->add_option("--config", opts.config_path, "key=value config file");
  sub->add_option("--set", opts.sets,
                  "override a config key, key=value (repeatable)");
  sub->add_option("--out", opts.out_path, "output path (default: stdout)");
  sub->add_option("--seed", opts.seed, "master seed (overrides the config key)");
  sub->add_option("--threads", opts.threads,
                  "worker thread cap (default: MML_THREADS, then hardware)");
}

mml::KvMap load_kv(const CommonOpts& opts) {
  mml::KvMap kv;
  if (!opts.config_path.empty()) kv = mml::read_kv_file(opts.config_path);
  for (const std::string& s : opts.sets) mml::apply_override(kv, s);
  return kv;
}

void write_output(const CommonOpts& opts, const std::string& text) {
  if (opts.out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(opts.out_path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open for writing: " + opts.out_path);
  f << text;
  if (!f) throw std::runtime_error("write failed: " + opts.out_path);
}

std::uint64_t require_seed(const CommonOpts& opts, const mml::ExperimentSpec& spec) {
  if (opts.seed) return *opts.seed;
  if (spec.seed_set) return spec.master_seed;
  throw std::invalid_argument(
      "a seed is required (--seed or the config key 'seed'); wall-clock "
      "seeding is not supported");
}

mml::ExperimentSpec load_spec(const CommonOpts& opts, double cli_C, bool c_set) {
  mml::ExperimentSpec spec = mml::parse_experiment_spec(load_kv(opts));
  spec.master_seed = require_seed(opts, spec);
  spec.seed_set = true;
  spec.threads = opts.threads;
  if (c_set) spec.C = cli_C;
  return spec;
}

int cmd_gen(const CommonOpts& opts) {
  const mml::ModelFileConfig cfg = mml::parse_model_config(load_kv(opts));
  std::uint64_t seed = 0;
  if (opts.seed)
    seed = *opts.seed;
  else if (cfg.seed_set)
    seed = cfg.seed;
  else
    throw std::invalid_argument("gen: a seed is required (--seed or config key 'seed')");
  if (opts.out_path.empty())
    throw std::invalid_argument("gen: --out is required (binary dataset path)");

  mml::Rng rng(seed);
  mml::ModelConfig mc;
  mc.d = cfg.d;
  mc.n = cfg.n;
  mc.delta = cfg.delta;
  mc.theta = mml::make_theta(cfg.d, cfg.theta_norm, cfg.theta_mode, rng);
  mc.noise = cfg.noise;
  mc.seed = seed;
  const mml::Dataset ds = mml::gen_dataset(mc, rng);
  mml::write_dataset(opts.out_path, ds.Y);
  mml::write_labels(opts.out_path + ".labels", ds.hidden.labels);
  return 0;
}

std::string render_estimate(const mml::Estimate& e) {
  std::ostringstream out;
  out << "variant: " << mml::variant_name(e.variant) << "\n";
  out << "ell_used: " << e.ell_used << "\n";
  out << "lambda_max: " << mml::format_double(e.lambda_max) << "\n";
  out << "theta_hat:";
  for (long i = 0; i < e.theta_hat.size(); ++i)
    out << ' ' << mml::format_double(e.theta_hat(i));
  out << "\n";
  if (e.adaptive_trace) {
    const mml::AdaptiveTrace& t = *e.adaptive_trace;
    out << "trace: ell1=" << t.ell1 << " s_hat=" << mml::format_double(t.s_hat)
        << " target=" << t.target << " ell_hat=" << t.ell_hat << "\n";
  }
  for (const mml::SelectorRecord& r : e.selector_trace)
    out << "trace: k=" << r.grid_index << " ell=" << r.candidate_ell
        << " omega_sq=" << mml::format_double(r.threshold_sq)
        << " disc_sq=" << mml::format_double(r.discrepancy_sq) << "\n";
  return out.str();
}

int cmd_estimate(const CommonOpts& opts, const std::string& data_path,
                 const std::string& variant_name, std::optional<double> delta,
                 std::optional<long> ell, double C) {
  const mml::Variant variant = mml::parse_variant(variant_name);
  if (mml::variant_needs_delta(variant) && !delta)
    throw std::invalid_argument("estimate: variant '" + variant_name +
                                "' requires --delta");
  const Eigen::MatrixXd Y = mml::read_dataset(data_path);
  mml::Estimate e;
  switch (variant) {
    case mml::Variant::KnownDeltaOracle:
      if (!ell)
        throw std::invalid_argument(
            "estimate: known_oracle requires --ell (the oracle bucket count "
            "depends on the unknown true norm)");
      e = mml::estimate_known_delta(Y, *ell, *delta);
      break;
    case mml::Variant::KnownDeltaAdaptive:
      e = mml::adaptive_known_delta(Y, *delta, C);
      break;
    case mml::Variant::PlainOracle:
      if (!ell)
        throw std::invalid_argument("estimate: plain_oracle requires --ell");
      e = mml::estimate_plain(Y, *ell);
      break;
    case mml::Variant::LepskiGlobal:
      e = mml::lepski_select(Y, C);
      break;
    case mml::Variant::LepskiRefined:
      e = mml::lepski_refined(Y, C);
      break;
    case mml::Variant::VanillaSpectral:
      e = mml::estimate_plain(Y, Y.cols());
      e.variant = mml::Variant::VanillaSpectral;
      break;
  }
  write_output(opts, render_estimate(e));
  return 0;
}

int run_reports(const CommonOpts& opts, const mml::ExperimentSpec& spec) {
  const std::vector<mml::RiskReport> reports = mml::sweep(spec);
  write_output(opts, mml::reports_to_csv(reports));
  for (const mml::RiskReport& r : reports)
    if (!r.valid) return 1;
  return 0;
}

int cmd_risk(const CommonOpts& opts, double cli_C, bool c_set) {
  const mml::ExperimentSpec spec = load_spec(opts, cli_C, c_set);
  if (spec.n_values.size() != 1 || spec.d_values.size() != 1 ||
      spec.delta_values.size() != 1 || spec.theta_norm_sq_values.size() != 1)
    throw std::invalid_argument(
        "risk: expects a single cell (one value per axis); use sweep for grids");
  return run_reports(opts, spec);
}

int cmd_sweep(const CommonOpts& opts, double cli_C, bool c_set) {
  return run_reports(opts, load_spec(opts, cli_C, c_set));
}

int cmd_calibrate(const CommonOpts& opts, double cli_C, bool c_set) {
  const mml::ExperimentSpec spec = load_spec(opts, cli_C, c_set);
  const mml::CalibrationResult result = mml::calibrate_C(spec);
  write_output(opts, mml::calibration_to_csv(result));
  std::cerr << "calibrated C = " << mml::format_double(result.C);
  if (result.warning) std::cerr << " (warning: no candidate met the threshold)";
  std::cerr << "\n";
  return 0;
}

int cmd_rates(const CommonOpts& opts) {
  mml::ExperimentSpec spec = mml::parse_experiment_spec(load_kv(opts));
  if (spec.n_values.empty() || spec.d_values.empty() ||
      spec.delta_values.empty() || spec.theta_norm_sq_values.empty())
    throw std::invalid_argument(
        "rates: needs n, d, delta and theta_norm_sq axes");
  std::string out = "n,d,delta,theta_norm_sq,phi,global_rate\n";
  for (long n : spec.n_values)
    for (long d : spec.d_values)
      for (double delta : spec.delta_values)
        for (const mml::NormAxisValue& nv : spec.theta_norm_sq_values) {
          const double delta_eff = std::min(delta, 1.0 - delta);
          const double norm_sq =
              nv.worst ? mml::worst_case_norm_sq(n, d, delta_eff) : nv.value;
          out += std::to_string(n) + ',' + std::to_string(d) + ',' +
                 mml::format_double(delta) + ',' + mml::format_double(norm_sq) +
                 ',' +
                 mml::format_double(mml::phi_rate({norm_sq, n, d, delta_eff})) +
                 ',' + mml::format_double(mml::global_rate(n, d, delta_eff)) +
                 '\n';
        }
  write_output(opts, out);
  return 0;
}

int cmd_check_concentration(const CommonOpts& opts) {
  const mml::KvMap kv = load_kv(opts);
  long d = 0, n = 0, trials = 0, ell = 0;
  bool ell_set = false;
  double delta = 0.0;
  std::uint64_t seed = 0;
  bool seed_set = false;
  for (const auto& [key, value] : kv) {
    try {
      if (key == "d") d = mml::parse_long(value);
      else if (key == "n") n = mml::parse_long(value);
      else if (key == "delta") delta = mml::parse_double(value);
      else if (key == "ell") { ell = mml::parse_long(value); ell_set = true; }
      else if (key == "trials") trials = mml::parse_long(value);
      else if (key == "seed") { seed = mml::parse_u64(value); seed_set = true; }
      else throw std::invalid_argument("unknown check-concentration key '" + key + "'");
    } catch (const std::invalid_argument& ex) {
      throw std::invalid_argument("key '" + key + "': " + ex.what());
    }
  }
  if (opts.seed) {
    seed = *opts.seed;
    seed_set = true;
  }
  if (!seed_set)
    throw std::invalid_argument(
        "check-concentration: a seed is required (--seed or config key 'seed')");
  if (d < 1 || n < 1 || trials < 1)
    throw std::invalid_argument("check-concentration: need d, n and trials");
  if (!ell_set) {
    // the natural operating point: ell = d v ceil(n delta) ^ n
    ell = std::min(std::max(d, static_cast<long>(std::ceil(
                                   delta * static_cast<double>(n)))),
                   n);
  }
  const mml::ConcentrationReport rep =
      mml::concentration_check(d, ell, delta, n, trials, seed, opts.threads);
  write_output(opts, mml::concentration_to_csv(rep));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Simulation and estimation toolkit for the binary hidden-Markov "
      "sub-Gaussian mixture model"};
  app.require_subcommand(1);

  CommonOpts gen_opts;
  CLI::App* gen = app.add_subcommand(
      "gen",
      "generate a dataset file plus a .labels sidecar\n"
      "config keys: d, n, delta, theta_norm, theta_mode (axis|random), "
      "noise (gaussian|rademacher|zero), seed");
  add_common(gen, gen_opts);

  CommonOpts est_opts;
  std::string est_data;
  std::string est_variant;
  std::optional<double> est_delta;
  std::optional<long> est_ell;
  double est_C = mml::kCalibratedC;
  CLI::App* est = app.add_subcommand(
      "estimate",
      "run one estimator on a dataset file and print the estimate\n"
      "variants: known_oracle, known_adaptive, plain_oracle, lepski_global, "
      "lepski_refined, vanilla_spectral");
  est->add_option("data", est_data, "dataset file written by gen")->required();
  est->add_option("--variant", est_variant, "estimator variant")->required();
  est->add_option("--delta", est_delta, "flip probability in [0,1)");
  est->add_option("--ell", est_ell, "bucket count for the oracle variants");
  est->add_option("--C", est_C, "selector constant");
  add_common(est, est_opts, /*with_config=*/false);

  const char* kExperimentKeys =
      "config keys: n, d, delta, theta_norm_sq (lists allowed; theta_norm_sq "
      "accepts `worst`), estimators, trials, seed, C, noise, theta_mode";

  CommonOpts risk_opts;
  double risk_C = mml::kCalibratedC;
  CLI::App* risk = app.add_subcommand(
      "risk", std::string("Monte Carlo risk for a single cell, CSV output\n") +
                  kExperimentKeys);
  CLI::Option* risk_c_opt = risk->add_option("--C", risk_C, "selector constant");
  add_common(risk, risk_opts);

  CommonOpts sweep_opts;
  double sweep_C = mml::kCalibratedC;
  CLI::App* sweepcmd = app.add_subcommand(
      "sweep", std::string("Monte Carlo risk over the full axis product, CSV "
                           "output\n") +
                   kExperimentKeys);
  CLI::Option* sweep_c_opt = sweepcmd->add_option("--C", sweep_C, "selector constant");
  add_common(sweepcmd, sweep_opts);

  CommonOpts cal_opts;
  double cal_C = mml::kCalibratedC;
  CLI::App* cal = app.add_subcommand(
      "calibrate",
      std::string("pick the smallest selector constant C with over-selection "
                  "frequency below 10%, CSV frequency table\n") +
          kExperimentKeys);
  CLI::Option* cal_c_opt = cal->add_option("--C", cal_C, "unused; accepted for symmetry");
  add_common(cal, cal_opts);

  CommonOpts rates_opts;
  CLI::App* rates = app.add_subcommand(
      "rates",
      "tabulate the local rate phi and the global rate over a grid, CSV\n"
      "config keys: n, d, delta, theta_norm_sq (lists allowed; `worst` "
      "accepted)");
  add_common(rates, rates_opts);

  CommonOpts conc_opts;
  CLI::App* conc = app.add_subcommand(
      "check-concentration",
      "empirical frequencies of the bucket-mean concentration events, CSV\n"
      "config keys: d, n, delta, ell (default d v ceil(n delta) ^ n), trials, "
      "seed");
  add_common(conc, conc_opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (gen->parsed()) return cmd_gen(gen_opts);
    if (est->parsed())
      return cmd_estimate(est_opts, est_data, est_variant, est_delta, est_ell,
                          est_C);
    if (risk->parsed()) return cmd_risk(risk_opts, risk_C, !risk_c_opt->empty());
    if (sweepcmd->parsed())
      return cmd_sweep(sweep_opts, sweep_C, !sweep_c_opt->empty());
    if (cal->parsed()) return cmd_calibrate(cal_opts, cal_C, !cal_c_opt->empty());
    if (rates->parsed()) return cmd_rates(rates_opts);
    if (conc->parsed()) return cmd_check_concentration(conc_opts);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
