#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include "mml/estimators.hpp"
#include "mml/io.hpp"
#include "mml/model.hpp"

namespace mml {

//! Selector constant frozen by the calibration run recorded in the repo
//! (smallest C in {0.5,1,2,4,8} whose over-selection frequency stays below
//! 10% on the default grid; see calibrate_C and tests/acceptance.cpp).
inline constexpr double kCalibratedC = 2.0;

//! Norm placement of the global worst case, sqrt(delta d/n) v d/n.
inline double worst_case_norm_sq(long n, long d, double delta) {
  const double nd = static_cast<double>(n);
  return std::max(std::sqrt(delta * static_cast<double>(d) / nd),
                  static_cast<double>(d) / nd);
}

//! One theta_norm_sq axis entry: a literal value, or the per-cell worst case.
struct NormAxisValue {
  bool worst = false;
  double value = 0.0;
};

//! Sweepable experiment description.
struct ExperimentSpec {
  std::vector<long> n_values;
  std::vector<long> d_values;
  std::vector<double> delta_values;
  std::vector<NormAxisValue> theta_norm_sq_values;
  std::vector<Variant> estimators;
  long trials = 0;
  std::uint64_t master_seed = 0;
  bool seed_set = false;
  double C = kCalibratedC;
  Noise noise = Noise::Gaussian;
  ThetaMode theta_mode = ThetaMode::Random;
  int threads = 0;  // 0: resolve from MML_THREADS, then hardware concurrency
};

struct Cell {
  long n = 0;
  long d = 0;
  double delta = 0.0;
  double theta_norm_sq = 0.0;
  Variant estimator = Variant::VanillaSpectral;
};

//! Monte Carlo summary of the squared sign-invariant loss for one cell.
struct RiskReport {
  Cell cell;
  long trials = 0;
  double mean_sq_loss = 0.0;
  double stderr_ = 0.0;
  double q50 = 0.0;
  double q90 = 0.0;
  double q95 = 0.0;
  double mean_ell_used = 0.0;
  double phi_ref = 0.0;
  double global_ref = 0.0;
  bool valid = false;
};

struct TrialOutcome {
  double sq_loss = std::numeric_limits<double>::quiet_NaN();
  long ell_used = 0;
  bool ok = false;
};

inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("MML_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

namespace detail {

//! Run body(i) for i in [0, count) on up to `threads` workers. Each index
//! owns its output slot, so results do not depend on the schedule. The first
//! exception thrown by a body is rethrown after all workers join.
inline void parallel_for(long count, int threads,
                         const std::function<void(long)>& body) {
  if (count <= 0) return;
  const long workers = std::min<long>(std::max(threads, 1), count);
  if (workers <= 1) {
    for (long i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<long> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (long t = 0; t < workers; ++t) {
    pool.emplace_back([&] {
      while (true) {
        const long i = next.fetch_add(1);
        if (i >= count) break;
        try {
          body(i);
        } catch (...) {
          if (!failed.exchange(true)) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failed.load()) std::rethrow_exception(error);
}

//! Compensated (Kahan) sum in index order.
inline double kahan_sum(const std::vector<double>& xs) {
  double sum = 0.0, comp = 0.0;
  for (double x : xs) {
    const double y = x - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  return sum;
}

//! Linear-interpolation quantile of an ascending-sorted sample.
inline double quantile_sorted(const std::vector<double>& xs, double p) {
  const double h = static_cast<double>(xs.size() - 1) * p;
  const std::size_t lo = static_cast<std::size_t>(h);
  if (lo + 1 >= xs.size()) return xs.back();
  return xs[lo] + (h - static_cast<double>(lo)) * (xs[lo + 1] - xs[lo]);
}

inline double effective_delta(double delta) { return std::min(delta, 1.0 - delta); }

}  // namespace detail

//! One Monte Carlo trial: derive the trial stream from (master_seed, index),
//! draw theta and a dataset, run the estimator, return the squared loss and
//! the bucket count actually used. Estimator failures are captured, not
//! thrown, so a sweep survives individual bad trials.
inline TrialOutcome run_trial(const Cell& cell, Noise noise, ThetaMode theta_mode,
                              double C, std::uint64_t trial_index,
                              std::uint64_t master_seed) {
  Rng rng = Rng::for_trial(master_seed, trial_index);
  TrialOutcome out;
  try {
    const Eigen::VectorXd theta =
        make_theta(cell.d, std::sqrt(cell.theta_norm_sq), theta_mode, rng);
    ModelConfig mc;
    mc.d = cell.d;
    mc.n = cell.n;
    mc.delta = cell.delta;
    mc.theta = theta;
    mc.noise = noise;
    const Dataset ds = gen_dataset(mc, rng);
    const double delta_eff = detail::effective_delta(cell.delta);
    Estimate e;
    switch (cell.estimator) {
      case Variant::KnownDeltaOracle:
        e = estimate_known_delta(
            ds.Y, ell_star(cell.n, cell.d, delta_eff, cell.theta_norm_sq),
            cell.delta);
        break;
      case Variant::KnownDeltaAdaptive:
        e = adaptive_known_delta(ds.Y, cell.delta, C);
        break;
      case Variant::PlainOracle:
        e = estimate_plain(
            ds.Y, ell_double_star(cell.n, cell.d, delta_eff, cell.theta_norm_sq));
        break;
      case Variant::LepskiGlobal:
        e = lepski_select(ds.Y, C);
        break;
      case Variant::LepskiRefined:
        e = lepski_refined(ds.Y, C);
        break;
      case Variant::VanillaSpectral:
        e = estimate_plain(ds.Y, cell.n);
        e.variant = Variant::VanillaSpectral;
        break;
    }
    out.sq_loss = sq_sign_loss(e.theta_hat, theta);
    out.ell_used = e.ell_used;
    out.ok = true;
  } catch (const std::exception&) {
    out.ok = false;
  }
  return out;
}

//! Aggregate run_trial over spec.trials independent streams. Deterministic
//! given the master seed regardless of thread count: every trial writes its
//! own slot and aggregation runs in trial order afterwards. A cell with more
//! than 5% failed trials is marked invalid.
inline RiskReport mc_risk(const ExperimentSpec& spec, const Cell& cell) {
  if (spec.trials < 1) throw std::invalid_argument("mc_risk: trials must be >= 1");
  if (cell.d > cell.n)
    throw std::invalid_argument("mc_risk: cell has d > n (d=" +
                                std::to_string(cell.d) +
                                ", n=" + std::to_string(cell.n) + ")");
  std::vector<TrialOutcome> outcomes(static_cast<std::size_t>(spec.trials));
  detail::parallel_for(spec.trials, resolve_threads(spec.threads), [&](long i) {
    outcomes[static_cast<std::size_t>(i)] =
        run_trial(cell, spec.noise, spec.theta_mode, spec.C,
                  static_cast<std::uint64_t>(i), spec.master_seed);
  });

  std::vector<double> losses;
  losses.reserve(outcomes.size());
  double ell_sum = 0.0;
  long failed = 0;
  for (const TrialOutcome& o : outcomes) {
    if (o.ok) {
      losses.push_back(o.sq_loss);
      ell_sum += static_cast<double>(o.ell_used);
    } else {
      ++failed;
    }
  }

  RiskReport r;
  r.cell = cell;
  r.trials = static_cast<long>(losses.size());
  r.valid = 20 * failed <= spec.trials && !losses.empty();
  if (!losses.empty()) {
    const double mean = detail::kahan_sum(losses) / static_cast<double>(losses.size());
    r.mean_sq_loss = mean;
    if (losses.size() > 1) {
      double ss = 0.0;
      for (double x : losses) ss += (x - mean) * (x - mean);
      r.stderr_ = std::sqrt(ss / static_cast<double>(losses.size() - 1) /
                            static_cast<double>(losses.size()));
    }
    std::vector<double> sorted = losses;
    std::sort(sorted.begin(), sorted.end());
    r.q50 = detail::quantile_sorted(sorted, 0.50);
    r.q90 = detail::quantile_sorted(sorted, 0.90);
    r.q95 = detail::quantile_sorted(sorted, 0.95);
    r.mean_ell_used = ell_sum / static_cast<double>(losses.size());
  } else {
    r.mean_sq_loss = r.stderr_ = r.q50 = r.q90 = r.q95 = r.mean_ell_used =
        std::numeric_limits<double>::quiet_NaN();
  }
  const double delta_eff = detail::effective_delta(cell.delta);
  r.phi_ref = phi_rate({cell.theta_norm_sq, cell.n, cell.d, delta_eff});
  r.global_ref = global_rate(cell.n, cell.d, delta_eff);
  return r;
}

//! Cartesian product of the spec axes in lexicographic cell order
//! (n, d, delta, theta_norm_sq, estimator name).
inline std::vector<Cell> spec_cells(const ExperimentSpec& spec) {
  if (spec.n_values.empty() || spec.d_values.empty() ||
      spec.delta_values.empty() || spec.theta_norm_sq_values.empty())
    throw std::invalid_argument("experiment spec: every axis needs at least one value");
  if (spec.estimators.empty())
    throw std::invalid_argument("experiment spec: no estimators listed");
  std::vector<Cell> cells;
  for (long n : spec.n_values)
    for (long d : spec.d_values) {
      if (d > n)
        throw std::invalid_argument("experiment spec: cell with d=" +
                                    std::to_string(d) + " > n=" + std::to_string(n));
      for (double delta : spec.delta_values)
        for (const NormAxisValue& nv : spec.theta_norm_sq_values) {
          const double norm_sq =
              nv.worst ? worst_case_norm_sq(n, d, detail::effective_delta(delta))
                       : nv.value;
          for (Variant est : spec.estimators)
            cells.push_back({n, d, delta, norm_sq, est});
        }
    }
  std::sort(cells.begin(), cells.end(), [](const Cell& a, const Cell& b) {
    return std::forward_as_tuple(a.n, a.d, a.delta, a.theta_norm_sq,
                                 std::string_view(variant_name(a.estimator))) <
           std::forward_as_tuple(b.n, b.d, b.delta, b.theta_norm_sq,
                                 std::string_view(variant_name(b.estimator)));
  });
  return cells;
}

inline std::vector<RiskReport> sweep(const ExperimentSpec& spec) {
  std::vector<RiskReport> reports;
  for (const Cell& cell : spec_cells(spec)) reports.push_back(mc_risk(spec, cell));
  return reports;
}

//! CSV serialization, one row per report; floats as shortest round-trip
//! decimals so identical runs produce identical bytes.
inline std::string reports_to_csv(const std::vector<RiskReport>& reports) {
  std::string out =
      "n,d,delta,theta_norm_sq,estimator,trials,mean_sq_loss,stderr,q50,q90,"
      "q95,mean_ell_used,phi_ref,global_ref,valid\n";
  for (const RiskReport& r : reports) {
    out += std::to_string(r.cell.n);
    out += ',';
    out += std::to_string(r.cell.d);
    out += ',';
    out += format_double(r.cell.delta);
    out += ',';
    out += format_double(r.cell.theta_norm_sq);
    out += ',';
    out += variant_name(r.cell.estimator);
    out += ',';
    out += std::to_string(r.trials);
    out += ',';
    out += format_double(r.mean_sq_loss);
    out += ',';
    out += format_double(r.stderr_);
    out += ',';
    out += format_double(r.q50);
    out += ',';
    out += format_double(r.q90);
    out += ',';
    out += format_double(r.q95);
    out += ',';
    out += format_double(r.mean_ell_used);
    out += ',';
    out += format_double(r.phi_ref);
    out += ',';
    out += format_double(r.global_ref);
    out += ',';
    out += r.valid ? '1' : '0';
    out += '\n';
  }
  return out;
}

enum class SweepAxis { N, Delta };
enum class LossMetric { Mean, Median };

//! Ordinary least squares on (log x, log loss).
struct SlopeFit {
  SweepAxis axis = SweepAxis::N;
  std::vector<std::pair<double, double>> points;
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

//! Fit log(loss) against log(n) or log(delta) across reports. Nonpositive
//! losses are dropped; fewer than three surviving points is an error.
inline SlopeFit fit_loglog_slope(const std::vector<RiskReport>& reports,
                                 SweepAxis axis,
                                 LossMetric metric = LossMetric::Mean) {
  SlopeFit fit;
  fit.axis = axis;
  for (const RiskReport& r : reports) {
    const double x = axis == SweepAxis::N ? static_cast<double>(r.cell.n)
                                          : r.cell.delta;
    const double y = metric == LossMetric::Mean ? r.mean_sq_loss : r.q50;
    if (!(y > 0.0) || !(x > 0.0)) continue;
    fit.points.emplace_back(std::log(x), std::log(y));
  }
  if (fit.points.size() < 3)
    throw std::invalid_argument(
        "fit_loglog_slope: need at least 3 points with positive loss");
  double sx = 0.0, sy = 0.0;
  for (const auto& [x, y] : fit.points) {
    sx += x;
    sy += y;
  }
  const double m = static_cast<double>(fit.points.size());
  const double mx = sx / m, my = sy / m;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& [x, y] : fit.points) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
  }
  if (sxx == 0.0)
    throw std::invalid_argument("fit_loglog_slope: points do not vary along the axis");
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0.0, ss_tot = 0.0;
  for (const auto& [x, y] : fit.points) {
    const double pred = fit.intercept + fit.slope * x;
    ss_res += (y - pred) * (y - pred);
    ss_tot += (y - my) * (y - my);
  }
  fit.r_squared = ss_tot > 0.0 ? std::clamp(1.0 - ss_res / ss_tot, 0.0, 1.0) : 1.0;
  return fit;
}

//! One calibration measurement: over-selection frequency of the global
//! Lepski selector at a given C on one cell.
struct CalibrationRow {
  double C = 0.0;
  long n = 0;
  long d = 0;
  double delta = 0.0;
  double theta_norm_sq = 0.0;
  long trials = 0;
  double overselect_freq = 0.0;
};

struct CalibrationResult {
  double C = 0.0;
  bool warning = false;  // no candidate qualified; largest C returned
  std::vector<CalibrationRow> table;
};

inline const std::vector<double>& calibration_candidates() {
  static const std::vector<double> cs{0.5, 1.0, 2.0, 4.0, 8.0};
  return cs;
}

//! Pure selection rule: smallest candidate C whose over-selection frequency
//! stays below `threshold` on every cell of the table; if none qualifies the
//! largest candidate is returned with a warning.
inline CalibrationResult choose_calibrated_C(std::vector<CalibrationRow> table,
                                             double threshold = 0.10) {
  CalibrationResult result;
  result.table = std::move(table);
  for (double c : calibration_candidates()) {
    bool ok = true;
    bool seen = false;
    for (const CalibrationRow& row : result.table) {
      if (row.C != c) continue;
      seen = true;
      if (!(row.overselect_freq < threshold)) ok = false;
    }
    if (seen && ok) {
      result.C = c;
      return result;
    }
  }
  result.C = calibration_candidates().back();
  result.warning = true;
  return result;
}

//! Measure P(l_tilde > 4 l**) for every candidate C over the spec grid. The
//! per-grid estimates are computed once per trial and re-scanned for each C,
//! since C enters only through the thresholds.
inline CalibrationResult calibrate_C(const ExperimentSpec& spec) {
  if (spec.trials < 1)
    throw std::invalid_argument("calibrate_C: trials must be >= 1");
  const std::vector<double>& cs = calibration_candidates();
  std::vector<CalibrationRow> table;
  for (long n : spec.n_values)
    for (long d : spec.d_values) {
      if (d > n)
        throw std::invalid_argument("calibrate_C: cell with d > n");
      for (double delta : spec.delta_values)
        for (const NormAxisValue& nv : spec.theta_norm_sq_values) {
          const double delta_eff = detail::effective_delta(delta);
          const double norm_sq =
              nv.worst ? worst_case_norm_sq(n, d, delta_eff) : nv.value;
          const long four_ell = 4 * ell_double_star(n, d, delta_eff, norm_sq);
          // over-selection counts per candidate C, filled per trial; a trial
          // whose grid estimates fail (rare eigensolver non-convergence) is
          // skipped for every C
          std::vector<std::vector<std::uint8_t>> over(
              cs.size(), std::vector<std::uint8_t>(static_cast<std::size_t>(spec.trials), 0));
          std::vector<std::uint8_t> done(static_cast<std::size_t>(spec.trials), 0);
          detail::parallel_for(spec.trials, resolve_threads(spec.threads), [&](long i) {
            Rng rng = Rng::for_trial(spec.master_seed, static_cast<std::uint64_t>(i));
            try {
              const Eigen::VectorXd theta =
                  make_theta(d, std::sqrt(norm_sq), spec.theta_mode, rng);
              ModelConfig mc;
              mc.d = d;
              mc.n = n;
              mc.delta = delta;
              mc.theta = theta;
              mc.noise = spec.noise;
              const Dataset ds = gen_dataset(mc, rng);
              const detail::GridEstimates ge = detail::lepski_estimates(ds.Y);
              for (std::size_t ci = 0; ci < cs.size(); ++ci) {
                const auto [m, trace] = detail::lepski_scan(
                    ge, n, d, cs[ci], [&](int k) {
                      return ge.estimates[static_cast<std::size_t>(k)]
                          .theta_hat.squaredNorm();
                    });
                if (ge.grid[static_cast<std::size_t>(m)] > four_ell)
                  over[ci][static_cast<std::size_t>(i)] = 1;
              }
              done[static_cast<std::size_t>(i)] = 1;
            } catch (const std::exception&) {
            }
          });
          long completed = 0;
          for (std::uint8_t b : done) completed += b;
          for (std::size_t ci = 0; ci < cs.size(); ++ci) {
            long count = 0;
            for (std::uint8_t b : over[ci]) count += b;
            const double freq =
                completed > 0
                    ? static_cast<double>(count) / static_cast<double>(completed)
                    : 1.0;
            table.push_back({cs[ci], n, d, delta, norm_sq, completed, freq});
          }
        }
    }
  return choose_calibrated_C(std::move(table));
}

inline std::string calibration_to_csv(const CalibrationResult& result) {
  std::string out = "C,n,d,delta,theta_norm_sq,trials,overselect_freq,chosen,warning\n";
  for (const CalibrationRow& row : result.table) {
    out += format_double(row.C);
    out += ',';
    out += std::to_string(row.n);
    out += ',';
    out += std::to_string(row.d);
    out += ',';
    out += format_double(row.delta);
    out += ',';
    out += format_double(row.theta_norm_sq);
    out += ',';
    out += std::to_string(row.trials);
    out += ',';
    out += format_double(row.overselect_freq);
    out += ',';
    out += row.C == result.C ? '1' : '0';
    out += ',';
    out += result.warning ? '1' : '0';
    out += '\n';
  }
  return out;
}

//! Empirical frequencies for the bucket-mean concentration events.
struct ConcentrationReport {
  long d = 0;
  long ell = 0;
  long n = 0;
  long trials = 0;
  double delta = 0.0;
  double freq_sandwich = 0.0;   // P(ell/4 <= ||eta_bar||^2 <= ell)
  double freq_upper = 0.0;      // P(||eta_bar||^2 <= ell)
  double freq_deviation = 0.0;  // P(| ||eta_bar||^2 - E | <= sqrt(d*ell))
  double expected_norm_sq = 0.0;  // ell * g(delta)
  double mean_norm_sq = 0.0;
};

//! Simulate label chains and check the concentration of ||eta_bar||^2.
//! Requires the hypotheses d <= ell <= n and n*delta <= ell.
inline ConcentrationReport concentration_check(long d, long ell, double delta,
                                               long n, long trials,
                                               std::uint64_t master_seed,
                                               int threads = 0) {
  if (!(d >= 1 && d <= ell && ell <= n))
    throw std::invalid_argument("concentration_check: need 1 <= d <= ell <= n");
  if (!(delta >= 0.0 && delta <= 0.5))
    throw std::invalid_argument("concentration_check: delta must lie in [0, 1/2]");
  if (static_cast<double>(n) * delta > static_cast<double>(ell) * (1.0 + 1e-12))
    throw std::invalid_argument(
        "concentration_check: hypothesis n*delta <= ell violated");
  if (trials < 1)
    throw std::invalid_argument("concentration_check: trials must be >= 1");

  const long k = n / ell;
  const double expected = static_cast<double>(ell) * g_of_delta(delta, k);
  const double dev = std::sqrt(static_cast<double>(d) * static_cast<double>(ell));

  std::vector<double> norms(static_cast<std::size_t>(trials));
  detail::parallel_for(trials, resolve_threads(threads), [&](long i) {
    Rng rng = Rng::for_trial(master_seed, static_cast<std::uint64_t>(i));
    const LabelPath path = gen_labels(n, delta, rng);
    double total = 0.0;
    for (long j = 0; j < ell; ++j) {
      long sum = 0;
      for (long t = j * k; t < (j + 1) * k; ++t)
        sum += path.labels[static_cast<std::size_t>(t)];
      const double mean = static_cast<double>(sum) / static_cast<double>(k);
      total += mean * mean;
    }
    norms[static_cast<std::size_t>(i)] = total;
  });

  ConcentrationReport rep;
  rep.d = d;
  rep.ell = ell;
  rep.n = n;
  rep.trials = trials;
  rep.delta = delta;
  rep.expected_norm_sq = expected;
  long sandwich = 0, upper = 0, within = 0;
  for (double s : norms) {
    if (s <= static_cast<double>(ell)) ++upper;
    if (s >= static_cast<double>(ell) / 4.0 && s <= static_cast<double>(ell))
      ++sandwich;
    if (std::abs(s - expected) <= dev) ++within;
  }
  rep.freq_sandwich = static_cast<double>(sandwich) / static_cast<double>(trials);
  rep.freq_upper = static_cast<double>(upper) / static_cast<double>(trials);
  rep.freq_deviation = static_cast<double>(within) / static_cast<double>(trials);
  rep.mean_norm_sq = detail::kahan_sum(norms) / static_cast<double>(trials);
  return rep;
}

inline std::string concentration_to_csv(const ConcentrationReport& r) {
  std::string out =
      "d,ell,delta,n,trials,freq_sandwich,freq_upper,freq_deviation,"
      "expected_norm_sq,mean_norm_sq\n";
  out += std::to_string(r.d);
  out += ',';
  out += std::to_string(r.ell);
  out += ',';
  out += format_double(r.delta);
  out += ',';
  out += std::to_string(r.n);
  out += ',';
  out += std::to_string(r.trials);
  out += ',';
  out += format_double(r.freq_sandwich);
  out += ',';
  out += format_double(r.freq_upper);
  out += ',';
  out += format_double(r.freq_deviation);
  out += ',';
  out += format_double(r.expected_norm_sq);
  out += ',';
  out += format_double(r.mean_norm_sq);
  out += '\n';
  return out;
}

//! Parse the experiment config keys (n, d, delta, theta_norm_sq, estimators,
//! trials, seed, C, noise, theta_mode); list-valued keys take comma-separated
//! entries, and theta_norm_sq additionally accepts the token `worst`.
inline ExperimentSpec parse_experiment_spec(const KvMap& kv) {
  ExperimentSpec spec;
  const auto split = [](const std::string& s) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : s) {
      if (c == ',') {
        parts.push_back(detail::trim(cur));
        cur.clear();
      } else {
        cur += c;
      }
    }
    parts.push_back(detail::trim(cur));
    return parts;
  };
  for (const auto& [key, value] : kv) {
    try {
      if (key == "n") {
        for (const std::string& p : split(value)) spec.n_values.push_back(parse_long(p));
      } else if (key == "d") {
        for (const std::string& p : split(value)) spec.d_values.push_back(parse_long(p));
      } else if (key == "delta") {
        for (const std::string& p : split(value))
          spec.delta_values.push_back(parse_double(p));
      } else if (key == "theta_norm_sq") {
        for (const std::string& p : split(value)) {
          if (p == "worst")
            spec.theta_norm_sq_values.push_back({true, 0.0});
          else
            spec.theta_norm_sq_values.push_back({false, parse_double(p)});
        }
      } else if (key == "estimators") {
        for (const std::string& p : split(value))
          spec.estimators.push_back(parse_variant(p));
      } else if (key == "trials") {
        spec.trials = parse_long(value);
      } else if (key == "seed") {
        spec.master_seed = parse_u64(value);
        spec.seed_set = true;
      } else if (key == "C") {
        spec.C = parse_double(value);
      } else if (key == "noise") {
        spec.noise = parse_noise(value);
      } else if (key == "theta_mode") {
        spec.theta_mode = parse_theta_mode(value);
      } else {
        throw std::invalid_argument("unknown experiment config key '" + key + "'");
      }
    } catch (const std::invalid_argument& ex) {
      throw std::invalid_argument("key '" + key + "': " + ex.what());
    }
  }
  return spec;
}

}  // namespace mml
