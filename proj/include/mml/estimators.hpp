#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mml/model.hpp"
#include "mml/spectral.hpp"

namespace mml {

//! Default threshold constant for the selectors; the recommended calibrated
//! value lives in harness.hpp (kCalibratedC).
inline constexpr double kDefaultC = 1.0;

enum class Variant {
  KnownDeltaOracle,
  KnownDeltaAdaptive,
  PlainOracle,
  LepskiGlobal,
  LepskiRefined,
  VanillaSpectral,
};

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::KnownDeltaOracle: return "known_oracle";
    case Variant::KnownDeltaAdaptive: return "known_adaptive";
    case Variant::PlainOracle: return "plain_oracle";
    case Variant::LepskiGlobal: return "lepski_global";
    case Variant::LepskiRefined: return "lepski_refined";
    case Variant::VanillaSpectral: return "vanilla_spectral";
  }
  return "?";
}

inline Variant parse_variant(const std::string& s) {
  if (s == "known_oracle") return Variant::KnownDeltaOracle;
  if (s == "known_adaptive") return Variant::KnownDeltaAdaptive;
  if (s == "plain_oracle") return Variant::PlainOracle;
  if (s == "lepski_global") return Variant::LepskiGlobal;
  if (s == "lepski_refined") return Variant::LepskiRefined;
  if (s == "vanilla_spectral") return Variant::VanillaSpectral;
  throw std::invalid_argument("unknown estimator variant '" + s + "'");
}

inline bool variant_needs_delta(Variant v) {
  return v == Variant::KnownDeltaOracle || v == Variant::KnownDeltaAdaptive;
}

//! One row of a Lepski scan: candidate g_k against its threshold.
struct SelectorRecord {
  int grid_index = 0;
  long candidate_ell = 0;
  double threshold_sq = 0.0;
  double discrepancy_sq = 0.0;
};

//! Two-stage trace of the known-delta adaptive rule.
struct AdaptiveTrace {
  long ell1 = 0;
  double s_hat = 0.0;
  long target = 0;
  long ell_hat = 0;
};

//! An estimated center with provenance.
struct Estimate {
  Eigen::VectorXd theta_hat;
  Variant variant = Variant::VanillaSpectral;
  long ell_used = 0;
  double lambda_max = 0.0;
  std::vector<SelectorRecord> selector_trace;   // empty for non-Lepski variants
  std::optional<AdaptiveTrace> adaptive_trace;  // present for known_adaptive
};

//! g(delta) = E(eta_bar_i^2), the signal attenuation of a length-k bucket.
//!
//! With rho = 1 - 2*delta the closed form reads
//!   k^2 g = k(1+rho)/(1-rho) - 2(rho - rho^{k+1})/(1-rho)^2,
//! and g(0) = 1, g(1/2) = 1/k. Near rho = 1 the two terms cancel, so that
//! range is evaluated through the partial sum k^2 g = k + 2 sum_{j<k}(k-j)rho^j
//! whose terms are all positive.
inline double g_of_delta(double delta, long k) {
  if (!(delta >= 0.0 && delta <= 0.5))
    throw std::invalid_argument(
        "g_of_delta: delta must lie in [0, 1/2]; reduce larger values first");
  if (k < 1) throw std::invalid_argument("g_of_delta: k must be >= 1");
  if (k == 1 || delta == 0.0) return 1.0;
  const double rho = 1.0 - 2.0 * delta;
  const double kk = static_cast<double>(k);
  double ksq_g;
  if (rho > 0.999) {
    double sum = 0.0;
    double rp = 1.0;
    for (long j = 1; j < k; ++j) {
      rp *= rho;
      sum += static_cast<double>(k - j) * rp;
    }
    ksq_g = kk + 2.0 * sum;
  } else {
    const double one_m = 1.0 - rho;
    ksq_g = kk * (1.0 + rho) / one_m -
            2.0 * (rho - std::pow(rho, kk + 1.0)) / (one_m * one_m);
  }
  return std::min(ksq_g / (kk * kk), 1.0);
}

namespace detail {

//! Ceiling with a relative snap-down so products like 1000*0.1, which land
//! one ulp above the intended integer, do not round up an extra step.
inline long guarded_ceil(double x) {
  if (!std::isfinite(x)) throw std::invalid_argument("guarded_ceil: non-finite value");
  return static_cast<long>(std::ceil(x - 1e-12 * std::max(1.0, std::fabs(x))));
}

//! Shared spectral pipeline: bucketize, Gram, top eigenpair, bias-corrected
//! rescaling. `scale` is ell / E||eta_bar||^2, i.e. 1/g(delta) for the
//! known-delta estimator and 1 for the plain one.
inline Estimate spectral_estimate(const Eigen::MatrixXd& Y, long ell,
                                  double scale, Variant variant) {
  const BucketMatrix b = bucketize(Y, ell);
  const SigmaHat s = gram(b);
  const EigenPair top = top_eigenpair(s.S);
  if (!top.converged)
    throw std::runtime_error("top_eigenpair did not converge at ell=" +
                             std::to_string(ell));
  const double excess =
      std::max(top.lambda_max - 1.0 / static_cast<double>(b.k), 0.0);
  Estimate e;
  e.theta_hat = std::sqrt(scale * excess) * top.v_max;
  e.variant = variant;
  e.ell_used = ell;
  e.lambda_max = top.lambda_max;
  return e;
}

}  // namespace detail

//! theta_hat(ell) = sqrt( (ell / E||eta_bar||^2) (lambda_max - 1/k)_+ ) v_max
//! with E||eta_bar||^2 = ell * g(delta, k).
//!
//! Accepts any delta in [0,1); for delta > 1/2 the even-indexed samples are
//! negated first, which reduces the flip probability to 1 - delta.
inline Estimate estimate_known_delta(const Eigen::MatrixXd& Y, long ell,
                                     double delta) {
  if (!(delta >= 0.0 && delta < 1.0))
    throw std::invalid_argument("estimate_known_delta: delta must lie in [0,1)");
  if (delta > 0.5) return estimate_known_delta(flip_even(Y), ell, 1.0 - delta);
  const long n = Y.cols();
  if (ell < 1 || ell > n)
    throw std::invalid_argument("estimate_known_delta: ell must lie in [1, n]");
  const double scale = 1.0 / g_of_delta(delta, n / ell);
  return detail::spectral_estimate(Y, ell, scale, Variant::KnownDeltaOracle);
}

//! theta_tilde(ell): the same estimator with the attenuation factor dropped,
//! so it needs no knowledge of delta.
inline Estimate estimate_plain(const Eigen::MatrixXd& Y, long ell) {
  return detail::spectral_estimate(Y, ell, 1.0, Variant::PlainOracle);
}

//! Oracle bucket count l* = d v ceil(n (delta v ||theta||^2)) ^ n for the
//! known-delta estimator.
inline long ell_star(long n, long d, double delta, double theta_norm_sq) {
  if (d < 1 || d > n) throw std::invalid_argument("ell_star: need 1 <= d <= n");
  if (!(delta >= 0.0 && delta < 1.0))
    throw std::invalid_argument("ell_star: delta must lie in [0,1)");
  if (!(theta_norm_sq >= 0.0))
    throw std::invalid_argument("ell_star: theta_norm_sq must be >= 0");
  const long raw =
      detail::guarded_ceil(static_cast<double>(n) * std::max(delta, theta_norm_sq));
  return std::min(std::max(d, raw), n);
}

//! Oracle bucket count for the plain estimator:
//! l** = d v ceil( n delta  v  delta^{2/3} n^{4/3} ||theta||^{4/3} / d^{1/3}
//!                 v  n ||theta||^2 ) ^ n,
//! with ||theta||^{4/3} = (theta_norm_sq)^{2/3} evaluated through logs and a
//! zero short-circuit.
inline long ell_double_star(long n, long d, double delta, double theta_norm_sq) {
  if (d < 1 || d > n)
    throw std::invalid_argument("ell_double_star: need 1 <= d <= n");
  if (!(delta >= 0.0 && delta < 1.0))
    throw std::invalid_argument("ell_double_star: delta must lie in [0,1)");
  if (!(theta_norm_sq >= 0.0))
    throw std::invalid_argument("ell_double_star: theta_norm_sq must be >= 0");
  const double nd = static_cast<double>(n);
  const double t1 = nd * delta;
  double t2 = 0.0;
  if (delta > 0.0 && theta_norm_sq > 0.0) {
    const double norm43 = std::exp((2.0 / 3.0) * std::log(theta_norm_sq));
    t2 = std::exp((2.0 / 3.0) * std::log(delta)) * std::pow(nd, 4.0 / 3.0) *
         norm43 / std::cbrt(static_cast<double>(d));
  }
  const double t3 = nd * theta_norm_sq;
  const long raw = detail::guarded_ceil(std::max({t1, t2, t3}));
  return std::min(std::max(d, raw), n);
}

//! Two-stage adaptive rule for known delta. A pilot at l1 = d v ceil(delta n) ^ n
//! estimates the norm s; the target ceil( n(3 delta v s^2) v C d ) ^ n is then
//! rounded up to the dyadic grid {d 2^m} ^ n and theta_hat is recomputed there.
inline Estimate adaptive_known_delta(const Eigen::MatrixXd& Y, double delta,
                                     double C = kDefaultC) {
  if (!(delta >= 0.0 && delta < 1.0))
    throw std::invalid_argument("adaptive_known_delta: delta must lie in [0,1)");
  if (!(C > 0.0))
    throw std::invalid_argument("adaptive_known_delta: C must be > 0");
  if (delta > 0.5) return adaptive_known_delta(flip_even(Y), 1.0 - delta, C);
  const long n = Y.cols();
  const long d = Y.rows();
  if (d > n)
    throw std::invalid_argument("adaptive_known_delta: requires d <= n");
  const long ell1 =
      std::min(std::max(d, detail::guarded_ceil(delta * static_cast<double>(n))), n);
  const Estimate pilot = estimate_known_delta(Y, ell1, delta);
  const double s_hat = pilot.theta_hat.norm();
  const double raw =
      std::max(static_cast<double>(n) * std::max(3.0 * delta, s_hat * s_hat),
               C * static_cast<double>(d));
  const long target = std::min(detail::guarded_ceil(raw), n);
  long ell_hat = d;
  while (ell_hat < target) ell_hat *= 2;
  ell_hat = std::min(ell_hat, n);
  Estimate e = estimate_known_delta(Y, ell_hat, delta);
  e.variant = Variant::KnownDeltaAdaptive;
  e.adaptive_trace = AdaptiveTrace{ell1, s_hat, target, ell_hat};
  return e;
}

//! Dyadic grid {d, 2d, 4d, ...} with the largest element still <= n.
inline std::vector<long> lepski_grid(long n, long d) {
  if (d < 1 || d > n) throw std::invalid_argument("lepski_grid: need 1 <= d <= n");
  std::vector<long> grid{d};
  while (grid.back() <= n / 2) grid.push_back(grid.back() * 2);
  return grid;
}

namespace detail {

//! theta_tilde at every grid point, cached so both Lepski passes reuse the
//! same per-grid estimates.
struct GridEstimates {
  std::vector<long> grid;
  std::vector<Estimate> estimates;
};

inline GridEstimates lepski_estimates(const Eigen::MatrixXd& Y) {
  GridEstimates ge;
  ge.grid = lepski_grid(Y.cols(), Y.rows());
  ge.estimates.reserve(ge.grid.size());
  for (long g : ge.grid) ge.estimates.push_back(estimate_plain(Y, g));
  return ge;
}

//! Scan adjacent discrepancies against the thresholds
//!   omega_k^2 = 4 C^2 ( sqrt(d g_k)/n  ^  d g_k / (n^2 norm_sq(k)) ),
//! where a zero norm sends the second branch to +infinity. Returns the
//! smallest m such that every k >= m+1 passes (equivalently the largest
//! failing k, or 0 when none fails) together with the full scan trace.
inline std::pair<int, std::vector<SelectorRecord>> lepski_scan(
    const GridEstimates& ge, long n, long d, double C,
    const std::function<double(int)>& norm_sq_at) {
  int chosen = 0;
  std::vector<SelectorRecord> trace;
  for (int k = 1; k < static_cast<int>(ge.grid.size()); ++k) {
    const double disc = sq_sign_loss(ge.estimates[static_cast<std::size_t>(k)].theta_hat,
                                     ge.estimates[static_cast<std::size_t>(k - 1)].theta_hat);
    const double gk = static_cast<double>(ge.grid[static_cast<std::size_t>(k)]);
    const double nd = static_cast<double>(n);
    const double b1 = std::sqrt(static_cast<double>(d) * gk) / nd;
    const double norm_sq = norm_sq_at(k);
    const double b2 = norm_sq > 0.0
                          ? static_cast<double>(d) * gk / (nd * nd * norm_sq)
                          : std::numeric_limits<double>::infinity();
    const double omega_sq = 4.0 * C * C * std::min(b1, b2);
    trace.push_back({k, ge.grid[static_cast<std::size_t>(k)], omega_sq, disc});
    if (disc > omega_sq) chosen = k;
  }
  return {chosen, std::move(trace)};
}

}  // namespace detail

//! Fully adaptive bucket-count selection over the dyadic grid. The norm
//! branch of each threshold uses ||theta_tilde(g_k)|| at that grid point.
inline Estimate lepski_select(const Eigen::MatrixXd& Y, double C = kDefaultC) {
  if (!(C > 0.0)) throw std::invalid_argument("lepski_select: C must be > 0");
  const detail::GridEstimates ge = detail::lepski_estimates(Y);
  auto [m, trace] = detail::lepski_scan(
      ge, Y.cols(), Y.rows(), C, [&](int k) {
        return ge.estimates[static_cast<std::size_t>(k)].theta_hat.squaredNorm();
      });
  Estimate e = ge.estimates[static_cast<std::size_t>(m)];
  e.variant = Variant::LepskiGlobal;
  e.selector_trace = std::move(trace);
  return e;
}

//! Refined second pass: the thresholds are recomputed with the pilot norm
//! ||theta_tilde(l_tilde)|| from the first pass, on the same cached grid
//! estimates (nothing is re-estimated).
inline Estimate lepski_refined(const Eigen::MatrixXd& Y, double C = kDefaultC) {
  if (!(C > 0.0)) throw std::invalid_argument("lepski_refined: C must be > 0");
  const detail::GridEstimates ge = detail::lepski_estimates(Y);
  auto [m1, trace1] = detail::lepski_scan(
      ge, Y.cols(), Y.rows(), C, [&](int k) {
        return ge.estimates[static_cast<std::size_t>(k)].theta_hat.squaredNorm();
      });
  const double pilot_norm_sq =
      ge.estimates[static_cast<std::size_t>(m1)].theta_hat.squaredNorm();
  auto [m2, trace2] = detail::lepski_scan(
      ge, Y.cols(), Y.rows(), C, [&](int) { return pilot_norm_sq; });
  Estimate e = ge.estimates[static_cast<std::size_t>(m2)];
  e.variant = Variant::LepskiRefined;
  e.selector_trace = std::move(trace2);
  return e;
}

//! Parameters of a rate evaluation.
struct RateQuery {
  double theta_norm_sq = 0.0;
  long n = 0;
  long d = 0;
  double delta = 0.0;
};

//! Global minimax reference sqrt(delta d / n) + d/n.
inline double global_rate(long n, long d, double delta) {
  if (d < 1 || n < 1) throw std::invalid_argument("global_rate: need d, n >= 1");
  const double nd = static_cast<double>(n);
  return std::sqrt(delta * static_cast<double>(d) / nd) +
         static_cast<double>(d) / nd;
}

//! Piecewise local rate phi(theta). At regime boundaries more than one branch
//! applies; ties are resolved by the pointwise minimum of the applicable
//! branches.
inline double phi_rate(const RateQuery& q) {
  if (q.d < 1 || q.d > q.n) throw std::invalid_argument("phi_rate: need 1 <= d <= n");
  if (!(q.delta >= 0.0 && q.delta <= 0.5))
    throw std::invalid_argument("phi_rate: delta must lie in [0, 1/2]");
  if (!(q.theta_norm_sq >= 0.0))
    throw std::invalid_argument("phi_rate: theta_norm_sq must be >= 0");
  const double dn = static_cast<double>(q.d) / static_cast<double>(q.n);
  const double sdn = std::sqrt(q.delta * static_cast<double>(q.d) /
                               static_cast<double>(q.n));
  const double lo = std::max(sdn, dn);   // sqrt(delta d/n) v d/n
  const double hi = std::max(q.delta, dn);  // delta v d/n
  const double M = q.theta_norm_sq;
  double best = std::numeric_limits<double>::infinity();
  if (M <= lo) best = std::min(best, sdn + dn);
  if (M >= lo && M <= hi) best = std::min(best, q.delta * dn / M);
  if (M >= hi) best = std::min(best, dn);
  return best;
}

}  // namespace mml
