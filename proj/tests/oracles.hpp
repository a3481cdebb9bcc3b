// Independent reference implementations used only by tests. None of these
// share code with the library paths they check.
#pragma once

#include <Eigen/Core>
#include <Eigen/QR>

#include <cmath>
#include <utility>
#include <vector>

#include "mml/rng.hpp"

namespace oracle {

// Cyclic Jacobi eigensolver for symmetric matrices. Rotates every (p,q)
// pair per sweep until the off-diagonal mass is negligible. Small-d only.
inline void jacobi_eigen(Eigen::MatrixXd A, Eigen::VectorXd& evals,
                         Eigen::MatrixXd& evecs) {
  const long d = A.rows();
  evecs = Eigen::MatrixXd::Identity(d, d);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (long p = 0; p < d; ++p)
      for (long q = p + 1; q < d; ++q) off += A(p, q) * A(p, q);
    if (std::sqrt(off) <= 1e-14 * std::max(1.0, A.cwiseAbs().maxCoeff())) break;
    for (long p = 0; p < d; ++p) {
      for (long q = p + 1; q < d; ++q) {
        const double apq = A(p, q);
        if (apq == 0.0) continue;
        const double tau = (A(q, q) - A(p, p)) / (2.0 * apq);
        const double t = (tau >= 0.0)
                             ? 1.0 / (tau + std::sqrt(1.0 + tau * tau))
                             : 1.0 / (tau - std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        for (long i = 0; i < d; ++i) {
          const double aip = A(i, p), aiq = A(i, q);
          A(i, p) = c * aip - s * aiq;
          A(i, q) = s * aip + c * aiq;
        }
        for (long i = 0; i < d; ++i) {
          const double api = A(p, i), aqi = A(q, i);
          A(p, i) = c * api - s * aqi;
          A(q, i) = s * api + c * aqi;
        }
        for (long i = 0; i < d; ++i) {
          const double vip = evecs(i, p), viq = evecs(i, q);
          evecs(i, p) = c * vip - s * viq;
          evecs(i, q) = s * vip + c * viq;
        }
      }
    }
  }
  evals = A.diagonal();
}

// Top eigenpair through the Jacobi decomposition.
inline std::pair<double, Eigen::VectorXd> jacobi_top(const Eigen::MatrixXd& S) {
  Eigen::VectorXd evals;
  Eigen::MatrixXd evecs;
  jacobi_eigen(S, evals, evecs);
  long best = 0;
  for (long i = 1; i < evals.size(); ++i)
    if (evals(i) > evals(best)) best = i;
  return {evals(best), evecs.col(best)};
}

// Exact enumeration of g(delta) = E(eta_bar^2) over all flip sequences
// X in {-1,+1}^{k-1} with their probabilities. Exponential in k.
inline double g_enumerated(double delta, long k) {
  const long steps = k - 1;
  double g = 0.0;
  for (long mask = 0; mask < (1L << steps); ++mask) {
    double prob = 1.0;
    long eta = 1;
    long sum = 1;
    for (long j = 0; j < steps; ++j) {
      const bool flip = (mask >> j) & 1;
      prob *= flip ? delta : 1.0 - delta;
      eta = flip ? -eta : eta;
      sum += eta;
    }
    const double mean = static_cast<double>(sum) / static_cast<double>(k);
    g += prob * mean * mean;
  }
  return g;
}

// Naive triple-loop product B B^T / ell.
inline Eigen::MatrixXd gram_reference(const Eigen::MatrixXd& B, long ell) {
  const long d = B.rows();
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(d, d);
  for (long i = 0; i < d; ++i)
    for (long j = 0; j < d; ++j)
      for (long c = 0; c < B.cols(); ++c) S(i, j) += B(i, c) * B(j, c);
  return S / static_cast<double>(ell);
}

// Random symmetric PSD matrix with a prescribed top eigenvalue in [1,3] and
// relative spectral gap at least 0.002 (so the absolute gap exceeds 1e-3).
inline Eigen::MatrixXd random_psd_with_gap(long d, mml::Rng& rng,
                                           double* gap_out = nullptr) {
  Eigen::MatrixXd G(d, d);
  for (long i = 0; i < d; ++i)
    for (long j = 0; j < d; ++j) G(i, j) = rng.next_gaussian();
  const Eigen::MatrixXd Q = Eigen::HouseholderQR<Eigen::MatrixXd>(G).householderQ();
  Eigen::VectorXd evals(d);
  const double lambda1 = 1.0 + 2.0 * rng.next_unit();
  // log-uniform relative gap in [0.002, 0.5]
  const double rel_gap = std::exp(std::log(0.002) +
                                  rng.next_unit() * (std::log(0.5) - std::log(0.002)));
  evals(0) = lambda1;
  const double lambda2 = lambda1 * (1.0 - rel_gap);
  if (d > 1) evals(1) = lambda2;
  for (long i = 2; i < d; ++i) evals(i) = lambda2 * rng.next_unit();
  Eigen::MatrixXd S = Q * evals.asDiagonal() * Q.transpose();
  S = ((S + S.transpose()) * 0.5).eval();
  if (gap_out) *gap_out = lambda1 - lambda2;
  return S;
}

// High-precision (long double) evaluation of ell**, applying the same
// guarded ceiling convention as the implementation.
inline long ell_double_star_reference(long n, long d, double delta,
                                      double theta_norm_sq) {
  const long double nd = static_cast<long double>(n);
  const long double t1 = nd * static_cast<long double>(delta);
  long double t2 = 0.0L;
  if (delta > 0.0 && theta_norm_sq > 0.0) {
    const long double norm43 =
        expl((2.0L / 3.0L) * logl(static_cast<long double>(theta_norm_sq)));
    t2 = expl((2.0L / 3.0L) * logl(static_cast<long double>(delta))) *
         powl(nd, 4.0L / 3.0L) * norm43 /
         cbrtl(static_cast<long double>(d));
  }
  const long double t3 = nd * static_cast<long double>(theta_norm_sq);
  long double m = t1;
  if (t2 > m) m = t2;
  if (t3 > m) m = t3;
  const long double snapped = m - 1e-12L * std::max(1.0L, fabsl(m));
  long raw = static_cast<long>(ceill(snapped));
  if (raw < d) raw = d;
  if (raw > n) raw = n;
  return raw;
}

}  // namespace oracle
