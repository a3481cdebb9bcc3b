#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "mml/rng.hpp"

namespace mml {

//! Bucket means Ytilde together with the (ell, k) geometry that produced them.
struct BucketMatrix {
  Eigen::MatrixXd Ytilde;  // d x ell
  long ell = 0;
  long k = 0;       // bucket length
  long n_used = 0;  // = k * ell; the remainder of the sample is dropped
};

//! Empirical Gram matrix S = Ytilde Ytilde^T / ell.
struct SigmaHat {
  Eigen::MatrixXd S;
  long ell = 0;
  long k = 0;
};

//! Result of the power iteration. When `converged` is false max_iter was
//! exhausted and the best iterate seen is returned; callers decide whether
//! to accept it.
struct EigenPair {
  double lambda_max = 0.0;
  Eigen::VectorXd v_max;
  long iterations = 0;
  double residual = 0.0;
  bool converged = false;
};

//! Average consecutive blocks of k = floor(n/ell) columns. The trailing
//! n - k*ell columns are dropped so every bucket has the same length.
inline BucketMatrix bucketize(const Eigen::MatrixXd& Y, long ell) {
  const long n = Y.cols();
  if (ell < 1 || ell > n)
    throw std::invalid_argument("bucketize: ell must lie in [1, n]");
  BucketMatrix b;
  b.ell = ell;
  b.k = n / ell;
  b.n_used = b.k * ell;
  b.Ytilde.resize(Y.rows(), ell);
  for (long j = 0; j < ell; ++j)
    b.Ytilde.col(j) = Y.middleCols(j * b.k, b.k).rowwise().mean();
  return b;
}

//! S = Ytilde Ytilde^T / ell, symmetrized to kill roundoff asymmetry.
inline SigmaHat gram(const BucketMatrix& b) {
  SigmaHat s;
  s.ell = b.ell;
  s.k = b.k;
  s.S = (b.Ytilde * b.Ytilde.transpose()) / static_cast<double>(b.ell);
  s.S = ((s.S + s.S.transpose()) * 0.5).eval();
  return s;
}

namespace detail {

inline void fix_eigvec_sign(Eigen::VectorXd& v) {
  // first coordinate with magnitude above 1e-8 is made positive
  for (long i = 0; i < v.size(); ++i) {
    if (std::abs(v(i)) > 1e-8) {
      if (v(i) < 0.0) v = -v;
      return;
    }
  }
}

inline Eigen::VectorXd random_unit(long d, Rng& rng) {
  Eigen::VectorXd v(d);
  double len = 0.0;
  do {
    for (long i = 0; i < d; ++i) v(i) = rng.next_gaussian();
    len = v.norm();
  } while (len == 0.0);
  return v / len;
}

}  // namespace detail

//! Power iteration for the top eigenpair of a symmetric PSD matrix.
//!
//! Starts from the normalized all-ones vector. If that start turns out to be
//! orthogonal to the top eigenspace (a vanished image, or an eigenvalue
//! estimate that stalls far from convergence) the iterate is re-randomized
//! once from a fixed auxiliary seed. Convergence means
//! ||S v - lambda v|| <= tol * max(lambda, 1). The returned vector is unit
//! norm with its first coordinate above 1e-8 in magnitude made positive;
//! when the top eigenvalue is multiple, whichever eigenvector the iteration
//! lands on is accepted. An exactly zero matrix yields (0, e1) by convention.
inline EigenPair top_eigenpair(const Eigen::MatrixXd& S, double tol = 1e-10,
                               long max_iter = 10000) {
  if (S.rows() != S.cols() || S.rows() < 1)
    throw std::invalid_argument("top_eigenpair: matrix must be square");
  if (!(tol > 0.0)) throw std::invalid_argument("top_eigenpair: tol must be > 0");
  if (max_iter < 1)
    throw std::invalid_argument("top_eigenpair: max_iter must be >= 1");

  const long d = S.rows();
  EigenPair out;
  out.v_max = Eigen::VectorXd::Zero(d);
  out.v_max(0) = 1.0;
  if (S.cwiseAbs().maxCoeff() == 0.0) {
    out.converged = true;
    return out;
  }

  Rng aux(0x51AB5F1Cu);  // fixed auxiliary stream for the one restart
  bool restarted = false;
  Eigen::VectorXd v = Eigen::VectorXd::Constant(d, 1.0 / std::sqrt(static_cast<double>(d)));
  double best_residual = std::numeric_limits<double>::infinity();
  double lambda_checkpoint = -1.0;

  for (long it = 1; it <= max_iter; ++it) {
    const Eigen::VectorXd w = S * v;
    const double wn = w.norm();
    if (wn == 0.0) {
      // the iterate sits in the nullspace of a nonzero PSD matrix, which
      // cannot hold the top eigenvalue (the trace is positive)
      if (restarted) break;
      restarted = true;
      v = detail::random_unit(d, aux);
      continue;
    }
    const double lambda = v.dot(w);
    const double residual = (w - lambda * v).norm();
    const double gate = std::max(lambda, 1.0);
    if (residual < best_residual) {
      best_residual = residual;
      out.lambda_max = lambda;
      out.v_max = v;
      out.residual = residual;
      out.iterations = it;
    }
    if (residual <= tol * gate) {
      out.converged = true;
      break;
    }
    v = w / wn;
    if (it % 128 == 0) {
      if (!restarted && std::abs(lambda - lambda_checkpoint) <= 1e-14 * gate &&
          residual > 64.0 * tol * gate) {
        restarted = true;
        v = detail::random_unit(d, aux);
      }
      lambda_checkpoint = lambda;
    }
  }
  detail::fix_eigvec_sign(out.v_max);
  return out;
}

//! Squared sign-invariant loss min(||a-b||^2, ||a+b||^2).
inline double sq_sign_loss(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("sign_loss: length mismatch");
  return std::min((a - b).squaredNorm(), (a + b).squaredNorm());
}

//! Sign-invariant loss min(||a-b||, ||a+b||); the center is identifiable
//! only up to a global sign.
inline double sign_loss(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return std::sqrt(sq_sign_loss(a, b));
}

}  // namespace mml
