#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "mml/rng.hpp"

namespace mml {

//! Isotropic 1-sub-Gaussian noise families. Zero is the exact all-zeros
//! family used by deterministic tests.
enum class Noise { Gaussian, Rademacher, Zero };

//! How the center direction is drawn: the first coordinate axis or a
//! uniformly random unit vector.
enum class ThetaMode { Axis, Random };

inline const char* noise_name(Noise f) {
  switch (f) {
    case Noise::Gaussian: return "gaussian";
    case Noise::Rademacher: return "rademacher";
    case Noise::Zero: return "zero";
  }
  return "?";
}

inline Noise parse_noise(const std::string& s) {
  if (s == "gaussian") return Noise::Gaussian;
  if (s == "rademacher") return Noise::Rademacher;
  if (s == "zero") return Noise::Zero;
  throw std::invalid_argument("unknown noise family '" + s +
                              "' (expected gaussian, rademacher or zero)");
}

inline const char* theta_mode_name(ThetaMode m) {
  return m == ThetaMode::Axis ? "axis" : "random";
}

inline ThetaMode parse_theta_mode(const std::string& s) {
  if (s == "axis") return ThetaMode::Axis;
  if (s == "random") return ThetaMode::Random;
  throw std::invalid_argument("unknown theta_mode '" + s +
                              "' (expected axis or random)");
}

//! Full description of one data-generating instance.
struct ModelConfig {
  long d = 0;
  long n = 0;
  double delta = 0.0;
  Eigen::VectorXd theta;
  Noise noise = Noise::Gaussian;
  std::uint64_t seed = 0;

  void validate() const {
    if (d < 1) throw std::invalid_argument("model: d must be >= 1");
    if (n < 1) throw std::invalid_argument("model: n must be >= 1");
    if (!(delta >= 0.0 && delta < 1.0))
      throw std::invalid_argument("model: delta must lie in [0,1)");
    if (theta.size() != d)
      throw std::invalid_argument("model: theta must have exactly d coordinates");
    if (!theta.allFinite())
      throw std::invalid_argument("model: theta must be finite");
  }
};

//! Hidden label chain. flips[i] = labels[i+1] * labels[i].
struct LabelPath {
  std::vector<int> labels;  // n values in {-1,+1}
  std::vector<int> flips;   // n-1 values in {-1,+1}
};

//! Observations plus the hidden labels retained for diagnostics.
struct Dataset {
  Eigen::MatrixXd Y;  // d x n, one observation per column
  LabelPath hidden;
  ModelConfig config;
};

//! Simulate the symmetric two-state Markov chain: a Rademacher start,
//! then an independent sign flip with probability delta at every step.
inline LabelPath gen_labels(long n, double delta, Rng& rng) {
  if (n < 1) throw std::invalid_argument("gen_labels: n must be >= 1");
  if (!(delta >= 0.0 && delta < 1.0))
    throw std::invalid_argument("gen_labels: delta must lie in [0,1)");
  LabelPath path;
  path.labels.resize(static_cast<std::size_t>(n));
  path.flips.resize(static_cast<std::size_t>(n - 1));
  path.labels[0] = rng.next_sign();
  for (long i = 0; i + 1 < n; ++i) {
    const int flip = rng.next_bernoulli(delta) ? -1 : 1;
    path.flips[static_cast<std::size_t>(i)] = flip;
    path.labels[static_cast<std::size_t>(i + 1)] =
        flip * path.labels[static_cast<std::size_t>(i)];
  }
  return path;
}

//! i.i.d. isotropic noise columns; unit per-coordinate variance for the
//! Gaussian and Rademacher families.
inline Eigen::MatrixXd gen_noise(long d, long n, Noise family, Rng& rng) {
  if (d < 1 || n < 1)
    throw std::invalid_argument("gen_noise: d and n must be >= 1");
  Eigen::MatrixXd xi(d, n);
  switch (family) {
    case Noise::Gaussian:
      for (long j = 0; j < n; ++j)
        for (long i = 0; i < d; ++i) xi(i, j) = rng.next_gaussian();
      break;
    case Noise::Rademacher:
      for (long j = 0; j < n; ++j)
        for (long i = 0; i < d; ++i)
          xi(i, j) = static_cast<double>(rng.next_sign());
      break;
    case Noise::Zero:
      xi.setZero();
      break;
  }
  return xi;
}

//! Draw a dataset Y_i = eta_i * theta + xi_i, keeping the hidden labels.
inline Dataset gen_dataset(const ModelConfig& config, Rng& rng) {
  config.validate();
  Dataset ds;
  ds.config = config;
  ds.hidden = gen_labels(config.n, config.delta, rng);
  ds.Y = gen_noise(config.d, config.n, config.noise, rng);
  for (long j = 0; j < config.n; ++j)
    ds.Y.col(j) +=
        static_cast<double>(ds.hidden.labels[static_cast<std::size_t>(j)]) *
        config.theta;
  return ds;
}

//! Negate the columns with even 1-based index. Applied to data whose flip
//! probability exceeds 1/2 this reduces it to 1 - delta; it is an involution.
inline Eigen::MatrixXd flip_even(const Eigen::MatrixXd& Y) {
  Eigen::MatrixXd Z = Y;
  for (long j = 1; j < Z.cols(); j += 2) Z.col(j) = -Z.col(j);
  return Z;
}

//! Center of the requested norm, along e1 or a uniformly random direction.
inline Eigen::VectorXd make_theta(long d, double norm, ThetaMode mode, Rng& rng) {
  if (d < 1) throw std::invalid_argument("make_theta: d must be >= 1");
  if (!(norm >= 0.0) || !std::isfinite(norm))
    throw std::invalid_argument("make_theta: norm must be finite and >= 0");
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(d);
  if (mode == ThetaMode::Axis) {
    theta(0) = norm;
    return theta;
  }
  double len = 0.0;
  do {
    for (long i = 0; i < d; ++i) theta(i) = rng.next_gaussian();
    len = theta.norm();
  } while (len == 0.0);
  theta *= norm / len;
  return theta;
}

}  // namespace mml
