#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace lindistill {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

inline constexpr double kPi = std::numbers::pi;
inline constexpr const char* kToolVersion = "0.1.0";

// Rank deficiency where an operation needs full column rank.
class singular_error : public std::runtime_error {
 public:
  explicit singular_error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed on-disk data (IDX files, curve CSVs, configs past parsing).
class format_error : public std::runtime_error {
 public:
  explicit format_error(const std::string& what) : std::runtime_error(what) {}
};

// NaN/Inf showed up where it must not.
class numeric_error : public std::runtime_error {
 public:
  explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

// Divergence that survived automatic step reduction.
class step_size_error : public std::runtime_error {
 public:
  explicit step_size_error(const std::string& what) : std::runtime_error(what) {}
};

// Overflow-safe logistic function.
inline double sigmoid(double u) {
  if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
  const double e = std::exp(u);
  return e / (1.0 + e);
}

// log(1 + exp(u)) without overflow for large |u|.
inline double softplus(double u) {
  if (u > 0.0) return u + std::log1p(std::exp(-u));
  return std::log1p(std::exp(u));
}

// Keeps probabilities invertible through logit and entropy terms.
inline double clamp_probability(double y) {
  return std::clamp(y, 1e-15, 1.0 - 1e-15);
}

inline double logit(double y) {
  y = clamp_probability(y);
  return std::log(y / (1.0 - y));
}

// Binary entropy in nats, with the 0 log 0 = 0 convention via clamping.
inline double binary_entropy(double y) {
  y = clamp_probability(y);
  return -y * std::log(y) - (1.0 - y) * std::log(1.0 - y);
}

}  // namespace lindistill
