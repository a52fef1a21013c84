#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace graphssm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

using NodeId = std::uint32_t;

/// Thrown when an input violates a documented precondition or invariant.
class InvalidInput : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a file does not follow one of the text formats.
class FormatError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) {
    throw InvalidInput(message);
  }
}

inline double softplus(double x) {
  // log(1 + e^x) without overflow for large x
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double inverse_softplus(double y) {
  return y > 30.0 ? y : std::log(std::expm1(y));
}

inline double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

inline double relative_frobenius(const Matrix& actual, const Matrix& expected) {
  const double denom = expected.norm();
  const double diff = (actual - expected).norm();
  return denom > 0.0 ? diff / denom : diff;
}

}  // namespace graphssm
