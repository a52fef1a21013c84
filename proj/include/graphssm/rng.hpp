#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

#include "graphssm/common.hpp"

namespace graphssm {

/// Counter-free splittable generator. Every stream is derived from a root
/// seed and a name, so adding a new consumer never shifts existing ones.
/// Output is bit-identical across platforms (no std:: distributions).
class Rng {
public:
  explicit Rng(std::uint64_t seed) : state_(mix(seed ^ 0x9e3779b97f4a7c15ULL)) {}

  /// Independent child stream keyed by name.
  [[nodiscard]] Rng split(std::string_view name) const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const char ch : name) {
      h ^= static_cast<unsigned char>(ch);
      h *= 0x100000001b3ULL;
    }
    return Rng(mix(state_ + h));
  }

  [[nodiscard]] Rng split(std::uint64_t index) const {
    return Rng(mix(state_ ^ mix(index + 0x632be59bd9b4e019ULL)));
  }

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix(state_);
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    require(n > 0, "Rng::below requires n > 0");
    return next_u64() % n;
  }

  double normal() {
    // Box-Muller; the spare value is discarded to keep the stream simple.
    double u1 = uniform();
    while (u1 <= 0.0) {
      u1 = uniform();
    }
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
    Matrix m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
      for (Eigen::Index i = 0; i < rows; ++i) {
        m(i, j) = scale * normal();
      }
    }
    return m;
  }

  Matrix uniform_matrix(Eigen::Index rows, Eigen::Index cols, double lo, double hi) {
    Matrix m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
      for (Eigen::Index i = 0; i < rows; ++i) {
        m(i, j) = uniform(lo, hi);
      }
    }
    return m;
  }

  /// Glorot/Xavier uniform with fan_in = rows, fan_out = cols.
  Matrix glorot(Eigen::Index rows, Eigen::Index cols) {
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    return uniform_matrix(rows, cols, -limit, limit);
  }

private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

}  // namespace graphssm
