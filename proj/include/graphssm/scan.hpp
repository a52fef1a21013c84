#pragma once

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "graphssm/common.hpp"

namespace graphssm {

/// u_l = decay_l * u_{l-1} + drive_l over independent lanes.
/// decay and drive are [lanes x steps]; column l holds step l.
struct RecurrenceInputs {
  Matrix decay;
  Matrix drive;
  Vector initial;

  [[nodiscard]] Eigen::Index lanes() const { return drive.rows(); }
  [[nodiscard]] Eigen::Index steps() const { return drive.cols(); }

  void validate() const {
    require(decay.rows() == drive.rows() && decay.cols() == drive.cols(), "decay and drive differ in shape");
    require(initial.size() == drive.rows(), "initial state has the wrong number of lanes");
    require(decay.allFinite() && drive.allFinite() && initial.allFinite(), "recurrence inputs must be finite");
    require((decay.array() >= 0.0).all() && (decay.array() <= 1.0).all(), "decay entries must lie in [0, 1]");
  }
};

/// Element of the scan monoid: the affine map u -> a * u + b.
struct AffineStep {
  Vector a;
  Vector b;
};

/// x then y: (a1, b1) o (a2, b2) = (a1 a2, a2 b1 + b2).
inline AffineStep combine(const AffineStep& x, const AffineStep& y) {
  require(x.a.size() == y.a.size() && x.b.size() == y.b.size() && x.a.size() == x.b.size(),
          "combine operands differ in shape");
  return {x.a.cwiseProduct(y.a), y.a.cwiseProduct(x.b) + y.b};
}

/// States after every step, written into `out` [lanes x steps].
inline void scan_sequential_into(const RecurrenceInputs& inp, Matrix& out) {
  inp.validate();
  out.resize(inp.lanes(), inp.steps());
  if (inp.steps() == 0) return;
  out.col(0) = inp.decay.col(0).cwiseProduct(inp.initial) + inp.drive.col(0);
  for (Eigen::Index l = 1; l < inp.steps(); ++l) {
    out.col(l) = inp.decay.col(l).cwiseProduct(out.col(l - 1)) + inp.drive.col(l);
  }
}

inline Matrix scan_sequential(const RecurrenceInputs& inp) {
  Matrix out;
  scan_sequential_into(inp, out);
  return out;
}

inline std::size_t resolve_threads(std::size_t threads) {
  if (threads != 0) return threads;
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

namespace detail {

template <class Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
  const std::size_t workers = std::min(count, resolve_threads(threads));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < count; i += workers) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace detail

/// Chunked two-pass scan. Each chunk of `chunk` steps is reduced to one
/// affine map (upsweep), carries are propagated across chunks, then each chunk
/// reruns its recurrence from its carry (downsweep). The result depends on
/// `chunk` but not on `threads`.
inline void scan_parallel_into(const RecurrenceInputs& inp, std::size_t chunk, std::size_t threads, Matrix& out) {
  require(chunk > 0, "scan chunk size must be positive");
  inp.validate();
  const Eigen::Index steps = inp.steps();
  out.resize(inp.lanes(), steps);
  if (steps == 0) return;
  const auto width = static_cast<Eigen::Index>(chunk);
  const auto chunks = static_cast<std::size_t>((steps + width - 1) / width);
  const auto bounds = [&](std::size_t c) {
    const Eigen::Index lo = static_cast<Eigen::Index>(c) * width;
    return std::pair{lo, std::min(steps, lo + width)};
  };

  std::vector<AffineStep> summary(chunks);
  detail::parallel_for(chunks, threads, [&](std::size_t c) {
    const auto [lo, hi] = bounds(c);
    AffineStep acc{inp.decay.col(lo), inp.drive.col(lo)};
    for (Eigen::Index l = lo + 1; l < hi; ++l) {
      acc.a.array() *= inp.decay.col(l).array();
      acc.b = inp.decay.col(l).cwiseProduct(acc.b) + inp.drive.col(l);
    }
    summary[c] = std::move(acc);
  });

  std::vector<Vector> carry(chunks);
  carry[0] = inp.initial;
  for (std::size_t c = 1; c < chunks; ++c) {
    carry[c] = summary[c - 1].a.cwiseProduct(carry[c - 1]) + summary[c - 1].b;
  }

  detail::parallel_for(chunks, threads, [&](std::size_t c) {
    const auto [lo, hi] = bounds(c);
    out.col(lo) = inp.decay.col(lo).cwiseProduct(carry[c]) + inp.drive.col(lo);
    for (Eigen::Index l = lo + 1; l < hi; ++l) {
      out.col(l) = inp.decay.col(l).cwiseProduct(out.col(l - 1)) + inp.drive.col(l);
    }
  });
}

inline Matrix scan_parallel(const RecurrenceInputs& inp, std::size_t chunk, std::size_t threads = 0) {
  Matrix out;
  scan_parallel_into(inp, chunk, threads, out);
  return out;
}

enum class ScanBackend { Sequential, Parallel };

struct ScanOptions {
  ScanBackend backend{ScanBackend::Sequential};
  std::size_t chunk{64};
  std::size_t threads{0};
};

inline void run_scan_into(const RecurrenceInputs& inp, const ScanOptions& opts, Matrix& out) {
  if (opts.backend == ScanBackend::Sequential) {
    scan_sequential_into(inp, out);
  } else {
    scan_parallel_into(inp, opts.chunk, opts.threads, out);
  }
}

inline Matrix run_scan(const RecurrenceInputs& inp, const ScanOptions& opts) {
  Matrix out;
  run_scan_into(inp, opts, out);
  return out;
}

inline const char* to_string(ScanBackend b) { return b == ScanBackend::Sequential ? "sequential" : "parallel"; }

struct BenchRow {
  std::size_t steps{};
  std::size_t lanes{};
  ScanBackend backend{};
  double ns_per_element{};
};

/// Best-of-`repeats` wall time per (lane, step) element. The output buffer is
/// allocated and touched by an untimed warm-up run.
inline BenchRow bench_scan(const RecurrenceInputs& inp, const ScanOptions& opts, std::size_t repeats) {
  require(repeats > 0, "bench needs at least one repetition");
  Matrix out;
  run_scan_into(inp, opts, out);
  double best = 0.0;
  for (std::size_t r = 0; r < repeats; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    run_scan_into(inp, opts, out);
    const auto t1 = std::chrono::steady_clock::now();
    volatile double sink = out(0, 0);
    (void)sink;
    const double ns = std::chrono::duration<double, std::nano>(t1 - t0).count();
    best = r == 0 ? ns : std::min(best, ns);
  }
  const double elements = static_cast<double>(inp.lanes()) * static_cast<double>(inp.steps());
  return {static_cast<std::size_t>(inp.steps()), static_cast<std::size_t>(inp.lanes()), opts.backend,
          best / elements};
}

}  // namespace graphssm
