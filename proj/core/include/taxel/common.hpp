// Copyright (c) 2026 Taxel Contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace taxel {

/// Calibration inconsistency: a series-spring total at or above the
/// elastomer stiffness has no feasible object stiffness.
class InfeasibleModelError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

enum class LogLevel { Error = 0, Warn = 1, Info = 2, Debug = 3 };

/// Level is read once from TAXEL_LOG (error/warn/info/debug), default info.
LogLevel log_level();
void log(LogLevel level, std::string_view msg);

inline void log_error(std::string_view m) { log(LogLevel::Error, m); }
inline void log_warn(std::string_view m) { log(LogLevel::Warn, m); }
inline void log_info(std::string_view m) { log(LogLevel::Info, m); }
inline void log_debug(std::string_view m) { log(LogLevel::Debug, m); }

/// Deterministic PRNG wrapper. mt19937_64 has a standardized bit stream and
/// the uniform/normal draws below avoid the implementation-defined stdlib
/// distributions, so seeded runs replay bit-exactly.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  /// Uniform double in [0, 1).
  double uniform() {
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller (cached spare).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    constexpr double two_pi = 6.283185307179586476925286766559;
    spare_ = r * std::sin(two_pi * u2);
    has_spare_ = true;
    return r * std::cos(two_pi * u2);
  }

  /// Uniform integer in [0, n), rejection-sampled (no modulo bias).
  std::uint64_t bounded(std::uint64_t n) {
    if (n == 0) throw std::domain_error("Rng::bounded: n must be positive");
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t x = eng_();
      if (x >= threshold) return x % n;
    }
  }

  std::uint64_t raw() { return eng_(); }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[bounded(i)]);
    }
  }

 private:
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// SplitMix64 step, used to derive independent substream seeds.
std::uint64_t splitmix64(std::uint64_t& state);

/// Stable seed for substream `stream` of `master` (order-independent).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

/// Runs fn(i) for i in [0, n). jobs <= 1 runs inline; otherwise a small
/// thread pool picks indices off an atomic counter. Callers that need
/// deterministic aggregation must write per-index results and reduce in
/// index order afterwards.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

/// Creates `dir` (parents included) or accepts an existing empty directory.
/// Anything else throws: outputs are write-once and never overwrite.
void ensure_fresh_dir(const std::string& dir);

}  // namespace taxel
