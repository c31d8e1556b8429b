#pragma once

#include <Eigen/Core>

#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace modcl {

/// Two-rail IQ record: row 0 is in-phase, row 1 is quadrature, one column per sample.
using IqMatrix = Eigen::Matrix<float, 2, Eigen::Dynamic>;

using Complex = std::complex<double>;
using ComplexSignal = std::vector<Complex>;

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to derive independent seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept {
  return splitmix64(splitmix64(a) ^ (b + 0x632BE59BD9B4E019ULL));
}

/// Counter-based stream: the generator for `(seed, counter)` depends on nothing else.
inline Rng make_stream(std::uint64_t seed, std::uint64_t counter) {
  return Rng(mix_seed(seed, counter));
}

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline std::int64_t uniform_int(Rng& rng, std::int64_t lo, std::int64_t hi) {
  return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
}

inline bool bernoulli(Rng& rng, double p) {
  // Always consumes exactly one draw so that streams stay aligned for p in {0, 1}.
  return uniform(rng, 0.0, 1.0) < p;
}

/// Raised when a caller violates a documented precondition.
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace modcl
