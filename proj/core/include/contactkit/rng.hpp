#pragma once

#include <cmath>
#include <cstdint>

namespace contactkit {

// Counter-based random number discipline. Every Poisson stream in a replica is
// keyed by (root seed, replica id, object kind, object coordinates), so a
// stream's output never depends on which other streams exist or how far they
// were sampled. Growing the box or the horizon extends logs without perturbing
// existing events.

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ull;

/// SplitMix64 finalizer (Steele, Lea, Flood / Vigna).
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Hierarchical stream key. `with(word)` derives a child key; chains of
/// `with` calls give distinct, decorrelated keys for distinct word sequences.
class StreamId {
 public:
  explicit StreamId(std::uint64_t root) : key_(mix64(root + kGoldenGamma)) {}

  StreamId with(std::uint64_t word) const {
    StreamId child(*this);
    child.key_ = mix64((key_ + kGoldenGamma) ^ mix64(word + kGoldenGamma));
    return child;
  }

  std::uint64_t key() const { return key_; }

 private:
  std::uint64_t key_;
};

// Object-kind tags for stream derivation.
inline constexpr std::uint64_t kRecoveryStream = 1;
inline constexpr std::uint64_t kArrowStream = 2;
inline constexpr std::uint64_t kEdgeRateStream = 3;
inline constexpr std::uint64_t kBootstrapStream = 4;

/// SplitMix64 sequence from a fixed key: out(n) = mix64(key + n*gamma).
/// Equivalent to a counter-based generator with O(1) skip.
class CounterStream {
 public:
  explicit CounterStream(std::uint64_t key) : state_(key) {}
  explicit CounterStream(const StreamId& id) : state_(id.key()) {}

  std::uint64_t next_u64() {
    state_ += kGoldenGamma;
    return mix64(state_);
  }

  /// Uniform double strictly inside (0, 1).
  double next_unit() {
    // 53-bit mantissa, offset by half an ulp so 0 and 1 are unreachable.
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Exponential with the given rate (rate > 0).
  double next_exponential(double rate) { return -std::log(next_unit()) / rate; }

 private:
  std::uint64_t state_;
};

}  // namespace contactkit
