#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace metaspike {

// Counter-based stream generator in the SplitMix64 family (Stafford mix13
// finalizer over key + golden-ratio counter).  Streams are cheap value types:
// a stream is fully determined by its 64-bit key, and child streams are
// derived by hashing (key, tag) so that (seed, replica, purpose, index)
// tuples map to independent streams without any shared state.
inline constexpr std::uint64_t kGolden64 = 0x9E3779B97F4A7C15ull;

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ull;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBull;
  z ^= z >> 31;
  return z;
}

// Stream purpose tags used when deriving sub-streams from a replica root.
namespace stream {
inline constexpr std::uint64_t proposal = 0x01;   // global thinning clock
inline constexpr std::uint64_t accept = 0x02;     // thinning accept marks
inline constexpr std::uint64_t select = 0x03;     // spiking-neuron selection
inline constexpr std::uint64_t extinction = 0x04; // Exp(1) extinction marks
inline constexpr std::uint64_t aux = 0x05;        // auxiliary-process jumps
inline constexpr std::uint64_t neuron = 0x06;     // per-neuron mark streams
inline constexpr std::uint64_t init = 0x07;       // initial-state sampling
inline constexpr std::uint64_t misc = 0x08;
}  // namespace stream

class CounterRng {
 public:
  CounterRng() : key_(0) {}
  explicit CounterRng(std::uint64_t key) : key_(key) {}

  std::uint64_t next_u64() noexcept {
    counter_ += kGolden64;
    return mix64(key_ + counter_);
  }

  // Strictly inside (0,1); safe for log().
  double uniform01() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53 + 0x1.0p-54;
  }

  double uniform(double lo, double hi) noexcept {
    return lo + (hi - lo) * uniform01();
  }

  double exponential(double rate = 1.0) noexcept {
    return -std::log(uniform01()) / rate;
  }

  std::uint64_t below(std::uint64_t n) noexcept { return next_u64() % n; }

  // Independent child stream; derivation is order-sensitive.
  CounterRng split(std::uint64_t tag) const noexcept {
    return CounterRng(mix64(key_ ^ mix64(tag + kGolden64)));
  }

  std::uint64_t key() const noexcept { return key_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

inline std::uint64_t derive_key(std::uint64_t root,
                                std::initializer_list<std::uint64_t> tags) {
  std::uint64_t k = mix64(root + kGolden64);
  for (std::uint64_t t : tags) k = mix64(k ^ mix64(t + kGolden64));
  return k;
}

// Root stream for replica r of an experiment seeded with `seed`.
inline CounterRng replica_rng(std::uint64_t seed, std::uint64_t replica,
                              std::uint64_t purpose = 0) {
  return CounterRng(derive_key(seed, {replica, purpose}));
}

}  // namespace metaspike
