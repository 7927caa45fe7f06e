#pragma once

#include <cmath>
#include <cstdint>

namespace tsmfg {

inline constexpr std::uint64_t kGoldenGamma = 0x9e3779b97f4a7c15ULL;

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Counter-based stream: the j-th output is a pure function of
// (master_seed, stream, j), so trials can run in any order.
class CounterRng {
 public:
  CounterRng(std::uint64_t master_seed, std::uint64_t stream) noexcept
      : key_(mix64(master_seed ^ mix64(stream + kGoldenGamma))) {}

  std::uint64_t next() noexcept {
    ++counter_;
    return mix64(key_ + counter_ * kGoldenGamma);
  }

  // Uniform on the open interval (0, 1).
  double uniform() noexcept { return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53; }

  double exponential(double rate) noexcept { return -std::log(uniform()) / rate; }

  bool bernoulli(double p) noexcept { return uniform() < p; }

  std::uint64_t draws() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// Seed for a derived sub-experiment (e.g. one N of a sweep).
constexpr std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t tag) noexcept {
  return mix64(master_seed + mix64(tag ^ 0x5851f42d4c957f2dULL));
}

}  // namespace tsmfg
