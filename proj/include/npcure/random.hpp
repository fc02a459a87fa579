#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace npcure {

//! SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept
{
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

//! Deterministic random stream with splittable children.
//!
//! `split(i)` derives an independent child keyed on (parent key, i), so work
//! item i draws the same numbers no matter which thread runs it. Uniforms are
//! built from the top 53 bits of mt19937_64 output, which the standard fixes
//! bit-for-bit across implementations.
class RandomStream
{
public:
  explicit RandomStream(std::uint64_t seed = 0)
    : key_(seed)
    , engine_(mix64(seed ^ 0x6a09e667f3bcc909ULL))
  {}

  std::uint64_t key() const noexcept { return key_; }

  RandomStream split(std::uint64_t index) const
  {
    return RandomStream(mix64(key_ ^ mix64(index + 0x3c6ef372fe94f82bULL)));
  }

  //! Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  //! Uniform on (0, 1).
  double uniform_open() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }

  double exponential(double rate) { return -std::log(uniform_open()) / rate; }

  std::mt19937_64& engine() noexcept { return engine_; }

private:
  std::uint64_t key_;
  std::mt19937_64 engine_;
};

} // namespace npcure
