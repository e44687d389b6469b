#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace smooth_threshold {

// Counter-based 64-bit generator.
//
// The i-th output of a stream is a pure function of (key, i): two rounds of
// the SplitMix64 finalizer applied to the key-offset counter. Streams are
// split by hashing a stream id into a fresh key, so repetition r of an
// experiment seeded with s always draws from CounterRng(s).split(r),
// independent of how many other streams were consumed or in what order.
// Distributions are implemented here (not via <random>) so that draws are
// identical across standard library implementations.
class CounterRng
{
public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t seed = 0)
    : key_(mix(seed ^ 0x6a09e667f3bcc909ULL))
  {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max()
  {
    return std::numeric_limits<result_type>::max();
  }

  //! Independent child stream; does not advance this generator.
  CounterRng split(std::uint64_t stream) const
  {
    CounterRng child;
    child.key_ = mix(key_ ^ mix(stream + 0x9e3779b97f4a7c15ULL));
    return child;
  }

  result_type operator()() { return at(counter_++); }

  //! Output at an arbitrary counter position (does not advance).
  result_type at(std::uint64_t counter) const
  {
    return mix(mix(key_ + counter * 0x9e3779b97f4a7c15ULL) ^ key_);
  }

  std::uint64_t position() const { return counter_; }

  //! Uniform on the open interval (0, 1).
  double uniform()
  {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
  }

  //! Uniform integer in [0, bound) by rejection (unbiased).
  std::uint64_t below(std::uint64_t bound)
  {
    const std::uint64_t limit = max() - max() % bound;
    std::uint64_t r;
    do {
      r = (*this)();
    } while (r >= limit);
    return r % bound;
  }

  //! Standard normal via Box-Muller; the second variate is cached.
  double normal()
  {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  //! Standard logistic variate.
  double logistic()
  {
    const double u = uniform();
    return std::log(u / (1.0 - u));
  }

  //! Uniform on {-1, +1}.
  double sign() { return ((*this)() >> 63) ? 1.0 : -1.0; }

private:
  static constexpr std::uint64_t mix(std::uint64_t z)
  {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

} // namespace smooth_threshold
