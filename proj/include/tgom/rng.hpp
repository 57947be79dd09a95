#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>

namespace tgom {

// Counter-based random streams.
//
// Every random quantity in the sampler is drawn from a stream identified by
// (seed, block, ids...). The n-th output of a stream is mix64(key + n * golden),
// i.e. SplitMix64 evaluated at an explicit counter, so a stream's values do not
// depend on which thread consumes it or on what other streams have done.

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

enum class Block : std::uint64_t {
  kInit = 1,
  kLatent = 2,
  kBeta = 3,
  kMembership = 4,
  kAlpha = 5,
  kAlphaAccept = 6,
  kGenerate = 7,
  kFolds = 8,
  kPredict = 9,
  kMembershipSubset = 10,
};

class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t key) : key_(key) {}

  static CounterRng stream(std::uint64_t seed, Block block,
                           std::initializer_list<std::uint64_t> ids) {
    std::uint64_t h = mix64(seed ^ 0x243f6a8885a308d3ULL);
    h = mix64(h ^ (static_cast<std::uint64_t>(block) * kGolden));
    for (std::uint64_t id : ids) h = mix64((h + kGolden) ^ mix64(id + 0x13198a2e03707344ULL));
    return CounterRng(h);
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return at(counter_++); }
  result_type at(std::uint64_t n) const { return mix64(key_ + (n + 1) * kGolden); }

  // Uniform on the open interval (0, 1).
  double uniform() { return to_open_unit(operator()()); }
  double uniform_at(std::uint64_t n) const { return to_open_unit(at(n)); }

  double normal() { return std::normal_distribution<double>{}(*this); }

  double gamma(double shape) { return std::gamma_distribution<double>{shape, 1.0}(*this); }

  // log of a Gamma(shape, 1) draw, accurate for very small shapes where the
  // draw itself underflows: G(a) = G(a + 1) * U^(1/a).
  double log_gamma_variate(double shape) {
    if (shape >= 1.0) return std::log(gamma(shape));
    const double boosted = gamma(shape + 1.0);
    return std::log(boosted) + std::log(uniform()) / shape;
  }

  std::uint64_t counter() const { return counter_; }

 private:
  static double to_open_unit(std::uint64_t x) {
    return (static_cast<double>(x >> 11) + 0.5) * 0x1.0p-53;
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace tgom
