#ifndef MATCHLAB_RNG_HPP_
#define MATCHLAB_RNG_HPP_

#include <cstdint>

namespace matchlab {

// Labels for the independent random streams drawn from one seed.
enum class Stream : std::uint64_t {
  kRatingLeft = 1,
  kRatingRight = 2,
  kScoreLeft = 3,
  kScoreRight = 4,
  kRunSeed = 5,
  kShuffle = 6,
};

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Counter-based generator: the value depends only on (seed, stream, a, b),
/// never on how many values were drawn before it.
constexpr std::uint64_t keyed_bits(std::uint64_t seed, Stream stream,
                                   std::uint64_t a, std::uint64_t b = 0) {
  std::uint64_t h = mix64(seed ^ mix64(static_cast<std::uint64_t>(stream)));
  h = mix64(h ^ mix64(a + 0x632be59bd9b4e019ULL));
  return mix64(h ^ mix64(b + 0x8cb92ba72f3d8dd7ULL));
}

/// Uniform double in [0, 1) with 53 bits of resolution.
constexpr double keyed_uniform(std::uint64_t seed, Stream stream,
                               std::uint64_t a, std::uint64_t b = 0) {
  return static_cast<double>(keyed_bits(seed, stream, a, b) >> 11) *
         0x1.0p-53;
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return keyed_bits(seed, Stream::kRunSeed, index);
}

// Sequential engine over a keyed stream; satisfies UniformRandomBitGenerator.
class KeyedEngine {
 public:
  using result_type = std::uint64_t;

  KeyedEngine(std::uint64_t seed, Stream stream) : seed_(seed), stream_(stream) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }
  result_type operator()() { return keyed_bits(seed_, stream_, counter_++); }

 private:
  std::uint64_t seed_;
  Stream stream_;
  std::uint64_t counter_ = 0;
};

}  // namespace matchlab

#endif  // MATCHLAB_RNG_HPP_
