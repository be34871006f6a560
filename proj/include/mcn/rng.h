#ifndef MCN_RNG_H_
#define MCN_RNG_H_

#include <cstdint>
#include <initializer_list>
#include <random>

namespace mcn {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Sub-seed for a (base, tag...) path. Distinct paths give unrelated streams.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> tags) {
  std::uint64_t s = splitmix64(base);
  for (auto t : tags) s = splitmix64(s ^ splitmix64(t + 0x632BE59BD9B4E019ULL));
  return s;
}

// Tags used when deriving sub-seeds, so call sites stay readable.
enum SeedTag : std::uint64_t {
  kTagClip = 1,
  kTagRgbAug = 2,
  kTagResAug = 3,
  kTagSupport = 4,
  kTagQuery = 5,
  kTagEpoch = 6,
  kTagIteration = 7,
  kTagNegatives = 8,
  kTagPairs = 9,
  kTagInit = 10,
  kTagHead = 11,
  kTagSplit = 12,
  kTagEvalSplit = 13,
  kTagProbe = 14,
  kTagBank = 15,
  kTagInnerStep = 16,
};

}  // namespace mcn

#endif  // MCN_RNG_H_
