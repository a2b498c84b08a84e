#pragma once

#include <cstdint>
#include <cmath>
#include <random>
#include <utility>

namespace advlogo {

// Named random streams. Every random draw in the library is keyed by
// (root seed, stream, counter) so no global generator exists.
enum class Stream : std::uint64_t {
  kBackgrounds = 1,
  kAugment = 2,
  kDetectorInit = 3,
  kDetectorShuffle = 4,
  kDetectorData = 5,
  kTestBackgrounds = 6,
  kTexture = 7,
  kTest = 99,
};

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Counter-based seed splitter.
constexpr std::uint64_t derive_seed(std::uint64_t root, Stream stream,
                                    std::uint64_t counter = 0) {
  return splitmix64(splitmix64(splitmix64(root) ^ static_cast<std::uint64_t>(stream)) ^
                    counter);
}

// Thin wrapper over mt19937_64 with platform-independent real conversion
// (std::uniform_real_distribution output is implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(std::uint64_t root, Stream stream, std::uint64_t counter = 0)
      : engine_(derive_seed(root, stream, counter)) {}

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [lo, hi].
  std::int64_t integer(std::int64_t lo, std::int64_t hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(engine_() % span);
  }

  double normal() {
    // Box-Muller; one value per call keeps the stream position simple.
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  template <typename Container>
  void shuffle(Container& c) {
    for (std::size_t i = c.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(engine_() % i);
      std::swap(c[i - 1], c[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace advlogo
