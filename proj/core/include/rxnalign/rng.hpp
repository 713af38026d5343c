#pragma once

// Deterministic random streams.  Everything randomized in the library flows
// through these so runs reproduce bit-for-bit across platforms; the standard
// distributions are avoided on purpose since their sequences are
// implementation defined.

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

namespace rxnalign::nd {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_keys(std::uint64_t a, std::uint64_t b) {
  return splitmix64(a ^ (0x9e3779b97f4a7c15ULL + (b << 6) + (b >> 2)) ^
                    splitmix64(b));
}

// Uniform in [0, 1) from a key and a counter; stateless.
inline double uniform01(std::uint64_t key, std::uint64_t counter) {
  std::uint64_t bits = splitmix64(splitmix64(key) ^ counter * 0xd1342543de82ef95ULL);
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// Standard normal via Box-Muller on the counter pair (2i, 2i+1).
inline double gaussian(std::uint64_t key, std::uint64_t counter) {
  double u1 = uniform01(key, counter * 2);
  double u2 = uniform01(key, counter * 2 + 1);
  if (u1 < 1e-300) u1 = 1e-300;
  constexpr double kTau = 6.283185307179586476925286766559;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTau * u2);
}

// Per-site dropout keying: one instance per forward pass hands a fresh key
// to each dropout site, reproducibly in (seed, step, site order).
struct DropKeys {
  bool train = false;
  double rate = 0;
  std::uint64_t seed = 0;
  std::int64_t step = 0;
  std::uint64_t site = 0;

  std::uint64_t next() {
    return mix_keys(mix_keys(seed, static_cast<std::uint64_t>(step)), site++);
  }
};

// Sequential generator built on the same core, for shuffles and sampling.
class Pcg {
 public:
  explicit Pcg(std::uint64_t seed) : state_(splitmix64(seed)) {}
  std::uint64_t next() { return state_ = splitmix64(state_); }
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  // Unbiased enough for shuffles over small n.
  std::uint64_t below(std::uint64_t n) { return n ? next() % n : 0; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
};

}  // namespace rxnalign::nd
