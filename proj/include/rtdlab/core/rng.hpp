#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace rtdlab {

// splitmix64 step; also used as a stateless hash for deriving seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derive an independent stream seed from (seed, tag, step). Trainers use this
// so that resuming at step k replays exactly the stream an uninterrupted run
// would have used.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag, std::uint64_t step = 0) {
  return splitmix64(splitmix64(splitmix64(seed) ^ tag) ^ step);
}

// xoshiro256++ with fully specified helper distributions. The standard
// library's distributions are implementation-defined sequences; hand-rolling
// keeps runs reproducible across compilers.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (auto& w : s_) {
      x = splitmix64(x);
      w = x;
    }
    if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform double in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Unbiased integer in [0, n) via rejection.
  std::uint64_t uniform_below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("Rng::uniform_below: n must be positive");
    const std::uint64_t threshold = -n % n;  // 2^64 mod n
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  // Standard normal via Box-Muller with a cached spare.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  // Normal(0, stddev) rejected outside +/- clip_sigmas standard deviations.
  double truncated_normal(double stddev, double clip_sigmas) {
    for (;;) {
      const double z = normal();
      if (std::fabs(z) <= clip_sigmas) return z * stddev;
    }
  }

  // k distinct indices drawn uniformly from [0, n), in draw order.
  std::vector<std::int32_t> sample_without_replacement(std::int32_t n, std::int32_t k) {
    if (k > n) throw std::invalid_argument("Rng::sample_without_replacement: k > n");
    std::vector<std::int32_t> pool(static_cast<std::size_t>(n));
    for (std::int32_t i = 0; i < n; ++i) pool[static_cast<std::size_t>(i)] = i;
    std::vector<std::int32_t> out(static_cast<std::size_t>(k));
    for (std::int32_t i = 0; i < k; ++i) {
      const auto j = static_cast<std::size_t>(i) +
                     static_cast<std::size_t>(uniform_below(static_cast<std::uint64_t>(n - i)));
      std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
      out[static_cast<std::size_t>(i)] = pool[static_cast<std::size_t>(i)];
    }
    return out;
  }

  // Index sampled proportionally to non-negative weights.
  template <class S>
  std::int32_t categorical(const S* weights, std::int32_t n) {
    double total = 0.0;
    for (std::int32_t i = 0; i < n; ++i) total += static_cast<double>(weights[i]);
    if (!(total > 0.0)) throw std::invalid_argument("Rng::categorical: weights sum to zero");
    double u = uniform() * total;
    for (std::int32_t i = 0; i < n; ++i) {
      u -= static_cast<double>(weights[i]);
      if (u < 0.0) return i;
    }
    return n - 1;
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(uniform_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t s_[4]{};
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace rtdlab
