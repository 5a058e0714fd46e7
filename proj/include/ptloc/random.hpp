#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "ptloc/core.hpp"

namespace ptloc {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_tag(std::string_view tag) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : tag) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Seeded stream. Child streams are keyed by (seed, tag, counter) so that
// adding a draw in one operation never shifts the draws of another.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

  Rng derive(std::string_view tag) {
    std::uint64_t k = splitmix64(seed_ ^ splitmix64(hash_tag(tag) + splitmix64(counter_++)));
    return Rng(k);
  }

  std::uint64_t seed() const { return seed_; }

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform_(engine_); }

  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }

  Vec normal_vec(Eigen::Index d) {
    Vec v(d);
    for (Eigen::Index i = 0; i < d; ++i) v(i) = normal();
    return v;
  }

  Vec unit_vec(Eigen::Index d) {
    for (;;) {
      Vec v = normal_vec(d);
      double n = v.norm();
      if (n > 1e-12) return v / n;
    }
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

// Draws indices with replacement from a fixed distribution.
class IndexSampler {
 public:
  explicit IndexSampler(const Vec& weights) : dist_(weights.data(), weights.data() + weights.size()) {}
  std::size_t operator()(Rng& rng) { return dist_(rng.engine()); }

 private:
  std::discrete_distribution<std::size_t> dist_;
};

}  // namespace ptloc
