#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace cate_ebm {

std::uint64_t splitmix64(std::uint64_t x);

// Seeded random source whose stream depends only on the seed. The engine is
// mt19937_64 (bit-exact by the standard); all distributions are implemented
// here because the std:: distributions are not portable across libraries.
class SeededRng {
public:
  explicit SeededRng(std::uint64_t seed = 0);

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() { return engine_(); }
  // Uniform in [0, 1).
  double uniform();
  // Standard normal via Box-Muller; the second variate is cached.
  double normal();
  // Uniform integer in [0, n). n must be > 0.
  std::size_t uniform_index(std::size_t n);
  bool bernoulli(double p) { return uniform() < p; }

  template <class T> void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = uniform_index(i);
      std::swap(items[i - 1], items[j]);
    }
  }
  template <class T> void shuffle(std::vector<T>& items) {
    shuffle(std::span<T>(items));
  }

  std::vector<std::size_t> permutation(std::size_t n);

  // Independent child stream keyed by `stream`; does not advance *this.
  SeededRng split(std::uint64_t stream) const;

private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

} // namespace cate_ebm
