#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace musrec {

// std::uniform_int_distribution and std::shuffle are implementation-defined;
// seeded outputs here must be identical on every standard library.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : engine_(seed) {}

  // Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return x % bound;
  }

  std::uint64_t next() { return engine_(); }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  // First `count` positions of a Fisher-Yates pass over 0..population-1.
  std::vector<std::size_t> choose(std::size_t population, std::size_t count) {
    std::vector<std::size_t> idx(population);
    for (std::size_t i = 0; i < population; ++i) idx[i] = i;
    if (count > population) count = population;
    for (std::size_t i = 0; i < count; ++i) {
      const auto j = i + static_cast<std::size_t>(below(population - i));
      std::swap(idx[i], idx[j]);
    }
    idx.resize(count);
    return idx;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace musrec
