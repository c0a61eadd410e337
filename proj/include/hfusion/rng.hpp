#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace hfusion {

// Seeded random stream. Everything is built directly on mt19937_64 output
// (the standard distributions and std::shuffle are implementation-defined,
// which would break cross-platform reproducibility of generated data).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next() { return gen_(); }

  // Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) { return gen_() % n; }

  // Uniform double in [0, 1), 53-bit resolution.
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  // Uniform double in (0, 1].
  double uniform_open() {
    return static_cast<double>((gen_() >> 11) + 1) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; second value of each pair is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform_open();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // Fisher-Yates; shuffles only the first k slots when k < v.size().
  template <typename T>
  void partial_shuffle(std::vector<T>& v, size_t k) {
    const size_t n = v.size();
    if (n == 0) return;
    if (k > n) k = n;
    for (size_t i = 0; i + 1 < n && i < k; ++i) {
      const size_t j = i + static_cast<size_t>(below(n - i));
      std::swap(v[i], v[j]);
    }
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    partial_shuffle(v, v.size());
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace hfusion
