// Deterministic random draws on top of mt19937_64. All samplers are written
// out here (no std distributions) so that a (seed, stream) pair produces the
// same sequence on every platform and across thread counts.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace votrans {

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}
}  // namespace detail

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(detail::splitmix64(seed)) {}

  // independent stream for one replicate: mixes (seed, index)
  static Rng stream(std::uint64_t seed, std::uint64_t index) {
    Rng r(0);
    r.engine_.seed(detail::splitmix64(detail::splitmix64(seed) + index));
    return r;
  }

  // 53-bit uniform in [0, 1)
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // inclusive bounds, unbiased via rejection
  long long uniform_int(long long lo, long long hi) {
    if (lo > hi) throw std::invalid_argument("uniform_int: empty range");
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1ull;
    if (span == 0) return static_cast<long long>(engine_());  // full 64-bit range
    const std::uint64_t reject_above = UINT64_MAX - UINT64_MAX % span;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= reject_above);
    return lo + static_cast<long long>(x % span);
  }

  // Marsaglia polar method; the second variate of each pair is discarded
  double normal() {
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    return u * std::sqrt(-2.0 * std::log(s) / s);
  }

  // Marsaglia-Tsang; unit scale
  double gamma(double shape) {
    if (!(shape > 0.0)) throw std::invalid_argument("gamma: shape must be positive");
    if (shape < 1.0) {
      const double u = 1.0 - uniform();  // (0, 1]
      return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = 1.0 - uniform();
      if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
    }
  }

  Eigen::VectorXd dirichlet(const Eigen::VectorXd& concentration) {
    Eigen::VectorXd g(concentration.size());
    double total = 0.0;
    for (int j = 0; j < concentration.size(); ++j) {
      g(j) = gamma(concentration(j));
      total += g(j);
    }
    if (total <= 0.0) {
      // all components underflowed; fall back to the mean
      return concentration / concentration.sum();
    }
    return g / total;
  }

  // index into the (unnormalized) weight vector by CDF walk
  int categorical(const Eigen::VectorXd& weights) {
    const double target = uniform() * weights.sum();
    double acc = 0.0;
    for (int j = 0; j + 1 < weights.size(); ++j) {
      acc += weights(j);
      if (target < acc) return j;
    }
    return static_cast<int>(weights.size()) - 1;
  }

  // exact multinomial by per-trial categorical draws
  Eigen::VectorXi multinomial(long long trials, const Eigen::VectorXd& probs) {
    Eigen::VectorXi counts = Eigen::VectorXi::Zero(probs.size());
    for (long long t = 0; t < trials; ++t) ++counts(categorical(probs));
    return counts;
  }

  // multinomial with uniform probabilities: each trial picks a bin directly
  std::vector<long long> uniform_multinomial(long long trials, int bins) {
    std::vector<long long> counts(static_cast<std::size_t>(bins), 0);
    for (long long t = 0; t < trials; ++t) {
      int b = static_cast<int>(uniform() * bins);
      if (b >= bins) b = bins - 1;
      ++counts[static_cast<std::size_t>(b)];
    }
    return counts;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace votrans
