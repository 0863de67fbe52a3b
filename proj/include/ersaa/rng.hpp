#ifndef ERSAA_RNG_HPP
#define ERSAA_RNG_HPP

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace ersaa {

// Purpose tags for derived seed streams. Each consumer of randomness pulls
// from its own stream keyed by (master seed, purpose, indices...), so adding
// samples extends a stream instead of reshuffling everything downstream.
namespace stream {
inline constexpr std::uint64_t instance = 0x11;
inline constexpr std::uint64_t demand_model = 0x22;
inline constexpr std::uint64_t covariates = 0x33;
inline constexpr std::uint64_t errors = 0x44;
inline constexpr std::uint64_t evaluation = 0x55;
inline constexpr std::uint64_t median_mc = 0x66;
inline constexpr std::uint64_t query = 0x77;
inline constexpr std::uint64_t cv_folds = 0x88;
inline constexpr std::uint64_t correlation = 0x99;
}  // namespace stream

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed,
                              std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = splitmix64(seed);
  for (std::uint64_t p : path) h = splitmix64(h ^ splitmix64(p));
  return h;
}

// mt19937_64 with hand-rolled distributions. The standard library's
// distributions are implementation-defined, which would break bitwise
// reproducibility of committed seeds across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  static Rng from(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
    return Rng(mix_seed(master, path));
  }

  std::uint64_t next_u64() { return gen_(); }

  // Uniform on the open interval (0,1); never returns an endpoint, so logs
  // of uniforms are always finite.
  double uniform01() {
    return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Box-Muller; consumes two uniforms per pair and caches the second value.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform01();
    double u2 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  double exponential() { return -std::log(uniform01()); }

  // Gamma(2,1) as a sum of two unit exponentials.
  double gamma2() { return exponential() + exponential(); }

  double beta22() {
    double a = gamma2();
    double b = gamma2();
    return a / (a + b);
  }

  // exp(N(mu, sigma^2)); parameters are the log-scale mean and std.
  double lognormal(double mu, double sigma) {
    return std::exp(normal(mu, sigma));
  }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    // Rejection-free modulo would bias; use Lemire-style rejection.
    std::uint64_t x = gen_();
    __uint128_t m = static_cast<__uint128_t>(x) * n;
    auto lo = static_cast<std::uint64_t>(m);
    if (lo < n) {
      std::uint64_t t = -n % n;
      while (lo < t) {
        x = gen_();
        m = static_cast<__uint128_t>(x) * n;
        lo = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace ersaa

#endif  // ERSAA_RNG_HPP
