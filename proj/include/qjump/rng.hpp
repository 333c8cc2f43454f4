#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>

namespace qjump::rng {

/// Algorithm name recorded in run manifests so records stay reproducible.
inline constexpr const char* algorithm = "mt19937_64+splitmix64";

/// splitmix64 finalizer; scrambles a seed into a well-mixed 64-bit word.
inline std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for the index-th independent substream of a run.
inline std::uint64_t substream(std::uint64_t seed, std::uint64_t index) {
  return mix(seed ^ mix(index + 1));
}

/// Uniform in [0,1) with 53-bit resolution.
inline double uniform01(std::mt19937_64& eng) {
  return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

/// Uniform in (0,1]; safe as a log argument.
inline double uniform_pos(std::mt19937_64& eng) {
  return (static_cast<double>(eng() >> 11) + 1.0) * 0x1.0p-53;
}

/// Exponential waiting time for a total rate (1/s). rate must be > 0.
inline double exponential(std::mt19937_64& eng, double rate) {
  return -std::log(uniform_pos(eng)) / rate;
}

/// Index drawn proportionally to non-negative weights; their sum must be > 0.
inline std::size_t categorical(std::mt19937_64& eng, std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) throw std::invalid_argument("categorical: weights sum to zero");
  double u = uniform01(eng) * total;
  double cum = 0.0;
  for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
    cum += weights[i];
    if (u < cum) return i;
  }
  return weights.size() - 1;
}

/// Poisson sample by sequential inversion; large means are split into chunks
/// so exp(-mean) never underflows.
inline long poisson(std::mt19937_64& eng, double mean) {
  if (mean < 0.0) throw std::invalid_argument("poisson: negative mean");
  long n = 0;
  while (mean > 200.0) {
    double chunk = 100.0;
    double p = std::exp(-chunk);
    double cum = p;
    double u = uniform01(eng);
    long k = 0;
    while (u > cum) {
      ++k;
      p *= chunk / static_cast<double>(k);
      cum += p;
      if (k > 10000) break;
    }
    n += k;
    mean -= chunk;
  }
  if (mean == 0.0) return n;
  double p = std::exp(-mean);
  double cum = p;
  double u = uniform01(eng);
  long k = 0;
  while (u > cum) {
    ++k;
    p *= mean / static_cast<double>(k);
    cum += p;
    if (k > 10000) break;
  }
  return n + k;
}

}  // namespace qjump::rng
