#pragma once

#include <cstdint>
#include <random>

namespace hafi {

using Rng = std::mt19937_64;

// Independent generator for substream `stream` of `root_seed`. Every consumer
// that must be reproducible regardless of scheduling (smoothing draw j,
// MCMC iteration k, cross section at time t) derives its own stream here.
inline Rng make_stream(std::uint64_t root_seed, std::uint64_t stream, std::uint64_t domain = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(root_seed), static_cast<std::uint32_t>(root_seed >> 32),
                    static_cast<std::uint32_t>(stream),    static_cast<std::uint32_t>(stream >> 32),
                    static_cast<std::uint32_t>(domain),    static_cast<std::uint32_t>(domain >> 32)};
  return Rng(seq);
}

// Derives a child seed, e.g. a fresh likelihood seed per MCMC proposal.
inline std::uint64_t derive_seed(std::uint64_t root_seed, std::uint64_t stream, std::uint64_t domain = 0) {
  Rng g = make_stream(root_seed, stream, domain);
  return g();
}

// Domain tags keep substreams of different consumers apart.
namespace stream_domain {
inline constexpr std::uint64_t smoother = 1;
inline constexpr std::uint64_t simulate = 2;
inline constexpr std::uint64_t cross_section = 3;
inline constexpr std::uint64_t mcmc = 4;
inline constexpr std::uint64_t likelihood = 5;
inline constexpr std::uint64_t sampler = 6;
}  // namespace stream_domain

}  // namespace hafi
