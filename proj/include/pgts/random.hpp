#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace pgts {

/// Seeded source of uniform, Gaussian, exponential and gamma variates.
///
/// Identical seeds give identical variate streams. Not thread-safe; give each
/// thread (or each run) its own instance.
class RandomSource {
  public:
    explicit RandomSource(std::uint64_t seed) : engine_(seed), seed_(seed) {}

    std::uint64_t seed() const noexcept { return seed_; }

    /// Uniform on the open interval (0, 1).
    double uniform();
    double normal() { return normal_(engine_); }
    /// Exponential with rate 1.
    double exponential() { return exponential_(engine_); }
    /// Gamma(shape, scale = 1).
    double gamma(double shape);
    bool bernoulli(double p) { return uniform() < p; }
    /// Uniform integer in [0, n).
    std::size_t index(std::size_t n);

    std::mt19937_64& engine() noexcept { return engine_; }

  private:
    std::mt19937_64 engine_;
    std::uint64_t seed_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::exponential_distribution<double> exponential_{1.0};
};

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Order-insensitive child seed for (parent, index); used for per-run and
/// per-stream seeding.
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index) noexcept;

/// 64-bit FNV-1a over raw bytes, chained through `state`.
std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t state = 0xcbf29ce484222325ULL) noexcept;

}  // namespace pgts
