#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace aistk {

/// Derives a child seed from a root seed and a stream name. Every stage of the
/// pipeline draws from its own named substream so that changing one stage does
/// not perturb the randomness of another.
std::uint64_t derive_seed(std::uint64_t root, std::string_view stream);

/// Numeric variant for per-item substreams (epoch, track index, ...).
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t a, std::uint64_t b = 0);

/// Deterministic random generator. The raw engine is std::mt19937_64 but all
/// variate transforms are implemented here (not via std::*_distribution) so
/// sequences are identical across standard library implementations.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    static Rng substream(std::uint64_t root, std::string_view stream) {
        return Rng(derive_seed(root, stream));
    }

    std::uint64_t next_u64() { return gen_(); }

    /// Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). n must be > 0.
    std::uint64_t uniform_int(std::uint64_t n);

    /// Standard normal via Box-Muller (second variate cached).
    double normal();

    double normal(double mean, double sigma) { return mean + sigma * normal(); }

    bool bernoulli(double p) { return uniform() < p; }

    /// Samples an index proportionally to the (non-negative) weights.
    /// Throws NumericError if all weights are zero or any is negative/non-finite.
    std::size_t categorical(std::span<const double> weights);

  private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace aistk
