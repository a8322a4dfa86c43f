#pragma once

#include <cstdint>
#include <random>

namespace art {

/// Seeded generator wrapping mt19937_64 with hand-rolled uniform mappings.
/// The engine's output sequence is pinned by the standard; std::uniform_*
/// distributions are not, so we avoid them to keep outputs reproducible
/// across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform double in [0, 1).
    double next_double() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    /// Uniform integer in [lo, hi] inclusive. Uses rejection-free modulo;
    /// bias is negligible for the small ranges used here.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<std::int64_t>(engine_() % span);
    }

    /// Standard normal via Box-Muller (deterministic, one engine draw pair).
    double next_normal();

    /// Normal truncated to +/- 2 sigma, the usual ViT init.
    double truncated_normal(double stddev);

private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace art
