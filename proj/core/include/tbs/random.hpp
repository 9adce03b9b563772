#pragma once

#include <cstdint>
#include <random>

namespace tbs {

// SplitMix64 finaliser; used to derive independent stream seeds.
std::uint64_t mix64(std::uint64_t x) noexcept;
// Per-episode / per-stream seed derived from a run seed and an index.
std::uint64_t derive_seed(std::uint64_t run_seed, std::uint64_t index) noexcept;

// Seedable generator backed by std::mt19937_64, whose output sequence is fixed
// by the C++ standard. The standard distributions are implementation-defined,
// so the real-valued draws below are computed directly from the raw 64-bit
// output to keep episodes identical across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }
    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);
    // Standard normal via Box-Muller.
    double normal();

private:
    std::mt19937_64 engine_;
};

}  // namespace tbs
