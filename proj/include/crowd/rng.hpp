#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace crowd {

/// 64-bit Mersenne Twister with platform-independent conversions. The
/// standard distributions are implementation-defined, so everything that
/// feeds a snapshot draws through these helpers instead.
class Rng {
public:
    Rng() = default;
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Independent stream derived from (seed, name). Adding a new consumer
    /// with a new name never shifts the draws of an existing one.
    static Rng substream(std::uint64_t seed, std::string_view name);

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). Rejection sampling, no modulo bias.
    std::uint64_t below(std::uint64_t n);

    std::string state() const;
    void restore(const std::string& state);

    bool operator==(const Rng& other) const { return engine_ == other.engine_; }

private:
    std::mt19937_64 engine_{0};
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace crowd
