#pragma once

#include <complex>
#include <cstdint>
#include <random>

namespace qet {

/// Identifies one reproducible random stream: identical (seed, stream) pairs
/// replay identical sample sequences on every platform.
struct SeedSpec {
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;

    /// Deterministic child stream, used to split Monte Carlo work into chunks.
    SeedSpec substream(std::uint64_t index) const noexcept;

    friend bool operator==(const SeedSpec&, const SeedSpec&) = default;
};

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// mt19937_64 (whose output sequence is fixed by the standard) with
/// hand-written uniform and Gaussian transforms, since the standard
/// distributions are implementation-defined.
class Rng {
public:
    explicit Rng(SeedSpec spec);

    std::uint64_t next_u64() { return engine_(); }
    /// Uniform on [0, 1) with 53 random bits.
    double uniform();
    /// Uniform on (0, 1].
    double uniform_open_zero();
    /// Standard complex normal, E|z|^2 = 1, via the Box-Muller transform:
    /// r = sqrt(-ln u1), z = r (cos 2 pi u2 + i sin 2 pi u2).
    std::complex<double> complex_normal();
    /// Real standard normal (first Box-Muller output, second discarded).
    double normal();

private:
    std::mt19937_64 engine_;
};

}  // namespace qet
