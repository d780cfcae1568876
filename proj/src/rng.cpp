#include "qet/rng.hpp"

#include <cmath>
#include <numbers>

namespace qet {

std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

SeedSpec SeedSpec::substream(std::uint64_t index) const noexcept {
    return {seed, mix64(stream ^ mix64(index + 0x632be59bd9b4e019ULL))};
}

Rng::Rng(SeedSpec spec) : engine_(mix64(spec.seed ^ mix64(spec.stream))) {}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::uniform_open_zero() { return 1.0 - uniform(); }

std::complex<double> Rng::complex_normal() {
    const double u1 = uniform_open_zero();
    const double u2 = uniform();
    const double r = std::sqrt(-std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    return {r * std::cos(angle), r * std::sin(angle)};
}

double Rng::normal() {
    const double u1 = uniform_open_zero();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace qet
