#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "qet/haar.hpp"
#include "qet/rng.hpp"

namespace qet {

/// Reduced fraction with 64-bit parts. Arithmetic returns nullopt on overflow.
struct Rational {
    std::int64_t num = 0;
    std::int64_t den = 1;

    static std::optional<Rational> make(std::int64_t num, std::int64_t den);
    double value() const noexcept { return static_cast<double>(num) / static_cast<double>(den); }

    friend bool operator==(const Rational&, const Rational&) = default;
};

std::optional<Rational> add(Rational a, Rational b);
std::optional<Rational> subtract(Rational a, Rational b);
std::optional<Rational> multiply(Rational a, Rational b);

enum class Field { Real, Complex };

// Moments of |P x|^2 for x uniform on the unit sphere and P a rank-d projector
// in dimension D. The *_exact forms return nullopt when the fraction does not
// fit in 64 bits; the double forms fall back to floating point then.
// All throw InvalidDims unless 1 <= d <= D.

/// d/D
std::optional<Rational> sphere_mean_exact(std::size_t d, std::size_t D);
double sphere_mean(std::size_t d, std::size_t D);

/// d (D - d) / (D^2 (D + 1))
std::optional<Rational> sphere_variance_exact(std::size_t d, std::size_t D);
double sphere_variance(std::size_t d, std::size_t D);

/// Complex: (d^2 + d) / (D (D + 1)). Real (d of n real coordinates):
/// (d^2 + 2d) / (n (n + 2)).
std::optional<Rational> sphere_fourth_moment_exact(std::size_t d, std::size_t D, Field field);
double sphere_fourth_moment(std::size_t d, std::size_t D, Field field);

struct MomentReport {
    double closed_form = 0.0;
    double mc_estimate = 0.0;
    double mc_std_error = 0.0;
    std::size_t n_samples = 0;
};

/// Which side of the state/decomposition exchange symmetry is sampled.
enum class OverlapMode {
    VaryState,          ///< fixed standard decomposition, Haar-random state
    VaryDecomposition,  ///< fixed state e_1, Haar-random decomposition
};

/// n samples of |P_nu phi|^2 in the given mode. Deterministic in `seed`.
std::vector<double> sample_overlaps(SeedSpec seed, const DimensionProfile& profile, std::size_t nu,
                                    std::size_t n, OverlapMode mode);

/// Sample mean of (|P_nu phi|^2)^power, power in {1, 2}; closed_form is the
/// matching sphere moment. Throws InvalidParams when n < 2 or power is not 1|2.
MomentReport mc_overlap_moment(SeedSpec seed, const DimensionProfile& profile, std::size_t nu,
                               int power, std::size_t n, OverlapMode mode);

/// D - eps^2 delta D (D + 1) / N^2; every d_nu must exceed it for the
/// Markov-inequality concentration estimate to apply.
/// Throws InvalidParams unless eps > 0, 0 < delta <= 1, N >= 2, D >= N.
double generic_dimension_threshold(double eps, double delta, std::size_t N, std::size_t D);

struct GosCheck {
    double threshold = 0.0;
    double fraction = 0.0;  ///< fraction of sampled decompositions satisfying all N bounds
    double std_error = 0.0; ///< binomial, evaluated at p = 1 - delta
    std::size_t n = 0;
    bool meets_contract = false;  ///< fraction >= 1 - delta - 4 std_error
};

/// Samples n Haar decompositions with fixed state e_1 and counts those where
/// ||P_nu e_1|^2 - d_nu/D| < eps sqrt(d_nu / (D N)) for every nu.
/// Throws HypothesisViolated when some d_nu <= threshold.
GosCheck gos_empirical_check(SeedSpec seed, const DimensionProfile& profile, double eps,
                             double delta, std::size_t n);

}  // namespace qet
