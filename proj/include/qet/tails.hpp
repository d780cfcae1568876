#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "qet/haar.hpp"
#include "qet/linalg.hpp"
#include "qet/rng.hpp"

namespace qet {

/// Stirling-comparison constant used by the exponential diagonal bound.
inline constexpr double kTheta = 11.0 / 12.0;

inline constexpr double kDefaultC = 5.0;
inline constexpr double kDefaultC0 = 576.0;
inline constexpr double kDefaultC1 = 1.0;

struct TailQuery {
    std::size_t d = 0;
    std::size_t D = 0;
    double a = 0.0;
};

struct TailResult {
    double exact = 0.0;                ///< probability in [0, 1]
    std::optional<double> bound;       ///< analytic upper bound, when one applies
    bool bound_hypotheses_met = false;
    double quadrature_error_estimate = 0.0;
};

/// log((D-1)! / ((d-1)! (D-d-1)!)) via lgamma.
double beta_log_normalizer(std::size_t d, std::size_t D);

/// Beta(d, D-d) density; the law of |P phi|^2 for a rank-d projector in C^D.
/// Throws InvalidDims unless 1 <= d <= D-1.
double beta_density(std::size_t d, std::size_t D, double v);

/// Integral of beta_density over [0, x], by quadrature.
double beta_cdf(std::size_t d, std::size_t D, double x);

/// Prob[(e_aa - d/D)^2 >= a] as a two-sided Beta tail, with the exponential
/// bound attached (hypotheses judged with constant C).
/// Throws DomainViolation unless 1 <= d <= D-1, a >= 0, sqrt(a) < d/D and
/// sqrt(a) + d/D < 1 (a = 0 always allowed).
TailResult diag_tail_I(const TailQuery& q, double C = kDefaultC);

/// Prob[|e_ab|^2 >= a], a != b. The bound (1-4a)^(D-3/2) is attached when
/// D > 2d + 2 and a < 1/4.
/// Throws DomainViolation unless 1 < d < D-1 and 0 <= a <= 1/4.
TailResult offdiag_tail_J(const TailQuery& q);

struct ExponentialBound {
    double value = 0.0;
    bool hypotheses_met = false;
};

/// (D / sqrt d) exp(-theta a D^2 / (2 d)), valid when C log D < d < D/C and
/// 1/D < sqrt(a) < d / (8 D).
ExponentialBound bound_I_exponential(const TailQuery& q, double C = kDefaultC);

/// a = 8 d log D / (theta D^2), where the exponential bound equals 1/(D^3 sqrt d).
double diag_log_threshold(std::size_t d, std::size_t D);
double diag_log_bound(std::size_t d, std::size_t D);
bool diag_log_hypotheses(std::size_t d, std::size_t D, double C0 = kDefaultC0);

/// (1 - 4a)^(D - 3/2). Throws DomainViolation unless 1 < d, D > 2d + 2 and 0 <= a < 1/4.
double bound_J(const TailQuery& q);
/// exp(-4a (D - 3/2)), same domain.
double bound_J_exponential(const TailQuery& q);

/// a = (3/4) log D / D and the matching bound D^-3 exp(9 log D / (2D)).
double offdiag_log_threshold(std::size_t D);
double offdiag_log_bound(std::size_t D);

/// Whether f(t) = (1-t)^(d+1-D) (1+t)^(1-d) + (1+t)^(d+1-D) (1-t)^(1-d) is
/// non-decreasing on `grid` equispaced points of (0, 1), compared in log space.
/// Throws DomainViolation unless 1 < d and D > 2d + 2.
bool lem28_monotonicity_check(std::size_t d, std::size_t D, std::size_t grid);

struct GnuIntegralReport {
    std::size_t n = 0;
    double mc_integral = 0.0;   ///< mean of g_nu over Haar decompositions
    double mc_std_error = 0.0;
    double offdiag_mean = 0.0;  ///< mean of max_{a != b} |e_ab|^2
    double offdiag_std_error = 0.0;
    double diag_mean = 0.0;     ///< mean of max_a (e_aa - d/D)^2
    double diag_std_error = 0.0;
    double diag_bound = 0.0;    ///< 9 d log D / D^2
    bool diag_hypotheses_met = false;     ///< C0 log D < d < D / C0
    double offdiag_bound = 0.0; ///< log D / D
    bool offdiag_hypotheses_met = false;  ///< 3 < d, D > 2d + 2, log D / D < 1/5
    double total_bound = 0.0;   ///< 10 log D / D
    bool total_hypotheses_met = false;    ///< C1 log D < d < D / C1
};

/// Monte Carlo estimate of the integral of g_nu over Haar decompositions,
/// with matrix elements taken in the standard basis (the law does not depend
/// on the basis).
GnuIntegralReport integral_bound_gnu(SeedSpec seed, const DimensionProfile& profile, std::size_t nu,
                                     std::size_t n_mc, double C0 = kDefaultC0, double C1 = kDefaultC1);

/// n samples of |e_01|^2 = |<e_0, P_nu e_1>|^2 over Haar decompositions.
std::vector<double> sample_offdiag_overlaps(SeedSpec seed, const DimensionProfile& profile,
                                            std::size_t nu, std::size_t n);

/// r * tail_prob + a: bounds the integral of any 0 <= g <= r with
/// Prob(g >= a) = tail_prob. Throws InvalidParams unless 0 <= a <= 1, r >= 0
/// and tail_prob in [0, 1].
double remark_split_bound(double r, double a, double tail_prob);

}  // namespace qet
