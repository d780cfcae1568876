#include "qet/moments.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "qet/errors.hpp"
#include "qet/parallel.hpp"
#include "qet/stats.hpp"

namespace qet {

namespace {

__extension__ typedef __int128 i128;

std::optional<Rational> from_wide(i128 num, i128 den) {
    if (den == 0) return std::nullopt;
    if (den < 0) {
        num = -num;
        den = -den;
    }
    i128 a = num < 0 ? -num : num;
    i128 b = den;
    while (b != 0) {
        const i128 t = a % b;
        a = b;
        b = t;
    }
    if (a > 1) {
        num /= a;
        den /= a;
    }
    constexpr i128 lim = std::numeric_limits<std::int64_t>::max();
    if (num > lim || num < -lim || den > lim) return std::nullopt;
    return Rational{static_cast<std::int64_t>(num), static_cast<std::int64_t>(den)};
}

void check_dims(std::size_t d, std::size_t D) {
    if (d < 1 || d > D) {
        throw InvalidDims("need 1 <= d <= D, got d=" + std::to_string(d) + ", D=" + std::to_string(D));
    }
}

}  // namespace

std::optional<Rational> Rational::make(std::int64_t num, std::int64_t den) {
    return from_wide(num, den);
}

std::optional<Rational> add(Rational a, Rational b) {
    return from_wide(static_cast<i128>(a.num) * b.den + static_cast<i128>(b.num) * a.den,
                     static_cast<i128>(a.den) * b.den);
}

std::optional<Rational> subtract(Rational a, Rational b) {
    return add(a, Rational{-b.num, b.den});
}

std::optional<Rational> multiply(Rational a, Rational b) {
    return from_wide(static_cast<i128>(a.num) * b.num, static_cast<i128>(a.den) * b.den);
}

std::optional<Rational> sphere_mean_exact(std::size_t d, std::size_t D) {
    check_dims(d, D);
    return from_wide(static_cast<i128>(d), static_cast<i128>(D));
}

double sphere_mean(std::size_t d, std::size_t D) {
    check_dims(d, D);
    return static_cast<double>(d) / static_cast<double>(D);
}

std::optional<Rational> sphere_variance_exact(std::size_t d, std::size_t D) {
    check_dims(d, D);
    const i128 dd = static_cast<i128>(d);
    const i128 n = static_cast<i128>(D);
    const i128 den = n * n * (n + 1);
    if (den / n / n != n + 1) return std::nullopt;
    return from_wide(dd * (n - dd), den);
}

double sphere_variance(std::size_t d, std::size_t D) {
    if (auto exact = sphere_variance_exact(d, D)) return exact->value();
    const double x = static_cast<double>(d);
    const double n = static_cast<double>(D);
    return x * (n - x) / (n * n * (n + 1.0));
}

std::optional<Rational> sphere_fourth_moment_exact(std::size_t d, std::size_t D, Field field) {
    check_dims(d, D);
    const i128 x = static_cast<i128>(d);
    const i128 n = static_cast<i128>(D);
    if (field == Field::Complex) return from_wide(x * x + x, n * (n + 1));
    return from_wide(x * x + 2 * x, n * (n + 2));
}

double sphere_fourth_moment(std::size_t d, std::size_t D, Field field) {
    if (auto exact = sphere_fourth_moment_exact(d, D, field)) return exact->value();
    const double x = static_cast<double>(d);
    const double n = static_cast<double>(D);
    return field == Field::Complex ? (x * x + x) / (n * (n + 1.0)) : (x * x + 2.0 * x) / (n * (n + 2.0));
}

std::vector<double> sample_overlaps(SeedSpec seed, const DimensionProfile& profile, std::size_t nu,
                                    std::size_t n, OverlapMode mode) {
    const IndexRange block = profile.block(nu);
    const std::size_t D = profile.total();
    auto chunks = map_chunks(n, [&](std::size_t c, std::size_t begin, std::size_t end) {
        Rng rng(seed.substream(c));
        std::vector<double> out;
        out.reserve(end - begin);
        for (std::size_t s = begin; s < end; ++s) {
            double w = 0.0;
            if (mode == OverlapMode::VaryState) {
                const UnitVector phi = sample_unit_state(rng, D);
                for (std::size_t j = block.begin; j < block.end; ++j) w += std::norm(phi[j]);
            } else {
                // <b_j, e_1> = conj(U_{0j}); only columns up to the block end are needed.
                const ComplexMatrix u = sample_haar_isometry(rng, D, block.end);
                for (std::size_t j = block.begin; j < block.end; ++j) w += std::norm(u(0, j));
            }
            out.push_back(w);
        }
        return out;
    });
    std::vector<double> all;
    all.reserve(n);
    for (auto& c : chunks) all.insert(all.end(), c.begin(), c.end());
    return all;
}

MomentReport mc_overlap_moment(SeedSpec seed, const DimensionProfile& profile, std::size_t nu,
                               int power, std::size_t n, OverlapMode mode) {
    if (n < 2) throw InvalidParams("need at least 2 samples");
    if (power != 1 && power != 2) throw InvalidParams("power must be 1 or 2");
    const std::size_t d = profile.dim(nu);
    const std::size_t D = profile.total();
    RunningMoments acc;
    for (const double w : sample_overlaps(seed, profile, nu, n, mode)) acc.add(power == 1 ? w : w * w);
    MomentReport r;
    r.closed_form = power == 1 ? sphere_mean(d, D) : sphere_fourth_moment(d, D, Field::Complex);
    r.mc_estimate = acc.mean;
    r.mc_std_error = acc.std_error();
    r.n_samples = n;
    return r;
}

double generic_dimension_threshold(double eps, double delta, std::size_t N, std::size_t D) {
    if (!(eps > 0.0) || !(delta > 0.0 && delta <= 1.0) || N < 2 || D < N) {
        throw InvalidParams("need eps > 0, 0 < delta <= 1, N >= 2, D >= N");
    }
    const double n = static_cast<double>(N);
    const double dim = static_cast<double>(D);
    return dim - eps * eps * delta * dim * (dim + 1.0) / (n * n);
}

GosCheck gos_empirical_check(SeedSpec seed, const DimensionProfile& profile, double eps,
                             double delta, std::size_t n) {
    const std::size_t N = profile.blocks();
    const std::size_t D = profile.total();
    GosCheck out;
    out.threshold = generic_dimension_threshold(eps, delta, N, D);
    for (std::size_t nu = 0; nu < N; ++nu) {
        if (!(static_cast<double>(profile.dim(nu)) > out.threshold)) {
            throw HypothesisViolated("d_" + std::to_string(nu) + " = " + std::to_string(profile.dim(nu)) +
                                     " does not exceed " + std::to_string(out.threshold));
        }
    }
    if (n == 0) throw InvalidParams("need at least one sample");
    // Weights of e_1 need only row 0 of the frame; the last block gets the remainder.
    const std::size_t cols = D - profile.dim(N - 1);
    auto counts = map_chunks(n, [&](std::size_t c, std::size_t begin, std::size_t end) {
        Rng rng(seed.substream(c));
        std::size_t hits = 0;
        for (std::size_t s = begin; s < end; ++s) {
            const ComplexMatrix u = sample_haar_isometry(rng, D, cols);
            bool all = true;
            double rest = 1.0;
            for (std::size_t nu = 0; nu < N && all; ++nu) {
                double w = rest;
                if (nu + 1 < N) {
                    w = 0.0;
                    const IndexRange b = profile.block(nu);
                    for (std::size_t j = b.begin; j < b.end; ++j) w += std::norm(u(0, j));
                    rest -= w;
                }
                const double mean = static_cast<double>(profile.dim(nu)) / static_cast<double>(D);
                const double radius =
                    eps * std::sqrt(static_cast<double>(profile.dim(nu)) / static_cast<double>(D * N));
                all = std::abs(w - mean) < radius;
            }
            hits += all ? 1 : 0;
        }
        return hits;
    });
    const std::size_t hits = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
    out.n = n;
    out.fraction = static_cast<double>(hits) / static_cast<double>(n);
    out.std_error = binomial_std_error(1.0 - delta, n);
    out.meets_contract = out.fraction >= 1.0 - delta - 4.0 * out.std_error;
    return out;
}

}  // namespace qet
