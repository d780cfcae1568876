#include "qet/tails.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "qet/errors.hpp"
#include "qet/parallel.hpp"
#include "qet/quadrature.hpp"
#include "qet/stats.hpp"

namespace qet {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// x * log(y) with 0 * log(0) = 0.
double xlogy(double x, double y) {
    if (x == 0.0) return 0.0;
    return x * std::log(y);
}

struct LogIntegral {
    double log_value = kNegInf;
    double error = 0.0;  ///< absolute, in the scale of exp(log_value)
};

// log of the integral of exp(logf) over [lo, hi]. The integrand is divided by
// its value at `peak` first, so tiny tails keep full relative accuracy.
template <class F>
LogIntegral log_integral(F logf, double lo, double hi, double peak) {
    LogIntegral out;
    if (!(hi > lo)) return out;
    peak = std::clamp(peak, lo, hi);
    const double lmax = logf(peak);
    if (!std::isfinite(lmax)) return out;
    std::vector<double> bp{lo};
    if (peak > lo && peak < hi) bp.push_back(peak);
    bp.push_back(hi);
    QuadratureOptions opts;
    opts.abs_tol = 1e-16 * (hi - lo);
    opts.rel_tol = 1e-12;
    opts.max_intervals = 8000;
    const auto r = integrate([&](double x) { return std::exp(logf(x) - lmax); }, bp, opts);
    if (!(r.value > 0.0)) return out;
    out.log_value = lmax + std::log(r.value);
    out.error = r.error * std::exp(lmax);
    return out;
}

void check_beta_dims(std::size_t d, std::size_t D) {
    if (d < 1 || d + 1 > D) {
        throw InvalidDims("Beta law needs 1 <= d <= D-1, got d=" + std::to_string(d) +
                          ", D=" + std::to_string(D));
    }
}

double log_beta_kernel(std::size_t d, std::size_t D, double v) {
    if (v < 0.0 || v > 1.0) return kNegInf;
    return xlogy(static_cast<double>(d) - 1.0, v) +
           xlogy(static_cast<double>(D - d) - 1.0, 1.0 - v);
}

double beta_mode(std::size_t d, std::size_t D) {
    if (D <= 2) return 0.5;
    return (static_cast<double>(d) - 1.0) / (static_cast<double>(D) - 2.0);
}

// Beta(d, D-d) mass of [lo, hi], and its error estimate.
std::pair<double, double> beta_mass(std::size_t d, std::size_t D, double lo, double hi) {
    lo = std::max(lo, 0.0);
    hi = std::min(hi, 1.0);
    if (!(hi > lo)) return {0.0, 0.0};
    const double mode = beta_mode(d, D);
    const auto li = log_integral([&](double v) { return log_beta_kernel(d, D, v); }, lo, hi,
                                 std::clamp(mode, lo, hi));
    const double norm = beta_log_normalizer(d, D);
    return {std::exp(norm + li.log_value), li.error * std::exp(norm)};
}

}  // namespace

double beta_log_normalizer(std::size_t d, std::size_t D) {
    check_beta_dims(d, D);
    const double dd = static_cast<double>(d);
    const double big = static_cast<double>(D);
    return std::lgamma(big) - std::lgamma(dd) - std::lgamma(big - dd);
}

double beta_density(std::size_t d, std::size_t D, double v) {
    check_beta_dims(d, D);
    if (!std::isfinite(v)) throw NonFiniteInput("density argument");
    if (v < 0.0 || v > 1.0) return 0.0;
    return std::exp(beta_log_normalizer(d, D) + log_beta_kernel(d, D, v));
}

double beta_cdf(std::size_t d, std::size_t D, double x) {
    check_beta_dims(d, D);
    if (!std::isfinite(x)) throw NonFiniteInput("CDF argument");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    // integrate the smaller side
    if (x <= static_cast<double>(d) / static_cast<double>(D)) return std::min(1.0, beta_mass(d, D, 0.0, x).first);
    return std::max(0.0, 1.0 - beta_mass(d, D, x, 1.0).first);
}

ExponentialBound bound_I_exponential(const TailQuery& q, double C) {
    const double d = static_cast<double>(q.d);
    const double big = static_cast<double>(q.D);
    ExponentialBound b;
    b.value = big / std::sqrt(d) * std::exp(-kTheta * q.a * big * big / (2.0 * d));
    const double s = std::sqrt(q.a);
    const double logd = std::log(big);
    b.hypotheses_met = C * logd < d && d < big / C && 1.0 / big < s && s < d / (8.0 * big);
    return b;
}

TailResult diag_tail_I(const TailQuery& q, double C) {
    if (q.d < 1 || q.d + 1 > q.D) {
        throw DomainViolation("diagonal tail needs 1 <= d <= D-1, got d=" + std::to_string(q.d) +
                              ", D=" + std::to_string(q.D));
    }
    if (!(q.a >= 0.0) || !std::isfinite(q.a)) throw DomainViolation("threshold must be finite and >= 0");
    const double mean = static_cast<double>(q.d) / static_cast<double>(q.D);
    const double s = std::sqrt(q.a);
    if (q.a > 0.0 && !(s < mean && s + mean < 1.0)) {
        throw DomainViolation("need sqrt(a) < d/D and sqrt(a) + d/D < 1");
    }
    TailResult r;
    const ExponentialBound b = bound_I_exponential(q, C);
    r.bound = b.value;
    r.bound_hypotheses_met = b.hypotheses_met;
    if (q.a == 0.0) {
        r.exact = 1.0;
        return r;
    }
    const auto lower = beta_mass(q.d, q.D, 0.0, mean - s);
    const auto upper = beta_mass(q.d, q.D, mean + s, 1.0);
    r.exact = std::clamp(lower.first + upper.first, 0.0, 1.0);
    r.quadrature_error_estimate = lower.second + upper.second;
    return r;
}

TailResult offdiag_tail_J(const TailQuery& q) {
    if (!(q.d > 1 && q.d + 1 < q.D)) {
        throw DomainViolation("off-diagonal tail needs 1 < d < D-1, got d=" + std::to_string(q.d) +
                              ", D=" + std::to_string(q.D));
    }
    if (!(q.a >= 0.0 && q.a <= 0.25)) throw DomainViolation("threshold must lie in [0, 1/4]");
    TailResult r;
    if (q.a < 0.25 && q.D > 2 * q.d + 2) {
        r.bound = bound_J(q);
        r.bound_hypotheses_met = true;
    }
    if (q.a == 0.0) {
        r.exact = 1.0;
        return r;
    }
    if (q.a == 0.25) {
        r.exact = 0.0;
        return r;
    }
    const double d = static_cast<double>(q.d);
    const double big = static_cast<double>(q.D);
    const double a = q.a;
    auto logg = [&](double w) {
        const double inner = w * (1.0 - w) - a;
        if (!(inner > 0.0)) return kNegInf;
        return (big - 2.0) * std::log(inner) - (big - d - 1.0) * std::log(w) - (d - 1.0) * std::log1p(-w);
    };
    const double half = std::sqrt(0.25 - a);
    const double lo = 0.5 - half;
    const double hi = 0.5 + half;

    // locate the peak: coarse scan, then golden section around the best cell
    constexpr int kScan = 1024;
    int best = 1;
    double best_val = kNegInf;
    for (int k = 1; k < kScan; ++k) {
        const double v = logg(lo + (hi - lo) * k / kScan);
        if (v > best_val) {
            best_val = v;
            best = k;
        }
    }
    double x0 = lo + (hi - lo) * (best - 1) / kScan;
    double x1 = lo + (hi - lo) * (best + 1) / kScan;
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    for (int it = 0; it < 80 && x1 - x0 > 1e-15; ++it) {
        const double m1 = x1 - inv_phi * (x1 - x0);
        const double m2 = x0 + inv_phi * (x1 - x0);
        if (logg(m1) < logg(m2)) x0 = m1; else x1 = m2;
    }
    const auto li = log_integral(logg, lo, hi, 0.5 * (x0 + x1));
    const double norm = beta_log_normalizer(q.d, q.D);
    r.exact = std::clamp(std::exp(norm + li.log_value), 0.0, 1.0);
    r.quadrature_error_estimate = li.error * std::exp(norm);
    return r;
}

double diag_log_threshold(std::size_t d, std::size_t D) {
    const double big = static_cast<double>(D);
    return 8.0 * static_cast<double>(d) * std::log(big) / (kTheta * big * big);
}

double diag_log_bound(std::size_t d, std::size_t D) {
    const double big = static_cast<double>(D);
    return 1.0 / (big * big * big * std::sqrt(static_cast<double>(d)));
}

bool diag_log_hypotheses(std::size_t d, std::size_t D, double C0) {
    const double big = static_cast<double>(D);
    const double x = static_cast<double>(d);
    return C0 * std::log(big) < x && x < big / C0;
}

namespace {

void check_j_bound_domain(const TailQuery& q) {
    if (!(q.d > 1 && q.D > 2 * q.d + 2)) {
        throw DomainViolation("bound needs 1 < d and D > 2d + 2, got d=" + std::to_string(q.d) +
                              ", D=" + std::to_string(q.D));
    }
    if (!(q.a >= 0.0 && q.a < 0.25)) throw DomainViolation("bound needs 0 <= a < 1/4");
}

}  // namespace

double bound_J(const TailQuery& q) {
    check_j_bound_domain(q);
    return std::pow(1.0 - 4.0 * q.a, static_cast<double>(q.D) - 1.5);
}

double bound_J_exponential(const TailQuery& q) {
    check_j_bound_domain(q);
    return std::exp(-4.0 * q.a * (static_cast<double>(q.D) - 1.5));
}

double offdiag_log_threshold(std::size_t D) {
    const double big = static_cast<double>(D);
    return 0.75 * std::log(big) / big;
}

double offdiag_log_bound(std::size_t D) {
    const double big = static_cast<double>(D);
    return std::exp(-3.0 * std::log(big) + 4.5 * std::log(big) / big);
}

bool lem28_monotonicity_check(std::size_t d, std::size_t D, std::size_t grid) {
    if (!(d > 1 && D > 2 * d + 2)) {
        throw DomainViolation("monotonicity check needs 1 < d and D > 2d + 2, got d=" +
                              std::to_string(d) + ", D=" + std::to_string(D));
    }
    if (grid < 2) throw InvalidParams("grid needs at least 2 points");
    const double p = static_cast<double>(d) + 1.0 - static_cast<double>(D);
    const double q = 1.0 - static_cast<double>(d);
    auto logf = [&](double t) {
        const double lm = std::log1p(-t);
        const double lp = std::log1p(t);
        const double x = p * lm + q * lp;
        const double y = p * lp + q * lm;
        const double hi = std::max(x, y);
        return hi + std::log1p(std::exp(std::min(x, y) - hi));
    };
    double prev = logf(1.0 / static_cast<double>(grid + 1));
    for (std::size_t k = 2; k <= grid; ++k) {
        const double cur = logf(static_cast<double>(k) / static_cast<double>(grid + 1));
        if (cur < prev - 1e-12 * std::max(1.0, std::abs(prev))) return false;
        prev = cur;
    }
    return true;
}

GnuIntegralReport integral_bound_gnu(SeedSpec seed, const DimensionProfile& profile, std::size_t nu,
                                     std::size_t n_mc, double C0, double C1) {
    if (n_mc < 2) throw InvalidParams("n_mc must be >= 2");
    const IndexRange block = profile.block(nu);
    const std::size_t dim = profile.total();
    const std::size_t d = block.size();
    const ComplexMatrix basis = ComplexMatrix::identity(dim);

    struct Acc {
        RunningMoments total, off, diag;
    };
    auto chunks = map_chunks(n_mc, [&](std::size_t c, std::size_t begin, std::size_t end) {
        Acc acc;
        Rng rng(seed.substream(c));
        for (std::size_t i = begin; i < end; ++i) {
            const ComplexMatrix iso = sample_haar_isometry(rng, dim, block.end);
            const GnuTerms t = g_nu_terms(projector_in_basis(iso, block, basis), d);
            acc.total.add(t.total());
            acc.off.add(t.offdiag);
            acc.diag.add(t.diag);
        }
        return acc;
    }, 64);
    Acc all;
    for (const auto& a : chunks) {
        all.total.merge(a.total);
        all.off.merge(a.off);
        all.diag.merge(a.diag);
    }

    GnuIntegralReport r;
    r.n = n_mc;
    r.mc_integral = all.total.mean;
    r.mc_std_error = all.total.std_error();
    r.offdiag_mean = all.off.mean;
    r.offdiag_std_error = all.off.std_error();
    r.diag_mean = all.diag.mean;
    r.diag_std_error = all.diag.std_error();

    const double big = static_cast<double>(dim);
    const double x = static_cast<double>(d);
    const double logd = std::log(big);
    r.diag_bound = 9.0 * x * logd / (big * big);
    r.diag_hypotheses_met = C0 * logd < x && x < big / C0;
    r.offdiag_bound = logd / big;
    r.offdiag_hypotheses_met = d > 3 && dim > 2 * d + 2 && logd / big < 0.2;
    r.total_bound = 10.0 * logd / big;
    r.total_hypotheses_met = C1 * logd < x && x < big / C1;
    return r;
}

std::vector<double> sample_offdiag_overlaps(SeedSpec seed, const DimensionProfile& profile,
                                            std::size_t nu, std::size_t n) {
    const IndexRange block = profile.block(nu);
    const std::size_t dim = profile.total();
    auto chunks = map_chunks(n, [&](std::size_t c, std::size_t begin, std::size_t end) {
        std::vector<double> out;
        out.reserve(end - begin);
        Rng rng(seed.substream(c));
        for (std::size_t i = begin; i < end; ++i) {
            const ComplexMatrix iso = sample_haar_isometry(rng, dim, block.end);
            cplx e{};
            for (std::size_t j = block.begin; j < block.end; ++j) e += iso(0, j) * std::conj(iso(1, j));
            out.push_back(std::norm(e));
        }
        return out;
    });
    std::vector<double> all;
    all.reserve(n);
    for (const auto& c : chunks) all.insert(all.end(), c.begin(), c.end());
    return all;
}

double remark_split_bound(double r, double a, double tail_prob) {
    if (!(r >= 0.0) || !std::isfinite(r)) throw InvalidParams("cap r must be finite and >= 0");
    if (!(a >= 0.0 && a <= 1.0)) throw InvalidParams("threshold a must lie in [0, 1]");
    if (!(tail_prob >= 0.0 && tail_prob <= 1.0)) throw InvalidParams("tail probability must lie in [0, 1]");
    return r * tail_prob + a;
}

}  // namespace qet
