#include "qet/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace qet {

void RunningMoments::add(double x) noexcept {
    ++count;
    const double delta = x - mean;
    mean += delta / static_cast<double>(count);
    m2 += delta * (x - mean);
}

void RunningMoments::merge(const RunningMoments& other) noexcept {
    if (other.count == 0) return;
    if (count == 0) {
        *this = other;
        return;
    }
    const double n1 = static_cast<double>(count);
    const double n2 = static_cast<double>(other.count);
    const double delta = other.mean - mean;
    const double n = n1 + n2;
    mean += delta * n2 / n;
    m2 += other.m2 + delta * delta * n1 * n2 / n;
    count += other.count;
}

double RunningMoments::variance() const noexcept {
    return count > 1 ? m2 / static_cast<double>(count - 1) : 0.0;
}

double RunningMoments::std_error() const noexcept {
    return count > 1 ? std::sqrt(variance() / static_cast<double>(count)) : 0.0;
}

double binomial_std_error(double p, std::size_t n) noexcept {
    if (n == 0) return 0.0;
    return std::sqrt(std::max(0.0, p * (1.0 - p)) / static_cast<double>(n));
}

double kolmogorov_survival(double lambda) noexcept {
    if (lambda <= 0.0) return 1.0;
    if (lambda < 1.0) {
        // Theta-function form, fast for small lambda.
        const double pi2 = std::numbers::pi * std::numbers::pi;
        double sum = 0.0;
        for (int j = 1; j <= 50; ++j) {
            const double k = 2.0 * j - 1.0;
            const double term = std::exp(-k * k * pi2 / (8.0 * lambda * lambda));
            sum += term;
            if (term < 1e-18 * sum) break;
        }
        return std::clamp(1.0 - std::sqrt(2.0 * std::numbers::pi) / lambda * sum, 0.0, 1.0);
    }
    double sum = 0.0;
    double sign = 1.0;
    for (int j = 1; j <= 100; ++j) {
        const double term = std::exp(-2.0 * j * j * lambda * lambda);
        sum += sign * term;
        if (term < 1e-18) break;
        sign = -sign;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

namespace {

double ks_p_value(double statistic, double effective_n) {
    const double rn = std::sqrt(effective_n);
    return kolmogorov_survival((rn + 0.12 + 0.11 / rn) * statistic);
}

}  // namespace

KsResult ks_one_sample_sorted(std::span<const double> sorted, std::span<const double> cdf_values) {
    const std::size_t n = sorted.size();
    if (n == 0) return {};
    double d = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double f = cdf_values[i];
        const double lo = static_cast<double>(i) / static_cast<double>(n);
        const double hi = static_cast<double>(i + 1) / static_cast<double>(n);
        d = std::max({d, std::abs(f - lo), std::abs(hi - f)});
    }
    return {d, ks_p_value(d, static_cast<double>(n))};
}

KsResult ks_one_sample(std::span<const double> samples, const std::function<double(double)>& cdf) {
    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> values(sorted.size());
    std::transform(sorted.begin(), sorted.end(), values.begin(), cdf);
    return ks_one_sample_sorted(sorted, values);
}

KsResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) return {};
    std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    const double nx = static_cast<double>(x.size());
    const double ny = static_cast<double>(y.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < x.size() && j < y.size()) {
        const double v = std::min(x[i], y[j]);
        while (i < x.size() && x[i] <= v) ++i;
        while (j < y.size() && y[j] <= v) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / nx - static_cast<double>(j) / ny));
    }
    return {d, ks_p_value(d, nx * ny / (nx + ny))};
}

}  // namespace qet
