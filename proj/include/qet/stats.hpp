#pragma once

#include <cstddef>
#include <functional>
#include <span>

namespace qet {

/// Count, mean and centered sum of squares; mergeable in a fixed order.
struct RunningMoments {
    std::size_t count = 0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double x) noexcept;
    void merge(const RunningMoments& other) noexcept;
    double variance() const noexcept;  ///< unbiased
    double std_error() const noexcept;
};

/// sqrt(p (1 - p) / n)
double binomial_std_error(double p, std::size_t n) noexcept;

/// Kolmogorov survival function Q(lambda) = 2 sum_{j>=1} (-1)^{j-1} exp(-2 j^2 lambda^2).
double kolmogorov_survival(double lambda) noexcept;

struct KsResult {
    double statistic = 0.0;
    double p_value = 1.0;
};

/// One-sample Kolmogorov-Smirnov test against a continuous CDF.
KsResult ks_one_sample(std::span<const double> samples, const std::function<double(double)>& cdf);
/// Same test with the model CDF already evaluated at the sorted samples.
KsResult ks_one_sample_sorted(std::span<const double> sorted, std::span<const double> cdf_values);
/// Two-sample Kolmogorov-Smirnov test.
KsResult ks_two_sample(std::span<const double> a, std::span<const double> b);

}  // namespace qet
