#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <queue>
#include <vector>

namespace qet {

struct QuadratureOptions {
    double abs_tol = 1e-12;
    double rel_tol = 1e-12;
    std::size_t max_intervals = 4000;
};

struct QuadratureResult {
    double value = 0.0;
    double error = 0.0;
    std::size_t intervals = 0;
    bool converged = true;
};

namespace detail {

struct Segment {
    double a, b, value, error;
    friend bool operator<(const Segment& x, const Segment& y) { return x.error < y.error; }
};

// 21-point Kronrod rule with its embedded 10-point Gauss rule; the error
// estimate follows QUADPACK's qk21.
template <class F>
Segment gauss_kronrod21(F& f, double a, double b) {
    static constexpr double xgk[11] = {
        0.995657163025808080735527280689003, 0.973906528517171720077964012084452,
        0.930157491355708226001207180059508, 0.865063366688984510732096688423493,
        0.780817726586416897063717578345042, 0.679409568299024406234327365114874,
        0.562757134668604683339000099272694, 0.433395394129247190799265943165784,
        0.294392862701460198131126603103866, 0.148874338981631210884826001129720,
        0.0};
    static constexpr double wgk[11] = {
        0.011694638867371874278064396062192, 0.032558162307964727478818972459390,
        0.054755896574351996031381300244580, 0.075039674810919952767043140916190,
        0.093125454583697605535065465083366, 0.109387158802297641899210590325805,
        0.123491976262065851077958109831074, 0.134709217311473325928054001771707,
        0.142775938577060080797094273138717, 0.147739104901338491374841515972068,
        0.149445554002916905664936468389821};
    static constexpr double wg[5] = {
        0.066671344308688137593568809893332, 0.149451349150580593145776339657697,
        0.219086362515982043995534934228163, 0.269266719309996355091226921569469,
        0.295524224714752870173892994651338};

    const double center = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    const double fc = f(center);
    double resk = wgk[10] * fc;
    double resg = 0.0;
    double resabs = std::abs(resk);
    double fv1[10], fv2[10];
    for (int j = 0; j < 10; ++j) {
        const double dx = half * xgk[j];
        fv1[j] = f(center - dx);
        fv2[j] = f(center + dx);
        const double sum = fv1[j] + fv2[j];
        resk += wgk[j] * sum;
        resabs += wgk[j] * (std::abs(fv1[j]) + std::abs(fv2[j]));
        if (j % 2 == 1) resg += wg[j / 2] * sum;
    }
    const double reskh = 0.5 * resk;
    double resasc = wgk[10] * std::abs(fc - reskh);
    for (int j = 0; j < 10; ++j) resasc += wgk[j] * (std::abs(fv1[j] - reskh) + std::abs(fv2[j] - reskh));

    const double value = resk * half;
    resabs *= std::abs(half);
    resasc *= std::abs(half);
    double err = std::abs((resk - resg) * half);
    if (resasc != 0.0 && err != 0.0) err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
    const double epmach = std::numeric_limits<double>::epsilon();
    if (resabs > std::numeric_limits<double>::min() / (50.0 * epmach)) err = std::max(50.0 * epmach * resabs, err);
    return {a, b, value, err};
}

}  // namespace detail

/// Globally adaptive Gauss-Kronrod integration of f over the consecutive
/// intervals given by `breakpoints` (ascending; at least two points). The
/// interval with the largest error is bisected until the summed error is
/// below max(abs_tol, rel_tol * |value|).
template <class F>
QuadratureResult integrate(F&& f, const std::vector<double>& breakpoints, QuadratureOptions opts = {}) {
    QuadratureResult out;
    if (breakpoints.size() < 2) return out;
    std::priority_queue<detail::Segment> queue;
    double value = 0.0;
    double error = 0.0;
    for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i) {
        if (!(breakpoints[i + 1] > breakpoints[i])) continue;
        auto seg = detail::gauss_kronrod21(f, breakpoints[i], breakpoints[i + 1]);
        value += seg.value;
        error += seg.error;
        queue.push(seg);
    }
    auto target = [&] { return std::max(opts.abs_tol, opts.rel_tol * std::abs(value)); };
    while (!queue.empty() && error > target()) {
        if (queue.size() >= opts.max_intervals) {
            out.converged = false;
            break;
        }
        const detail::Segment worst = queue.top();
        const double mid = 0.5 * (worst.a + worst.b);
        if (!(mid > worst.a && mid < worst.b)) {
            out.converged = false;
            break;
        }
        queue.pop();
        auto left = detail::gauss_kronrod21(f, worst.a, mid);
        auto right = detail::gauss_kronrod21(f, mid, worst.b);
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        queue.push(left);
        queue.push(right);
    }
    // Re-sum to shed the drift of the incremental updates.
    out.intervals = queue.size();
    value = 0.0;
    error = 0.0;
    while (!queue.empty()) {
        value += queue.top().value;
        error += queue.top().error;
        queue.pop();
    }
    out.value = value;
    out.error = error;
    return out;
}

template <class F>
QuadratureResult integrate(F&& f, double a, double b, QuadratureOptions opts = {}) {
    return integrate(std::forward<F>(f), std::vector<double>{a, b}, opts);
}

}  // namespace qet
