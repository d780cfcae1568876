#pragma once

#include <cmath>
#include <cstddef>
#include <functional>

// Adaptive Simpson integration, kept independent of the library's quadrature.
namespace oracle {

inline double simpson_adaptive(const std::function<double(double)>& f, double a, double b, double fa, double fm,
                               double fb, double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
    return simpson_adaptive(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           simpson_adaptive(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

// (1/T) int_0^T f, split into panels no wider than `panel`
inline double simpson_average(const std::function<double(double)>& f, double T, double panel, double tol) {
    const auto panels = static_cast<std::size_t>(std::ceil(T / panel));
    const double h = T / static_cast<double>(panels);
    double sum = 0.0;
    for (std::size_t k = 0; k < panels; ++k) {
        const double a = h * static_cast<double>(k), b = a + h;
        const double fa = f(a), fm = f(0.5 * (a + b)), fb = f(b);
        sum += simpson_adaptive(f, a, b, fa, fm, fb, h / 6.0 * (fa + 4.0 * fm + fb), tol, 30);
    }
    return sum / T;
}

}  // namespace oracle
