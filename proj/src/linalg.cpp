#include "qet/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "qet/errors.hpp"

namespace qet {

namespace {

cplx phase_of(cplx z) {
    const double a = std::abs(z);
    return a == 0.0 ? cplx{1.0, 0.0} : z / a;
}

void require_same_shape(const ComplexMatrix& a, const ComplexMatrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ShapeMismatch("operands are " + std::to_string(a.rows()) + "x" +
                            std::to_string(a.cols()) + " and " + std::to_string(b.rows()) +
                            "x" + std::to_string(b.cols()));
    }
}

// Implicit-shift QL on a real symmetric tridiagonal matrix (diag, sub), with the
// rotations accumulated into the columns of z (n x n, row-major).
void tridiagonal_ql(std::vector<double>& diag, std::vector<double>& sub,
                    std::vector<double>& z) {
    const int n = static_cast<int>(diag.size());
    if (n <= 1) return;
    std::vector<double>& e = sub;
    e.resize(static_cast<std::size_t>(n), 0.0);
    e[static_cast<std::size_t>(n - 1)] = 0.0;
    constexpr int kMaxIterations = 60;
    const double eps = std::numeric_limits<double>::epsilon();
    auto Z = [&](int r, int c) -> double& { return z[static_cast<std::size_t>(r * n + c)]; };
    auto D = [&](int i) -> double& { return diag[static_cast<std::size_t>(i)]; };
    auto E = [&](int i) -> double& { return e[static_cast<std::size_t>(i)]; };

    for (int l = 0; l < n; ++l) {
        int iter = 0;
        int m = l;
        do {
            for (m = l; m < n - 1; ++m) {
                const double dd = std::abs(D(m)) + std::abs(D(m + 1));
                if (std::abs(E(m)) <= eps * dd) break;
            }
            if (m == l) break;
            if (iter++ == kMaxIterations) {
                throw ConvergenceFailure("tridiagonal QL did not converge for eigenvalue " +
                                         std::to_string(l));
            }
            double g = (D(l + 1) - D(l)) / (2.0 * E(l));
            double r = std::hypot(g, 1.0);
            g = D(m) - D(l) + E(l) / (g + std::copysign(r, g));
            double s = 1.0;
            double c = 1.0;
            double p = 0.0;
            int i = m - 1;
            bool underflow = false;
            for (; i >= l; --i) {
                double f = s * E(i);
                const double b = c * E(i);
                r = std::hypot(f, g);
                E(i + 1) = r;
                if (r == 0.0) {
                    D(i + 1) -= p;
                    E(m) = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = D(i + 1) - p;
                r = (D(i) - g) * s + 2.0 * c * b;
                p = s * r;
                D(i + 1) = g + p;
                g = c * r - b;
                for (int k = 0; k < n; ++k) {
                    f = Z(k, i + 1);
                    Z(k, i + 1) = s * Z(k, i) + c * f;
                    Z(k, i) = c * Z(k, i) - s * f;
                }
            }
            if (underflow) continue;
            D(l) -= p;
            E(l) = g;
            E(m) = 0.0;
        } while (m != l);
    }
}

}  // namespace

double scaled_tolerance(double rel, double scale) {
    return std::max(rel * scale, kAbsoluteFloor);
}

ComplexMatrix::ComplexMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, cplx{0.0, 0.0}) {}

ComplexMatrix::ComplexMatrix(std::size_t rows, std::size_t cols, std::vector<cplx> entries)
    : rows_(rows), cols_(cols), data_(std::move(entries)) {
    if (data_.size() != rows_ * cols_) {
        throw ShapeMismatch("expected " + std::to_string(rows_ * cols_) + " entries, got " +
                            std::to_string(data_.size()));
    }
    if (!all_finite()) throw NonFiniteInput("matrix contains NaN or Inf");
}

ComplexMatrix ComplexMatrix::identity(std::size_t n) {
    ComplexMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

ComplexMatrix ComplexMatrix::diagonal(std::span<const double> values) {
    ComplexMatrix m(values.size(), values.size());
    for (std::size_t i = 0; i < values.size(); ++i) m(i, i) = values[i];
    return m;
}

ComplexVector ComplexMatrix::column(std::size_t j) const {
    ComplexVector c(rows_);
    for (std::size_t i = 0; i < rows_; ++i) c[i] = (*this)(i, j);
    return c;
}

ComplexMatrix ComplexMatrix::adjoint() const {
    ComplexMatrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j) t(j, i) = std::conj((*this)(i, j));
    return t;
}

bool ComplexMatrix::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](cplx z) {
        return std::isfinite(z.real()) && std::isfinite(z.imag());
    });
}

ComplexMatrix& ComplexMatrix::operator+=(const ComplexMatrix& other) {
    require_same_shape(*this, other);
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += other.data_[k];
    return *this;
}

ComplexMatrix& ComplexMatrix::operator-=(const ComplexMatrix& other) {
    require_same_shape(*this, other);
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= other.data_[k];
    return *this;
}

ComplexMatrix& ComplexMatrix::operator*=(cplx s) noexcept {
    for (auto& z : data_) z *= s;
    return *this;
}

ComplexMatrix operator+(ComplexMatrix a, const ComplexMatrix& b) { return a += b; }
ComplexMatrix operator-(ComplexMatrix a, const ComplexMatrix& b) { return a -= b; }
ComplexMatrix operator*(ComplexMatrix a, cplx s) { return a *= s; }

ComplexMatrix operator*(const ComplexMatrix& a, const ComplexMatrix& b) {
    if (a.cols() != b.rows()) {
        throw ShapeMismatch("cannot multiply " + std::to_string(a.rows()) + "x" +
                            std::to_string(a.cols()) + " by " + std::to_string(b.rows()) + "x" +
                            std::to_string(b.cols()));
    }
    ComplexMatrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const cplx aik = a(i, k);
            if (aik == cplx{}) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
        }
    }
    return c;
}

ComplexVector operator*(const ComplexMatrix& a, std::span<const cplx> x) {
    if (a.cols() != x.size()) {
        throw ShapeMismatch("matrix has " + std::to_string(a.cols()) + " columns, vector has " +
                            std::to_string(x.size()) + " entries");
    }
    ComplexVector y(a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        cplx acc{};
        for (std::size_t j = 0; j < a.cols(); ++j) acc += a(i, j) * x[j];
        y[i] = acc;
    }
    return y;
}

double frobenius_norm(const ComplexMatrix& m) noexcept {
    double s = 0.0;
    for (const cplx z : m.data()) s += std::norm(z);
    return std::sqrt(s);
}

cplx inner(std::span<const cplx> a, std::span<const cplx> b) {
    if (a.size() != b.size()) throw ShapeMismatch("inner product of vectors of different length");
    cplx acc{};
    for (std::size_t i = 0; i < a.size(); ++i) acc += std::conj(a[i]) * b[i];
    return acc;
}

double squared_norm(std::span<const cplx> x) noexcept {
    double s = 0.0;
    for (const cplx z : x) s += std::norm(z);
    return s;
}

double norm(std::span<const cplx> x) noexcept { return std::sqrt(squared_norm(x)); }

ComplexMatrix SpectralData::reconstruct() const {
    const std::size_t n = dim();
    ComplexMatrix scaled = eigenvectors;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) scaled(i, j) *= eigenvalues[j];
    return scaled * eigenvectors.adjoint();
}

SpectralData hermitian_eigendecomposition(const ComplexMatrix& m) {
    if (!m.is_square()) throw ShapeMismatch("eigendecomposition needs a square matrix");
    if (!m.all_finite()) throw NonFiniteInput("matrix contains NaN or Inf");
    const std::size_t n = m.rows();
    const double scale = frobenius_norm(m);
    const ComplexMatrix adj = m.adjoint();
    const double asym = frobenius_norm(m - adj);
    if (asym > scaled_tolerance(1e-10, scale)) {
        throw NotHermitian("||M - M*||_F = " + std::to_string(asym));
    }
    ComplexMatrix a = (m + adj) * 0.5;
    ComplexMatrix q = ComplexMatrix::identity(n);

    // Householder tridiagonalization: A <- H A H, Q <- Q H with H = I - 2 v v*.
    ComplexVector v(n), p(n), w(n);
    for (std::size_t k = 0; k + 2 < n; ++k) {
        double tail = 0.0;
        for (std::size_t i = k + 2; i < n; ++i) tail += std::norm(a(i, k));
        if (tail == 0.0) continue;
        const cplx x0 = a(k + 1, k);
        const double xnorm = std::sqrt(tail + std::norm(x0));
        const cplx alpha = -phase_of(x0) * xnorm;
        std::fill(v.begin(), v.end(), cplx{});
        v[k + 1] = x0 - alpha;
        for (std::size_t i = k + 2; i < n; ++i) v[i] = a(i, k);
        const double vnorm = norm(v);
        for (auto& z : v) z /= vnorm;

        // p = A v, K = v* A v (real), w = p - K v, A <- A - 2 v w* - 2 w v*.
        for (std::size_t i = 0; i < n; ++i) {
            cplx acc{};
            for (std::size_t j = k + 1; j < n; ++j) acc += a(i, j) * v[j];
            p[i] = acc;
        }
        const double kappa = inner(v, p).real();
        for (std::size_t i = 0; i < n; ++i) w[i] = p[i] - kappa * v[i];
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                a(i, j) -= 2.0 * (v[i] * std::conj(w[j]) + w[i] * std::conj(v[j]));
        a(k + 1, k) = alpha;
        a(k, k + 1) = std::conj(alpha);
        for (std::size_t i = k + 2; i < n; ++i) {
            a(i, k) = 0.0;
            a(k, i) = 0.0;
        }

        for (std::size_t i = 0; i < n; ++i) {
            cplx acc{};
            for (std::size_t j = k + 1; j < n; ++j) acc += q(i, j) * v[j];
            for (std::size_t j = k + 1; j < n; ++j) q(i, j) -= 2.0 * acc * std::conj(v[j]);
        }
    }

    // Diagonal phase similarity making the sub-diagonal real and non-negative.
    std::vector<double> diag(n), sub(n, 0.0);
    cplx ph{1.0, 0.0};
    for (std::size_t i = 0; i < n; ++i) {
        diag[i] = a(i, i).real();
        if (i > 0) {
            const cplx e = a(i, i - 1);
            const double ae = std::abs(e);
            if (ae > 0.0) ph *= e / ae;
            sub[i - 1] = ae;
            for (std::size_t r = 0; r < n; ++r) q(r, i) *= ph;
        }
    }

    std::vector<double> z(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) z[i * n + i] = 1.0;
    tridiagonal_ql(diag, sub, z);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return diag[x] < diag[y]; });

    SpectralData out;
    out.eigenvalues.resize(n);
    out.eigenvectors = ComplexMatrix(n, n);
    for (std::size_t c = 0; c < n; ++c) {
        const std::size_t src = order[c];
        out.eigenvalues[c] = diag[src];
        for (std::size_t r = 0; r < n; ++r) {
            cplx acc{};
            for (std::size_t k = 0; k < n; ++k) acc += q(r, k) * z[k * n + src];
            out.eigenvectors(r, c) = acc;
        }
    }
    return out;
}

QrResult householder_qr(const ComplexMatrix& m) {
    if (!m.all_finite()) throw NonFiniteInput("matrix contains NaN or Inf");
    const std::size_t rows = m.rows();
    const std::size_t cols = m.cols();
    if (rows < cols) throw ShapeMismatch("QR needs rows >= cols");

    ComplexMatrix r = m;
    std::vector<ComplexVector> reflectors(cols);
    for (std::size_t k = 0; k < cols; ++k) {
        double tail = 0.0;
        for (std::size_t i = k + 1; i < rows; ++i) tail += std::norm(r(i, k));
        if (tail == 0.0) continue;
        const cplx x0 = r(k, k);
        const double xnorm = std::sqrt(tail + std::norm(x0));
        const cplx alpha = -phase_of(x0) * xnorm;
        ComplexVector v(rows - k);
        v[0] = x0 - alpha;
        for (std::size_t i = k + 1; i < rows; ++i) v[i - k] = r(i, k);
        const double vnorm = norm(v);
        for (auto& z : v) z /= vnorm;
        for (std::size_t j = k + 1; j < cols; ++j) {
            cplx s{};
            for (std::size_t i = k; i < rows; ++i) s += std::conj(v[i - k]) * r(i, j);
            for (std::size_t i = k; i < rows; ++i) r(i, j) -= 2.0 * v[i - k] * s;
        }
        r(k, k) = alpha;
        for (std::size_t i = k + 1; i < rows; ++i) r(i, k) = 0.0;
        reflectors[k] = std::move(v);
    }

    ComplexMatrix q(rows, cols);
    for (std::size_t i = 0; i < cols; ++i) q(i, i) = 1.0;
    for (std::size_t kk = cols; kk-- > 0;) {
        const ComplexVector& v = reflectors[kk];
        if (v.empty()) continue;
        for (std::size_t j = kk; j < cols; ++j) {
            cplx s{};
            for (std::size_t i = kk; i < rows; ++i) s += std::conj(v[i - kk]) * q(i, j);
            if (s == cplx{}) continue;
            for (std::size_t i = kk; i < rows; ++i) q(i, j) -= 2.0 * v[i - kk] * s;
        }
    }

    ComplexMatrix rr(cols, cols);
    for (std::size_t i = 0; i < cols; ++i)
        for (std::size_t j = i; j < cols; ++j) rr(i, j) = r(i, j);
    for (std::size_t i = 0; i < cols; ++i) {
        const double mag = std::abs(rr(i, i));
        if (mag == 0.0) continue;
        const cplx ph = rr(i, i) / mag;
        for (std::size_t j = i; j < cols; ++j) rr(i, j) *= std::conj(ph);
        rr(i, i) = mag;
        for (std::size_t row = 0; row < rows; ++row) q(row, i) *= ph;
    }
    return {std::move(q), std::move(rr)};
}

ComplexVector apply_projector(const ComplexMatrix& frame, IndexRange block,
                              std::span<const cplx> psi) {
    if (block.begin > block.end || block.end > frame.cols()) {
        throw BlockOutOfRange("block [" + std::to_string(block.begin) + ", " +
                              std::to_string(block.end) + ") outside " +
                              std::to_string(frame.cols()) + " columns");
    }
    if (psi.size() != frame.rows()) throw ShapeMismatch("state length does not match frame");
    ComplexVector out(frame.rows());
    for (std::size_t j = block.begin; j < block.end; ++j) {
        cplx coeff{};
        for (std::size_t i = 0; i < frame.rows(); ++i) coeff += std::conj(frame(i, j)) * psi[i];
        for (std::size_t i = 0; i < frame.rows(); ++i) out[i] += coeff * frame(i, j);
    }
    return out;
}

}  // namespace qet
