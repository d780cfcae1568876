#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "qet/errors.hpp"
#include "qet/haar.hpp"
#include "qet/linalg.hpp"
#include "qet/rng.hpp"

using namespace qet;

namespace {

ComplexMatrix random_hermitian(Rng& rng, std::size_t n) {
    ComplexMatrix g(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) g(i, j) = rng.complex_normal();
    ComplexMatrix h = g + g.adjoint();
    h *= 0.5;
    return h;
}

double unitarity_defect(const ComplexMatrix& u) {
    return frobenius_norm(u.adjoint() * u - ComplexMatrix::identity(u.cols()));
}

// Roots of the characteristic polynomial of a 3x3 Hermitian matrix, by the
// trigonometric solution of the depressed cubic.
std::vector<double> cubic_eigenvalues(const ComplexMatrix& m) {
    const double tr = (m(0, 0) + m(1, 1) + m(2, 2)).real();
    const cplx minors = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0) + m(0, 0) * m(2, 2) - m(0, 2) * m(2, 0) +
                        m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1);
    const cplx det = m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) -
                     m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0)) +
                     m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
    // lambda^3 - tr lambda^2 + c lambda - det, shifted by tr/3
    const double c = minors.real();
    const double q = tr / 3.0;
    const double p = c - tr * tr / 3.0;               // t^3 + p t + r
    const double r = -2.0 * q * q * q + c * q - det.real();
    const double amp = 2.0 * std::sqrt(-p / 3.0);
    const double arg = std::clamp(3.0 * r / (p * amp), -1.0, 1.0);
    const double phi = std::acos(arg) / 3.0;
    std::vector<double> roots(3);
    for (int k = 0; k < 3; ++k) roots[k] = q + amp * std::cos(phi - 2.0 * std::numbers::pi * k / 3.0);
    std::sort(roots.begin(), roots.end());
    return roots;
}

}  // namespace

TEST_CASE("eigendecomposition of the identity") {
    auto s = hermitian_eigendecomposition(ComplexMatrix::identity(3));
    for (double e : s.eigenvalues) CHECK(e == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(unitarity_defect(s.eigenvectors) < 1e-13);
}

TEST_CASE("eigendecomposition of a diagonal matrix sorts ascending") {
    std::vector<double> diag{3.0, 1.0, 2.0};
    auto s = hermitian_eigendecomposition(ComplexMatrix::diagonal(diag));
    REQUIRE(s.eigenvalues.size() == 3);
    CHECK(s.eigenvalues[0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(s.eigenvalues[1] == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(s.eigenvalues[2] == doctest::Approx(3.0).epsilon(1e-14));
    // eigenvector of 1 is e_2 up to phase, and so on
    CHECK(std::abs(s.eigenvectors(1, 0)) == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(std::abs(s.eigenvectors(2, 1)) == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(std::abs(s.eigenvectors(0, 2)) == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("eigenvalues match the characteristic polynomial in dimension 3") {
    Rng rng({11, 0});
    for (int rep = 0; rep < 50; ++rep) {
        auto m = random_hermitian(rng, 3);
        auto s = hermitian_eigendecomposition(m);
        auto oracle = cubic_eigenvalues(m);
        const double scale = frobenius_norm(m);
        for (int k = 0; k < 3; ++k) CHECK(std::abs(s.eigenvalues[k] - oracle[k]) < 1e-10 * scale);
    }
}

TEST_CASE("eigendecomposition residual and orthonormality on random Hermitian matrices") {
    Rng rng({12, 0});
    for (std::size_t n : {1u, 2u, 5u, 8u, 17u, 40u, 64u}) {
        auto m = random_hermitian(rng, n);
        auto s = hermitian_eigendecomposition(m);
        const double scale = std::max(1.0, frobenius_norm(m));
        CHECK(frobenius_norm(s.reconstruct() - m) < 1e-10 * scale);
        CHECK(unitarity_defect(s.eigenvectors) < 1e-10 * static_cast<double>(n));
        CHECK(std::is_sorted(s.eigenvalues.begin(), s.eigenvalues.end()));
        // each column satisfies M v = lambda v
        for (std::size_t a = 0; a < n; ++a) {
            auto v = s.eigenvectors.column(a);
            auto mv = m * std::span<const cplx>(v);
            double res = 0.0;
            for (std::size_t i = 0; i < n; ++i) res += std::norm(mv[i] - s.eigenvalues[a] * v[i]);
            CHECK(std::sqrt(res) < 1e-10 * scale);
        }
    }
}

TEST_CASE("eigendecomposition rejects non-Hermitian input") {
    ComplexMatrix m(2, 2);
    m(0, 1) = 1.0;
    CHECK_THROWS_AS(hermitian_eigendecomposition(m), NotHermitian);
    CHECK_THROWS_AS(hermitian_eigendecomposition(ComplexMatrix(2, 3)), ShapeMismatch);
}

TEST_CASE("matrix construction validates entries") {
    CHECK_THROWS_AS(ComplexMatrix(2, 2, {1.0, 2.0, 3.0}), ShapeMismatch);
    CHECK_THROWS_AS(ComplexMatrix(1, 2, {1.0, cplx(std::nan(""), 0.0)}), NonFiniteInput);
}

TEST_CASE("QR of the identity") {
    auto qr = householder_qr(ComplexMatrix::identity(4));
    CHECK(frobenius_norm(qr.q - ComplexMatrix::identity(4)) < 1e-14);
    CHECK(frobenius_norm(qr.r - ComplexMatrix::identity(4)) < 1e-14);
}

TEST_CASE("QR of a permutation has unit diagonal") {
    ComplexMatrix p(2, 2);
    p(0, 1) = 1.0;
    p(1, 0) = 1.0;
    auto qr = householder_qr(p);
    CHECK(std::abs(qr.r(0, 0) - 1.0) < 1e-14);
    CHECK(std::abs(qr.r(1, 1) - 1.0) < 1e-14);
    CHECK(frobenius_norm(qr.q * qr.r - p) < 1e-14);
}

TEST_CASE("QR factorizes random matrices with positive real diagonal") {
    Rng rng({13, 0});
    for (std::size_t n : {1u, 3u, 16u, 50u}) {
        ComplexMatrix g(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) g(i, j) = rng.complex_normal();
        auto qr = householder_qr(g);
        CHECK(unitarity_defect(qr.q) < 1e-12 * static_cast<double>(n));
        CHECK(frobenius_norm(qr.q * qr.r - g) < 1e-12 * frobenius_norm(g));
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(qr.r(i, i).imag() == 0.0);
            CHECK(qr.r(i, i).real() >= 0.0);
            for (std::size_t j = 0; j < i; ++j) CHECK(qr.r(i, j) == cplx(0.0));
        }
    }
}

TEST_CASE("thin QR of a tall matrix") {
    Rng rng({14, 0});
    ComplexMatrix g(10, 4);
    for (std::size_t i = 0; i < 10; ++i)
        for (std::size_t j = 0; j < 4; ++j) g(i, j) = rng.complex_normal();
    auto qr = householder_qr(g);
    CHECK(qr.q.rows() == 10);
    CHECK(qr.q.cols() == 4);
    CHECK(unitarity_defect(qr.q) < 1e-12);
    CHECK(frobenius_norm(qr.q * qr.r - g) < 1e-12 * frobenius_norm(g));
    CHECK_THROWS_AS(householder_qr(ComplexMatrix(2, 3)), ShapeMismatch);
}

TEST_CASE("projector application") {
    auto id = ComplexMatrix::identity(4);
    ComplexVector psi{0.5, 0.5, 0.5, 0.5};
    auto whole = apply_projector(id, {0, 4}, psi);
    for (std::size_t i = 0; i < 4; ++i) CHECK(whole[i] == psi[i]);

    ComplexVector e0{1.0, 0.0, 0.0, 0.0};
    auto none = apply_projector(id, {1, 4}, e0);
    CHECK(norm(none) == 0.0);

    auto half = apply_projector(id, {0, 2}, psi);
    CHECK(squared_norm(half) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK_THROWS_AS(apply_projector(id, {2, 5}, psi), BlockOutOfRange);
}

TEST_CASE("projection is idempotent and Pythagorean in a random frame") {
    Rng rng({15, 0});
    auto u = sample_haar_unitary(rng, 12);
    auto psi = sample_unit_state(rng, 12);
    const IndexRange block{3, 8};
    auto p1 = apply_projector(u, block, psi.amplitudes());
    auto p2 = apply_projector(u, block, p1);
    double diff = 0.0;
    for (std::size_t i = 0; i < 12; ++i) diff += std::norm(p1[i] - p2[i]);
    CHECK(std::sqrt(diff) < 1e-13);
    auto lo = apply_projector(u, {0, 3}, psi.amplitudes());
    auto hi = apply_projector(u, {8, 12}, psi.amplitudes());
    CHECK(squared_norm(lo) + squared_norm(p1) + squared_norm(hi) == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("scaled tolerance keeps an absolute floor") {
    CHECK(scaled_tolerance(1e-9, 2.0) == 2e-9);
    CHECK(scaled_tolerance(1e-9, 0.0) == kAbsoluteFloor);
}
