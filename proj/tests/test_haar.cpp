#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "qet/errors.hpp"
#include "qet/haar.hpp"
#include "qet/moments.hpp"
#include "qet/parallel.hpp"
#include "qet/stats.hpp"

using namespace qet;

namespace {

double unitarity_defect(const ComplexMatrix& u) {
    return frobenius_norm(u.adjoint() * u - ComplexMatrix::identity(u.cols()));
}

SpectralData basis_from(const ComplexMatrix& u) {
    return {std::vector<double>(u.cols(), 0.0), u};
}

// <phi_a, P phi_b> via the dense projector.
ComplexMatrix dense_elements(const Decomposition& dec, std::size_t nu, const ComplexMatrix& basis) {
    return basis.adjoint() * dec.projector(nu) * basis;
}

}  // namespace

TEST_CASE("dimension profile validation") {
    CHECK_THROWS_AS(DimensionProfile({5}), InvalidProfile);
    CHECK_THROWS_AS(DimensionProfile({3, 0}), InvalidProfile);
    DimensionProfile p({2, 3, 4});
    CHECK(p.total() == 9);
    CHECK(p.block(1).begin == 2);
    CHECK(p.block(1).end == 5);
    CHECK_THROWS_AS(p.block(3), BlockOutOfRange);
}

TEST_CASE("unit vectors") {
    CHECK_THROWS_AS(UnitVector({1.0, 1.0}), InvalidParams);
    CHECK_THROWS_AS(UnitVector::normalized({0.0, 0.0}), InvalidParams);
    auto v = UnitVector::normalized({3.0, cplx(0.0, 4.0)});
    CHECK(squared_norm(v.amplitudes()) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("Haar unitaries are unitary") {
    for (std::size_t n : {1u, 2u, 7u, 32u, 100u}) {
        auto u = sample_haar_unitary(SeedSpec{21, n}, n);
        CHECK(unitarity_defect(u) < 1e-12 * static_cast<double>(n));
    }
}

TEST_CASE("Haar D=1 phase is uniform") {
    const std::size_t n = 10000;
    std::vector<double> angles(n);
    Rng rng({22, 0});
    for (auto& a : angles) {
        auto u = sample_haar_unitary(rng, 1);
        CHECK(std::abs(std::abs(u(0, 0)) - 1.0) < 1e-14);
        a = (std::arg(u(0, 0)) + std::numbers::pi) / (2.0 * std::numbers::pi);
    }
    auto ks = ks_one_sample(angles, [](double x) { return std::clamp(x, 0.0, 1.0); });
    CHECK(ks.p_value > 0.01);
}

TEST_CASE("Haar D=2 |U_11|^2 is uniform") {
    const std::size_t n = 10000;
    std::vector<double> v(n);
    Rng rng({23, 0});
    for (auto& x : v) x = std::norm(sample_haar_unitary(rng, 2)(0, 0));
    auto ks = ks_one_sample(v, [](double x) { return std::clamp(x, 0.0, 1.0); });
    CHECK(ks.p_value > 0.01);
}

TEST_CASE("left invariance: V U has the law of U") {
    const std::size_t n = 20000, D = 4;
    auto v = sample_haar_unitary(SeedSpec{24, 99}, D);
    std::vector<double> plain(n), rotated(n);
    Rng a({24, 1}), b({24, 2});
    for (std::size_t i = 0; i < n; ++i) {
        plain[i] = std::norm(sample_haar_unitary(a, D)(0, 0));
        rotated[i] = std::norm((v * sample_haar_unitary(b, D))(0, 0));
    }
    CHECK(ks_two_sample(plain, rotated).p_value > 0.001);
}

TEST_CASE("unit states") {
    auto one = sample_unit_state(SeedSpec{25, 0}, 1);
    CHECK(std::norm(one[0]) == doctest::Approx(1.0).epsilon(1e-14));

    const std::size_t n = 100000, D = 20;
    Rng rng({25, 1});
    RunningMoments m;
    std::vector<double> first(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto x = sample_unit_state(rng, D);
        CHECK(std::abs(squared_norm(x.amplitudes()) - 1.0) < 1e-12);
        first[i] = std::norm(x[0]);
        m.add(first[i]);
    }
    CHECK(std::abs(m.mean - 1.0 / D) < 4.0 * m.std_error());
    // |x_1|^2 ~ Beta(1, D-1)
    auto ks = ks_one_sample(first, [](double x) { return 1.0 - std::pow(1.0 - std::clamp(x, 0.0, 1.0), 19.0); });
    CHECK(ks.p_value > 0.001);
}

TEST_CASE("decompositions") {
    DimensionProfile p({2, 3});
    CHECK_THROWS_AS(Decomposition(ComplexMatrix(5, 4), p), ShapeMismatch);
    ComplexMatrix bad = ComplexMatrix::identity(5);
    bad(0, 0) = 2.0;
    CHECK_THROWS_AS(Decomposition(bad, p), InvalidParams);

    auto dec = sample_decomposition(SeedSpec{26, 0}, DimensionProfile({2, 3, 4}));
    ComplexMatrix sum = dec.projector(0) + dec.projector(1) + dec.projector(2);
    CHECK(frobenius_norm(sum - ComplexMatrix::identity(9)) < 1e-12);
    auto p1 = dec.projector(1);
    CHECK(frobenius_norm(p1 * p1 - p1) < 1e-12);
    CHECK_THROWS_AS(dec.projector(3), BlockOutOfRange);
}

TEST_CASE("weights") {
    auto std4 = Decomposition::standard(DimensionProfile({2, 2}));
    CHECK(weight(std4, 0, UnitVector::basis(4, 1)) == 1.0);
    CHECK(weight(std4, 0, UnitVector::basis(4, 3)) == 0.0);
    UnitVector even({0.5, 0.5, 0.5, 0.5});
    CHECK(weight(std4, 0, even) == doctest::Approx(0.5).epsilon(1e-15));

    auto dec = sample_decomposition(SeedSpec{27, 0}, DimensionProfile({1, 4, 2}));
    auto psi = sample_unit_state(SeedSpec{27, 1}, 7);
    double total = 0.0;
    for (std::size_t nu = 0; nu < 3; ++nu) {
        const double w = weight(dec, nu, psi);
        CHECK(w >= 0.0);
        CHECK(w <= 1.0);
        total += w;
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-13));
    CHECK_THROWS_AS(weight(dec, 3, psi), BlockOutOfRange);
}

TEST_CASE("matrix elements agree with the dense projector") {
    auto dec = sample_decomposition(SeedSpec{28, 0}, DimensionProfile({3, 5}));
    auto basis = basis_from(sample_haar_unitary(SeedSpec{28, 1}, 8));
    auto dense = dense_elements(dec, 1, basis.eigenvectors);
    auto fast = projector_in_basis(dec, 1, basis);
    CHECK(frobenius_norm(dense - fast) < 1e-12);
    for (std::size_t a = 0; a < 8; ++a)
        for (std::size_t b = 0; b < 8; ++b) {
            auto e = matrix_element(dec, 1, basis, a, b);
            CHECK(std::abs(e - dense(a, b)) < 1e-12);
            CHECK(std::abs(e - std::conj(matrix_element(dec, 1, basis, b, a))) < 1e-13);
        }
    CHECK_THROWS_AS(matrix_element(dec, 1, basis, 8, 0), IndexOutOfRange);
    CHECK_THROWS_AS(matrix_element(dec, 2, basis, 0, 0), BlockOutOfRange);
}

TEST_CASE("aligned matrix elements") {
    auto dec = Decomposition::standard(DimensionProfile({2, 3}));
    auto basis = basis_from(ComplexMatrix::identity(5));
    CHECK(matrix_element(dec, 0, basis, 0, 0) == cplx(1.0));
    CHECK(matrix_element(dec, 0, basis, 3, 3) == cplx(0.0));
    CHECK(matrix_element(dec, 0, basis, 0, 1) == cplx(0.0));
}

TEST_CASE("g_nu in aligned frames") {
    auto basis4 = basis_from(ComplexMatrix::identity(4));
    auto dec = Decomposition::standard(DimensionProfile({2, 2}));
    auto t = g_nu_terms(dec, 0, basis4);
    CHECK(t.offdiag == 0.0);
    CHECK(t.diag == doctest::Approx(0.25).epsilon(1e-15));

    const std::size_t D = 9;
    auto basis = basis_from(ComplexMatrix::identity(D));
    auto lop = Decomposition::standard(DimensionProfile({D - 1, 1}));
    // rank-one block: deviation (1 - 1/D)^2 on its own vector, (1/D)^2 on the others
    auto elements = projector_in_basis(lop, 1, basis);
    CHECK(std::pow(elements(0, 0).real() - 1.0 / D, 2) == doctest::Approx(1.0 / (D * D)));
    auto g1 = g_nu_terms(lop, 1, basis);
    CHECK(g1.offdiag == 0.0);
    CHECK(g1.diag == doctest::Approx(std::pow(1.0 - 1.0 / D, 2)));
    auto g0 = g_nu_terms(lop, 0, basis);
    // the excluded vector sits (D-1)/D below the mean
    CHECK(g0.diag == doctest::Approx(std::pow((D - 1.0) / D, 2)).epsilon(1e-12));
}

TEST_CASE("g_nu matches a brute-force scan") {
    auto dec = sample_decomposition(SeedSpec{29, 0}, DimensionProfile({3, 5}));
    auto basis = basis_from(sample_haar_unitary(SeedSpec{29, 1}, 8));
    for (std::size_t nu = 0; nu < 2; ++nu) {
        auto e = dense_elements(dec, nu, basis.eigenvectors);
        const double frac = static_cast<double>(dec.profile().dim(nu)) / 8.0;
        double off = 0.0, diag = 0.0;
        for (std::size_t a = 0; a < 8; ++a)
            for (std::size_t b = 0; b < 8; ++b) {
                if (a == b) diag = std::max(diag, std::pow(e(a, a).real() - frac, 2));
                else off = std::max(off, std::norm(e(a, b)));
            }
        auto t = g_nu_terms(dec, nu, basis);
        CHECK(t.offdiag == doctest::Approx(off).epsilon(1e-12));
        CHECK(t.diag == doctest::Approx(diag).epsilon(1e-12));
        CHECK(g_nu(dec, nu, basis) == doctest::Approx(off + diag).epsilon(1e-12));
    }
}

TEST_CASE("off-diagonal elements of a projector never exceed 1/4") {
    Rng rng({30, 0});
    DimensionProfile p({3, 7});
    for (int rep = 0; rep < 200; ++rep) {
        auto dec = sample_decomposition(rng, p);
        auto basis = basis_from(sample_haar_unitary(rng, 10));
        CHECK(g_nu_terms(dec, 0, basis).offdiag <= 0.25 + 1e-14);
    }
}

TEST_CASE("seminorm") {
    auto dec = sample_decomposition(SeedSpec{31, 0}, DimensionProfile({2, 5}));
    CHECK(seminorm_infinity(ComplexMatrix(7, 7), dec) == 0.0);
    auto mixed = ComplexMatrix::identity(7) * cplx(1.0 / 7.0);
    CHECK(seminorm_infinity(mixed, dec) == doctest::Approx(5.0 / 7.0).epsilon(1e-13));

    // |phi><phi| - I/D has trace w_nu - d_nu/D against P_nu
    auto phi = sample_unit_state(SeedSpec{31, 1}, 7);
    ComplexMatrix rho(7, 7);
    for (std::size_t i = 0; i < 7; ++i)
        for (std::size_t j = 0; j < 7; ++j) rho(i, j) = phi[i] * std::conj(phi[j]);
    rho -= mixed;
    const double expect =
        std::max(std::abs(weight(dec, 0, phi) - 2.0 / 7.0), std::abs(weight(dec, 1, phi) - 5.0 / 7.0));
    CHECK(seminorm_infinity(rho, dec) == doctest::Approx(expect).epsilon(1e-12));
    CHECK_THROWS_AS(seminorm_infinity(ComplexMatrix(6, 6), dec), ShapeMismatch);
}

TEST_CASE("state/decomposition exchange symmetry") {
    DimensionProfile p({5, 15});
    const std::size_t n = 20000;
    auto xs = sample_overlaps({32, 0}, p, 0, n, OverlapMode::VaryState);
    auto ys = sample_overlaps({32, 1}, p, 0, n, OverlapMode::VaryDecomposition);
    CHECK(ks_two_sample(xs, ys).p_value > 0.001);
    RunningMoments a, b;
    for (double x : xs) a.add(x);
    for (double y : ys) b.add(y);
    CHECK(std::abs(a.mean - 0.25) < 4.0 * a.std_error());
    CHECK(std::abs(b.mean - 0.25) < 4.0 * b.std_error());
}

TEST_CASE("sampling is reproducible and independent of threads") {
    auto u1 = sample_haar_unitary(SeedSpec{33, 4}, 6);
    auto u2 = sample_haar_unitary(SeedSpec{33, 4}, 6);
    auto u3 = sample_haar_unitary(SeedSpec{33, 5}, 6);
    CHECK(u1 == u2);
    CHECK_FALSE(u1 == u3);

    DimensionProfile p({4, 4});
    set_worker_count(1);
    auto single = sample_overlaps({33, 0}, p, 0, 5000, OverlapMode::VaryDecomposition);
    set_worker_count(4);
    auto multi = sample_overlaps({33, 0}, p, 0, 5000, OverlapMode::VaryDecomposition);
    CHECK(single == multi);
}
