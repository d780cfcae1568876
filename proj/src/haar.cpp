#include "qet/haar.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "qet/errors.hpp"

namespace qet {

DimensionProfile::DimensionProfile(std::vector<std::size_t> dims) : dims_(std::move(dims)) {
    if (dims_.size() < 2) {
        throw InvalidProfile("a decomposition needs N >= 2 blocks, got " +
                             std::to_string(dims_.size()));
    }
    for (std::size_t nu = 0; nu < dims_.size(); ++nu) {
        if (dims_[nu] == 0) throw InvalidProfile("block " + std::to_string(nu) + " has dimension 0");
    }
    total_ = std::accumulate(dims_.begin(), dims_.end(), std::size_t{0});
}

std::size_t DimensionProfile::dim(std::size_t nu) const {
    if (nu >= dims_.size()) {
        throw BlockOutOfRange("block " + std::to_string(nu) + " of " + std::to_string(dims_.size()));
    }
    return dims_[nu];
}

IndexRange DimensionProfile::block(std::size_t nu) const {
    const std::size_t d = dim(nu);
    const std::size_t begin =
        std::accumulate(dims_.begin(), dims_.begin() + static_cast<std::ptrdiff_t>(nu), std::size_t{0});
    return {begin, begin + d};
}

UnitVector::UnitVector(ComplexVector amplitudes) : amplitudes_(std::move(amplitudes)) {
    const double n2 = squared_norm(amplitudes_);
    if (!(std::abs(n2 - 1.0) <= 1e-12)) {
        throw InvalidParams("state has squared norm " + std::to_string(n2));
    }
}

UnitVector UnitVector::normalized(ComplexVector x) {
    const double n = norm(x);
    if (!(n > 0.0) || !std::isfinite(n)) throw InvalidParams("cannot normalize a zero or non-finite vector");
    for (auto& z : x) z /= n;
    return UnitVector(std::move(x));
}

UnitVector UnitVector::basis(std::size_t dim, std::size_t index) {
    if (index >= dim) throw IndexOutOfRange("basis index " + std::to_string(index));
    ComplexVector x(dim);
    x[index] = 1.0;
    return UnitVector(std::move(x));
}

Decomposition::Decomposition(ComplexMatrix frame, DimensionProfile profile)
    : frame_(std::move(frame)), profile_(std::move(profile)) {
    const std::size_t d = profile_.total();
    if (frame_.rows() != d || frame_.cols() != d) {
        throw ShapeMismatch("frame is " + std::to_string(frame_.rows()) + "x" +
                            std::to_string(frame_.cols()) + " for total dimension " +
                            std::to_string(d));
    }
    const double defect = frobenius_norm(frame_.adjoint() * frame_ - ComplexMatrix::identity(d));
    if (!(defect <= 1e-10)) {
        throw InvalidParams("frame is not unitary: ||F*F - I||_F = " + std::to_string(defect));
    }
}

Decomposition Decomposition::standard(DimensionProfile profile) {
    const std::size_t d = profile.total();
    return Decomposition(ComplexMatrix::identity(d), std::move(profile));
}

ComplexMatrix Decomposition::projector(std::size_t nu) const {
    const IndexRange block = profile_.block(nu);
    const std::size_t d = dim();
    ComplexMatrix p(d, d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t k = 0; k < d; ++k) {
            cplx acc{};
            for (std::size_t j = block.begin; j < block.end; ++j)
                acc += frame_(i, j) * std::conj(frame_(k, j));
            p(i, k) = acc;
        }
    return p;
}

ComplexMatrix sample_haar_isometry(Rng& rng, std::size_t dim, std::size_t cols) {
    if (cols > dim) throw ShapeMismatch("isometry with more columns than rows");
    std::vector<cplx> g(dim * cols);
    for (auto& z : g) z = rng.complex_normal();
    return householder_qr(ComplexMatrix(dim, cols, std::move(g))).q;
}

ComplexMatrix sample_haar_unitary(Rng& rng, std::size_t dim) {
    return sample_haar_isometry(rng, dim, dim);
}

ComplexMatrix sample_haar_unitary(SeedSpec seed, std::size_t dim) {
    Rng rng(seed);
    return sample_haar_unitary(rng, dim);
}

UnitVector sample_unit_state(Rng& rng, std::size_t dim) {
    if (dim == 0) throw InvalidDims("state dimension must be >= 1");
    ComplexVector x(dim);
    for (auto& z : x) z = rng.complex_normal();
    return UnitVector::normalized(std::move(x));
}

UnitVector sample_unit_state(SeedSpec seed, std::size_t dim) {
    Rng rng(seed);
    return sample_unit_state(rng, dim);
}

Decomposition sample_decomposition(Rng& rng, const DimensionProfile& profile) {
    return Decomposition(sample_haar_unitary(rng, profile.total()), profile);
}

Decomposition sample_decomposition(SeedSpec seed, const DimensionProfile& profile) {
    Rng rng(seed);
    return sample_decomposition(rng, profile);
}

double weight(const Decomposition& dec, std::size_t nu, const UnitVector& psi) {
    const IndexRange block = dec.profile().block(nu);
    if (psi.size() != dec.dim()) throw ShapeMismatch("state length does not match decomposition");
    const ComplexMatrix& f = dec.frame();
    double w = 0.0;
    for (std::size_t j = block.begin; j < block.end; ++j) {
        cplx c{};
        for (std::size_t i = 0; i < f.rows(); ++i) c += std::conj(f(i, j)) * psi[i];
        w += std::norm(c);
    }
    return w;
}

ComplexMatrix projector_in_basis(const ComplexMatrix& frame, IndexRange block,
                                 const ComplexMatrix& basis) {
    if (block.end > frame.cols() || block.begin > block.end) {
        throw BlockOutOfRange("block outside frame");
    }
    if (frame.rows() != basis.rows()) throw ShapeMismatch("frame and basis dimensions differ");
    const std::size_t d = block.size();
    const std::size_t n = basis.cols();
    // w(j, a) = <b_j, phi_a>
    std::vector<cplx> w(d * n);
    for (std::size_t j = 0; j < d; ++j)
        for (std::size_t a = 0; a < n; ++a) {
            cplx acc{};
            for (std::size_t i = 0; i < frame.rows(); ++i)
                acc += std::conj(frame(i, block.begin + j)) * basis(i, a);
            w[j * n + a] = acc;
        }
    ComplexMatrix e(n, n);
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a; b < n; ++b) {
            cplx acc{};
            for (std::size_t j = 0; j < d; ++j) acc += std::conj(w[j * n + a]) * w[j * n + b];
            e(a, b) = acc;
            e(b, a) = std::conj(acc);
        }
    for (std::size_t a = 0; a < n; ++a) e(a, a) = e(a, a).real();
    return e;
}

ComplexMatrix projector_in_basis(const Decomposition& dec, std::size_t nu,
                                 const SpectralData& basis) {
    return projector_in_basis(dec.frame(), dec.profile().block(nu), basis.eigenvectors);
}

cplx matrix_element(const Decomposition& dec, std::size_t nu, const SpectralData& basis,
                    std::size_t alpha, std::size_t beta) {
    const std::size_t d = dec.dim();
    if (basis.eigenvectors.rows() != d) throw ShapeMismatch("basis dimension does not match");
    if (alpha >= basis.eigenvectors.cols() || beta >= basis.eigenvectors.cols()) {
        throw IndexOutOfRange("matrix element (" + std::to_string(alpha) + ", " +
                              std::to_string(beta) + ") in dimension " + std::to_string(d));
    }
    const IndexRange block = dec.profile().block(nu);
    const ComplexMatrix& f = dec.frame();
    const ComplexMatrix& phi = basis.eigenvectors;
    cplx acc{};
    for (std::size_t j = block.begin; j < block.end; ++j) {
        cplx left{}, right{};
        for (std::size_t i = 0; i < d; ++i) {
            left += std::conj(phi(i, alpha)) * f(i, j);
            right += std::conj(f(i, j)) * phi(i, beta);
        }
        acc += left * right;
    }
    return acc;
}

GnuTerms g_nu_terms(const ComplexMatrix& elements, std::size_t block_dim) {
    const std::size_t n = elements.rows();
    const double mean = static_cast<double>(block_dim) / static_cast<double>(n);
    GnuTerms t;
    for (std::size_t a = 0; a < n; ++a) {
        const double dev = elements(a, a).real() - mean;
        t.diag = std::max(t.diag, dev * dev);
        for (std::size_t b = a + 1; b < n; ++b) t.offdiag = std::max(t.offdiag, std::norm(elements(a, b)));
    }
    return t;
}

GnuTerms g_nu_terms(const Decomposition& dec, std::size_t nu, const SpectralData& basis) {
    return g_nu_terms(projector_in_basis(dec, nu, basis), dec.profile().dim(nu));
}

double g_nu(const Decomposition& dec, std::size_t nu, const SpectralData& basis) {
    return g_nu_terms(dec, nu, basis).total();
}

double seminorm_infinity(const ComplexMatrix& rho, const Decomposition& dec) {
    const std::size_t d = dec.dim();
    if (rho.rows() != d || rho.cols() != d) throw ShapeMismatch("operator does not match decomposition");
    const ComplexMatrix& f = dec.frame();
    double sup = 0.0;
    for (std::size_t nu = 0; nu < dec.profile().blocks(); ++nu) {
        const IndexRange block = dec.profile().block(nu);
        // Tr(rho P) = sum_j <b_j, rho b_j>
        cplx trace{};
        for (std::size_t j = block.begin; j < block.end; ++j) {
            for (std::size_t i = 0; i < d; ++i) {
                cplx row{};
                for (std::size_t k = 0; k < d; ++k) row += rho(i, k) * f(k, j);
                trace += std::conj(f(i, j)) * row;
            }
        }
        sup = std::max(sup, std::abs(trace));
    }
    return sup;
}

}  // namespace qet
