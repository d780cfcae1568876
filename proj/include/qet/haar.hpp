#pragma once

#include <cstddef>
#include <vector>

#include "qet/linalg.hpp"
#include "qet/rng.hpp"

namespace qet {

/// Block dimensions (d_1, ..., d_N) of an orthogonal decomposition.
class DimensionProfile {
public:
    /// Throws InvalidProfile unless N >= 2 and every d >= 1.
    explicit DimensionProfile(std::vector<std::size_t> dims);

    const std::vector<std::size_t>& dims() const noexcept { return dims_; }
    std::size_t blocks() const noexcept { return dims_.size(); }
    std::size_t total() const noexcept { return total_; }
    /// Throws BlockOutOfRange.
    std::size_t dim(std::size_t nu) const;
    /// Columns of the frame spanned by block nu. Throws BlockOutOfRange.
    IndexRange block(std::size_t nu) const;

    friend bool operator==(const DimensionProfile&, const DimensionProfile&) = default;

private:
    std::vector<std::size_t> dims_;
    std::size_t total_ = 0;
};

/// A pure state: unit-norm amplitude vector.
class UnitVector {
public:
    /// Throws InvalidParams when | ||x||^2 - 1 | > 1e-12.
    explicit UnitVector(ComplexVector amplitudes);
    /// Rescales x to unit norm. Throws InvalidParams on the zero vector.
    static UnitVector normalized(ComplexVector x);
    static UnitVector basis(std::size_t dim, std::size_t index);

    const ComplexVector& amplitudes() const noexcept { return amplitudes_; }
    std::size_t size() const noexcept { return amplitudes_.size(); }
    cplx operator[](std::size_t i) const noexcept { return amplitudes_[i]; }

private:
    ComplexVector amplitudes_;
};

/// A point of U(D)/(U(d_1) x ... x U(d_N)), stored as a full unitary frame
/// whose contiguous column blocks span the subspaces.
class Decomposition {
public:
    /// Throws ShapeMismatch when the frame is not D x D and InvalidParams when
    /// ||F*F - I||_F > 1e-10.
    Decomposition(ComplexMatrix frame, DimensionProfile profile);
    /// The decomposition spanned by consecutive standard basis vectors.
    static Decomposition standard(DimensionProfile profile);

    const ComplexMatrix& frame() const noexcept { return frame_; }
    const DimensionProfile& profile() const noexcept { return profile_; }
    std::size_t dim() const noexcept { return profile_.total(); }
    /// Dense P_nu. Throws BlockOutOfRange.
    ComplexMatrix projector(std::size_t nu) const;

private:
    ComplexMatrix frame_;
    DimensionProfile profile_;
};

/// Haar-distributed unitary: complex Ginibre matrix, Householder QR, with
/// diag(R) made real positive.
ComplexMatrix sample_haar_unitary(Rng& rng, std::size_t dim);
ComplexMatrix sample_haar_unitary(SeedSpec seed, std::size_t dim);

/// The first `cols` columns of a Haar unitary (thin QR of a dim x cols
/// Ginibre matrix).
ComplexMatrix sample_haar_isometry(Rng& rng, std::size_t dim, std::size_t cols);

/// Uniform point of the unit sphere in C^dim.
UnitVector sample_unit_state(Rng& rng, std::size_t dim);
UnitVector sample_unit_state(SeedSpec seed, std::size_t dim);

Decomposition sample_decomposition(Rng& rng, const DimensionProfile& profile);
Decomposition sample_decomposition(SeedSpec seed, const DimensionProfile& profile);

/// |P_nu psi|^2. Throws BlockOutOfRange.
double weight(const Decomposition& dec, std::size_t nu, const UnitVector& psi);

/// Matrix of P_nu in the orthonormal basis given by the columns of `basis`:
/// entry (a, b) = <basis_a, P basis_b>, where P projects onto the span of the
/// `block` columns of `frame`.
ComplexMatrix projector_in_basis(const ComplexMatrix& frame, IndexRange block,
                                 const ComplexMatrix& basis);
ComplexMatrix projector_in_basis(const Decomposition& dec, std::size_t nu,
                                 const SpectralData& basis);

/// <phi_alpha, P_nu phi_beta>. Throws IndexOutOfRange / BlockOutOfRange.
cplx matrix_element(const Decomposition& dec, std::size_t nu, const SpectralData& basis,
                    std::size_t alpha, std::size_t beta);

/// The two maxima making up g_nu.
struct GnuTerms {
    double offdiag = 0.0;  ///< max_{a != b} |e_ab|^2
    double diag = 0.0;     ///< max_a (e_aa - d/D)^2
    double total() const noexcept { return offdiag + diag; }
};

/// Evaluates both maxima from the full matrix e_ab of a block of dimension d.
GnuTerms g_nu_terms(const ComplexMatrix& elements, std::size_t block_dim);
GnuTerms g_nu_terms(const Decomposition& dec, std::size_t nu, const SpectralData& basis);
double g_nu(const Decomposition& dec, std::size_t nu, const SpectralData& basis);

/// sup_nu |Tr(rho P_nu)|. Throws ShapeMismatch.
double seminorm_infinity(const ComplexMatrix& rho, const Decomposition& dec);

}  // namespace qet
