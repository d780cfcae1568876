#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace qet {

using cplx = std::complex<double>;
using ComplexVector = std::vector<cplx>;

/// Absolute floor applied to every relative tolerance in the library.
inline constexpr double kAbsoluteFloor = 1e-14;

/// max(rel * scale, kAbsoluteFloor)
double scaled_tolerance(double rel, double scale);

/// Dense complex matrix, row-major.
class ComplexMatrix {
public:
    ComplexMatrix() = default;
    ComplexMatrix(std::size_t rows, std::size_t cols);
    /// Takes ownership of row-major entries; throws ShapeMismatch or
    /// NonFiniteInput when the invariants do not hold.
    ComplexMatrix(std::size_t rows, std::size_t cols, std::vector<cplx> entries);

    static ComplexMatrix identity(std::size_t n);
    static ComplexMatrix diagonal(std::span<const double> values);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool is_square() const noexcept { return rows_ == cols_; }

    cplx& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
    const cplx& operator()(std::size_t i, std::size_t j) const noexcept {
        return data_[i * cols_ + j];
    }

    std::span<const cplx> data() const noexcept { return data_; }
    std::span<const cplx> row(std::size_t i) const noexcept {
        return {data_.data() + i * cols_, cols_};
    }

    ComplexVector column(std::size_t j) const;
    ComplexMatrix adjoint() const;
    bool all_finite() const noexcept;

    ComplexMatrix& operator+=(const ComplexMatrix& other);
    ComplexMatrix& operator-=(const ComplexMatrix& other);
    ComplexMatrix& operator*=(cplx s) noexcept;

    friend bool operator==(const ComplexMatrix&, const ComplexMatrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<cplx> data_;
};

ComplexMatrix operator+(ComplexMatrix a, const ComplexMatrix& b);
ComplexMatrix operator-(ComplexMatrix a, const ComplexMatrix& b);
ComplexMatrix operator*(ComplexMatrix a, cplx s);
ComplexMatrix operator*(const ComplexMatrix& a, const ComplexMatrix& b);
ComplexVector operator*(const ComplexMatrix& a, std::span<const cplx> x);

double frobenius_norm(const ComplexMatrix& m) noexcept;

/// <a, b> = sum conj(a_i) b_i
cplx inner(std::span<const cplx> a, std::span<const cplx> b);
double norm(std::span<const cplx> x) noexcept;
double squared_norm(std::span<const cplx> x) noexcept;

/// Eigenvalues ascending; eigenvector columns orthonormal and ordered to match.
struct SpectralData {
    std::vector<double> eigenvalues;
    ComplexMatrix eigenvectors;

    std::size_t dim() const noexcept { return eigenvalues.size(); }
    /// Reassembles Phi diag(E) Phi*.
    ComplexMatrix reconstruct() const;
};

/// Householder reduction to real symmetric tridiagonal form followed by
/// implicit-shift QL. Degenerate eigenvalues keep their QL order (stable sort);
/// the basis inside a degenerate eigenspace is not specified.
///
/// Throws NotHermitian when ||M - M*||_F exceeds 1e-10 ||M||_F, and
/// ConvergenceFailure when a QL sweep exceeds its iteration cap.
SpectralData hermitian_eigendecomposition(const ComplexMatrix& m);

struct QrResult {
    ComplexMatrix q;  ///< rows x cols, orthonormal columns
    ComplexMatrix r;  ///< cols x cols, upper triangular, real non-negative diagonal
};

/// Householder QR of an m x n matrix with m >= n. The phases of R's diagonal
/// are moved into Q so that diag(R) is real and non-negative; for square input
/// Q is unitary. Throws NonFiniteInput / ShapeMismatch.
QrResult householder_qr(const ComplexMatrix& m);

/// Half-open column range [begin, end).
struct IndexRange {
    std::size_t begin = 0;
    std::size_t end = 0;

    std::size_t size() const noexcept { return end - begin; }
    bool contains(std::size_t i) const noexcept { return i >= begin && i < end; }
};

/// sum_{j in block} <b_j, psi> b_j for the columns b_j of an orthonormal frame.
ComplexVector apply_projector(const ComplexMatrix& frame, IndexRange block,
                              std::span<const cplx> psi);

}  // namespace qet
