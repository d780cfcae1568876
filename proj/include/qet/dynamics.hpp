#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "qet/haar.hpp"
#include "qet/linalg.hpp"
#include "qet/rng.hpp"

namespace qet {

/// Relative tolerance (times E_max - E_min) under which two eigenvalues or
/// two eigenvalue gaps are treated as equal.
inline constexpr double kDefaultNrTolerance = 1e-9;

struct NrFlags {
    bool nondegenerate = false;
    bool nonresonant = false;
    double tolerance = kDefaultNrTolerance;
};

struct NrCheck {
    bool nondegenerate = false;
    bool nonresonant = false;
    /// 0-based. Two indices (a, b) with E_a ~ E_b for a degeneracy, four
    /// (a, b, a', b') with E_a - E_b ~ E_a' - E_b' for a resonance; empty when
    /// both hypotheses hold.
    std::vector<std::size_t> witness;
};

/// Non-degeneracy and non-resonance of an ascending spectrum. A resonance is a
/// repeated value in the multiset of positive gaps; a degenerate spectrum is
/// never non-resonant.
NrCheck check_nr(std::span<const double> eigenvalues, double tol);
NrCheck check_nr(const SpectralData& spectral, double tol);

/// Hermitian operator carried with its spectral data and NR flags.
class Hamiltonian {
public:
    explicit Hamiltonian(ComplexMatrix matrix, double nr_tolerance = kDefaultNrTolerance);

    const ComplexMatrix& matrix() const noexcept { return matrix_; }
    const SpectralData& spectral() const noexcept { return spectral_; }
    const NrFlags& nr_flags() const noexcept { return flags_; }
    std::size_t dim() const noexcept { return spectral_.dim(); }
    double spectral_range() const noexcept;

private:
    ComplexMatrix matrix_;
    SpectralData spectral_;
    NrFlags flags_;
};

/// GUE draw H = (G + G*)/2 with G complex Ginibre; check_nr runs on construction.
Hamiltonian sample_gue(Rng& rng, std::size_t dim, double nr_tolerance = kDefaultNrTolerance);
Hamiltonian sample_gue(SeedSpec seed, std::size_t dim, double nr_tolerance = kDefaultNrTolerance);

/// Energy-basis amplitudes c_a = <phi_a, psi>.
ComplexVector eigen_coefficients(const Hamiltonian& h, const UnitVector& psi);

/// psi_t = sum_a c_a exp(-i t E_a) phi_a
UnitVector evolve(const Hamiltonian& h, const UnitVector& psi0, double t);

struct FourierTerm {
    double frequency = 0.0;
    cplx coefficient;
};

/// (|P_nu psi_t|^2 - d_nu/D)^2 = sum_w L_w exp(i u_w t), with frequencies
/// closer than the Hamiltonian's NR tolerance merged into one term.
struct FourierExpansion {
    std::vector<FourierTerm> terms;
    double min_nonzero_freq = 0.0;  ///< 0 when every term has zero frequency
    std::size_t raw_terms = 0;      ///< products before merging

    /// Coefficient of the zero-frequency term: the T -> infinity average.
    double zero_frequency_coefficient() const noexcept;
    /// Number of terms with non-zero frequency (M).
    std::size_t nonzero_terms() const noexcept;
};

struct TimeAverageOptions {
    /// Largest admissible number of raw products in the expansion, ~D^4.
    std::size_t max_terms = std::size_t{1} << 22;
    /// Past the cap, integrate numerically instead of throwing ExpansionTooLarge.
    bool quadrature_fallback = false;
};

/// Finite-horizon average of (|P_nu psi_t|^2 - d_nu/D)^2 with its limit.
struct TimeAverageReport {
    std::size_t nu = 0;
    double horizon = 0.0;
    double finite_time_value = 0.0;
    std::optional<double> exact_limit;  ///< set when the spectrum is non-resonant
    double error_bound = 0.0;        ///< (1/T) 4 M / min |u_w|
    bool exact = true;                  ///< false when computed by quadrature
    double quadrature_error = 0.0;
};

FourierExpansion time_average_expansion(const Hamiltonian& h, const UnitVector& psi0,
                                        const Decomposition& dec, std::size_t nu,
                                        const TimeAverageOptions& opts = {});

/// Exact value: every exponential of the expansion is integrated in closed
/// form. Throws InvalidParams when T <= 0 and ExpansionTooLarge past the cap.
TimeAverageReport finite_time_average(const Hamiltonian& h, const UnitVector& psi0,
                                      const Decomposition& dec, std::size_t nu, double horizon,
                                      const TimeAverageOptions& opts = {});

/// Non-resonant limit from energy populations p_a = |c_a|^2 and the block
/// projector matrix e_ab:
///   sum_{a != b} p_a p_b |e_ab|^2 + (sum_a p_a e_aa - d/D)^2
double exact_limit_from_elements(std::span<const double> populations, const ComplexMatrix& elements,
                                 std::size_t block_dim);

/// Throws ResonantSpectrum unless the Hamiltonian's NR check passed.
double exact_limit_f(const Hamiltonian& h, const UnitVector& psi0, const Decomposition& dec,
                     std::size_t nu);

/// The T -> infinity average for any spectrum: the closed form when
/// non-resonant, the zero-frequency coefficient of the expansion otherwise.
double time_average_limit(const Hamiltonian& h, const UnitVector& psi0, const Decomposition& dec,
                          std::size_t nu);

/// Lower bound max(0, 1 - rho/gamma) on the long-run fraction of time a
/// non-negative function with mean below rho stays below gamma.
/// Throws InvalidParams when gamma <= 0 or rho < 0.
double time_fraction_bound(double rho, double gamma);

struct ExperimentParams {
    double epsilon = 1.0;
    double delta = 0.5;
    double delta_prime = 0.5;
    std::size_t n_dec = 1000;
    std::size_t n_states = 1;  ///< worst-case search size, uniform experiment only
    bool override_hypotheses = false;
};

struct T1Report {
    double dimension_threshold = 0.0;  ///< D - eps^2 delta delta' D (D+1) / N^3
    bool hypothesis_met = false;
    std::size_t n_dec = 0;
    std::size_t achieving = 0;   ///< decompositions with time fraction >= 1 - delta'
    double fraction = 0.0;
    double std_error = 0.0;      ///< binomial at p = 1 - delta
    bool meets_contract = false; ///< fraction >= 1 - delta - 4 std_error
    std::vector<double> mean_limit;  ///< per block, mean of f_nu over decompositions
    std::vector<double> mean_limit_std_error;
    double min_time_fraction = 1.0;
};

/// Fixed initial state, Haar-random decompositions. Time fractions come from
/// the exact limits through time_fraction_bound with
/// gamma_nu = eps^2 d_nu / (N D) and a union bound over blocks.
/// Throws HypothesisViolated when the dimension hypothesis fails without override.
T1Report theorem_t1_experiment(SeedSpec seed, const DimensionProfile& profile, const Hamiltonian& h,
                               const UnitVector& psi0, const ExperimentParams& params);

struct MainReport {
    double window_lower = 0.0;  ///< max(C1, 10 N^3 / (eps delta delta')) log D
    double window_upper = 0.0;  ///< D / C1
    bool window_met = false;
    double k_constant = 0.0;    ///< 10 log D / D
    bool delta_condition_met = false;  ///< 1 > delta >= K D N^3 / (eps^2 delta' d_nu) for all nu
    std::size_t n_dec = 0;
    std::size_t n_states = 0;
    std::size_t majorant_violations = 0;  ///< sampled f_nu exceeding g_nu + 1e-12
    double max_majorant_excess = 0.0;     ///< max of f_nu - g_nu over all samples
    std::size_t achieving = 0;
    double fraction = 0.0;           ///< worst sampled state meets 1 - delta'
    double uniform_fraction = 0.0;   ///< the g_nu majorant alone meets 1 - delta'
    double std_error = 0.0;
    bool meets_contract = false;
    std::vector<double> g_integral;  ///< per block MC mean of g_nu
    std::vector<double> g_integral_std_error;
    double g_integral_bound = 0.0;      ///< 10 log D / D
};

/// Uniform-in-state experiment for a non-resonant Hamiltonian. For each
/// decomposition, n_states Haar states are checked against f_nu <= g_nu and the
/// worst one decides the time fraction.
/// Throws ResonantSpectrum, or HypothesisViolated outside the dimension window
/// without override.
MainReport theorem_main_experiment(SeedSpec seed, const DimensionProfile& profile,
                                   const Hamiltonian& h, const ExperimentParams& params,
                                   double c1);

}  // namespace qet
