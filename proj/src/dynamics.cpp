#include "qet/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "qet/errors.hpp"
#include "qet/parallel.hpp"
#include "qet/quadrature.hpp"
#include "qet/stats.hpp"

namespace qet {

namespace {

// Amplitudes below this are treated as exactly zero, so a stationary state
// produces no oscillating terms at all.
constexpr double kAmplitudeFloor = 1e-14;

// Decompositions per work chunk in the experiment drivers.
constexpr std::size_t kExperimentChunk = 16;

double range_of(std::span<const double> e) {
    return e.empty() ? 0.0 : e.back() - e.front();
}

struct Gap {
    double value;
    std::size_t alpha, beta;
};

}  // namespace

NrCheck check_nr(std::span<const double> eigenvalues, double tol) {
    NrCheck out;
    const std::size_t n = eigenvalues.size();
    const double thr = scaled_tolerance(tol, range_of(eigenvalues));
    for (std::size_t i = 0; i + 1 < n; ++i) {
        if (!(eigenvalues[i + 1] - eigenvalues[i] > thr)) {
            out.witness = {i, i + 1};
            return out;
        }
    }
    out.nondegenerate = true;

    std::vector<Gap> gaps;
    gaps.reserve(n * (n - 1) / 2);
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < a; ++b) gaps.push_back({eigenvalues[a] - eigenvalues[b], a, b});
    std::stable_sort(gaps.begin(), gaps.end(),
                     [](const Gap& x, const Gap& y) { return x.value < y.value; });
    for (std::size_t k = 0; k + 1 < gaps.size(); ++k) {
        if (gaps[k + 1].value - gaps[k].value <= thr) {
            out.witness = {gaps[k].alpha, gaps[k].beta, gaps[k + 1].alpha, gaps[k + 1].beta};
            return out;
        }
    }
    out.nonresonant = true;
    return out;
}

NrCheck check_nr(const SpectralData& spectral, double tol) {
    return check_nr(std::span<const double>(spectral.eigenvalues), tol);
}

Hamiltonian::Hamiltonian(ComplexMatrix matrix, double nr_tolerance)
    : matrix_(std::move(matrix)), spectral_(hermitian_eigendecomposition(matrix_)) {
    if (!(nr_tolerance >= 0.0)) throw InvalidParams("NR tolerance must be non-negative");
    const NrCheck c = check_nr(spectral_, nr_tolerance);
    flags_ = {c.nondegenerate, c.nonresonant, nr_tolerance};
}

double Hamiltonian::spectral_range() const noexcept {
    return range_of(spectral_.eigenvalues);
}

Hamiltonian sample_gue(Rng& rng, std::size_t dim, double nr_tolerance) {
    if (dim < 2) throw InvalidDims("GUE needs D >= 2");
    std::vector<cplx> g(dim * dim);
    for (auto& z : g) z = rng.complex_normal();
    ComplexMatrix h(dim, dim);
    for (std::size_t i = 0; i < dim; ++i) {
        h(i, i) = g[i * dim + i].real();
        for (std::size_t j = i + 1; j < dim; ++j) {
            const cplx v = 0.5 * (g[i * dim + j] + std::conj(g[j * dim + i]));
            h(i, j) = v;
            h(j, i) = std::conj(v);
        }
    }
    return Hamiltonian(std::move(h), nr_tolerance);
}

Hamiltonian sample_gue(SeedSpec seed, std::size_t dim, double nr_tolerance) {
    Rng rng(seed);
    return sample_gue(rng, dim, nr_tolerance);
}

ComplexVector eigen_coefficients(const Hamiltonian& h, const UnitVector& psi) {
    const ComplexMatrix& phi = h.spectral().eigenvectors;
    if (psi.size() != phi.rows()) throw ShapeMismatch("state length does not match Hamiltonian");
    ComplexVector c(phi.cols());
    for (std::size_t a = 0; a < phi.cols(); ++a) {
        cplx acc{};
        for (std::size_t i = 0; i < phi.rows(); ++i) acc += std::conj(phi(i, a)) * psi[i];
        c[a] = acc;
    }
    return c;
}

UnitVector evolve(const Hamiltonian& h, const UnitVector& psi0, double t) {
    if (!std::isfinite(t)) throw NonFiniteInput("evolution time");
    if (t == 0.0) return psi0;
    const ComplexVector c = eigen_coefficients(h, psi0);
    const ComplexMatrix& phi = h.spectral().eigenvectors;
    const auto& e = h.spectral().eigenvalues;
    ComplexVector out(phi.rows());
    for (std::size_t a = 0; a < c.size(); ++a) {
        const cplx ca = c[a] * std::polar(1.0, -t * e[a]);
        for (std::size_t i = 0; i < phi.rows(); ++i) out[i] += ca * phi(i, a);
    }
    // renormalize away the rounding of the basis change
    return UnitVector::normalized(std::move(out));
}

double FourierExpansion::zero_frequency_coefficient() const noexcept {
    double sum = 0.0;
    for (const auto& t : terms)
        if (t.frequency == 0.0) sum += t.coefficient.real();
    return sum;
}

std::size_t FourierExpansion::nonzero_terms() const noexcept {
    return static_cast<std::size_t>(
        std::count_if(terms.begin(), terms.end(), [](const FourierTerm& t) { return t.frequency != 0.0; }));
}

namespace {

struct Linear {
    // |P psi_t|^2 - d/D = sum_k coeff_k exp(i freq_k t)
    std::vector<FourierTerm> terms;
};

Linear linear_expansion(const ComplexVector& c, const std::vector<double>& energies,
                        const ComplexMatrix& elements, std::size_t block_dim) {
    const std::size_t n = c.size();
    std::vector<std::size_t> live;
    for (std::size_t a = 0; a < n; ++a)
        if (std::abs(c[a]) >= kAmplitudeFloor) live.push_back(a);
    double a0 = -static_cast<double>(block_dim) / static_cast<double>(n);
    for (std::size_t a : live) a0 += std::norm(c[a]) * elements(a, a).real();
    Linear lin;
    lin.terms.reserve(1 + live.size() * live.size());
    lin.terms.push_back({0.0, a0});
    for (std::size_t a : live)
        for (std::size_t b : live) {
            if (a == b) continue;
            lin.terms.push_back({energies[a] - energies[b], std::conj(c[a]) * c[b] * elements(a, b)});
        }
    return lin;
}

double linear_value(const Linear& lin, double t) {
    cplx acc{};
    for (const auto& term : lin.terms) acc += term.coefficient * std::polar(1.0, term.frequency * t);
    return acc.real();
}

FourierExpansion square_and_merge(const Linear& lin, double merge_tol) {
    FourierExpansion out;
    const std::size_t n = lin.terms.size();
    out.raw_terms = n * n;
    std::vector<FourierTerm> raw;
    raw.reserve(out.raw_terms);
    for (const auto& x : lin.terms)
        for (const auto& y : lin.terms)
            raw.push_back({x.frequency + y.frequency, x.coefficient * y.coefficient});
    std::stable_sort(raw.begin(), raw.end(), [](const FourierTerm& x, const FourierTerm& y) {
        return x.frequency < y.frequency;
    });
    for (std::size_t i = 0; i < raw.size();) {
        const double start = raw[i].frequency;
        FourierTerm merged{start, 0.0};
        std::size_t j = i;
        bool has_zero = false;
        for (; j < raw.size() && raw[j].frequency - start <= merge_tol; ++j) {
            merged.coefficient += raw[j].coefficient;
            if (std::abs(raw[j].frequency) <= merge_tol) has_zero = true;
        }
        if (has_zero) {
            merged.frequency = 0.0;
            merged.coefficient = merged.coefficient.real();
        }
        out.terms.push_back(merged);
        i = j;
    }
    double min_freq = 0.0;
    for (const auto& t : out.terms) {
        if (t.frequency == 0.0) continue;
        const double u = std::abs(t.frequency);
        if (min_freq == 0.0 || u < min_freq) min_freq = u;
    }
    out.min_nonzero_freq = min_freq;
    return out;
}

ComplexMatrix block_elements(const Hamiltonian& h, const Decomposition& dec, std::size_t nu) {
    if (dec.dim() != h.dim()) throw ShapeMismatch("decomposition and Hamiltonian dimensions differ");
    return projector_in_basis(dec, nu, h.spectral());
}

}  // namespace

FourierExpansion time_average_expansion(const Hamiltonian& h, const UnitVector& psi0,
                                        const Decomposition& dec, std::size_t nu,
                                        const TimeAverageOptions& opts) {
    const ComplexMatrix e = block_elements(h, dec, nu);
    const Linear lin = linear_expansion(eigen_coefficients(h, psi0), h.spectral().eigenvalues, e,
                                        dec.profile().dim(nu));
    const std::size_t raw = lin.terms.size() * lin.terms.size();
    if (raw > opts.max_terms) {
        throw ExpansionTooLarge(std::to_string(raw) + " products exceed the cap of " +
                                std::to_string(opts.max_terms));
    }
    return square_and_merge(lin, scaled_tolerance(h.nr_flags().tolerance, h.spectral_range()));
}

TimeAverageReport finite_time_average(const Hamiltonian& h, const UnitVector& psi0,
                                      const Decomposition& dec, std::size_t nu, double horizon,
                                      const TimeAverageOptions& opts) {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) {
        throw InvalidParams("time horizon must be positive and finite");
    }
    TimeAverageReport rep;
    rep.nu = nu;
    rep.horizon = horizon;

    const ComplexMatrix e = block_elements(h, dec, nu);
    const ComplexVector c = eigen_coefficients(h, psi0);
    const std::size_t d = dec.profile().dim(nu);
    const Linear lin = linear_expansion(c, h.spectral().eigenvalues, e, d);
    const std::size_t raw = lin.terms.size() * lin.terms.size();
    if (h.nr_flags().nonresonant) {
        std::vector<double> p(c.size());
        for (std::size_t a = 0; a < c.size(); ++a) p[a] = std::norm(c[a]);
        rep.exact_limit = exact_limit_from_elements(p, e, d);
    }

    if (raw > opts.max_terms) {
        if (!opts.quadrature_fallback) {
            throw ExpansionTooLarge(std::to_string(raw) + " products exceed the cap of " +
                                    std::to_string(opts.max_terms));
        }
        // one panel per ~period of the fastest oscillation, capped
        const double fastest = 2.0 * h.spectral_range();
        const std::size_t panels = std::clamp<std::size_t>(
            static_cast<std::size_t>(std::ceil(fastest * horizon / (2.0 * std::numbers::pi))), 1, 20000);
        std::vector<double> bp(panels + 1);
        for (std::size_t k = 0; k <= panels; ++k)
            bp[k] = horizon * static_cast<double>(k) / static_cast<double>(panels);
        QuadratureOptions qo;
        qo.abs_tol = 1e-13 * horizon;
        qo.rel_tol = 1e-10;
        qo.max_intervals = std::max<std::size_t>(4000, 4 * panels);
        const auto r = integrate([&](double t) {
            const double x = linear_value(lin, t);
            return x * x;
        }, bp, qo);
        rep.finite_time_value = r.value / horizon;
        rep.quadrature_error = r.error / horizon;
        rep.exact = false;
        rep.error_bound = std::numeric_limits<double>::quiet_NaN();
        return rep;
    }

    const FourierExpansion fx =
        square_and_merge(lin, scaled_tolerance(h.nr_flags().tolerance, h.spectral_range()));
    cplx acc{};
    for (const auto& term : fx.terms) {
        if (term.frequency == 0.0) {
            acc += term.coefficient;
            continue;
        }
        // (1/T) int_0^T exp(i u t) dt = exp(i u T / 2) sin(u T / 2) / (u T / 2)
        const double half = 0.5 * term.frequency * horizon;
        acc += term.coefficient * std::polar(std::sin(half) / half, half);
    }
    rep.finite_time_value = acc.real();
    const std::size_t m = fx.nonzero_terms();
    rep.error_bound = m == 0 ? 0.0 : 4.0 * static_cast<double>(m) / (horizon * fx.min_nonzero_freq);
    return rep;
}

double exact_limit_from_elements(std::span<const double> populations, const ComplexMatrix& elements,
                                 std::size_t block_dim) {
    const std::size_t n = populations.size();
    if (elements.rows() != n || elements.cols() != n) throw ShapeMismatch("populations and elements differ");
    double off = 0.0;
    double diag = 0.0;
    for (std::size_t a = 0; a < n; ++a) {
        diag += populations[a] * elements(a, a).real();
        double row = 0.0;
        for (std::size_t b = 0; b < n; ++b)
            if (b != a) row += populations[b] * std::norm(elements(a, b));
        off += populations[a] * row;
    }
    const double dev = diag - static_cast<double>(block_dim) / static_cast<double>(n);
    return off + dev * dev;
}

double exact_limit_f(const Hamiltonian& h, const UnitVector& psi0, const Decomposition& dec,
                     std::size_t nu) {
    if (!h.nr_flags().nonresonant) {
        const NrCheck c = check_nr(h.spectral(), h.nr_flags().tolerance);
        std::string w;
        for (std::size_t i : c.witness) w += (w.empty() ? "" : ",") + std::to_string(i);
        throw ResonantSpectrum("closed-form limit needs a non-resonant spectrum; witness (" + w + ")");
    }
    const ComplexMatrix e = block_elements(h, dec, nu);
    const ComplexVector c = eigen_coefficients(h, psi0);
    std::vector<double> p(c.size());
    for (std::size_t a = 0; a < c.size(); ++a) p[a] = std::norm(c[a]);
    return exact_limit_from_elements(p, e, dec.profile().dim(nu));
}

double time_average_limit(const Hamiltonian& h, const UnitVector& psi0, const Decomposition& dec,
                          std::size_t nu) {
    if (h.nr_flags().nonresonant) return exact_limit_f(h, psi0, dec, nu);
    TimeAverageOptions opts;
    opts.max_terms = std::numeric_limits<std::size_t>::max();
    return time_average_expansion(h, psi0, dec, nu, opts).zero_frequency_coefficient();
}

double time_fraction_bound(double rho, double gamma) {
    if (!(gamma > 0.0)) throw InvalidParams("gamma must be positive");
    if (!(rho >= 0.0)) throw InvalidParams("rho must be non-negative");
    return std::max(0.0, 1.0 - rho / gamma);
}

namespace {

void check_params(const ExperimentParams& p, const DimensionProfile& profile, std::size_t dim) {
    if (!(p.epsilon > 0.0)) throw InvalidParams("epsilon must be positive");
    if (!(p.delta > 0.0 && p.delta <= 1.0)) throw InvalidParams("delta must lie in (0, 1]");
    if (!(p.delta_prime > 0.0 && p.delta_prime <= 1.0)) throw InvalidParams("delta_prime must lie in (0, 1]");
    if (p.n_dec == 0) throw InvalidParams("n_dec must be positive");
    if (profile.total() != dim) throw ShapeMismatch("profile and Hamiltonian dimensions differ");
}

std::vector<double> gammas(const DimensionProfile& profile, double eps) {
    const double n = static_cast<double>(profile.blocks());
    const double dd = static_cast<double>(profile.total());
    std::vector<double> g;
    for (std::size_t d : profile.dims()) g.push_back(eps * eps * static_cast<double>(d) / (n * dd));
    return g;
}

// Union bound over blocks of the per-block Markov estimate.
double union_time_fraction(std::span<const double> f, std::span<const double> gamma) {
    double miss = 0.0;
    for (std::size_t k = 0; k < f.size(); ++k) miss += f[k] / gamma[k];
    return std::max(0.0, 1.0 - miss);
}

}  // namespace

T1Report theorem_t1_experiment(SeedSpec seed, const DimensionProfile& profile, const Hamiltonian& h,
                               const UnitVector& psi0, const ExperimentParams& params) {
    check_params(params, profile, h.dim());
    if (psi0.size() != h.dim()) throw ShapeMismatch("state length does not match Hamiltonian");
    const double n3 = std::pow(static_cast<double>(profile.blocks()), 3);
    const double dd = static_cast<double>(profile.total());
    T1Report rep;
    rep.dimension_threshold = dd - params.epsilon * params.epsilon * params.delta * params.delta_prime *
                                       dd * (dd + 1.0) / n3;
    rep.hypothesis_met = std::all_of(profile.dims().begin(), profile.dims().end(), [&](std::size_t d) {
        return static_cast<double>(d) > rep.dimension_threshold;
    });
    if (!rep.hypothesis_met && !params.override_hypotheses) {
        throw HypothesisViolated("some d_nu <= " + std::to_string(rep.dimension_threshold));
    }

    const std::size_t nb = profile.blocks();
    const std::vector<double> gamma = gammas(profile, params.epsilon);
    const ComplexVector c = eigen_coefficients(h, psi0);
    std::vector<double> pops(c.size());
    for (std::size_t a = 0; a < c.size(); ++a) pops[a] = std::norm(c[a]);
    const bool closed_form = h.nr_flags().nonresonant;

    struct Chunk {
        std::size_t achieving = 0;
        double min_fraction = 1.0;
        std::vector<RunningMoments> limits;
    };
    auto chunks = map_chunks(params.n_dec, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
        Chunk out;
        out.limits.resize(nb);
        Rng rng(seed.substream(chunk));
        std::vector<double> f(nb);
        for (std::size_t i = begin; i < end; ++i) {
            const Decomposition dec = sample_decomposition(rng, profile);
            for (std::size_t nu = 0; nu < nb; ++nu) {
                f[nu] = closed_form
                            ? exact_limit_from_elements(pops, projector_in_basis(dec, nu, h.spectral()),
                                                        profile.dim(nu))
                            : time_average_limit(h, psi0, dec, nu);
                out.limits[nu].add(f[nu]);
            }
            const double tf = union_time_fraction(f, gamma);
            out.min_fraction = std::min(out.min_fraction, tf);
            if (tf >= 1.0 - params.delta_prime) ++out.achieving;
        }
        return out;
    }, kExperimentChunk);

    std::vector<RunningMoments> limits(nb);
    for (const auto& ch : chunks) {
        rep.achieving += ch.achieving;
        rep.min_time_fraction = std::min(rep.min_time_fraction, ch.min_fraction);
        for (std::size_t nu = 0; nu < nb; ++nu) limits[nu].merge(ch.limits[nu]);
    }
    rep.n_dec = params.n_dec;
    rep.fraction = static_cast<double>(rep.achieving) / static_cast<double>(rep.n_dec);
    rep.std_error = binomial_std_error(1.0 - params.delta, rep.n_dec);
    rep.meets_contract = rep.fraction >= 1.0 - params.delta - 4.0 * rep.std_error;
    for (const auto& m : limits) {
        rep.mean_limit.push_back(m.mean);
        rep.mean_limit_std_error.push_back(m.std_error());
    }
    return rep;
}

MainReport theorem_main_experiment(SeedSpec seed, const DimensionProfile& profile,
                                   const Hamiltonian& h, const ExperimentParams& params,
                                   double c1) {
    check_params(params, profile, h.dim());
    if (!(c1 > 0.0)) throw InvalidParams("C1 must be positive");
    if (params.n_states == 0) throw InvalidParams("n_states must be positive");
    if (!h.nr_flags().nonresonant) {
        throw ResonantSpectrum("the uniform experiment needs a non-degenerate, non-resonant spectrum");
    }
    const std::size_t nb = profile.blocks();
    const double n3 = std::pow(static_cast<double>(nb), 3);
    const double dd = static_cast<double>(profile.total());
    const double log_d = std::log(dd);
    const double eps = params.epsilon;

    MainReport rep;
    rep.window_lower = std::max(c1, 10.0 * n3 / (eps * params.delta * params.delta_prime)) * log_d;
    rep.window_upper = dd / c1;
    rep.window_met = std::all_of(profile.dims().begin(), profile.dims().end(), [&](std::size_t d) {
        const double x = static_cast<double>(d);
        return rep.window_lower < x && x < rep.window_upper;
    });
    rep.k_constant = 10.0 * log_d / dd;
    rep.delta_condition_met = params.delta < 1.0 &&
        std::all_of(profile.dims().begin(), profile.dims().end(), [&](std::size_t d) {
            return params.delta >=
                   rep.k_constant * dd * n3 / (eps * eps * params.delta_prime * static_cast<double>(d));
        });
    rep.g_integral_bound = rep.k_constant;
    if (!rep.window_met && !params.override_hypotheses) {
        throw HypothesisViolated("dimension window (" + std::to_string(rep.window_lower) + ", " +
                                 std::to_string(rep.window_upper) + ") not met");
    }

    const std::vector<double> gamma = gammas(profile, eps);
    const ComplexMatrix& phi = h.spectral().eigenvectors;
    const std::size_t dim = h.dim();

    struct Chunk {
        std::size_t achieving = 0;
        std::size_t uniform = 0;
        std::size_t violations = 0;
        double max_excess = -std::numeric_limits<double>::infinity();
        std::vector<RunningMoments> g;
    };
    auto chunks = map_chunks(params.n_dec, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
        Chunk out;
        out.g.resize(nb);
        Rng rng(seed.substream(chunk));
        std::vector<ComplexMatrix> elements(nb);
        std::vector<double> g(nb), f(nb), pops(dim);
        for (std::size_t i = begin; i < end; ++i) {
            const Decomposition dec = sample_decomposition(rng, profile);
            for (std::size_t nu = 0; nu < nb; ++nu) {
                elements[nu] = projector_in_basis(dec, nu, h.spectral());
                g[nu] = g_nu_terms(elements[nu], profile.dim(nu)).total();
                out.g[nu].add(g[nu]);
            }
            double worst = 1.0;
            for (std::size_t s = 0; s < params.n_states; ++s) {
                const UnitVector psi = sample_unit_state(rng, dim);
                for (std::size_t a = 0; a < dim; ++a) {
                    cplx acc{};
                    for (std::size_t r = 0; r < dim; ++r) acc += std::conj(phi(r, a)) * psi[r];
                    pops[a] = std::norm(acc);
                }
                for (std::size_t nu = 0; nu < nb; ++nu) {
                    f[nu] = exact_limit_from_elements(pops, elements[nu], profile.dim(nu));
                    const double excess = f[nu] - g[nu];
                    out.max_excess = std::max(out.max_excess, excess);
                    if (excess > 1e-12) ++out.violations;
                }
                worst = std::min(worst, union_time_fraction(f, gamma));
            }
            if (worst >= 1.0 - params.delta_prime) ++out.achieving;
            if (union_time_fraction(g, gamma) >= 1.0 - params.delta_prime) ++out.uniform;
        }
        return out;
    }, kExperimentChunk);

    std::vector<RunningMoments> g_moments(nb);
    std::size_t uniform = 0;
    rep.max_majorant_excess = -std::numeric_limits<double>::infinity();
    for (const auto& ch : chunks) {
        rep.achieving += ch.achieving;
        uniform += ch.uniform;
        rep.majorant_violations += ch.violations;
        rep.max_majorant_excess = std::max(rep.max_majorant_excess, ch.max_excess);
        for (std::size_t nu = 0; nu < nb; ++nu) g_moments[nu].merge(ch.g[nu]);
    }
    rep.n_dec = params.n_dec;
    rep.n_states = params.n_states;
    rep.fraction = static_cast<double>(rep.achieving) / static_cast<double>(rep.n_dec);
    rep.uniform_fraction = static_cast<double>(uniform) / static_cast<double>(rep.n_dec);
    rep.std_error = binomial_std_error(1.0 - params.delta, rep.n_dec);
    rep.meets_contract = rep.fraction >= 1.0 - params.delta - 4.0 * rep.std_error;
    for (const auto& m : g_moments) {
        rep.g_integral.push_back(m.mean);
        rep.g_integral_std_error.push_back(m.std_error());
    }
    return rep;
}

}  // namespace qet
