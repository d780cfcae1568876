// Acceptance run: one PASS/FAIL line per criterion. Tolerances and sample
// sizes are fixed here; the 4-standard-error band is used throughout.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "oracles.hpp"
#include "qet/dynamics.hpp"
#include "qet/errors.hpp"
#include "qet/harness.hpp"
#include "qet/moments.hpp"
#include "qet/parallel.hpp"
#include "qet/stats.hpp"
#include "qet/tails.hpp"

using namespace qet;

namespace {

constexpr double kBand = 4.0;

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << "[failed: " << what << "] ";
        }
    }
};

int failures = 0;

void criterion(int id, const char* title, double budget_seconds, const std::function<void(Outcome&)>& body) {
    Outcome out;
    const auto start = std::chrono::steady_clock::now();
    try {
        body(out);
    } catch (const std::exception& e) {
        out.pass = false;
        out.detail << "[exception: " << e.what() << "] ";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (budget_seconds > 0 && secs > budget_seconds) {
        out.pass = false;
        out.detail << "[over time budget of " << budget_seconds << " s] ";
    }
    if (!out.pass) ++failures;
    std::printf("%s criterion %2d: %s (%.1f s) %s\n", out.pass ? "PASS" : "FAIL", id, title, secs,
                out.detail.str().c_str());
    std::fflush(stdout);
}

double binomial_band(double p, std::size_t n) { return kBand * binomial_std_error(p, n); }

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Report text without the wall-clock line.
std::string without_clock(const std::string& text) {
    std::istringstream in(text);
    std::string line, out;
    while (std::getline(in, line))
        if (line.find("\"wall_clock_seconds\"") == std::string::npos) out += line + "\n";
    return out;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(QET_BINARY) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string config_path(const char* name) { return std::string(QET_CONFIG_DIR) + "/" + name; }

const Metric* find(const ExperimentReport& r, const std::string& name) {
    for (const auto& m : r.metrics)
        if (m.name == name) return &m;
    return nullptr;
}

}  // namespace

int main() {
    std::printf("worker threads: %zu\n", worker_count());

    criterion(1, "moment identities", 30.0, [](Outcome& o) {
        std::size_t pairs = 0;
        for (std::size_t D = 1; D <= 64; ++D)
            for (std::size_t d = 1; d <= D; ++d) {
                auto m2 = sphere_fourth_moment_exact(d, D, Field::Complex);
                auto m1 = sphere_mean_exact(d, D);
                auto var = sphere_variance_exact(d, D);
                auto sq = (m1 ? multiply(*m1, *m1) : std::nullopt);
                o.require(m2 && sq && var && subtract(*m2, *sq) == var,
                          "identity at d=" + std::to_string(d) + " D=" + std::to_string(D));
                ++pairs;
            }
        o.detail << pairs << " exact identities; ";
        for (auto [d, D] : std::vector<std::pair<std::size_t, std::size_t>>{{5, 20}, {10, 40}}) {
            auto r = mc_overlap_moment({101, D}, DimensionProfile({d, D - d}), 0, 1, 100000, OverlapMode::VaryState);
            const double z = std::abs(r.mc_estimate - r.closed_form) / r.mc_std_error;
            o.require(z < kBand, "MC mean");
            o.detail << "(" << d << "," << D << ") mean " << r.mc_estimate << " vs " << r.closed_form << " z=" << z
                     << "; ";
        }
    });

    criterion(2, "state/decomposition exchangeability", 60.0, [](Outcome& o) {
        DimensionProfile p({5, 15});
        auto xs = sample_overlaps({102, 0}, p, 0, 100000, OverlapMode::VaryState);
        auto ys = sample_overlaps({102, 1}, p, 0, 100000, OverlapMode::VaryDecomposition);
        auto ks = ks_two_sample(xs, ys);
        o.require(ks.p_value > 0.001, "KS p-value");
        o.detail << "KS D=" << ks.statistic << " p=" << ks.p_value;
    });

    criterion(3, "Beta law of overlaps", 0.0, [](Outcome& o) {
        for (auto [d, D] : std::vector<std::pair<std::size_t, std::size_t>>{{3, 10}, {5, 20}}) {
            auto xs = sample_overlaps({103, D}, DimensionProfile({d, D - d}), 0, 100000, OverlapMode::VaryState);
            std::sort(xs.begin(), xs.end());
            std::vector<double> cdf(xs.size());
            for (std::size_t i = 0; i < xs.size(); ++i) cdf[i] = beta_cdf(d, D, std::clamp(xs[i], 0.0, 1.0));
            auto ks = ks_one_sample_sorted(xs, cdf);
            o.require(ks.p_value > 0.001, "KS p-value");
            o.detail << "(" << d << "," << D << ") p=" << ks.p_value << "; ";
        }
    });

    criterion(4, "tail oracles against Haar frequencies", 0.0, [](Outcome& o) {
        const std::size_t n = 100000;
        std::size_t checks = 0;
        double worst = 0.0;
        for (auto [d, D] : std::vector<std::pair<std::size_t, std::size_t>>{{3, 10}, {5, 20}, {8, 40}}) {
            const DimensionProfile p({d, D - d});
            const double mean = static_cast<double>(d) / static_cast<double>(D);
            const double sd = std::sqrt(sphere_variance(d, D));
            const double span = std::min(mean, 2.0 * sd);
            auto diag = sample_overlaps({104, D}, p, 0, n, OverlapMode::VaryDecomposition);
            auto off = sample_offdiag_overlaps({104, 1000 + D}, p, 0, n);
            const double off_mean = mean * (1.0 - mean) * static_cast<double>(D) /
                                    (static_cast<double>(D) * static_cast<double>(D) - 1.0);
            for (int k = 1; k <= 5; ++k) {
                const double s = span * k / 6.0;
                const double a = s * s;
                std::size_t hits = 0;
                for (double x : diag) hits += (x - mean) * (x - mean) >= a ? 1 : 0;
                const double pi = diag_tail_I({d, D, a}).exact;
                const double zi = std::abs(static_cast<double>(hits) / n - pi) / binomial_std_error(pi, n);
                o.require(std::abs(static_cast<double>(hits) / n - pi) < binomial_band(pi, n), "I frequency");

                const double b = off_mean * std::vector<double>{0.5, 1, 2, 3, 4}[k - 1];
                std::size_t off_hits = 0;
                for (double x : off) off_hits += x >= b ? 1 : 0;
                const double pj = offdiag_tail_J({d, D, b}).exact;
                const double zj = std::abs(static_cast<double>(off_hits) / n - pj) / binomial_std_error(pj, n);
                o.require(std::abs(static_cast<double>(off_hits) / n - pj) < binomial_band(pj, n), "J frequency");
                worst = std::max({worst, zi, zj});
                checks += 2;
            }
            o.require(diag_tail_I({d, D, 0.0}).exact == 1.0, "I(0) = 1");
            o.require(offdiag_tail_J({d, D, 0.0}).exact == 1.0, "J(0) = 1");
            o.require(offdiag_tail_J({d, D, 0.25}).exact == 0.0, "J(1/4) = 0");
        }
        o.detail << checks << " frequency checks, worst z=" << worst;
    });

    criterion(5, "bound dominance on the grid", 120.0, [](Outcome& o) {
        auto cfg = ExperimentConfig::load(config_path("bounds-grid.json"));
        auto r = run(cfg);
        std::size_t i_valid = 0, j_valid = 0, viol = 0;
        for (const auto& m : r.metrics) {
            const bool is_diag = m.name.rfind("diag_exp_bound[", 0) == 0;
            const bool is_off = m.name.rfind("offdiag_bound[", 0) == 0;
            if (is_diag && m.hypotheses_met) {
                ++i_valid;
                if (!(*m.closed_form <= *m.bound)) ++viol;
            }
            if (is_off) {
                ++j_valid;
                if (!(*m.closed_form <= *m.estimate && *m.estimate <= *m.bound)) ++viol;
            }
        }
        o.require(i_valid + j_valid >= 200, "at least 200 valid points");
        o.require(viol == 0, "zero violations");
        for (const char* name : {"diag_exp_dominance", "offdiag_dominance", "diag_log_specialization",
                                 "offdiag_log_specialization",
                                 "offdiag_log_dominance", "offdiag_integrand_monotone"}) {
            const Metric* m = find(r, name);
            o.require(m && m->verdict == Verdict::Pass, name);
        }
        const Metric* c25 = find(r, "diag_log_specialization");
        const Metric* c30 = find(r, "offdiag_log_specialization");
        o.detail << i_valid << " diagonal + " << j_valid << " off-diagonal points, " << viol
                 << " violations; specialization rel err " << (c25 ? *c25->estimate : -1) << " / "
                 << (c30 ? *c30->estimate : -1);
    });

    criterion(6, "dynamics", 0.0, [](Outcome& o) {
        double drift = 0.0;
        double quad_rel = 0.0;
        std::size_t bound_checks = 0, bound_viol = 0;
        Rng rng({106, 0});
        for (std::size_t D : {4u, 6u, 8u}) {
            const DimensionProfile p({D / 2, D - D / 2});
            auto h = sample_gue(rng, D);
            auto dec = sample_decomposition(rng, p);
            auto psi = sample_unit_state(rng, D);
            for (double t : {0.1, 10.0, 1e3, 1e5})
                drift = std::max(drift, std::abs(squared_norm(evolve(h, psi, t).amplitudes()) - 1.0));
            const double frac = static_cast<double>(D / 2) / static_cast<double>(D);
            auto integrand = [&](double t) { return std::pow(weight(dec, 0, evolve(h, psi, t)) - frac, 2); };
            for (double T : {10.0, 100.0, 1000.0}) {
                const double ref = oracle::simpson_average(integrand, T, 0.25, 1e-13);
                const double got = finite_time_average(h, psi, dec, 0, T).finite_time_value;
                quad_rel = std::max(quad_rel, std::abs(got - ref) / std::abs(ref));
            }
        }
        std::size_t instances = 0;
        while (instances < 50) {
            auto h = sample_gue(rng, 6);
            if (!h.nr_flags().nonresonant) continue;
            ++instances;
            auto dec = sample_decomposition(rng, DimensionProfile({3, 3}));
            auto psi = sample_unit_state(rng, 6);
            for (std::size_t nu = 0; nu < 2; ++nu) {
                const double limit = exact_limit_f(h, psi, dec, nu);
                for (double T : {10.0, 100.0, 1000.0, 10000.0}) {
                    auto r = finite_time_average(h, psi, dec, nu, T);
                    ++bound_checks;
                    if (std::abs(r.finite_time_value - limit) > r.error_bound) ++bound_viol;
                }
            }
        }
        o.require(drift <= 1e-12, "norm conservation");
        o.require(quad_rel <= 1e-6, "quadrature agreement");
        o.require(bound_viol == 0, "finite-time error bound");
        o.detail << "norm drift " << drift << "; quadrature rel err " << quad_rel << "; " << bound_checks
                 << " error-bound checks, " << bound_viol << " violations";
    });

    criterion(7, "majorant and mean of the limit", 0.0, [](Outcome& o) {
        const DimensionProfile p8({3, 5});
        const std::size_t n = 1000;
        auto excess = map_chunks(n, [&](std::size_t chunk, std::size_t b, std::size_t e) {
            Rng rng(SeedSpec{107, 0}.substream(chunk));
            double worst = -1.0;
            for (std::size_t i = b; i < e; ++i) {
                auto h = sample_gue(rng, 8);
                auto dec = sample_decomposition(rng, p8);
                auto psi = sample_unit_state(rng, 8);
                for (std::size_t nu = 0; nu < 2; ++nu)
                    worst = std::max(worst, time_average_limit(h, psi, dec, nu) - g_nu(dec, nu, h.spectral()));
            }
            return worst;
        }, 16);
        const double worst = *std::max_element(excess.begin(), excess.end());
        o.require(worst <= 1e-12, "f <= g");
        o.detail << n << " instances, max f-g " << worst << "; ";

        const DimensionProfile p20({5, 15});
        auto h = sample_gue(SeedSpec{107, 1}, 20);
        auto psi = sample_unit_state(SeedSpec{107, 2}, 20);
        ExperimentParams params;
        params.n_dec = 10000;
        params.override_hypotheses = true;
        auto t1 = theorem_t1_experiment({107, 3}, p20, h, psi, params);
        const double target = sphere_variance(5, 20);
        const double z = std::abs(t1.mean_limit[0] - target) / t1.mean_limit_std_error[0];
        o.require(z < kBand, "mean of the limit");
        o.detail << "mean f " << t1.mean_limit[0] << " vs " << target << " z=" << z;
    });

    criterion(8, "off-diagonal cap", 0.0, [](Outcome& o) {
        auto xs = sample_offdiag_overlaps({108, 0}, DimensionProfile({5, 15}), 0, 1000000);
        const double mx = *std::max_element(xs.begin(), xs.end());
        o.require(xs.size() == 1000000, "sample count");
        o.require(mx <= 0.25 + 1e-12, "cap");
        o.detail << xs.size() << " samples, max " << mx;
    });

    criterion(9, "integral of g_nu at D=64", 300.0, [](Outcome& o) {
        auto r = integral_bound_gnu({109, 0}, DimensionProfile({16, 16, 16, 16}), 0, 10000);
        o.require(r.mc_integral <= r.total_bound + kBand * r.mc_std_error, "total bound");
        o.detail << "integral " << r.mc_integral << " +- " << r.mc_std_error << " vs " << r.total_bound
                 << " (window " << (r.total_hypotheses_met ? "met" : "unmet") << "); diagonal " << r.diag_mean
                 << " vs " << r.diag_bound << " (" << (r.diag_hypotheses_met ? "met" : "unmet") << "); off-diagonal "
                 << r.offdiag_mean << " vs " << r.offdiag_bound << " ("
                 << (r.offdiag_hypotheses_met ? "met" : "unmet") << ")";
    });

    criterion(10, "typicality experiments and hypothesis exits", 0.0, [](Outcome& o) {
        auto t1 = run(ExperimentConfig::load(config_path("theorem-t1.json")));
        const Metric* f1 = find(t1, "t1_fraction");
        o.require(f1 && f1->verdict == Verdict::Pass, "t1 fraction");

        auto main_cfg = ExperimentConfig::load(config_path("theorem-main.json"));
        main_cfg.override_hypotheses = true;
        auto mr = run(main_cfg);
        const Metric* fm = find(mr, "main_fraction");
        o.require(fm && fm->verdict == Verdict::Pass, "main fraction");
        if (f1 && fm) o.detail << "t1 fraction " << *f1->estimate << ", main fraction " << *fm->estimate << "; ";

        const auto out = (std::filesystem::temp_directory_path() / "qet_acceptance_main.json").string();
        const int rc = run_cli("theorem-main --config " + config_path("theorem-main.json") + " --out " + out);
        o.require(rc == 3, "exit code 3 on violated hypotheses");
        o.detail << "hypothesis path exit " << rc;
    });

    criterion(11, "reproducibility", 0.0, [](Outcome& o) {
        const auto dir = std::filesystem::temp_directory_path() / "qet_acceptance";
        std::filesystem::create_directories(dir);
        for (const char* cmd : {"theorem-t1", "moments", "theorem-main"}) {
            const std::string cfg = config_path((std::string(cmd) + ".json").c_str());
            std::vector<std::string> texts;
            for (const char* threads : {"1", "1", "4"}) {
                const auto path = (dir / (std::string(cmd) + "_" + std::to_string(texts.size()) + ".json")).string();
                const int rc = run_cli(std::string(cmd) + " --config " + cfg + " --override-hypotheses --threads " +
                                       threads + " --out " + path);
                o.require(rc == 0, std::string(cmd) + " exit code");
                texts.push_back(without_clock(read_file(path)));
            }
            o.require(!texts[0].empty() && texts[0] == texts[1], std::string(cmd) + " run-to-run");
            o.require(texts[0] == texts[2], std::string(cmd) + " 1 vs 4 threads");
        }
        std::filesystem::remove_all(dir);
        o.detail << "byte-identical across runs and thread counts";
    });

    std::printf("%s: %d criteria failed\n", failures == 0 ? "ALL PASS" : "FAILURES", failures);
    return failures == 0 ? 0 : 1;
}
