#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "qet/haar.hpp"

namespace qet {

using Json = nlohmann::ordered_json;

inline constexpr std::string_view kSchemaVersion = "1.0.0";
inline constexpr std::string_view kToolVersion = "0.1.0";

enum class Command { Moments, Tails, BoundsGrid, Equilibrate, TheoremT1, TheoremMain, CalibrateConstants };

std::string_view command_name(Command c) noexcept;
/// Throws ConfigError on an unknown name.
Command parse_command(std::string_view name);

enum class Format { Json, Csv };

struct Constants {
    double C = 5.0;     ///< exponential diagonal-tail window
    double C0 = 576.0;  ///< diagonal-integral window
    double C1 = 1.0;    ///< g-integral window
};

struct GridSpec {
    std::vector<std::size_t> D_values{1000, 2000, 5000, 10000};
    std::size_t d_min = 32;
    std::size_t d_max = 128;
    std::size_t d_step = 8;
    std::size_t a_points = 5;
    std::vector<std::size_t> j_D_values{10, 20, 40, 100};
    std::size_t monotone_grid = 10000;
    std::vector<double> C_candidates{1, 2, 3, 4, 5, 6, 8, 10};
    std::vector<std::size_t> c1_D_values{16, 32, 64};
    std::vector<std::size_t> c1_d_values{2, 4, 8, 16};
    std::vector<double> C1_candidates{0.5, 1, 1.5, 2, 3, 4};
};

struct ExperimentConfig {
    Command command = Command::Moments;
    std::vector<std::size_t> dims;
    std::size_t nu = 0;
    double epsilon = 1.0;
    double delta = 0.5;
    double delta_prime = 0.5;
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
    std::size_t samples = 10000;
    std::size_t n_dec = 1000;
    std::size_t n_states = 1;
    std::size_t instances = 1;
    std::vector<double> thresholds;
    std::vector<double> time_horizons{10, 100, 1000, 10000};
    double tolerance = 1e-9;
    Constants constants;
    GridSpec grid;
    bool override_hypotheses = false;
    std::optional<std::string> output;
    Format format = Format::Json;

    /// Field-level validation; throws ConfigError naming the offending field.
    static ExperimentConfig from_json(const Json& j);
    static ExperimentConfig load(const std::string& path);
    Json to_json() const;
    DimensionProfile profile() const;
};

enum class Verdict { Pass, Fail, Info };

std::string_view verdict_name(Verdict v) noexcept;

struct Metric {
    std::string name;
    std::optional<double> closed_form;
    std::optional<double> estimate;
    std::optional<double> std_error;
    std::optional<double> bound;
    bool hypotheses_met = true;
    Verdict verdict = Verdict::Info;

    friend bool operator==(const Metric&, const Metric&) = default;
};

struct ExperimentReport {
    std::string schema_version{kSchemaVersion};
    std::string tool_version{kToolVersion};
    std::string command;
    Json config;
    std::vector<Metric> metrics;
    bool passed = true;
    double wall_clock_seconds = 0.0;

    friend bool operator==(const ExperimentReport&, const ExperimentReport&) = default;
};

/// Runs the configured command. Module errors come back annotated with the
/// command name: bad parameters as ConfigError, failed theorem hypotheses as
/// HypothesisViolated.
ExperimentReport run(const ExperimentConfig& config);

Json report_to_json(const ExperimentReport& report);
/// Throws ConfigError when the document does not follow the report schema.
ExperimentReport report_from_json(const Json& j);

/// Serialized report; the JSON form ends with the wall-clock line so that
/// reproducibility checks can drop it.
std::string emit(const ExperimentReport& report, Format format);

/// Writes to a temporary sibling and renames it into place. Throws IoError.
void write_atomic(const std::string& path, const std::string& contents);

/// 0 when every verdict passes, 2 otherwise.
int exit_code(const ExperimentReport& report) noexcept;

}  // namespace qet
