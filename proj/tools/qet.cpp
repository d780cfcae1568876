#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "qet/errors.hpp"
#include "qet/harness.hpp"
#include "qet/parallel.hpp"

namespace {

constexpr int kExitHypothesis = 3;
constexpr int kExitConfig = 4;
constexpr int kExitOther = 1;

qet::Json read_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw qet::ConfigError("cannot open config file '" + path + "'");
    try {
        return qet::Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw qet::ConfigError("'" + path + "' is not valid JSON: " + e.what());
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Quantum ergodic theorem experiment runner"};
    app.set_version_flag("--version", std::string(qet::kToolVersion));

    std::string command;
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_path;
    std::string format;
    bool override_hypotheses = false;
    std::size_t threads = 0;

    app.add_option("command", command, "moments | tails | bounds-grid | equilibrate | theorem-t1 | "
                                       "theorem-main | calibrate-constants")
        ->required();
    app.add_option("--config", config_path, "experiment config (JSON)")->required();
    app.add_option("--seed", seed, "replaces the seed in the config");
    app.add_option("--out", out_path, "report path; stdout when omitted");
    app.add_option("--format", format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
    app.add_flag("--override-hypotheses", override_hypotheses, "run even when dimension hypotheses fail");
    app.add_option("--threads", threads, "worker threads, default: all cores (results do not depend on it)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    try {
        qet::Json j = read_config(config_path);
        if (!j.is_object()) throw qet::ConfigError("config must be a JSON object");
        if (!j.contains("command")) {
            j["command"] = command;
        } else if (!j["command"].is_string() || j["command"].get<std::string>() != command) {
            throw qet::ConfigError("field 'command': config says " + j["command"].dump() + " but '" + command +
                                   "' was requested");
        }
        if (seed) j["seed"] = *seed;
        if (override_hypotheses) j["override_hypotheses"] = true;
        if (!format.empty()) j["format"] = format;
        if (!out_path.empty()) j["output"] = out_path;

        const qet::ExperimentConfig config = qet::ExperimentConfig::from_json(j);
        qet::set_worker_count(threads > 0 ? threads : std::thread::hardware_concurrency());

        const qet::ExperimentReport report = qet::run(config);
        const std::string text = qet::emit(report, config.format);
        if (config.output) {
            qet::write_atomic(*config.output, text);
        } else {
            std::cout << text;
        }
        if (!report.passed) std::cerr << "qet: at least one verdict failed\n";
        return qet::exit_code(report);
    } catch (const qet::ConfigError& e) {
        std::cerr << "qet: " << e.what() << '\n';
        return kExitConfig;
    } catch (const qet::HypothesisViolated& e) {
        std::cerr << "qet: " << e.what() << " (pass --override-hypotheses to run anyway)\n";
        return kExitHypothesis;
    } catch (const std::exception& e) {
        std::cerr << "qet: " << e.what() << '\n';
        return kExitOther;
    }
}
