#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>
#include <yaml-cpp/yaml.h>

#include "tcs/control.hpp"
#include "tcs/morphism.hpp"
#include "tcs/second_order.hpp"

namespace tcs {

/// Error raised inside an experiment block, tagged with the block.
class ExperimentError : public Error {
public:
    ExperimentError(const std::string& block, const std::string& inner_kind, const std::string& message)
        : Error("experiment '" + block + "': " + inner_kind + ": " + message), experiment(block), kind(inner_kind) {}
    std::string experiment;
    std::string kind;
};

/// One experiment block. Parameters stay as YAML; their references were
/// checked against the declarations when the scenario was parsed.
struct Experiment {
    std::string name;
    std::string kind;
    int line = 0;
    YAML::Node params;
};

struct Scenario {
    std::string name;
    std::string description;
    std::map<std::string, double> parameters;
    std::map<std::string, AtlasPtr> atlases;
    std::map<std::string, SmoothMap> maps;
    std::map<std::string, VectorField> fields;
    std::map<std::string, GeneratedSystem> systems;
    std::map<std::string, ControlSystem> control_systems;
    std::map<std::string, SecondOrderSystem> second_order;
    std::vector<Experiment> experiments;
};

/// Throws ParseError(line, ...), UnresolvedReference or DimensionMismatch.
Scenario parse_scenario_text(const std::string& text);
Scenario parse_scenario(const std::string& path);

/// Names of the scenarios compiled into the library.
std::vector<std::string> builtin_scenarios();
std::optional<std::string> builtin_scenario_text(const std::string& name);
/// Built-in name or path to a scenario file.
Scenario load_scenario(const std::string& name_or_path);

/// Experiment kinds that only build objects for later blocks.
bool construction_kind(const std::string& kind);
std::vector<std::string> experiment_kinds();

struct RunOptions {
    std::optional<int> grid;
    std::optional<double> dwell;
    std::optional<double> horizon;
    std::optional<double> step;
    std::optional<double> tol;
    /// Analysis kinds to execute; empty runs everything. Construction blocks always run.
    std::set<std::string> kinds;
    /// When set, the only analysis block executed.
    std::optional<std::string> experiment;
};

struct ExperimentResult {
    std::string name;
    std::string kind;
    /// pass / fail for checks, ok for constructions, true / false for predicates.
    std::string verdict;
    nlohmann::json metrics = nlohmann::json::object();
    std::vector<std::string> artifacts;
    double seconds = 0.0;

    bool failed() const { return verdict == "fail"; }
};

struct RunResult {
    std::string scenario;
    std::uint64_t seed = 0;
    std::vector<ExperimentResult> experiments;
    std::vector<std::string> artifacts;
    double seconds = 0.0;

    bool all_pass() const;
    const ExperimentResult* find(const std::string& name) const;
    /// {scenario, seed, experiments: [{name, kind, verdict, metrics}]}; no timings.
    nlohmann::json summary() const;
    nlohmann::json timings() const;
};

/// Executes the blocks in order. With a non-empty `output_dir` it writes
/// summary.json, timings.json and one CSV per reach start. Errors from a block
/// are rethrown as Error tagged with the block name, unless the block declares
/// `expect_error` with the matching error kind.
RunResult run(const Scenario& scenario, std::uint64_t seed, const std::string& output_dir = {},
              const RunOptions& options = {});

/// Class name of a library error, e.g. "NotSubmersion"; "Error" for anything else.
std::string error_kind(const std::exception& e);

/// Compares verdicts with an expected file {"experiments": {name: verdict}}.
/// Returns one message per mismatch.
std::vector<std::string> compare_verdicts(const RunResult& result, const nlohmann::json& expected);

} // namespace tcs
