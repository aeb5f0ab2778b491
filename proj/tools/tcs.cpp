#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "tcs/scenario.hpp"

namespace {

struct Common {
    std::string scenario;
    std::uint64_t seed = 0;
    std::string out;
    std::string expect;
    bool json = false;
    std::optional<int> grid;
    std::optional<double> dwell;
    std::optional<double> horizon;
    std::optional<double> step;
    std::optional<double> tol;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("scenario", c.scenario, "built-in scenario name or path to a YAML file")->required();
    cmd->add_option("--seed", c.seed, "sampling seed");
    cmd->add_option("--out", c.out, "directory for summary.json, timings.json and CSV grids");
    cmd->add_option("--expect", c.expect, "expected-verdict file; exit status then reports mismatches");
    cmd->add_flag("--json", c.json, "print the JSON summary instead of the verdict table");
    cmd->add_option("--grid", c.grid, "cells per axis for every reach grid");
    cmd->add_option("--dwell", c.dwell, "dwell time per expansion");
    cmd->add_option("--horizon", c.horizon, "time horizon");
    cmd->add_option("--step", c.step, "integrator step");
    cmd->add_option("--tol", c.tol, "residual tolerance of the checks");
}

std::string headline(const tcs::ExperimentResult& r) {
    const auto& m = r.metrics;
    char buf[96] = "";
    if (m.contains("min_coverage"))
        std::snprintf(buf, sizeof buf, "coverage %.4f", m["min_coverage"].get<double>());
    else if (m.contains("verification"))
        std::snprintf(buf, sizeof buf, "residual %.3g", m["verification"]["pushforward_residual"].get<double>());
    else if (m.contains("worst_residual"))
        std::snprintf(buf, sizeof buf, "residual %.3g", m["worst_residual"].get<double>());
    else if (m.contains("pushforward_residual"))
        std::snprintf(buf, sizeof buf, "residual %.3g", m["pushforward_residual"].get<double>());
    else if (m.contains("max_error"))
        std::snprintf(buf, sizeof buf, "error %.3g", m["max_error"].get<double>());
    else if (m.contains("idempotence_residual"))
        std::snprintf(buf, sizeof buf, "|P^2-P| %.3g", m["idempotence_residual"].get<double>());
    else if (m.contains("error"))
        std::snprintf(buf, sizeof buf, "raised %s", m["error"].get<std::string>().c_str());
    return buf;
}

int execute(const Common& c, tcs::RunOptions opts) {
    opts.grid = c.grid;
    opts.dwell = c.dwell;
    opts.horizon = c.horizon;
    opts.step = c.step;
    opts.tol = c.tol;
    const tcs::Scenario sc = tcs::load_scenario(c.scenario);
    if (opts.experiment) {
        bool found = false;
        for (const auto& e : sc.experiments) found = found || e.name == *opts.experiment;
        if (!found) throw tcs::UnresolvedReference(*opts.experiment);
    }
    const tcs::RunResult res = tcs::run(sc, c.seed, c.out, opts);

    if (c.json) {
        std::cout << res.summary().dump(2) << '\n';
    } else {
        std::printf("%s (seed %llu)\n", res.scenario.c_str(), static_cast<unsigned long long>(res.seed));
        for (const auto& r : res.experiments)
            std::printf("  %-28s %-27s %-6s %s\n", r.name.c_str(), r.kind.c_str(), r.verdict.c_str(), headline(r).c_str());
        std::printf("  %.2f s\n", res.seconds);
    }

    if (!c.expect.empty()) {
        std::ifstream in(c.expect);
        if (!in) throw tcs::Error("cannot open expected-verdict file '" + c.expect + "'");
        const auto problems = tcs::compare_verdicts(res, nlohmann::json::parse(in));
        for (const auto& p : problems) std::fprintf(stderr, "mismatch: %s\n", p.c_str());
        return problems.empty() ? 0 : 1;
    }
    return res.all_pass() ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Lift, verify and explore tautological control systems"};
    app.require_subcommand(1);

    Common common;
    std::string experiment;

    auto* lift = app.add_subcommand("lift", "run the construction blocks (lifts, frames, augmentations)");
    add_common(lift, common);
    auto* reach = app.add_subcommand("reach", "run one reach-type experiment");
    add_common(reach, common);
    reach->add_option("--experiment", experiment, "experiment block name")->required();
    auto* verify = app.add_subcommand("verify", "trajectory-preserving and global-in-time checks");
    add_common(verify, common);
    auto* liftable = app.add_subcommand("liftable", "liftability and round-trip checks");
    add_common(liftable, common);
    auto* runall = app.add_subcommand("run", "run every experiment block");
    add_common(runall, common);
    auto* list = app.add_subcommand("list-scenarios", "list the built-in scenarios");

    CLI11_PARSE(app, argc, argv);

    try {
        if (list->parsed()) {
            for (const auto& name : tcs::builtin_scenarios()) {
                const tcs::Scenario sc = tcs::load_scenario(name);
                std::printf("%-18s %zu experiments\n", name.c_str(), sc.experiments.size());
            }
            return 0;
        }
        tcs::RunOptions opts;
        if (lift->parsed()) opts.kinds = {"-"};
        if (reach->parsed()) opts.experiment = experiment;
        if (verify->parsed()) opts.kinds = {"verify", "global_in_time"};
        if (liftable->parsed()) opts.kinds = {"liftable", "round_trip"};
        return execute(common, opts);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
