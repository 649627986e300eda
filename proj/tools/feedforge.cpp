#include <algorithm>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "feedforge/errors.hpp"
#include "feedforge/pipeline.hpp"

namespace ff = feedforge;

int main(int argc, char** argv) {
    CLI::App app{"feedforge: preference-data pipeline"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> concurrency;
    std::optional<std::string> backend;
    bool dry_run = false;

    app.add_option("--config", config_path, "Pipeline configuration (JSON)")->required();
    app.add_option("--seed", seed, "Override the global seed");
    app.add_option("--concurrency", concurrency, "Maximum in-flight backend calls")->check(CLI::PositiveNumber);
    app.add_option("--backend", backend, "Force every model and the judge onto one backend")
        ->check(CLI::IsMember({"mock", "http"}));
    app.add_flag("--dry-run", dry_run, "Validate and plan without calling backends or writing artifacts");

    for (auto stage : ff::kStages) app.add_subcommand(std::string(stage), "Run the " + std::string(stage) + " stage");
    app.add_subcommand("all", "Run every stage in order");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        ff::emit_error_report("cli", ff::kExitUsage, "usage", e.what(), std::nullopt, std::cerr);
        return ff::kExitUsage;
    }
    const std::string stage = app.get_subcommands().front()->get_name();

    ff::PipelineConfig cfg;
    try {
        cfg = ff::load_pipeline_config(config_path);
        ff::ConfigOverrides overrides;
        overrides.seed = seed;
        overrides.concurrency = concurrency;
        if (backend) overrides.backend = *backend == "http" ? ff::Backend::http : ff::Backend::mock;
        ff::apply_overrides(cfg, overrides);
    } catch (const ff::ConfigError& e) {
        ff::emit_error_report(stage, ff::kExitUsage, "config", e.what(), std::nullopt, std::cerr);
        return ff::kExitUsage;
    } catch (const std::exception& e) {
        ff::emit_error_report(stage, ff::kExitFatal, "fatal", e.what(), std::nullopt, std::cerr);
        return ff::kExitFatal;
    }

    if (stage != "all") return ff::run_stage_guarded(stage, cfg, dry_run, std::cout, std::cerr);

    // Partial failures do not stop the run; usage and fatal errors do.
    int worst = ff::kExitOk;
    for (auto s : ff::kStages) {
        const int code = ff::run_stage_guarded(s, cfg, dry_run, std::cout, std::cerr);
        if (code == ff::kExitUsage || code == ff::kExitFatal) return code;
        worst = std::max(worst, code);
        // A dry run cannot plan stages whose inputs do not exist yet.
        if (dry_run) break;
    }
    return worst;
}
