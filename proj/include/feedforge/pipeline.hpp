#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "feedforge/corpus.hpp"
#include "feedforge/genpool.hpp"
#include "feedforge/jsonl.hpp"
#include "feedforge/pairs.hpp"
#include "feedforge/reward.hpp"

namespace feedforge {

struct JudgeBackendConfig {
    JudgeSettings settings;
    Backend backend = Backend::mock;
    std::optional<std::string> endpoint;
};

struct HttpSettings {
    std::int64_t timeout_ms = 120000;
    int max_attempts = 5;
    std::int64_t base_delay_ms = 500;
    std::int64_t max_delay_ms = 30000;
};

struct BonSettings {
    std::string model;
    std::vector<std::size_t> ns = {1, 2, 4, 8, 16};
    std::size_t instructions = 0; // 0 = every clean instruction
};

struct EvalSettings {
    std::string model_a;
    std::string model_b;
    std::size_t instructions = 0; // 0 = every clean instruction
    Decoding decoding{0.7, 1.0, 1024};
};

/// The whole pipeline configuration, read from one JSON document. Relative
/// paths resolve against the document's directory.
struct PipelineConfig {
    std::filesystem::path base_dir;
    std::uint64_t seed = 0;
    std::size_t concurrency = 8;

    std::map<SourceTag, std::filesystem::path> sources;
    std::vector<std::filesystem::path> eval_sets;
    std::optional<std::filesystem::path> external_pairs;
    std::filesystem::path store_dir;
    std::filesystem::path cache_dir;

    SamplingPlan sampling;
    std::filesystem::path model_pool;
    std::filesystem::path principles;
    std::optional<std::filesystem::path> aspect_map;
    std::size_t models_per_instruction = kGroupSize;

    JudgeBackendConfig judge;
    std::optional<Backend> backend_override; // set by --backend; applies to every pool model
    HttpSettings http;
    ScoreMode score_mode = ScoreMode::fine_grained;
    TiePolicy ties = TiePolicy::drop;
    std::set<std::string> external_tags;
    TrainConfig train;
    BonSettings bon;
    EvalSettings eval;

    // Throws ConfigError naming the offending field when a referenced file is missing.
    void validate() const;

    // Hex digest over every output-affecting setting; concurrency is excluded.
    std::string digest() const;
};

struct ConfigOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> concurrency;
    std::optional<Backend> backend; // forces every model and the judge onto this backend
};

// Throws ConfigError naming the field on missing or malformed entries.
PipelineConfig parse_pipeline_config(const json& doc, const std::filesystem::path& base_dir);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);
void apply_overrides(PipelineConfig& cfg, const ConfigOverrides& overrides);

inline constexpr std::string_view kStages[] = {"sample", "decontam", "generate", "annotate", "pairs",
                                               "mix",    "train-rm", "bon",      "eval",     "stats"};

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitPartial = 2, kExitFatal = 3 };

struct StageResult {
    int exit_code = kExitOk;
    std::vector<std::filesystem::path> artifacts;
    json report = json::object();
};

// Artifact path "<store>/<stage>.<digest16>.<ext>".
std::filesystem::path artifact_path(const PipelineConfig& cfg, std::string_view stage, std::string_view ext = "jsonl");

/// Runs one stage, reading its predecessors' artifacts from the store. Partial
/// failures set exit_code 2 and list the failed records in the report. Other
/// errors propagate as exceptions. A dry run validates inputs and reports the
/// planned artifacts without calling any backend or writing anything.
StageResult run_stage(std::string_view stage, const PipelineConfig& cfg, bool dry_run = false);

/// run_stage with the exit-code contract applied: ConfigError -> 1, partial -> 2,
/// anything else -> 3. Every non-zero outcome writes "<store>/error.<stage>.json"
/// (when the store is known) and prints the same JSON report to err.
int run_stage_guarded(std::string_view stage, const PipelineConfig& cfg, bool dry_run, std::ostream& out,
                      std::ostream& err);

// Writes an error report {stage, exit_code, kind, message, ...} to err and, when store_dir is set, to disk.
void emit_error_report(std::string_view stage, int exit_code, std::string_view kind, std::string_view message,
                       const std::optional<std::filesystem::path>& store_dir, std::ostream& err,
                       const json& details = json::object());

} // namespace feedforge
