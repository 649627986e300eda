#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "feedforge/jsonl.hpp"

namespace feedforge {

enum class SourceTag { truthful_qa, false_qa, evol_instruct, ultrachat, sharegpt, flan, custom };

std::string_view to_string(SourceTag tag);
std::optional<SourceTag> parse_source_tag(std::string_view name);

struct Instruction {
    std::string id;
    SourceTag source = SourceTag::custom;
    std::string text;
    std::optional<std::string> task_label;
    std::size_t token_count = 0;

    bool operator==(const Instruction&) const = default;
};

// Hex digest over "source\0text".
std::string instruction_id(SourceTag source, std::string_view text);

// Throws ContractError when text is blank.
Instruction make_instruction(SourceTag source, std::string text, std::optional<std::string> task_label = {});

json to_json(const Instruction& ins);
Instruction instruction_from_json(const json& j);

struct SourceLoad {
    std::vector<Instruction> instructions;
    std::vector<LineIssue> skipped;
};

// One instruction per valid JSONL line ({"text", "task_label"?}), file order.
SourceLoad load_source(const std::filesystem::path& path, SourceTag source);

inline constexpr std::string_view kCotTask = "CoT";
inline constexpr std::size_t kDefaultMaxInstructionTokens = 2048;

// Take min(cot_count, |CoT|) from the "CoT" task and min(per_task_count, |task|) from
// every other task, after dropping instructions longer than max_tokens. Output keeps
// input order. Throws ContractError if an instruction lacks a task label.
std::vector<Instruction> stratified_sample(std::span<const Instruction> instructions, std::size_t cot_count,
                                           std::size_t per_task_count, std::size_t max_tokens,
                                           std::uint64_t seed);

// min(n, |instructions|) distinct instructions, uniform without replacement, input order kept.
std::vector<Instruction> random_sample(std::span<const Instruction> instructions, std::size_t n,
                                       std::uint64_t seed);

struct TakeAll {
    bool operator==(const TakeAll&) const = default;
};
struct RandomN {
    std::size_t count = 0;
    bool operator==(const RandomN&) const = default;
};
struct Stratified {
    std::size_t cot_count = 0;
    std::size_t per_task_count = 0;
    bool operator==(const Stratified&) const = default;
};
using Quota = std::variant<TakeAll, RandomN, Stratified>;

struct SamplingPlan {
    std::vector<std::pair<SourceTag, Quota>> quotas;
    std::uint64_t seed = 0;
    std::size_t max_instruction_tokens = kDefaultMaxInstructionTokens;

    // Throws ConfigError on duplicate sources or non-positive counts.
    void validate() const;

    // TruthfulQA and FalseQA whole, 10k Evol-Instruct, 10k UltraChat, 20k ShareGPT,
    // FLAN stratified with 3k CoT and 10 per task.
    static SamplingPlan reference(std::uint64_t seed);
};

json quota_to_json(const Quota& q);
Quota quota_from_json(const json& j);

struct Shortfall {
    SourceTag source = SourceTag::custom;
    std::size_t requested = 0;
    std::size_t taken = 0;
};

struct PoolAssembly {
    std::vector<Instruction> pool;
    std::vector<Shortfall> shortfalls;
};

// Per-source streams use seed ^ hash(source tag). Sources are concatenated in plan order.
PoolAssembly assemble_pool(const SamplingPlan& plan, const std::map<SourceTag, std::vector<Instruction>>& sources);

} // namespace feedforge
