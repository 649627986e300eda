#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "feedforge/annotate.hpp"
#include "feedforge/llm_client.hpp"
#include "feedforge/pairs.hpp"

namespace feedforge {

struct Candidate {
    std::string text;
    std::optional<double> reward; // precomputed; takes precedence over the scorer

    bool operator==(const Candidate&) const = default;
};

struct CandidatePool {
    std::string instruction_id;
    std::vector<Candidate> candidates; // generation order

    bool operator==(const CandidatePool&) const = default;
};

using RewardFn = std::function<double(std::string_view response)>;

struct Selection {
    std::size_t index = 0;
    std::string text;
    double reward = 0;
};

// Argmax over the first n candidates, lowest index on ties. Throws ContractError
// when n is zero or exceeds the pool.
Selection best_of_n(const CandidatePool& pool, std::size_t n, const RewardFn& scorer = nullptr);

struct BonRow {
    std::size_t n = 0;
    double mean_reward = 0;
    std::vector<std::string> selected_ids; // "<instruction_id>#<index>", pool order
};

// One row per n; every pool must hold at least max(ns) candidates.
std::vector<BonRow> best_of_n_curve(std::span<const CandidatePool> pools, std::span<const std::size_t> ns,
                                    const std::function<RewardFn(const CandidatePool&)>& scorer_for);

// "n,mean_reward,selected_id" with the selected ids joined by ';'.
std::string bon_curve_to_csv(std::span<const BonRow> rows);

enum class Verdict { win, tie, lose };
enum class PositionalVerdict { first, second, tie };

std::string_view to_string(Verdict v);
std::string_view to_string(PositionalVerdict v);

/// Judge verdict grammar. The last line that reduces to "A", "B" or "Tie"
/// (case-insensitive, ignoring `**`, brackets, quotes, a "Verdict:" prefix and
/// a trailing period) decides. Failing that, the last non-empty line is
/// searched for the phrases "Response A", "Response B" and "tie"; exactly one
/// distinct hit decides. Otherwise there is no verdict.
std::optional<PositionalVerdict> parse_verdict(std::string_view judge_text);

// The verdict from the first-listed response's point of view, given the coin.
Verdict unswap(PositionalVerdict raw, bool positions_swapped);

inline constexpr std::string_view kJudgeTemplateVersion = "judge/v1";

std::string build_judge_prompt(std::string_view instruction, std::string_view first, std::string_view second);

struct Match {
    std::string instruction_id;
    std::string instruction;
    std::string response_a; // the system under evaluation
    std::string response_b; // the baseline
};

struct MatchOutcome {
    std::string instruction_id;
    Verdict verdict = Verdict::tie;
    bool positions_swapped = false;
    std::optional<PositionalVerdict> positional;
    std::string judge_raw;
    bool valid = false;
    std::string error; // why the match is invalid

    bool operator==(const MatchOutcome&) const = default;
};

struct WinRateReport {
    std::vector<MatchOutcome> outcomes; // match order
    std::size_t wins = 0;
    std::size_t ties = 0;
    std::size_t losses = 0;
    std::size_t invalid = 0;
    double win_pct = 0;
    double tie_pct = 0;
    double lose_pct = 0;
};

// Whether match i shows response_b first; a pure function of (seed, i).
bool match_swapped(std::uint64_t seed, std::size_t match_index);

/// Judges every match once with presentation order decided by match_swapped.
/// Unparseable or failed judge calls mark the match invalid; invalid matches
/// are excluded from the percentages.
WinRateReport win_rate_eval(std::span<const Match> matches, ChatClient& judge, const JudgeSettings& settings,
                            std::uint64_t seed, std::size_t concurrency = 1);

struct DatasetStats {
    std::size_t instructions = 0;
    std::size_t convs = 0;
    std::size_t comparisons = 0;
    std::size_t critiques = 0;
    double avg_instruction_tokens = 0;
    double avg_completion_tokens = 0;
    double avg_critique_tokens = 0;

    bool operator==(const DatasetStats&) const = default;
};

// Token lengths are whitespace token counts. Empty inputs give zeros.
DatasetStats dataset_stats(std::span<const Instruction> instructions, std::span<const Completion> completions,
                           std::span<const Critique> critiques, std::span<const ComparisonPair> pairs);

json to_json(const DatasetStats& s);

} // namespace feedforge
