#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "feedforge/annotate.hpp"

namespace feedforge {

enum class ScoreMode { fine_grained, overall };

std::string_view to_string(ScoreMode mode);

struct ScoreRange {
    double min = 1;
    double max = 5;
    double width() const { return max - min; }
};

inline constexpr ScoreRange kFineGrainedRange{1, 5};
inline constexpr ScoreRange kOverallRange{1, 10};

ScoreRange range_for(ScoreMode mode);

struct CompletionRef {
    std::string instruction_id;
    std::string model;

    bool operator==(const CompletionRef&) const = default;
    auto operator<=>(const CompletionRef&) const = default;
};

struct PreferenceScore {
    CompletionRef ref;
    ScoreMode mode = ScoreMode::fine_grained;
    double value = 0;
};

// Mean of the four aspect ratings. Throws ContractError on a missing or duplicate aspect.
double aggregate_score(std::span<const AspectRating> ratings);
PreferenceScore aggregate_score(const CompletionRef& ref, std::span<const AspectRating> ratings);

struct ScoredCompletion {
    CompletionRef ref;
    std::string text;
    double score = 0;
};

inline constexpr std::string_view kUltraTag = "ultrafeedback";

struct ComparisonPair {
    std::string id; // hash(instruction_id, chosen model, rejected model) or, for imports, of the texts
    std::string instruction_id;
    CompletionRef chosen;
    CompletionRef rejected;
    std::string chosen_text;
    std::string rejected_text;
    double margin = 0;
    std::string dataset_tag{kUltraTag};
    std::string prompt; // instruction text when known; imports may carry one

    bool operator==(const ComparisonPair&) const = default;
};

std::string pair_id(std::string_view instruction_id, std::string_view chosen_model, std::string_view rejected_model);

// How equal scores are handled. Dropping them is the default; keep_zero_margin emits
// the earlier completion as chosen with margin 0.
enum class TiePolicy { drop, keep_zero_margin };

/// One pair per unordered couple with unequal scores: chosen is the higher
/// score and margin = |s_c - s_r| / (max - min), which lies in (0, 1].
/// Pairs come out in (i, j) index order. Throws ContractError when a score
/// lies outside range or the group has more than four members.
std::vector<ComparisonPair> build_pairs(std::span<const ScoredCompletion> group, ScoreRange range,
                                        TiePolicy ties = TiePolicy::drop);

struct ExternalPair {
    std::string chosen;
    std::string rejected;
    std::string tag;
    std::string prompt;
};

// JSONL {chosen, rejected, tag, prompt?}; malformed lines are reported and skipped.
std::vector<ExternalPair> load_external_pairs(const std::filesystem::path& path, std::vector<LineIssue>* issues);

struct PairStore {
    std::vector<ComparisonPair> pairs;
    std::map<std::string, std::size_t> per_tag;
};

// Ranking-only imports get margin 0. Throws ConfigError for a tag outside allowed_tags.
PairStore mix_datasets(std::vector<ComparisonPair> ultra, std::span<const ExternalPair> external,
                       const std::set<std::string>& allowed_tags);

// Published composition of the mixed reward-model training set.
namespace reference_counts {
inline constexpr std::size_t kInstructions = 63'967;
inline constexpr std::size_t kCompletions = 255'864;
inline constexpr std::size_t kUltraPairs = 340'025;
inline constexpr std::size_t kShpPairs = 198'556;
inline constexpr std::size_t kSummarizePairs = 92'858;
inline constexpr std::size_t kHelpfulPairs = 118'263;
inline constexpr std::size_t kMixedTotal = 749'702;
} // namespace reference_counts

} // namespace feedforge
