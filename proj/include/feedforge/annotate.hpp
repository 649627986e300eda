#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "feedforge/corpus.hpp"
#include "feedforge/genpool.hpp"
#include "feedforge/llm_client.hpp"

namespace feedforge {

inline constexpr std::size_t kGroupSize = 4;

enum class RatingAspect { instruction_following, truthfulness, honesty, helpfulness };

inline constexpr std::array<RatingAspect, 4> kRatingAspects = {
    RatingAspect::instruction_following, RatingAspect::truthfulness, RatingAspect::honesty,
    RatingAspect::helpfulness};

std::string_view to_string(RatingAspect aspect);
std::optional<RatingAspect> parse_rating_aspect(std::string_view name);

// Scoring documentation for one aspect: definition plus the expected behavior for scores 1..5.
std::string_view aspect_rubric(RatingAspect aspect);
inline constexpr std::string_view kRubricVersion = "rubrics/v1";

struct AspectRating {
    RatingAspect aspect = RatingAspect::instruction_following;
    int rating = 1;
    std::string rationale;

    bool operator==(const AspectRating&) const = default;
};

struct Critique {
    std::string instruction_id;
    std::string model;
    std::string feedback;
    int overall_score = 1;

    bool operator==(const Critique&) const = default;
};

struct AnnotatedCompletion {
    Completion completion;
    std::vector<AspectRating> ratings; // aspect order; all four when complete
    std::optional<Critique> critique;
    bool incomplete = false;

    bool operator==(const AnnotatedCompletion&) const = default;
};

// Rubric, output format, then the instruction and the completions as <text 1>..<text 4>
// in the given order. Throws ContractError unless there are exactly four completions
// of this instruction.
std::string build_fine_grained_prompt(const Instruction& instruction, std::span<const Completion> completions,
                                      RatingAspect aspect);

inline constexpr std::string_view kFineGrainedSystemPrompt =
    "Your role is to evaluate text quality based on given criteria.";

struct ParsedRating {
    int rating = 0;
    std::string rationale;

    bool operator==(const ParsedRating&) const = default;
};

/// Response grammar, one line at a time. Markdown emphasis (`**`, `__`) and
/// leading `#`, `-`, `*` are ignored.
///   header    := ["Output for"] "Text" N [":" | ")" | "."]   (whole line)
///   rating    := "Rating:" TOKEN    TOKEN is an integer, optionally "/5"
///   rationale := "Rationale:" TEXT  continued by following lines until the next
///                                   header or rating line
/// Lines outside a header's section are ignored. Missing slot -> ParseError
/// naming "Text N"; non-integer token -> ParseError; value outside 1..5 -> RangeError.
std::vector<ParsedRating> parse_ratings(std::string_view response, std::size_t slots = kGroupSize);

std::string build_critique_prompt(const Instruction& instruction, const Completion& completion);

struct ParsedCritique {
    std::string feedback;
    int overall_score = 0;
};

// Score from the last "Overall Score:" line: "7", "7/10" and "7.0" (truncated) are accepted.
// Feedback is the text between "### Feedback" and that line.
ParsedCritique parse_critique(std::string_view response);

struct AnnotationModes {
    bool fine_grained = true;
    bool critique = true;
};

struct AnnotationFailure {
    std::string instruction_id;
    std::string target; // aspect name for fine-grained calls, model name for critiques
    std::string kind;   // transport | protocol | timeout | auth | parse | range
    std::string message;
};

struct GroupAnnotation {
    std::vector<AnnotatedCompletion> records; // same order as the input completions
    std::vector<AnnotationFailure> failures;
    std::size_t judge_calls = 0;
};

// One judge call per aspect, each scoring all four texts together, and one
// critique call per completion. Failed calls leave records flagged incomplete.
GroupAnnotation annotate_group(const Instruction& instruction, std::span<const Completion> completions,
                               ChatClient& judge, const JudgeSettings& settings, AnnotationModes modes = {});

} // namespace feedforge
