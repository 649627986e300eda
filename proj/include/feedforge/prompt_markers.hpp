#pragma once

#include <string_view>

// Structural markers shared by the prompt builders and the offline mock, which
// recognizes annotation and judging prompts by them.
namespace feedforge::markers {

inline constexpr std::string_view kAnnotationSection = "## Annotation";
inline constexpr std::string_view kTextSlotOpen = "<text ";
inline constexpr std::string_view kRatingOutputHeader = "#### Output for Text ";

inline constexpr std::string_view kCritiqueScoreLine = "Overall Score: [1-10]";

inline constexpr std::string_view kJudgeStartA = "[The Start of Response A]";
inline constexpr std::string_view kJudgeEndA = "[The End of Response A]";
inline constexpr std::string_view kJudgeStartB = "[The Start of Response B]";
inline constexpr std::string_view kJudgeEndB = "[The End of Response B]";

} // namespace feedforge::markers
