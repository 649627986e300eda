#include <array>
#include <string>

#include "feedforge/hash.hpp"
#include "feedforge/llm_client.hpp"
#include "feedforge/prompt_markers.hpp"
#include "feedforge/text.hpp"

namespace feedforge {

namespace {

constexpr std::array<std::string_view, 64> kWords = {
    "the",     "answer",   "depends", "on",       "several",  "factors",  "including", "context",
    "and",     "timing",   "it",      "is",       "often",    "useful",   "to",        "consider",
    "a",       "simple",   "example", "which",    "shows",    "how",      "this",      "works",
    "in",      "practice", "however", "results",  "may",      "vary",     "between",   "cases",
    "you",     "should",   "check",   "the",      "details",  "before",   "relying",   "on",
    "any",     "single",   "source",  "evidence", "suggests", "that",     "careful",   "steps",
    "help",    "most",     "people",  "find",     "clear",    "guidance", "first",     "then",
    "review",  "each",     "option",  "with",     "some",     "caution",  "overall",   "quality"};

constexpr std::array<std::string_view, 5> kRationales = {
    "The text does not address the task goal.",
    "The text touches on one aspect of the instruction but handles it poorly.",
    "The text partially complies with the instruction and neglects some requirements.",
    "The text is close to full alignment with only minor deviations.",
    "The text fully aligns with the instruction and meets all requirements.",
};

std::uint64_t base_hash(const ChatRequest& req, std::uint64_t seed) {
    std::uint64_t h = hash_combine(fnv1a64(req.model), fnv1a64(req.user));
    return hash_combine(h, hash_combine(seed, req.sample_index));
}

std::string pseudo_prose(std::uint64_t h) {
    std::string out;
    const std::size_t words = 20 + static_cast<std::size_t>(mix64(h) % 60);
    std::size_t in_sentence = 0;
    std::size_t sentence_len = 6 + static_cast<std::size_t>(mix64(h ^ 0x51) % 9);
    for (std::size_t i = 0; i < words; ++i) {
        std::string word(kWords[mix64(hash_combine(h, i)) % kWords.size()]);
        if (in_sentence == 0) word[0] = static_cast<char>(word[0] - 'a' + 'A');
        if (!out.empty()) out.push_back(' ');
        out += word;
        if (++in_sentence == sentence_len || i + 1 == words) {
            out.push_back('.');
            in_sentence = 0;
            sentence_len = 6 + static_cast<std::size_t>(mix64(hash_combine(h, i ^ 0x77)) % 9);
        }
    }
    return out;
}

// Number of consecutive "<text N>" slots in the annotation section, starting at 1.
std::size_t count_slots(std::string_view user) {
    auto section = user.rfind(markers::kAnnotationSection);
    if (section == std::string_view::npos) return 0;
    std::string_view body = user.substr(section);
    std::size_t n = 0;
    while (body.find(std::string(markers::kTextSlotOpen) + std::to_string(n + 1) + ">") != std::string_view::npos) ++n;
    return n;
}

bool is_fine_grained(std::string_view user) {
    return user.find(markers::kAnnotationSection) != std::string_view::npos &&
           user.find(markers::kRatingOutputHeader) != std::string_view::npos;
}

bool is_critique(std::string_view user) { return user.find(markers::kCritiqueScoreLine) != std::string_view::npos; }

std::optional<std::pair<std::string_view, std::string_view>> judge_responses(std::string_view user) {
    auto a0 = user.rfind(markers::kJudgeStartA);
    auto a1 = user.rfind(markers::kJudgeEndA);
    auto b0 = user.rfind(markers::kJudgeStartB);
    auto b1 = user.rfind(markers::kJudgeEndB);
    if (a0 == std::string_view::npos || a1 == std::string_view::npos || b0 == std::string_view::npos ||
        b1 == std::string_view::npos || a1 < a0 || b1 < b0)
        return std::nullopt;
    a0 += markers::kJudgeStartA.size();
    b0 += markers::kJudgeStartB.size();
    return std::make_pair(user.substr(a0, a1 - a0), user.substr(b0, b1 - b0));
}

} // namespace

std::vector<int> mock_fine_grained_ratings(const ChatRequest& req, std::uint64_t seed) {
    std::vector<int> ratings;
    if (!is_fine_grained(req.user)) return ratings;
    const std::uint64_t h = base_hash(req, seed);
    const std::size_t slots = count_slots(req.user);
    for (std::size_t i = 1; i <= slots; ++i) ratings.push_back(1 + static_cast<int>(mix64(hash_combine(h, i)) % 5));
    return ratings;
}

int mock_overall_score(const ChatRequest& req, std::uint64_t seed) {
    return 1 + static_cast<int>(mix64(base_hash(req, seed) ^ 0xc0ffee) % 10);
}

ChatResponse mock_generate(const ChatRequest& req, std::uint64_t seed, JudgePolicy judge) {
    const std::uint64_t h = base_hash(req, seed);
    std::string text;
    if (is_fine_grained(req.user)) {
        const auto ratings = mock_fine_grained_ratings(req, seed);
        for (std::size_t i = 0; i < ratings.size(); ++i) {
            if (i) text += "\n\n";
            text += std::string(markers::kRatingOutputHeader) + std::to_string(i + 1) + "\n";
            text += "Rating: " + std::to_string(ratings[i]) + "\n";
            text += "Rationale: " + std::string(kRationales[static_cast<std::size_t>(ratings[i] - 1)]);
        }
    } else if (is_critique(req.user)) {
        text = "### Feedback\n" + pseudo_prose(h ^ 0xfeed) + "\nOverall Score: " +
               std::to_string(mock_overall_score(req, seed));
    } else if (auto pair = judge_responses(req.user)) {
        if (judge == JudgePolicy::always_first) {
            text = "A";
        } else if (text::trim(pair->first) == text::trim(pair->second)) {
            text = "Tie";
        } else {
            static constexpr std::array<std::string_view, 3> kVerdicts = {"A", "B", "Tie"};
            text = "Both responses were compared against the instruction.\n" +
                   std::string(kVerdicts[mix64(h ^ 0x1d6e) % 3]);
        }
    } else {
        text = pseudo_prose(h);
    }
    ChatResponse resp;
    resp.text = text;
    resp.finish_reason = "stop";
    resp.raw_body = make_chat_body(req.model, text);
    return resp;
}

} // namespace feedforge
