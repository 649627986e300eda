#include "feedforge/annotate.hpp"

#include <cctype>
#include <cmath>
#include <map>

#include "feedforge/errors.hpp"
#include "feedforge/prompt_markers.hpp"
#include "feedforge/text.hpp"

namespace feedforge {

std::string_view to_string(RatingAspect aspect) {
    switch (aspect) {
    case RatingAspect::instruction_following: return "instruction_following";
    case RatingAspect::truthfulness: return "truthfulness";
    case RatingAspect::honesty: return "honesty";
    case RatingAspect::helpfulness: return "helpfulness";
    }
    return "instruction_following";
}

std::optional<RatingAspect> parse_rating_aspect(std::string_view name) {
    for (auto a : kRatingAspects)
        if (to_string(a) == name) return a;
    return std::nullopt;
}

std::string build_fine_grained_prompt(const Instruction& instruction, std::span<const Completion> completions,
                                      RatingAspect aspect) {
    if (completions.size() != kGroupSize)
        throw ContractError("fine-grained annotation needs exactly " + std::to_string(kGroupSize) +
                            " completions, got " + std::to_string(completions.size()));
    for (const auto& c : completions)
        if (c.instruction_id != instruction.id)
            throw ContractError("completion from model " + c.model + " belongs to another instruction");

    const std::string slot_open(markers::kTextSlotOpen);
    std::string p(aspect_rubric(aspect));
    p += "\n\n## Format:\n\n### Input\nInstruction: [Clearly specify the task goal and restrictions]\n\nTexts:\n";
    for (std::size_t i = 1; i <= kGroupSize; ++i)
        p += slot_open + std::to_string(i) + "> [Text " + std::to_string(i) + "]\n";
    p += "\n### Output\n";
    for (std::size_t i = 1; i <= kGroupSize; ++i) {
        p += std::string(markers::kRatingOutputHeader) + std::to_string(i) + "\n";
        p += "Rating: [Rating for text " + std::to_string(i) + "]\n";
        p += "Rationale: [Rationale for the rating in short sentences]\n\n";
    }
    p += "---\n\n";
    p += markers::kAnnotationSection;
    p += "\n\n### Input\nInstruction: ";
    p += instruction.text;
    p += "\n\nTexts:\n";
    for (std::size_t i = 0; i < kGroupSize; ++i) {
        p += slot_open + std::to_string(i + 1) + "> ";
        p += completions[i].text;
        p += "\n";
    }
    p += "\n### Output\n";
    return p;
}

namespace {

// Drops markdown emphasis and leading list/heading punctuation.
std::string clean_line(std::string_view line) {
    std::string s;
    s.reserve(line.size());
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (i + 1 < line.size() && ((line[i] == '*' && line[i + 1] == '*') || (line[i] == '_' && line[i + 1] == '_'))) {
            ++i;
            continue;
        }
        s.push_back(line[i]);
    }
    std::string_view v = text::trim(s);
    while (!v.empty() && (v.front() == '#' || v.front() == '-' || v.front() == '*' || v.front() == '>'))
        v = text::trim(v.substr(1));
    return std::string(v);
}

// "Text 3", "Output for Text 3:" -> 3; anything else -> 0.
std::size_t header_slot(std::string_view s) {
    if (text::starts_with_icase(s, "output for ")) s = text::trim(s.substr(11));
    if (!text::starts_with_icase(s, "text ")) return 0;
    s = text::trim(s.substr(5));
    std::size_t digits = 0;
    while (digits < s.size() && std::isdigit(static_cast<unsigned char>(s[digits]))) ++digits;
    if (digits == 0 || digits > 3) return 0;
    std::string_view rest = text::trim(s.substr(digits));
    if (!(rest.empty() || rest == ":" || rest == ")" || rest == ".")) return 0;
    return static_cast<std::size_t>(std::stoul(std::string(s.substr(0, digits))));
}

std::optional<std::string_view> after_label(std::string_view s, std::string_view label) {
    if (!text::starts_with_icase(s, label)) return std::nullopt;
    return text::trim(s.substr(label.size()));
}

bool all_digits(std::string_view s) {
    if (s.empty()) return false;
    for (char c : s)
        if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    return true;
}

int parse_rating_token(std::string_view raw, std::size_t slot) {
    std::string_view tok = raw;
    while (!tok.empty() && (tok.front() == '[' || tok.front() == '(' || tok.front() == '*')) tok.remove_prefix(1);
    auto space = tok.find_first_of(" \t");
    if (space != std::string_view::npos) tok = tok.substr(0, space);
    while (!tok.empty() && (tok.back() == ']' || tok.back() == ')' || tok.back() == '*' || tok.back() == ',' ||
                            tok.back() == '.' || tok.back() == ';'))
        tok.remove_suffix(1);
    if (tok.size() > 2 && tok.substr(tok.size() - 2) == "/5") tok.remove_suffix(2);
    if (!all_digits(tok) || tok.size() > 6)
        throw ParseError("Text " + std::to_string(slot) + ": rating \"" + std::string(raw) + "\" is not an integer");
    int value = std::stoi(std::string(tok));
    if (value < 1 || value > 5)
        throw RangeError("Text " + std::to_string(slot) + ": rating " + std::to_string(value) + " outside 1..5");
    return value;
}

} // namespace

std::vector<ParsedRating> parse_ratings(std::string_view response, std::size_t slots) {
    struct Slot {
        std::optional<std::string> token;
        std::string rationale;
    };
    std::vector<Slot> found(slots + 1);
    std::size_t current = 0;
    bool in_rationale = false;

    std::size_t pos = 0;
    while (pos <= response.size()) {
        auto nl = response.find('\n', pos);
        std::string_view raw = response.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? response.size() + 1 : nl + 1;

        const std::string line = clean_line(raw);
        if (std::size_t slot = header_slot(line)) {
            current = slot <= slots ? slot : 0;
            in_rationale = false;
            continue;
        }
        if (current == 0) continue;
        if (auto r = after_label(line, "rating:")) {
            if (!found[current].token) found[current].token = std::string(*r);
            in_rationale = false;
        } else if (auto why = after_label(line, "rationale:")) {
            found[current].rationale = std::string(*why);
            in_rationale = true;
        } else if (in_rationale && !line.empty()) {
            found[current].rationale += " " + line;
        }
    }

    std::vector<ParsedRating> out;
    for (std::size_t i = 1; i <= slots; ++i) {
        if (!found[i].token) throw ParseError("missing rating for Text " + std::to_string(i));
        out.push_back({parse_rating_token(*found[i].token, i), found[i].rationale});
    }
    return out;
}

std::string build_critique_prompt(const Instruction& instruction, const Completion& completion) {
    std::string p =
        "Given my answer to an instruction, your role is to provide specific and constructive feedback for me. "
        "You should find the best way for me to learn from your feedback and improve my performance. \n\n"
        "You should consider multiple aspects of my answer, including helpfulness, truthfulness, honesty, and to "
        "what extent the answer follows instructions.\n"
        "---\n\n"
        "### Instruction\n";
    p += instruction.text;
    p += "\n\n### Answer\n";
    p += completion.text;
    p +=
        "\n---\n\n"
        "Please act as a teacher and provide specific and constructive feedback. Besides describing the weaknesses "
        "of the answer, you should also provide specific suggestions to guide me toward understanding how to "
        "improve. Please note, however, that your suggestions should help me better complete the instructions, but "
        "you should not introduce new requirements that are not mentioned in the instructions. Your feedback should "
        "focus on enhancing my ability to think critically and respond accurately. However, never explicitly "
        "provide the reference answer, nor do polite phrases be required. Only respond with concise feedback in "
        "chat style. Finally, score the overall quality of the answer from 1 to 10, where 1 is the worst and 10 is "
        "the best.\n\n"
        "*Format*\n"
        "### Feedback\n"
        "[Your feedback]\n";
    p += markers::kCritiqueScoreLine;
    p += "\n\n---\n\n### Feedback\n";
    return p;
}

ParsedCritique parse_critique(std::string_view response) {
    // Collect line boundaries so feedback can be sliced out of the original text.
    std::vector<std::pair<std::size_t, std::size_t>> lines;
    for (std::size_t pos = 0; pos <= response.size();) {
        auto nl = response.find('\n', pos);
        std::size_t end = nl == std::string_view::npos ? response.size() : nl;
        lines.emplace_back(pos, end);
        pos = end + 1;
    }

    std::optional<std::size_t> score_line;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::string line = clean_line(response.substr(lines[i].first, lines[i].second - lines[i].first));
        if (text::starts_with_icase(line, "overall score:")) score_line = i;
    }
    if (!score_line) throw ParseError("critique has no \"Overall Score:\" line");

    const std::string line =
        clean_line(response.substr(lines[*score_line].first, lines[*score_line].second - lines[*score_line].first));
    std::string_view score_text = text::trim(std::string_view(line).substr(14));
    std::size_t i = 0;
    while (i < score_text.size() && std::isdigit(static_cast<unsigned char>(score_text[i]))) ++i;
    if (i == 0 || i > 6) throw ParseError("overall score \"" + std::string(score_text) + "\" is not a number");
    const int score = std::stoi(std::string(score_text.substr(0, i)));
    std::string_view rest = score_text.substr(i);
    if (!rest.empty() && rest.front() == '.') {
        std::size_t k = 1;
        while (k < rest.size() && std::isdigit(static_cast<unsigned char>(rest[k]))) ++k;
        if (k == 1) throw ParseError("overall score \"" + std::string(score_text) + "\" is malformed");
        rest = rest.substr(k);
    }
    rest = text::trim(rest);
    if (!(rest.empty() || rest == "/10" || rest == "/ 10" || rest == "." ))
        throw ParseError("overall score \"" + std::string(score_text) + "\" is malformed");
    if (score < 1 || score > 10) throw RangeError("overall score " + std::to_string(score) + " outside 1..10");

    std::size_t feedback_begin = 0;
    for (std::size_t k = 0; k < *score_line; ++k) {
        std::string_view raw = text::trim(response.substr(lines[k].first, lines[k].second - lines[k].first));
        if (text::starts_with_icase(raw, "### feedback")) feedback_begin = lines[k].second + 1;
    }
    const std::size_t feedback_end = lines[*score_line].first;
    std::string_view feedback =
        feedback_begin < feedback_end ? response.substr(feedback_begin, feedback_end - feedback_begin) : "";
    return {std::string(text::trim(feedback)), score};
}

namespace {

std::string failure_kind(const std::exception& e) {
    if (const auto* ce = dynamic_cast<const ChatError*>(&e)) return std::string(to_string(ce->kind()));
    if (dynamic_cast<const RangeError*>(&e)) return "range";
    return "parse";
}

} // namespace

GroupAnnotation annotate_group(const Instruction& instruction, std::span<const Completion> completions,
                               ChatClient& judge, const JudgeSettings& settings, AnnotationModes modes) {
    if (completions.size() != kGroupSize)
        throw ContractError("annotation group must hold exactly " + std::to_string(kGroupSize) + " completions");

    GroupAnnotation out;
    for (const auto& c : completions) out.records.push_back({c, {}, std::nullopt, false});

    const Decoding decoding{settings.temperature, settings.top_p, settings.max_tokens};

    if (modes.fine_grained) {
        std::map<RatingAspect, std::vector<ParsedRating>> by_aspect;
        for (RatingAspect aspect : kRatingAspects) {
            ++out.judge_calls;
            try {
                auto resp = judge.complete(make_request(settings.model, std::string(kFineGrainedSystemPrompt),
                                                        build_fine_grained_prompt(instruction, completions, aspect),
                                                        decoding));
                by_aspect[aspect] = parse_ratings(resp.text, kGroupSize);
            } catch (const ContractError&) {
                throw;
            } catch (const Error& e) {
                out.failures.push_back({instruction.id, std::string(to_string(aspect)), failure_kind(e), e.what()});
            }
        }
        for (std::size_t i = 0; i < kGroupSize; ++i) {
            auto& rec = out.records[i];
            for (RatingAspect aspect : kRatingAspects) {
                auto it = by_aspect.find(aspect);
                if (it == by_aspect.end()) continue;
                rec.ratings.push_back({aspect, it->second[i].rating, it->second[i].rationale});
            }
            if (rec.ratings.size() != kRatingAspects.size()) rec.incomplete = true;
        }
    }

    if (modes.critique) {
        for (std::size_t i = 0; i < kGroupSize; ++i) {
            auto& rec = out.records[i];
            ++out.judge_calls;
            try {
                auto resp = judge.complete(
                    make_request(settings.model, std::nullopt, build_critique_prompt(instruction, completions[i]),
                                 decoding));
                auto parsed = parse_critique(resp.text);
                rec.critique = Critique{instruction.id, completions[i].model, std::move(parsed.feedback),
                                        parsed.overall_score};
            } catch (const Error& e) {
                out.failures.push_back({instruction.id, completions[i].model, failure_kind(e), e.what()});
                rec.incomplete = true;
            }
        }
    }
    return out;
}

} // namespace feedforge
