#include "feedforge/pairs.hpp"

#include <cmath>

#include "feedforge/errors.hpp"
#include "feedforge/hash.hpp"

namespace feedforge {

std::string_view to_string(ScoreMode mode) { return mode == ScoreMode::overall ? "overall" : "fine_grained"; }

ScoreRange range_for(ScoreMode mode) { return mode == ScoreMode::overall ? kOverallRange : kFineGrainedRange; }

double aggregate_score(std::span<const AspectRating> ratings) {
    if (ratings.size() != kRatingAspects.size())
        throw ContractError("aggregate_score needs exactly one rating per aspect, got " +
                            std::to_string(ratings.size()));
    std::set<RatingAspect> seen;
    int sum = 0;
    for (const auto& r : ratings) {
        if (!seen.insert(r.aspect).second)
            throw ContractError("duplicate rating for aspect " + std::string(to_string(r.aspect)));
        sum += r.rating;
    }
    return static_cast<double>(sum) / static_cast<double>(ratings.size());
}

PreferenceScore aggregate_score(const CompletionRef& ref, std::span<const AspectRating> ratings) {
    return {ref, ScoreMode::fine_grained, aggregate_score(ratings)};
}

std::string pair_id(std::string_view instruction_id, std::string_view chosen_model, std::string_view rejected_model) {
    std::string key(instruction_id);
    key.push_back('\0');
    key.append(chosen_model);
    key.push_back('\0');
    key.append(rejected_model);
    return digest128_hex(key);
}

std::vector<ComparisonPair> build_pairs(std::span<const ScoredCompletion> group, ScoreRange range,
                                        TiePolicy ties) {
    if (group.size() > kGroupSize) throw ContractError("comparison groups hold at most four completions");
    if (!(range.width() > 0)) throw ContractError("score range must have positive width");
    for (const auto& c : group)
        if (!(c.score >= range.min && c.score <= range.max))
            throw ContractError("score " + std::to_string(c.score) + " of " + c.ref.model + " outside range");

    std::vector<ComparisonPair> out;
    for (std::size_t i = 0; i < group.size(); ++i) {
        for (std::size_t j = i + 1; j < group.size(); ++j) {
            const auto& a = group[i];
            const auto& b = group[j];
            if (a.score == b.score && ties == TiePolicy::drop) continue;
            const bool a_wins = a.score >= b.score;
            const auto& c = a_wins ? a : b;
            const auto& r = a_wins ? b : a;
            ComparisonPair p;
            p.instruction_id = c.ref.instruction_id;
            p.chosen = c.ref;
            p.rejected = r.ref;
            p.chosen_text = c.text;
            p.rejected_text = r.text;
            p.margin = std::abs(c.score - r.score) / range.width();
            p.id = pair_id(p.instruction_id, c.ref.model, r.ref.model);
            out.push_back(std::move(p));
        }
    }
    return out;
}

std::vector<ExternalPair> load_external_pairs(const std::filesystem::path& path, std::vector<LineIssue>* issues) {
    std::vector<ExternalPair> out;
    auto skipped = read_jsonl(path, [&](const json& rec, std::size_t) {
        for (const char* field : {"chosen", "rejected", "tag"})
            if (!rec.contains(field) || !rec[field].is_string())
                throw ParseError(std::string("missing string field \"") + field + "\"");
        ExternalPair p{rec["chosen"].get<std::string>(), rec["rejected"].get<std::string>(),
                       rec["tag"].get<std::string>(), rec.value("prompt", std::string())};
        out.push_back(std::move(p));
    });
    if (issues) issues->insert(issues->end(), skipped.begin(), skipped.end());
    return out;
}

PairStore mix_datasets(std::vector<ComparisonPair> ultra, std::span<const ExternalPair> external,
                       const std::set<std::string>& allowed_tags) {
    PairStore store;
    store.pairs = std::move(ultra);
    for (const auto& e : external) {
        if (!allowed_tags.contains(e.tag)) throw ConfigError("unknown external dataset tag \"" + e.tag + "\"");
        ComparisonPair p;
        p.dataset_tag = e.tag;
        p.prompt = e.prompt;
        p.instruction_id = e.prompt.empty() ? "" : digest128_hex(std::string("external") + '\0' + e.prompt);
        p.chosen_text = e.chosen;
        p.rejected_text = e.rejected;
        p.margin = 0.0;
        p.id = digest128_hex(e.tag + '\0' + e.prompt + '\0' + e.chosen + '\0' + e.rejected);
        store.pairs.push_back(std::move(p));
    }
    for (const auto& p : store.pairs) ++store.per_tag[p.dataset_tag];
    return store;
}

} // namespace feedforge
