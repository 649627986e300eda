#include "feedforge/serialization.hpp"

#include "feedforge/errors.hpp"

namespace feedforge {

namespace {

PrincipleAspect principle_aspect_of(const json& j) {
    const auto name = j.get<std::string>();
    auto a = parse_principle_aspect(name);
    if (!a) throw ParseError("unknown principle aspect \"" + name + "\"");
    return *a;
}

RatingAspect rating_aspect_of(const json& j) {
    const auto name = j.get<std::string>();
    auto a = parse_rating_aspect(name);
    if (!a) throw ParseError("unknown rating aspect \"" + name + "\"");
    return *a;
}

Verdict verdict_of(const std::string& s) {
    if (s == "win") return Verdict::win;
    if (s == "tie") return Verdict::tie;
    if (s == "lose") return Verdict::lose;
    throw ParseError("unknown verdict \"" + s + "\"");
}

PositionalVerdict positional_of(const std::string& s) {
    if (s == "A") return PositionalVerdict::first;
    if (s == "B") return PositionalVerdict::second;
    if (s == "Tie") return PositionalVerdict::tie;
    throw ParseError("unknown positional verdict \"" + s + "\"");
}

json ref_json(const CompletionRef& r) { return {{"instruction_id", r.instruction_id}, {"model", r.model}}; }

CompletionRef ref_from(const json& j) {
    return {j.at("instruction_id").get<std::string>(), j.at("model").get<std::string>()};
}

} // namespace

json to_json(const Decoding& d) {
    return {{"temperature", d.temperature}, {"top_p", d.top_p}, {"max_tokens", d.max_tokens}};
}

Decoding decoding_from_json(const json& j) {
    Decoding d;
    d.temperature = j.value("temperature", d.temperature);
    d.top_p = j.value("top_p", d.top_p);
    d.max_tokens = j.value("max_tokens", d.max_tokens);
    return d;
}

json to_json(const Completion& c) {
    return {
        {"instruction_id", c.instruction_id},
        {"model", c.model},
        {"principle_aspect", to_string(c.principle_aspect)},
        {"system_prompt", c.system_prompt},
        {"text", c.text},
        {"decoding", to_json(c.decoding)},
        {"token_count", c.token_count},
    };
}

Completion completion_from_json(const json& j) {
    Completion c;
    c.instruction_id = j.at("instruction_id").get<std::string>();
    c.model = j.at("model").get<std::string>();
    c.principle_aspect = principle_aspect_of(j.at("principle_aspect"));
    c.system_prompt = j.at("system_prompt").get<std::string>();
    c.text = j.at("text").get<std::string>();
    c.decoding = decoding_from_json(j.at("decoding"));
    c.token_count = j.at("token_count").get<std::size_t>();
    return c;
}

json to_json(const AspectRating& r) {
    return {{"aspect", to_string(r.aspect)}, {"rating", r.rating}, {"rationale", r.rationale}};
}

AspectRating aspect_rating_from_json(const json& j) {
    AspectRating r;
    r.aspect = rating_aspect_of(j.at("aspect"));
    r.rating = j.at("rating").get<int>();
    if (r.rating < 1 || r.rating > 5) throw RangeError("rating " + std::to_string(r.rating) + " outside 1..5");
    r.rationale = j.at("rationale").get<std::string>();
    return r;
}

json to_json(const Critique& c) {
    return {{"instruction_id", c.instruction_id},
            {"model", c.model},
            {"feedback", c.feedback},
            {"overall_score", c.overall_score}};
}

Critique critique_from_json(const json& j) {
    Critique c;
    c.instruction_id = j.at("instruction_id").get<std::string>();
    c.model = j.at("model").get<std::string>();
    c.feedback = j.at("feedback").get<std::string>();
    c.overall_score = j.at("overall_score").get<int>();
    if (c.overall_score < 1 || c.overall_score > 10)
        throw RangeError("overall score " + std::to_string(c.overall_score) + " outside 1..10");
    return c;
}

json to_json(const AnnotatedCompletion& a) {
    json ratings = json::array();
    for (const auto& r : a.ratings) ratings.push_back(to_json(r));
    return {
        {"completion", to_json(a.completion)},
        {"ratings", std::move(ratings)},
        {"critique", a.critique ? to_json(*a.critique) : json(nullptr)},
        {"incomplete", a.incomplete},
    };
}

AnnotatedCompletion annotated_from_json(const json& j) {
    AnnotatedCompletion a;
    a.completion = completion_from_json(j.at("completion"));
    for (const auto& r : j.at("ratings")) a.ratings.push_back(aspect_rating_from_json(r));
    if (j.contains("critique") && !j["critique"].is_null()) a.critique = critique_from_json(j["critique"]);
    a.incomplete = j.value("incomplete", false);
    return a;
}

json to_json(const ComparisonPair& p) {
    return {
        {"id", p.id},
        {"instruction_id", p.instruction_id},
        {"chosen", ref_json(p.chosen)},
        {"rejected", ref_json(p.rejected)},
        {"chosen_text", p.chosen_text},
        {"rejected_text", p.rejected_text},
        {"margin", p.margin},
        {"dataset_tag", p.dataset_tag},
        {"prompt", p.prompt},
    };
}

ComparisonPair pair_from_json(const json& j) {
    ComparisonPair p;
    p.id = j.at("id").get<std::string>();
    p.instruction_id = j.at("instruction_id").get<std::string>();
    p.chosen = ref_from(j.at("chosen"));
    p.rejected = ref_from(j.at("rejected"));
    p.chosen_text = j.at("chosen_text").get<std::string>();
    p.rejected_text = j.at("rejected_text").get<std::string>();
    p.margin = j.at("margin").get<double>();
    if (!(p.margin >= 0 && p.margin <= 1)) throw RangeError("pair margin outside [0, 1]");
    p.dataset_tag = j.at("dataset_tag").get<std::string>();
    p.prompt = j.value("prompt", std::string());
    return p;
}

json to_json(const FlaggedGram& g) {
    return {{"instruction_id", g.instruction_id}, {"gram", g.gram}, {"eval_tag", g.eval_tag}};
}

json to_json(const CandidatePool& p) {
    json cands = json::array();
    for (const auto& c : p.candidates)
        cands.push_back({{"text", c.text}, {"reward", c.reward ? json(*c.reward) : json(nullptr)}});
    return {{"instruction_id", p.instruction_id}, {"candidates", std::move(cands)}};
}

CandidatePool candidate_pool_from_json(const json& j) {
    CandidatePool p;
    p.instruction_id = j.at("instruction_id").get<std::string>();
    for (const auto& c : j.at("candidates")) {
        Candidate cand;
        cand.text = c.at("text").get<std::string>();
        if (c.contains("reward") && !c["reward"].is_null()) cand.reward = c["reward"].get<double>();
        p.candidates.push_back(std::move(cand));
    }
    if (p.candidates.empty()) throw ParseError("candidate pool " + p.instruction_id + " is empty");
    return p;
}

json to_json(const MatchOutcome& m) {
    return {
        {"instruction_id", m.instruction_id},
        {"verdict", m.valid ? json(to_string(m.verdict)) : json(nullptr)},
        {"positions_swapped", m.positions_swapped},
        {"positional_verdict", m.positional ? json(to_string(*m.positional)) : json(nullptr)},
        {"judge_raw", m.judge_raw},
        {"valid", m.valid},
        {"error", m.error},
    };
}

MatchOutcome match_outcome_from_json(const json& j) {
    MatchOutcome m;
    m.instruction_id = j.at("instruction_id").get<std::string>();
    m.valid = j.at("valid").get<bool>();
    if (m.valid) m.verdict = verdict_of(j.at("verdict").get<std::string>());
    m.positions_swapped = j.at("positions_swapped").get<bool>();
    if (!j.at("positional_verdict").is_null()) m.positional = positional_of(j["positional_verdict"].get<std::string>());
    m.judge_raw = j.at("judge_raw").get<std::string>();
    m.error = j.value("error", std::string());
    return m;
}

json to_json(const Shortfall& s) {
    return {{"source", to_string(s.source)}, {"requested", s.requested}, {"taken", s.taken}};
}

} // namespace feedforge
