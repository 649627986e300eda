#include "feedforge/select_eval.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "feedforge/errors.hpp"
#include "feedforge/parallel.hpp"
#include "feedforge/prompt_markers.hpp"
#include "feedforge/rng.hpp"
#include "feedforge/text.hpp"

namespace feedforge {

Selection best_of_n(const CandidatePool& pool, std::size_t n, const RewardFn& scorer) {
    if (n == 0) throw ContractError("best_of_n needs n >= 1");
    if (n > pool.candidates.size())
        throw ContractError("best_of_n: n = " + std::to_string(n) + " exceeds pool of " +
                            std::to_string(pool.candidates.size()));
    Selection best;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& c = pool.candidates[i];
        double r;
        if (c.reward) r = *c.reward;
        else if (scorer) r = scorer(c.text);
        else throw ContractError("candidate " + std::to_string(i) + " has no reward and no scorer was given");
        if (i == 0 || r > best.reward) {
            best.index = i;
            best.reward = r;
        }
    }
    best.text = pool.candidates[best.index].text;
    return best;
}

std::vector<BonRow> best_of_n_curve(std::span<const CandidatePool> pools, std::span<const std::size_t> ns,
                                    const std::function<RewardFn(const CandidatePool&)>& scorer_for) {
    std::vector<BonRow> rows;
    std::vector<RewardFn> scorers;
    for (const auto& p : pools) scorers.push_back(scorer_for ? scorer_for(p) : RewardFn{});
    for (std::size_t n : ns) {
        BonRow row;
        row.n = n;
        double sum = 0;
        for (std::size_t k = 0; k < pools.size(); ++k) {
            const auto sel = best_of_n(pools[k], n, scorers[k]);
            sum += sel.reward;
            row.selected_ids.push_back(pools[k].instruction_id + "#" + std::to_string(sel.index));
        }
        row.mean_reward = pools.empty() ? 0.0 : sum / static_cast<double>(pools.size());
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string bon_curve_to_csv(std::span<const BonRow> rows) {
    std::ostringstream out;
    out.precision(17);
    out << "n,mean_reward,selected_id\n";
    for (const auto& r : rows) {
        out << r.n << ',' << r.mean_reward << ',';
        for (std::size_t i = 0; i < r.selected_ids.size(); ++i) out << (i ? ";" : "") << r.selected_ids[i];
        out << '\n';
    }
    return out.str();
}

std::string_view to_string(Verdict v) {
    switch (v) {
    case Verdict::win: return "win";
    case Verdict::tie: return "tie";
    case Verdict::lose: return "lose";
    }
    return "tie";
}

std::string_view to_string(PositionalVerdict v) {
    switch (v) {
    case PositionalVerdict::first: return "A";
    case PositionalVerdict::second: return "B";
    case PositionalVerdict::tie: return "Tie";
    }
    return "Tie";
}

namespace {

std::string strip_decoration(std::string_view line) {
    std::string s;
    for (char c : line)
        if (c != '*' && c != '[' && c != ']' && c != '"' && c != '\'' && c != '`') s.push_back(c);
    std::string lower = text::to_lower_ascii(text::trim(s));
    for (std::string_view prefix : {"final verdict:", "verdict:"})
        if (lower.starts_with(prefix)) lower = std::string(text::trim(std::string_view(lower).substr(prefix.size())));
    while (!lower.empty() && lower.back() == '.') lower.pop_back();
    return std::string(text::trim(lower));
}

std::vector<std::string_view> split_lines(std::string_view s) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start <= s.size()) {
        auto end = s.find('\n', start);
        if (end == std::string_view::npos) end = s.size();
        lines.push_back(s.substr(start, end - start));
        start = end + 1;
    }
    return lines;
}

bool has_word(std::string_view hay, std::string_view word) {
    for (auto pos = hay.find(word); pos != std::string_view::npos; pos = hay.find(word, pos + 1)) {
        const bool left = pos == 0 || !std::isalnum(static_cast<unsigned char>(hay[pos - 1]));
        const auto after = pos + word.size();
        const bool right = after == hay.size() || !std::isalnum(static_cast<unsigned char>(hay[after]));
        if (left && right) return true;
    }
    return false;
}

} // namespace

std::optional<PositionalVerdict> parse_verdict(std::string_view judge_text) {
    const auto lines = split_lines(judge_text);
    for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
        const auto s = strip_decoration(*it);
        if (s == "a") return PositionalVerdict::first;
        if (s == "b") return PositionalVerdict::second;
        if (s == "tie") return PositionalVerdict::tie;
    }
    for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
        const auto t = text::trim(*it);
        if (t.empty()) continue;
        const auto lower = text::to_lower_ascii(t);
        const bool a = has_word(lower, "response a");
        const bool b = has_word(lower, "response b");
        const bool tie = has_word(lower, "tie");
        if (a + b + tie != 1) return std::nullopt;
        if (a) return PositionalVerdict::first;
        if (b) return PositionalVerdict::second;
        return PositionalVerdict::tie;
    }
    return std::nullopt;
}

Verdict unswap(PositionalVerdict raw, bool positions_swapped) {
    if (raw == PositionalVerdict::tie) return Verdict::tie;
    const bool first_wins = raw == PositionalVerdict::first;
    return first_wins != positions_swapped ? Verdict::win : Verdict::lose;
}

std::string build_judge_prompt(std::string_view instruction, std::string_view first, std::string_view second) {
    std::string p;
    p += "Compare two AI assistant responses to the user instruction below.\n\n";
    p += "[Instruction]\n";
    p += instruction;
    p += "\n\n";
    p += markers::kJudgeStartA;
    p += "\n";
    p += first;
    p += "\n";
    p += markers::kJudgeEndA;
    p += "\n\n";
    p += markers::kJudgeStartB;
    p += "\n";
    p += second;
    p += "\n";
    p += markers::kJudgeEndB;
    p += "\n\n";
    p += "Judge which response follows the instruction better and is more helpful, accurate and honest. "
         "The order of the responses must not influence your judgment, nor should their length. "
         "Explain your reasoning briefly, then write your verdict alone on the last line: "
         "\"A\" if Response A is better, \"B\" if Response B is better, or \"Tie\".\n";
    return p;
}

bool match_swapped(std::uint64_t seed, std::size_t match_index) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(match_index)));
    return rng.coin();
}

WinRateReport win_rate_eval(std::span<const Match> matches, ChatClient& judge, const JudgeSettings& settings,
                            std::uint64_t seed, std::size_t concurrency) {
    WinRateReport report;
    report.outcomes.resize(matches.size());
    const Decoding decoding{settings.temperature, settings.top_p, settings.max_tokens};
    parallel_for(matches.size(), concurrency, [&](std::size_t i) {
        const auto& m = matches[i];
        auto& out = report.outcomes[i];
        out.instruction_id = m.instruction_id;
        out.positions_swapped = match_swapped(seed, i);
        const auto& first = out.positions_swapped ? m.response_b : m.response_a;
        const auto& second = out.positions_swapped ? m.response_a : m.response_b;
        try {
            auto resp = judge.complete(make_request(settings.model, std::nullopt,
                                                    build_judge_prompt(m.instruction, first, second), decoding));
            out.judge_raw = std::move(resp.text);
        } catch (const ChatError& e) {
            out.error = std::string(to_string(e.kind())) + ": " + e.what();
            return;
        }
        out.positional = parse_verdict(out.judge_raw);
        if (!out.positional) {
            out.error = "unparseable verdict";
            return;
        }
        out.verdict = unswap(*out.positional, out.positions_swapped);
        out.valid = true;
    });
    for (const auto& o : report.outcomes) {
        if (!o.valid) {
            ++report.invalid;
            continue;
        }
        if (o.verdict == Verdict::win) ++report.wins;
        else if (o.verdict == Verdict::tie) ++report.ties;
        else ++report.losses;
    }
    const std::size_t valid = report.wins + report.ties + report.losses;
    if (valid > 0) {
        const double d = static_cast<double>(valid);
        report.win_pct = 100.0 * static_cast<double>(report.wins) / d;
        report.tie_pct = 100.0 * static_cast<double>(report.ties) / d;
        report.lose_pct = 100.0 * static_cast<double>(report.losses) / d;
    }
    return report;
}

namespace {

template <typename T, typename Get>
double mean_tokens(std::span<const T> items, Get get) {
    if (items.empty()) return 0.0;
    double total = 0;
    for (const auto& it : items) total += static_cast<double>(text::count_tokens(get(it)));
    return total / static_cast<double>(items.size());
}

} // namespace

DatasetStats dataset_stats(std::span<const Instruction> instructions, std::span<const Completion> completions,
                           std::span<const Critique> critiques, std::span<const ComparisonPair> pairs) {
    DatasetStats s;
    s.instructions = instructions.size();
    s.convs = completions.size();
    s.comparisons = pairs.size();
    s.critiques = critiques.size();
    s.avg_instruction_tokens = mean_tokens(instructions, [](const Instruction& i) -> std::string_view { return i.text; });
    s.avg_completion_tokens = mean_tokens(completions, [](const Completion& c) -> std::string_view { return c.text; });
    s.avg_critique_tokens = mean_tokens(critiques, [](const Critique& c) -> std::string_view { return c.feedback; });
    return s;
}

json to_json(const DatasetStats& s) {
    return {
        {"instructions", s.instructions},
        {"convs", s.convs},
        {"comparisons", s.comparisons},
        {"critiques", s.critiques},
        {"avg_instruction_tokens", s.avg_instruction_tokens},
        {"avg_completion_tokens", s.avg_completion_tokens},
        {"avg_critique_tokens", s.avg_critique_tokens},
    };
}

} // namespace feedforge
