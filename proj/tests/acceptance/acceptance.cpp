// Acceptance checks: one PASS/FAIL line per criterion, non-zero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "../support/corpus_gen.hpp"
#include "../support/fixture.hpp"
#include "../support/oracles.hpp"
#include "feedforge/annotate.hpp"
#include "feedforge/decontam.hpp"
#include "feedforge/errors.hpp"
#include "feedforge/pairs.hpp"
#include "feedforge/pipeline.hpp"
#include "feedforge/reward.hpp"
#include "feedforge/select_eval.hpp"
#include "feedforge/serialization.hpp"

namespace ff = feedforge;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool ok = true;
    std::string detail;

    void require(bool cond, const std::string& why) {
        if (!cond && ok) {
            ok = false;
            detail = why;
        }
    }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Outcome pair_builder_oracle() {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 g(1);
    for (int trial = 0; trial < 10000 && o.ok; ++trial) {
        std::vector<double> scores(4);
        // Means of four integer ratings, as the pipeline produces them.
        for (auto& s : scores) s = 1.0 + 0.25 * static_cast<double>(g() % 17);
        std::vector<ff::ScoredCompletion> group;
        for (std::size_t i = 0; i < 4; ++i) group.push_back({{"ins", std::to_string(i)}, "t", scores[i]});
        const auto pairs = ff::build_pairs(group, ff::kFineGrainedRange);
        std::set<std::tuple<std::size_t, std::size_t, double>> got;
        for (const auto& p : pairs) {
            o.require(p.margin > 0 && p.margin <= 1, "margin outside (0,1]");
            got.emplace(std::stoul(p.chosen.model), std::stoul(p.rejected.model), p.margin);
        }
        o.require(pairs.size() <= 6, "more than six pairs");
        o.require(got.size() == pairs.size(), "duplicate pairs");
        o.require(got == oracle::naive_pairs(scores, 1, 5), "mismatch with naive enumeration at trial " +
                                                               std::to_string(trial));
    }
    const double secs = seconds_since(t0);
    o.require(secs < 5.0, "took " + std::to_string(secs) + " s");
    if (o.ok) o.detail = "10000 groups in " + std::to_string(secs) + " s";
    return o;
}

Outcome loss_point_values() {
    Outcome o;
    o.require(std::abs(ff::ranking_loss(0, 0, 0) - std::log(2.0)) <= 1e-12, "loss(0) != ln 2");
    const double far = ff::ranking_loss(50, 0, 0);
    o.require(std::isfinite(far) && far < 1e-20, "loss(50) not below 1e-20");
    double prev = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 1000; ++i) {
        const double z = -50.0 + 100.0 * i / 1000.0;
        const double l = ff::ranking_loss(z, 0, 0);
        o.require(l < prev, "not strictly decreasing at z = " + std::to_string(z));
        prev = l;
    }
    return o;
}

Outcome gradient_fidelity() {
    Outcome o;
    std::mt19937_64 g(2);
    std::uniform_real_distribution<double> u(-1, 1), m01(0, 1);
    double worst = 0;
    for (int t = 0; t < 100; ++t) {
        const std::size_t d = 8;
        ff::RewardParams p = ff::RewardParams::zeros(d);
        std::vector<double> fc(d), fr(d);
        for (std::size_t i = 0; i < d; ++i) {
            p.weights[i] = u(g);
            fc[i] = u(g);
            fr[i] = u(g);
        }
        p.bias = u(g);
        const double m = m01(g);
        const auto grad = ff::loss_gradient(p, fc, fr, m);
        const auto fd = oracle::fd_gradient(p.weights, fc, fr, m, 1e-5);
        o.require(grad.bias == 0.0, "nonzero bias gradient");
        for (std::size_t i = 0; i < d; ++i)
            worst = std::max(worst, std::abs(grad.weights[i] - fd[i]) / std::max(1.0, std::abs(fd[i])));
    }
    o.require(worst <= 1e-6, "relative error " + std::to_string(worst));
    if (o.ok) {
        std::ostringstream s;
        s << "max relative error " << worst;
        o.detail = s.str();
    }
    return o;
}

Outcome desk_training() {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<double> w_star{1.0, -2.0, 0.5, 0.0, 1.5, -0.5, 2.0, 1.0};
    auto to_pairs = [](const std::vector<oracle::SyntheticPair>& raw) {
        std::vector<ff::FeaturePair> out;
        for (std::size_t i = 0; i < raw.size(); ++i)
            out.push_back({raw[i].chosen, raw[i].rejected, 0.0, std::to_string(i)});
        return out;
    };
    const auto train = to_pairs(oracle::separable_pairs(w_star, 2000, 1.0, 11));
    const auto held = to_pairs(oracle::separable_pairs(w_star, 500, 1.0, 12));
    ff::TrainConfig cfg;
    cfg.epochs = 200;
    cfg.batch_size = 64;
    cfg.lr_initial = 0.1;
    cfg.lr_final = 0.01;
    cfg.warmup_ratio = 0.03;
    cfg.seed = 13;
    const auto res = ff::train(train, cfg);
    const double acc = ff::pairwise_accuracy(res.params, held);
    const double secs = seconds_since(t0);
    o.require(acc >= 0.95, "held-out accuracy " + std::to_string(acc));
    o.require(secs < 10.0, "took " + std::to_string(secs) + " s");
    if (o.ok) o.detail = "held-out accuracy " + std::to_string(acc) + " in " + std::to_string(secs) + " s";
    return o;
}

Outcome decontamination_oracle() {
    Outcome o;
    auto index_of = [](const std::vector<std::string>& texts) {
        std::vector<ff::EvalText> evals;
        for (std::size_t i = 0; i < texts.size(); ++i) evals.push_back({"e" + std::to_string(i), texts[i]});
        return ff::build_index(evals, 13);
    };
    std::size_t flagged = 0, checked = 0;
    for (std::uint64_t seed = 0; seed < 200 && o.ok; ++seed) {
        const auto corpus = gen::random_corpus(1000 + seed);
        const auto idx = index_of(corpus.eval_texts);
        const auto grams = oracle::gram_set(corpus.eval_texts, 13);
        for (const auto& q : corpus.queries) {
            const bool got = ff::is_contaminated(q, idx).flagged;
            o.require(got == oracle::contaminated(q, grams, 13), "disagreement at corpus " + std::to_string(seed));
            if (oracle::ascii_tokens(q).size() < 13) o.require(!got, "short text flagged");
            flagged += got;
            ++checked;
        }
        // Growing the eval set never un-flags a query.
        std::vector<std::string> partial;
        std::vector<bool> before(corpus.queries.size(), false);
        for (const auto& e : corpus.eval_texts) {
            partial.push_back(e);
            const auto grown = index_of(partial);
            for (std::size_t q = 0; q < corpus.queries.size(); ++q) {
                const bool now = ff::is_contaminated(corpus.queries[q], grown).flagged;
                o.require(!(before[q] && !now), "not monotone at corpus " + std::to_string(seed));
                before[q] = now;
            }
        }
    }
    // Crafted cases.
    const std::string thirteen = "one two three four five six seven eight nine ten eleven twelve thirteen";
    const auto idx = index_of({thirteen});
    o.require(ff::is_contaminated("Intro: " + thirteen + "!", idx).flagged, "exact copy missed");
    o.require(ff::is_contaminated("ONE two, THREE four; five six seven eight nine ten eleven twelve thirteen", idx)
                  .flagged,
              "case/punctuation variant missed");
    o.require(!ff::is_contaminated("one two three four five six seven eight nine ten eleven twelve", idx).flagged,
              "12-token prefix flagged");
    o.require(flagged > 0 && flagged < checked, "random corpora never exercised both outcomes");
    if (o.ok) o.detail = std::to_string(checked) + " queries, " + std::to_string(flagged) + " flagged";
    return o;
}

Outcome best_of_n_checks() {
    Outcome o;
    std::mt19937_64 g(3);
    std::normal_distribution<double> normal;
    for (int t = 0; t < 1000 && o.ok; ++t) {
        ff::CandidatePool pool{"p", {}};
        const std::size_t size = 1 + g() % 16;
        for (std::size_t i = 0; i < size; ++i) pool.candidates.push_back({"c", std::round(normal(g) * 8) / 8});
        double prev = -std::numeric_limits<double>::infinity();
        for (std::size_t n = 1; n <= size; ++n) {
            const double r = ff::best_of_n(pool, n).reward;
            o.require(r >= prev, "prefix maximum decreased");
            prev = r;
        }
        std::size_t arg = 0;
        for (std::size_t i = 1; i < size; ++i)
            if (*pool.candidates[i].reward > *pool.candidates[arg].reward) arg = i;
        o.require(ff::best_of_n(pool, size).index == arg, "full-pool pick is not the argmax");
    }
    // The published triple: best-of-1, -2 and -16 picks carry rewards -0.73, -0.10 and 0.42.
    std::vector<double> rewards = {-0.73, -0.10};
    for (int i = 2; i < 16; ++i) rewards.push_back(i == 9 ? 0.42 : -0.9 + 0.05 * i);
    ff::CandidatePool pool{"t8", {}};
    for (double r : rewards) pool.candidates.push_back({"c", r});
    const double r1 = ff::best_of_n(pool, 1).reward;
    const double r2 = ff::best_of_n(pool, 2).reward;
    const double r16 = ff::best_of_n(pool, 16).reward;
    o.require(r1 == -0.73 && r2 == -0.10 && r16 == 0.42, "published triple not reproduced");
    o.require(r1 < r2 && r2 < r16, "triple not increasing");
    return o;
}

Outcome position_bias() {
    Outcome o;
    std::vector<ff::Match> matches;
    for (int i = 0; i < 1000; ++i)
        matches.push_back({"m" + std::to_string(i), "Question " + std::to_string(i), "answer a", "answer b"});
    ff::MockClient judge(4, ff::JudgePolicy::always_first);
    const auto rep = ff::win_rate_eval(matches, judge, {}, 20231002, 8);
    const double band = 100.0 * 3.0 * std::sqrt(0.25 / 1000.0);
    o.require(rep.invalid == 0, "invalid matches");
    o.require(std::abs(rep.win_pct - 50.0) <= band, "win% " + std::to_string(rep.win_pct));
    if (o.ok) o.detail = "win% " + std::to_string(rep.win_pct) + " (band 50 +/- " + std::to_string(band) + ")";
    return o;
}

std::size_t count_lines(const fs::path& p) {
    std::size_t n = 0;
    ff::read_jsonl(p, [&](const ff::json&, std::size_t) { ++n; });
    return n;
}

Outcome fixture_pipeline() {
    Outcome o;
    const fs::path base = fs::temp_directory_path() / "ff_acceptance";
    std::vector<ff::PipelineConfig> cfgs;
    for (const char* run : {"one", "two"}) {
        auto cfg = ff::load_pipeline_config(fixture::make_copy(FF_FIXTURE_DIR, FF_DATA_DIR, base / run));
        std::ostringstream out, err;
        for (auto stage : ff::kStages) {
            const int code = ff::run_stage_guarded(stage, cfg, false, out, err);
            o.require(code == ff::kExitOk, std::string(stage) + " exited " + std::to_string(code) + ": " + err.str());
        }
        cfgs.push_back(cfg);
    }
    if (!o.ok) return o;
    const auto& cfg = cfgs[0];

    const auto stats = ff::json::parse(fixture::slurp(ff::artifact_path(cfg, "stats", "json")));
    o.require(stats["instructions"] == 20, "instructions " + stats["instructions"].dump());
    o.require(stats["convs"] == 80, "completions " + stats["convs"].dump());
    o.require(stats["min_ratings_per_completion"] == 4 && stats["max_ratings_per_completion"] == 4,
              "ratings per completion not all 4");

    // Predict the pair count from the ratings the mock embeds, without the annotate stage.
    std::vector<ff::Instruction> instructions;
    ff::read_jsonl(ff::artifact_path(cfg, "decontam"),
                   [&](const ff::json& j, std::size_t) { instructions.push_back(ff::instruction_from_json(j)); });
    std::map<std::string, std::vector<ff::Completion>> groups;
    ff::read_jsonl(ff::artifact_path(cfg, "generate"), [&](const ff::json& j, std::size_t) {
        auto c = ff::completion_from_json(j);
        groups[c.instruction_id].push_back(c);
    });
    const auto& js = cfg.judge.settings;
    std::size_t predicted = 0;
    for (const auto& ins : instructions) {
        const auto& group = groups[ins.id];
        std::vector<int> sums(group.size(), 0);
        for (auto aspect : ff::kRatingAspects) {
            auto req = ff::make_request(js.model, std::string(ff::kFineGrainedSystemPrompt),
                                        ff::build_fine_grained_prompt(ins, group, aspect),
                                        {js.temperature, js.top_p, js.max_tokens});
            const auto r = ff::mock_fine_grained_ratings(req, cfg.seed);
            for (std::size_t i = 0; i < group.size(); ++i) sums[i] += r[i];
        }
        for (std::size_t i = 0; i < sums.size(); ++i)
            for (std::size_t j = i + 1; j < sums.size(); ++j) predicted += sums[i] != sums[j];
    }
    const std::size_t actual = count_lines(ff::artifact_path(cfg, "pairs"));
    o.require(actual == predicted,
              "pairs " + std::to_string(actual) + " but tie rule predicts " + std::to_string(predicted));
    o.require(stats["comparisons"] == actual, "stats comparisons disagree with pairs artifact");

    o.require(fixture::snapshot(cfgs[0].store_dir) == fixture::snapshot(cfgs[1].store_dir),
              "two runs are not byte-identical");
    if (o.ok) o.detail = "80 completions, " + std::to_string(actual) + " pairs, runs identical";
    return o;
}

template <typename E, typename Fn>
bool throws(Fn&& fn) {
    try {
        fn();
    } catch (const E&) {
        return true;
    } catch (...) {
        return false;
    }
    return false;
}

Outcome parser_bounds() {
    Outcome o;
    auto block = [](int bad) {
        std::string s;
        for (int i = 1; i <= 4; ++i)
            s += "Text " + std::to_string(i) + ":\nRating: " + std::to_string(i == 2 ? bad : 3) + "\nRationale: r\n";
        return s;
    };
    o.require(throws<ff::RangeError>([&] { ff::parse_ratings(block(0)); }), "rating 0 accepted");
    o.require(throws<ff::RangeError>([&] { ff::parse_ratings(block(6)); }), "rating 6 accepted");
    o.require(throws<ff::RangeError>([] { ff::parse_critique("### Feedback\nx\nOverall Score: 0"); }),
              "score 0 accepted");
    o.require(throws<ff::RangeError>([] { ff::parse_critique("### Feedback\nx\nOverall Score: 11"); }),
              "score 11 accepted");

    std::size_t round_trips = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        auto ins = ff::make_instruction(ff::SourceTag::custom, "Instruction number " + std::to_string(seed));
        std::vector<ff::Completion> group;
        for (int i = 0; i < 4; ++i)
            group.push_back({ins.id, "m" + std::to_string(i), ff::PrincipleAspect::honesty, "",
                             "response " + std::to_string(seed * 4 + i), {}, 2});
        for (auto aspect : ff::kRatingAspects) {
            auto req = ff::make_request("judge", std::string(ff::kFineGrainedSystemPrompt),
                                        ff::build_fine_grained_prompt(ins, group, aspect), {0, 1, 1024});
            const auto expected = ff::mock_fine_grained_ratings(req, seed);
            const auto parsed = ff::parse_ratings(ff::mock_generate(req, seed).text);
            for (std::size_t i = 0; i < 4; ++i) o.require(parsed[i].rating == expected[i], "rating round trip");
            ++round_trips;
        }
        for (const auto& c : group) {
            auto req = ff::make_request("judge", std::nullopt, ff::build_critique_prompt(ins, c), {0, 1, 1024});
            o.require(ff::parse_critique(ff::mock_generate(req, seed).text).overall_score ==
                          ff::mock_overall_score(req, seed),
                      "critique round trip");
            ++round_trips;
        }
    }
    if (o.ok) o.detail = std::to_string(round_trips) + " mock responses round-tripped";
    return o;
}

Outcome arithmetic_constants() {
    Outcome o;
    using namespace ff::reference_counts;
    o.require(6 * kInstructions == 383'802, "6 x instructions");
    o.require(6 * kInstructions >= kUltraPairs, "comparison count exceeds six per instruction");
    o.require(kUltraPairs + kShpPairs + kSummarizePairs + kHelpfulPairs == kMixedTotal, "mixture total");
    return o;
}

} // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"pair builder matches naive enumeration", pair_builder_oracle},
        {"ranking loss point values", loss_point_values},
        {"analytic gradient matches finite differences", gradient_fidelity},
        {"desk-scale training on separable data", desk_training},
        {"decontamination matches brute force", decontamination_oracle},
        {"best-of-n selection", best_of_n_checks},
        {"position-bias cancellation", position_bias},
        {"fixture pipeline end to end", fixture_pipeline},
        {"parser bounds and mock round trip", parser_bounds},
        {"reference count arithmetic", arithmetic_constants},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::printf("%s %2zu %s%s%s\n", o.ok ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.empty() ? "" : ": ",
                    o.detail.c_str());
        failed += !o.ok;
    }
    return failed == 0 ? 0 : 1;
}
