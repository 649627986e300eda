#include <gtest/gtest.h>

#include <string>
#include <vector>

#include "../support/corpus_gen.hpp"
#include "../support/oracles.hpp"
#include "feedforge/decontam.hpp"

namespace ff = feedforge;

namespace {

ff::NGramIndex index_of(const std::vector<std::string>& texts, std::size_t n = 13) {
    std::vector<ff::EvalText> evals;
    for (std::size_t i = 0; i < texts.size(); ++i) evals.push_back({"eval" + std::to_string(i), texts[i]});
    return ff::build_index(evals, n);
}

std::string words(std::size_t n, const std::string& stem = "w") {
    std::string s;
    for (std::size_t i = 0; i < n; ++i) s += (i ? " " : "") + stem + std::to_string(i);
    return s;
}

} // namespace

TEST(Normalize, LowercasesAndSplitsOnPunctuation) {
    EXPECT_EQ(ff::normalize_tokens("Hello, WORLD!  it's 42."),
              (std::vector<std::string>{"hello", "world", "it", "s", "42"}));
    EXPECT_TRUE(ff::normalize_tokens(" \t\n!!").empty());
}

TEST(Normalize, NonAsciiRule) {
    EXPECT_EQ(ff::normalize_tokens("Ärger Über ÉCOLE"), (std::vector<std::string>{"ärger", "über", "école"}));
    EXPECT_EQ(ff::normalize_tokens("ΑΒΓ ДОМ"), (std::vector<std::string>{"αβγ", "дом"}));
    // Symbols and CJK punctuation separate; CJK ideographs stay as letters.
    EXPECT_EQ(ff::normalize_tokens("a×b÷c"), (std::vector<std::string>{"a", "b", "c"}));
    EXPECT_EQ(ff::normalize_tokens("你好。世界"), (std::vector<std::string>{"你好", "世界"}));
    EXPECT_EQ(ff::normalize_tokens("ok😀fine"), (std::vector<std::string>{"ok", "fine"}));
    EXPECT_EQ(ff::normalize_tokens("a b c"), (std::vector<std::string>{"a", "b", "c"}));
}

TEST(NGramIndex, CountsGramsAndSources) {
    auto idx = index_of({words(13), words(15, "v")});
    EXPECT_EQ(idx.source_count(), 2u);
    EXPECT_EQ(idx.gram_count(), 1u + 3u);
    EXPECT_EQ(idx.n(), 13u);
}

TEST(Contamination, ExactSpanIsFlaggedWithItsGram) {
    auto idx = index_of({words(20)});
    auto check = ff::is_contaminated("prefix " + words(13) + " suffix", idx);
    EXPECT_TRUE(check.flagged);
    ASSERT_EQ(check.matches.size(), 1u);
    EXPECT_EQ(check.matches[0], words(13));
    EXPECT_EQ(check.eval_tags[0], "eval0");
}

TEST(Contamination, TwelveSharedTokensAreNotEnough) {
    auto idx = index_of({words(20)});
    EXPECT_FALSE(ff::is_contaminated(words(12), idx).flagged);
    EXPECT_FALSE(ff::is_contaminated("a b c " + words(12), idx).flagged);
}

TEST(Contamination, CaseAndPunctuationDoNotHideOverlap) {
    auto idx = index_of({"The quick brown fox jumps over the lazy dog while the cat sleeps soundly today"});
    EXPECT_TRUE(ff::is_contaminated("THE QUICK, brown fox -- jumps over the lazy dog; while the cat sleeps!", idx)
                    .flagged);
}

TEST(Contamination, ShortTextNeverFlagged) {
    auto idx = index_of({words(13)});
    for (std::size_t n = 0; n < 13; ++n) EXPECT_FALSE(ff::is_contaminated(words(n), idx).flagged);
}

TEST(Contamination, AgreesWithBruteForceOracle) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        auto corpus = gen::random_corpus(seed);
        auto idx = index_of(corpus.eval_texts);
        auto grams = oracle::gram_set(corpus.eval_texts, 13);
        for (const auto& q : corpus.queries)
            ASSERT_EQ(ff::is_contaminated(q, idx).flagged, oracle::contaminated(q, grams, 13))
                << "seed " << seed << " query: " << q;
    }
}

TEST(Contamination, MonotoneUnderEvalGrowth) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        auto corpus = gen::random_corpus(seed);
        std::vector<std::string> evals;
        std::vector<bool> before(corpus.queries.size(), false);
        for (const auto& e : corpus.eval_texts) {
            evals.push_back(e);
            auto idx = index_of(evals);
            for (std::size_t q = 0; q < corpus.queries.size(); ++q) {
                bool now = ff::is_contaminated(corpus.queries[q], idx).flagged;
                ASSERT_FALSE(before[q] && !now);
                before[q] = now;
            }
        }
    }
}

TEST(Contamination, SmallerGramSizeSupported) {
    auto idx = index_of({"alpha beta gamma"}, 2);
    EXPECT_TRUE(ff::is_contaminated("x beta GAMMA y", idx).flagged);
    EXPECT_FALSE(ff::is_contaminated("gamma beta", idx).flagged);
}

TEST(FilterPool, RemovesFlaggedAndReports) {
    auto idx = index_of({words(14)});
    std::vector<ff::Instruction> pool = {
        ff::make_instruction(ff::SourceTag::custom, "clean instruction"),
        ff::make_instruction(ff::SourceTag::custom, "copy: " + words(14)),
        ff::make_instruction(ff::SourceTag::custom, "another clean one"),
    };
    auto out = ff::filter_pool(pool, idx);
    ASSERT_EQ(out.clean.size(), 2u);
    EXPECT_EQ(out.report.removed_count, 1u);
    ASSERT_EQ(out.report.flagged.size(), 2u); // two distinct 13-grams inside 14 tokens
    EXPECT_EQ(out.report.flagged[0].instruction_id, pool[1].id);
}
