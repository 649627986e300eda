#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "feedforge/corpus.hpp"

namespace feedforge {

inline constexpr std::size_t kDefaultGramSize = 13;

/// Normalization shared by the index and the queries:
///  1. decode UTF-8;
///  2. lowercase ASCII, Latin-1, basic Greek and basic Cyrillic capitals;
///  3. replace every non-alphanumeric code point with a space. Non-alphanumeric
///     means ASCII other than [a-z0-9], Unicode whitespace, C1 controls and
///     Latin-1 symbols (U+0080..U+00BF, U+00D7, U+00F7), U+2000..U+2BFF,
///     U+3000..U+303F, U+FE10..U+FE6F, fullwidth ASCII punctuation, U+FFFD and
///     U+1F000..U+1FAFF. Every other code point counts as alphanumeric;
///  4. split on whitespace, dropping empty tokens.
std::vector<std::string> normalize_tokens(std::string_view text);

struct EvalText {
    std::string tag;
    std::string text;
};

// Eval sets are JSONL with "tag" and "text"; malformed lines are reported and skipped.
std::vector<EvalText> load_eval_texts(const std::filesystem::path& path, std::vector<LineIssue>* issues = nullptr);

/// Hash set of normalized n-token windows over the evaluation texts.
///
/// Windows hash with a rolling polynomial over per-token FNV-1a hashes. Each
/// bucket keeps the gram strings themselves, so a lookup only reports a match
/// after a string comparison; hash collisions cannot cause a false removal.
class NGramIndex {
public:
    explicit NGramIndex(std::size_t n = kDefaultGramSize);

    void add(std::string_view tag, std::string_view text);

    std::size_t n() const { return n_; }
    std::size_t gram_count() const { return gram_count_; }
    std::size_t source_count() const { return source_count_; }

    bool contains_hash(std::uint64_t hash) const { return buckets_.contains(hash); }

    // Tag of the first eval text that contributed gram, or nullptr when absent.
    const std::string* find(std::string_view gram, std::uint64_t hash) const;

    // Calls fn(window_hash, first_token_index) for every n-token window of tokens.
    template <typename Fn>
    void for_each_window(std::span<const std::string> tokens, Fn&& fn) const;

private:
    struct Entry {
        std::string gram;
        std::string tag;
    };

    std::size_t n_;
    std::uint64_t lead_power_ = 1; // base^(n-1)
    std::size_t gram_count_ = 0;
    std::size_t source_count_ = 0;
    std::unordered_map<std::uint64_t, std::vector<Entry>> buckets_;
};

// Joins tokens[first, first + count) with single spaces.
std::string join_tokens(std::span<const std::string> tokens, std::size_t first, std::size_t count);

NGramIndex build_index(std::span<const EvalText> eval_texts, std::size_t n = kDefaultGramSize);

struct ContaminationCheck {
    bool flagged = false;
    std::vector<std::string> matches;  // distinct, first-occurrence order
    std::vector<std::string> eval_tags; // parallel to matches
};

ContaminationCheck is_contaminated(std::string_view text, const NGramIndex& index);

struct FlaggedGram {
    std::string instruction_id;
    std::string gram;
    std::string eval_tag;
};

struct ContaminationReport {
    std::vector<FlaggedGram> flagged;
    std::size_t removed_count = 0;
};

struct FilteredPool {
    std::vector<Instruction> clean;
    ContaminationReport report;
};

FilteredPool filter_pool(std::span<const Instruction> pool, const NGramIndex& index);

// Implementation detail exposed for the template below.
namespace detail {
inline constexpr std::uint64_t kWindowBase = 0x100000001b3ULL * 2 + 1;
std::uint64_t token_hash(std::string_view token);
} // namespace detail

template <typename Fn>
void NGramIndex::for_each_window(std::span<const std::string> tokens, Fn&& fn) const {
    if (tokens.size() < n_) return;
    std::vector<std::uint64_t> th(tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i) th[i] = detail::token_hash(tokens[i]);
    std::uint64_t h = 0;
    for (std::size_t i = 0; i < n_; ++i) h = h * detail::kWindowBase + th[i];
    fn(h, std::size_t{0});
    for (std::size_t i = n_; i < tokens.size(); ++i) {
        h = (h - th[i - n_] * lead_power_) * detail::kWindowBase + th[i];
        fn(h, i - n_ + 1);
    }
}

} // namespace feedforge
