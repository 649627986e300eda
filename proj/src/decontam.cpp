#include "feedforge/decontam.hpp"

#include <set>
#include <unordered_set>

#include "feedforge/errors.hpp"
#include "feedforge/hash.hpp"
#include "feedforge/text.hpp"

namespace feedforge {

namespace {

char32_t fold_case(char32_t cp) {
    if (cp >= 'A' && cp <= 'Z') return cp + 0x20;
    if (cp >= 0xc0 && cp <= 0xde && cp != 0xd7) return cp + 0x20;
    if (cp >= 0x391 && cp <= 0x3a9 && cp != 0x3a2) return cp + 0x20;
    if (cp >= 0x410 && cp <= 0x42f) return cp + 0x20;
    if (cp >= 0x400 && cp <= 0x40f) return cp + 0x50;
    return cp;
}

bool is_alnum(char32_t cp) {
    if (cp < 0x80) return (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z') || (cp >= '0' && cp <= '9');
    if (text::is_space(cp)) return false;
    if (cp <= 0xbf || cp == 0xd7 || cp == 0xf7) return false;
    if (cp >= 0x2000 && cp <= 0x2bff) return false;
    if (cp >= 0x3000 && cp <= 0x303f) return false;
    if (cp >= 0xfe10 && cp <= 0xfe6f) return false;
    if ((cp >= 0xff00 && cp <= 0xff0f) || (cp >= 0xff1a && cp <= 0xff20) || (cp >= 0xff3b && cp <= 0xff40) ||
        (cp >= 0xff5b && cp <= 0xff65))
        return false;
    if (cp == 0xfffd) return false;
    if (cp >= 0x1f000 && cp <= 0x1faff) return false;
    return true;
}

} // namespace

std::vector<std::string> normalize_tokens(std::string_view input) {
    std::vector<std::string> tokens;
    std::string current;
    for (char32_t cp : text::decode_utf8(input)) {
        if (is_alnum(cp)) {
            text::append_utf8(current, fold_case(cp));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

std::vector<EvalText> load_eval_texts(const std::filesystem::path& path, std::vector<LineIssue>* issues) {
    std::vector<EvalText> out;
    auto skipped = read_jsonl(path, [&](const json& rec, std::size_t) {
        if (!rec.contains("tag") || !rec["tag"].is_string()) throw ParseError("missing string field \"tag\"");
        if (!rec.contains("text") || !rec["text"].is_string()) throw ParseError("missing string field \"text\"");
        out.push_back({rec["tag"].get<std::string>(), rec["text"].get<std::string>()});
    });
    if (issues) issues->insert(issues->end(), skipped.begin(), skipped.end());
    return out;
}

namespace detail {
std::uint64_t token_hash(std::string_view token) { return mix64(fnv1a64(token)); }
} // namespace detail

NGramIndex::NGramIndex(std::size_t n) : n_(n) {
    if (n == 0) throw ContractError("n-gram size must be at least 1");
    for (std::size_t i = 1; i < n; ++i) lead_power_ *= detail::kWindowBase;
}

std::string join_tokens(std::span<const std::string> tokens, std::size_t first, std::size_t count) {
    std::string out;
    for (std::size_t i = first; i < first + count; ++i) {
        if (i != first) out.push_back(' ');
        out += tokens[i];
    }
    return out;
}

void NGramIndex::add(std::string_view tag, std::string_view text) {
    ++source_count_;
    const auto tokens = normalize_tokens(text);
    for_each_window(tokens, [&](std::uint64_t h, std::size_t first) {
        auto& bucket = buckets_[h];
        std::string gram = join_tokens(tokens, first, n_);
        for (const auto& e : bucket)
            if (e.gram == gram) return;
        bucket.push_back({std::move(gram), std::string(tag)});
        ++gram_count_;
    });
}

const std::string* NGramIndex::find(std::string_view gram, std::uint64_t hash) const {
    auto it = buckets_.find(hash);
    if (it == buckets_.end()) return nullptr;
    for (const auto& e : it->second)
        if (e.gram == gram) return &e.tag;
    return nullptr;
}

NGramIndex build_index(std::span<const EvalText> eval_texts, std::size_t n) {
    NGramIndex index(n);
    for (const auto& e : eval_texts) index.add(e.tag, e.text);
    return index;
}

ContaminationCheck is_contaminated(std::string_view text, const NGramIndex& index) {
    ContaminationCheck check;
    const auto tokens = normalize_tokens(text);
    std::unordered_set<std::string> seen;
    index.for_each_window(tokens, [&](std::uint64_t h, std::size_t first) {
        if (!index.contains_hash(h)) return;
        std::string gram = join_tokens(tokens, first, index.n());
        if (const std::string* tag = index.find(gram, h)) {
            if (seen.insert(gram).second) {
                check.matches.push_back(std::move(gram));
                check.eval_tags.push_back(*tag);
            }
        }
    });
    check.flagged = !check.matches.empty();
    return check;
}

FilteredPool filter_pool(std::span<const Instruction> pool, const NGramIndex& index) {
    FilteredPool out;
    std::set<std::string> removed;
    for (const auto& ins : pool) {
        auto check = is_contaminated(ins.text, index);
        if (!check.flagged) {
            out.clean.push_back(ins);
            continue;
        }
        removed.insert(ins.id);
        for (std::size_t i = 0; i < check.matches.size(); ++i)
            out.report.flagged.push_back({ins.id, check.matches[i], check.eval_tags[i]});
    }
    out.report.removed_count = removed.size();
    return out;
}

} // namespace feedforge
