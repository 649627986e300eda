#pragma once

#include <cctype>
#include <random>
#include <string>
#include <vector>

namespace gen {

// Random ASCII corpora for decontamination checks: a small vocabulary makes
// accidental overlaps likely, and queries often splice eval spans with case
// and punctuation noise.
struct Corpus {
    std::vector<std::string> eval_texts;
    std::vector<std::string> queries;
};

inline Corpus random_corpus(std::uint64_t seed) {
    static const std::vector<std::string> vocab = {"the", "cat", "sat", "on", "mat", "dog", "ran", "far",
                                                   "up",  "hill", "42", "x1", "blue", "red", "sky", "sea"};
    static const std::vector<std::string> seps = {" ", "  ", ", ", ". ", " - ", "\n", "!? ", " (", ") ", "\t"};
    std::mt19937_64 g(seed);
    auto pick = [&](std::size_t n) { return static_cast<std::size_t>(g() % n); };

    auto render = [&](const std::vector<std::string>& toks) {
        std::string s;
        for (std::size_t i = 0; i < toks.size(); ++i) {
            std::string t = toks[i];
            if (pick(4) == 0)
                for (auto& c : t) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
            if (i) s += seps[pick(seps.size())];
            s += t;
        }
        return s;
    };
    auto words = [&](std::size_t n) {
        std::vector<std::string> w;
        for (std::size_t i = 0; i < n; ++i) w.push_back(vocab[pick(vocab.size())]);
        return w;
    };

    Corpus c;
    std::vector<std::vector<std::string>> eval_tokens;
    const std::size_t n_eval = 1 + pick(5);
    for (std::size_t i = 0; i < n_eval; ++i) {
        eval_tokens.push_back(words(3 + pick(30)));
        c.eval_texts.push_back(render(eval_tokens.back()));
    }
    for (std::size_t q = 0; q < 25; ++q) {
        std::vector<std::string> toks = words(pick(12));
        if (pick(2) == 0) {
            const auto& src = eval_tokens[pick(eval_tokens.size())];
            std::size_t len = 10 + pick(7);
            if (len > src.size()) len = src.size();
            std::size_t start = src.size() > len ? pick(src.size() - len + 1) : 0;
            toks.insert(toks.end(), src.begin() + static_cast<long>(start),
                        src.begin() + static_cast<long>(start + len));
        }
        auto tail = words(pick(8));
        toks.insert(toks.end(), tail.begin(), tail.end());
        if (toks.empty()) toks = words(1);
        c.queries.push_back(render(toks));
    }
    return c;
}

} // namespace gen
