#pragma once

#include <algorithm>
#include <cctype>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "trnood/rng.hpp"

namespace trnood {

enum class AugmentType { synonym, antonym };

struct LexicalEntry {
    std::vector<std::string> syn;
    std::vector<std::string> ant;

    const std::vector<std::string>& list(AugmentType t) const { return t == AugmentType::synonym ? syn : ant; }
};

// word (lowercase) -> synonyms / antonyms. Self-references and alternatives
// containing whitespace are dropped on load: a multi-word alternative would
// change the token count.
class LexicalCache {
public:
    LexicalCache() = default;

    static LexicalCache from_json(const nlohmann::json& j) {
        if (!j.is_object()) throw std::invalid_argument("lexical cache: top level must be an object");
        LexicalCache c;
        for (auto it = j.begin(); it != j.end(); ++it) {
            LexicalEntry e;
            const std::string key = lower(it.key());
            auto take = [&](const char* field, std::vector<std::string>& out) {
                if (!it.value().contains(field)) return;
                for (const auto& w : it.value().at(field)) {
                    auto s = w.get<std::string>();
                    if (s.empty() || lower(s) == key) continue;
                    if (std::any_of(s.begin(), s.end(), [](unsigned char ch) { return std::isspace(ch); })) continue;
                    out.push_back(std::move(s));
                }
            };
            take("syn", e.syn);
            take("ant", e.ant);
            c.entries_[key] = std::move(e);
        }
        return c;
    }

    static LexicalCache parse(std::string_view text) { return from_json(nlohmann::json::parse(text)); }

    nlohmann::json to_json() const {
        nlohmann::json j = nlohmann::json::object();
        for (const auto& [w, e] : entries_) j[w] = {{"syn", e.syn}, {"ant", e.ant}};
        return j;
    }

    void add(const std::string& word, LexicalEntry e) { entries_[lower(word)] = std::move(e); }

    const std::vector<std::string>* lookup(std::string_view word, AugmentType t) const {
        auto it = entries_.find(lower(word));
        if (it == entries_.end() || it->second.list(t).empty()) return nullptr;
        return &it->second.list(t);
    }

    std::size_t size() const { return entries_.size(); }

    static std::string lower(std::string_view s) {
        std::string out(s);
        for (auto& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
        return out;
    }

private:
    std::map<std::string, LexicalEntry> entries_;
};

// A whitespace-delimited chunk split as prefix | core | suffix, where prefix and
// suffix are leading/trailing punctuation. `sep` is the whitespace preceding it.
struct Token {
    std::string sep;
    std::string prefix;
    std::string core;
    std::string suffix;
};

struct Tokenized {
    std::vector<Token> tokens;
    std::string trailing;
};

inline Tokenized tokenize(std::string_view t) {
    auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
    auto is_punct = [](char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; };
    Tokenized out;
    std::size_t i = 0;
    while (i < t.size()) {
        std::size_t s = i;
        while (i < t.size() && is_space(t[i])) ++i;
        if (i == t.size()) {
            out.trailing = std::string(t.substr(s));
            break;
        }
        std::size_t b = i;
        while (i < t.size() && !is_space(t[i])) ++i;
        std::string_view chunk = t.substr(b, i - b);
        std::size_t lo = 0, hi = chunk.size();
        while (lo < hi && is_punct(chunk[lo])) ++lo;
        while (hi > lo && is_punct(chunk[hi - 1])) --hi;
        out.tokens.push_back({std::string(t.substr(s, b - s)), std::string(chunk.substr(0, lo)),
                              std::string(chunk.substr(lo, hi - lo)), std::string(chunk.substr(hi))});
    }
    return out;
}

inline std::string detokenize(const Tokenized& t) {
    std::string out;
    for (const auto& tok : t.tokens) out += tok.sep + tok.prefix + tok.core + tok.suffix;
    return out + t.trailing;
}

inline std::size_t count_tokens(std::string_view t) { return tokenize(t).tokens.size(); }

inline bool is_alpha_word(std::string_view w) {
    return w.size() >= 3 &&
           std::all_of(w.begin(), w.end(), [](unsigned char c) { return (c | 0x20) >= 'a' && (c | 0x20) <= 'z'; });
}

enum class CharOp { insert, erase, replace, swap };

// One random insert / delete / replace / swap. Replacement and insertion draw
// lowercase letters; delete and swap need at least two characters.
inline std::string char_edit(std::string w, Rng& rng) {
    if (w.empty()) throw std::invalid_argument("char_edit: empty word");
    const auto op = static_cast<CharOp>(rng.below(4));
    auto pos = static_cast<std::size_t>(rng.below(w.size()));
    switch (op) {
        case CharOp::insert:
            w.insert(w.begin() + static_cast<std::ptrdiff_t>(pos), static_cast<char>('a' + rng.below(26)));
            break;
        case CharOp::erase:
            if (w.size() > 1) w.erase(pos, 1);
            break;
        case CharOp::replace: {
            const char old = w[pos];
            const bool old_lower = old >= 'a' && old <= 'z';
            char c = static_cast<char>('a' + rng.below(old_lower ? 25 : 26));
            if (old_lower && c >= old) ++c;
            w[pos] = c;
            break;
        }
        case CharOp::swap:
            if (w.size() > 1) {
                pos = std::min(pos, w.size() - 2);
                std::swap(w[pos], w[pos + 1]);
            }
            break;
    }
    return w;
}

struct AugmentEdit {
    std::size_t token;
    std::string before;
    std::string replacement;
    std::string after;
};

// Replaces floor(alpha * |candidates|) eligible tokens with a cached
// alternative of the requested type; each replacement then gets a char_edit
// with probability p_char. Separators and punctuation are kept verbatim.
inline std::string text_augment(std::string_view t, AugmentType type, double alpha, double p_char,
                                const LexicalCache& cache, Rng& rng, std::vector<AugmentEdit>* log = nullptr) {
    if (alpha < 0.0 || alpha > 1.0 || p_char < 0.0 || p_char > 1.0)
        throw std::invalid_argument("text_augment: alpha and p_char must lie in [0, 1]");
    auto toks = tokenize(t);
    std::vector<std::size_t> cand;
    for (std::size_t i = 0; i < toks.tokens.size(); ++i)
        if (is_alpha_word(toks.tokens[i].core) && cache.lookup(toks.tokens[i].core, type)) cand.push_back(i);
    const auto n = static_cast<std::size_t>(std::floor(alpha * double(cand.size())));
    if (n == 0) return std::string(t);
    auto picks = rng.sample_indices(cand.size(), n);
    std::sort(picks.begin(), picks.end());
    for (auto p : picks) {
        auto& tok = toks.tokens[cand[p]];
        const auto& alts = *cache.lookup(tok.core, type);
        std::string word = alts[rng.below(alts.size())];
        const std::string chosen = word;
        if (rng.bernoulli(p_char)) word = char_edit(word, rng);
        if (log) log->push_back({cand[p], tok.core, chosen, word});
        tok.core = std::move(word);
    }
    return detokenize(toks);
}

}  // namespace trnood
