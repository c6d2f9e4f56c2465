#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "trnood/graph.hpp"
#include "trnood/rng.hpp"
#include "trnood/text_augment.hpp"

namespace trnood {

struct SyntheticSpec {
    std::vector<std::size_t> class_sizes{100, 100, 100};
    std::size_t d = 16;
    double mean_scale = 1.0;   // class means ~ N(0, mean_scale^2 I)
    double noise = 1.0;        // within-class std
    double avg_degree = 6.0;
    double homophily = 0.8;    // fraction of expected edges inside blocks
    bool with_texts = false;
    std::int64_t first_year = 0;  // years[i] = first_year + i * year_span / n when year_span > 0
    std::int64_t year_span = 0;
    std::uint64_t seed = 0;
};

namespace detail {

inline const std::vector<std::string>& fixture_vocab(std::size_t cls) {
    static const std::vector<std::vector<std::string>> v = {
        {"neural", "network", "learning", "gradient", "layer", "model"},
        {"protein", "gene", "cell", "enzyme", "binding", "sequence"},
        {"market", "price", "trade", "demand", "supply", "policy"},
        {"graph", "vertex", "edge", "path", "cycle", "tree"},
    };
    return v[cls % v.size()];
}

}  // namespace detail

// Class-blocked SBM graph with Gaussian class-conditional features. Node
// labels follow class_sizes in order (nodes of class 0 first).
inline TrnGraph make_synthetic_graph(const SyntheticSpec& s) {
    Rng rng(s.seed, "fixture");
    TrnGraph g;
    for (auto c : s.class_sizes) g.n += c;
    g.num_classes = static_cast<std::int64_t>(s.class_sizes.size());
    for (std::size_t c = 0; c < s.class_sizes.size(); ++c)
        g.labels.insert(g.labels.end(), s.class_sizes[c], static_cast<std::int64_t>(c));

    Rng mrng = rng.child("means");
    Matrix<double> mu(s.class_sizes.size(), s.d);
    for (auto& v : mu.data) v = s.mean_scale * mrng.normal();
    Rng frng = rng.child("features");
    g.features = Matrix<float>(g.n, s.d);
    for (std::size_t i = 0; i < g.n; ++i)
        for (std::size_t j = 0; j < s.d; ++j)
            g.features(i, j) = static_cast<float>(mu(static_cast<std::size_t>(g.labels[i]), j) + s.noise * frng.normal());

    // Expected degree split into homophily * avg_degree inside the block.
    Rng erng = rng.child("edges");
    const double n = double(g.n);
    double same_pairs = 0.0;
    for (auto c : s.class_sizes) same_pairs += double(c) * double(c - (c ? 1 : 0)) / 2.0;
    const double cross_pairs = n * (n - 1) / 2.0 - same_pairs;
    const double total_edges = s.avg_degree * n / 2.0;
    const double p_in = same_pairs > 0 ? std::min(1.0, s.homophily * total_edges / same_pairs) : 0.0;
    const double p_out = cross_pairs > 0 ? std::min(1.0, (1.0 - s.homophily) * total_edges / cross_pairs) : 0.0;
    for (std::size_t i = 0; i < g.n; ++i)
        for (std::size_t j = i + 1; j < g.n; ++j)
            if (erng.bernoulli(g.labels[i] == g.labels[j] ? p_in : p_out))
                g.edges.emplace_back(static_cast<NodeId>(i), static_cast<NodeId>(j));

    if (s.with_texts) {
        Rng trng = rng.child("texts");
        g.texts.emplace();
        for (std::size_t i = 0; i < g.n; ++i) {
            const auto& vocab = detail::fixture_vocab(static_cast<std::size_t>(g.labels[i]));
            std::string t = "We study";
            const auto len = 4 + trng.below(6);
            for (std::uint64_t w = 0; w < len; ++w) t += " " + vocab[trng.below(vocab.size())];
            t += ", with results.";
            g.texts->push_back(std::move(t));
        }
    }
    if (s.year_span > 0) {
        g.years.emplace();
        for (std::size_t i = 0; i < g.n; ++i)
            g.years->push_back(s.first_year + static_cast<std::int64_t>(i * static_cast<std::size_t>(s.year_span) / g.n));
    }
    return g;
}

// n = 300, d = 16, 3 classes of 100.
inline SyntheticSpec trend_fixture_spec(std::uint64_t seed) {
    SyntheticSpec s;
    s.class_sizes = {100, 100, 100};
    s.d = 16;
    s.seed = seed;
    return s;
}

// Same node count and class sizes as Cora (2708 nodes, 7 classes), ~5.3k edges.
inline SyntheticSpec cora_like_spec(std::uint64_t seed = 0) {
    SyntheticSpec s;
    s.class_sizes = {351, 217, 418, 818, 426, 298, 180};
    s.d = 32;
    s.avg_degree = 3.9;
    s.seed = seed;
    return s;
}

// Cache entries for the fixture vocabulary.
inline LexicalCache fixture_lexical_cache() {
    return LexicalCache::parse(R"({
        "neural": {"syn": ["nervous"], "ant": []},
        "learning": {"syn": ["acquisition", "training"], "ant": ["forgetting"]},
        "model": {"syn": ["framework", "design"], "ant": []},
        "protein": {"syn": ["polypeptide"], "ant": []},
        "binding": {"syn": ["attachment", "bond"], "ant": ["release"]},
        "market": {"syn": ["marketplace", "exchange"], "ant": []},
        "demand": {"syn": ["requirement"], "ant": ["supply"]},
        "supply": {"syn": ["provision"], "ant": ["demand"]},
        "graph": {"syn": ["chart", "diagram"], "ant": []},
        "path": {"syn": ["route", "track"], "ant": []},
        "results": {"syn": ["outcomes", "findings"], "ant": ["causes"]},
        "study": {"syn": ["examine", "analyse"], "ant": ["ignore"]}
    })");
}

}  // namespace trnood
