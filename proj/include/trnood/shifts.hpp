#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "trnood/graph.hpp"
#include "trnood/rng.hpp"
#include "trnood/text_augment.hpp"

namespace trnood {

enum class ShiftKind { feature_mix, sbm_rewire, semantic_connect, text_swap, label_leave_out, temporal_split, text_augment };
enum class SemanticMode { top, bottom, threshold_percentile };
enum class SwapScope { intra, inter, random };

NLOHMANN_JSON_SERIALIZE_ENUM(ShiftKind, {{ShiftKind::feature_mix, "feature_mix"},
                                         {ShiftKind::sbm_rewire, "sbm_rewire"},
                                         {ShiftKind::semantic_connect, "semantic_connect"},
                                         {ShiftKind::text_swap, "text_swap"},
                                         {ShiftKind::label_leave_out, "label_leave_out"},
                                         {ShiftKind::temporal_split, "temporal_split"},
                                         {ShiftKind::text_augment, "text_augment"}})
NLOHMANN_JSON_SERIALIZE_ENUM(SemanticMode, {{SemanticMode::top, "top"},
                                            {SemanticMode::bottom, "bottom"},
                                            {SemanticMode::threshold_percentile, "threshold-percentile"}})
NLOHMANN_JSON_SERIALIZE_ENUM(SwapScope, {{SwapScope::intra, "intra"}, {SwapScope::inter, "inter"}, {SwapScope::random, "random"}})
NLOHMANN_JSON_SERIALIZE_ENUM(AugmentType, {{AugmentType::synonym, "synonym"}, {AugmentType::antonym, "antonym"}})

struct YearRange {
    std::int64_t lo = 0;
    std::int64_t hi = 0;
    bool contains(std::int64_t y) const { return y >= lo && y <= hi; }
    bool overlaps(const YearRange& o) const { return lo <= o.hi && o.lo <= hi; }
    bool operator==(const YearRange&) const = default;
};

// Kind-specific fields; only the ones relevant to `kind` are serialized.
struct ShiftParams {
    double alpha_feat = 0.5;
    std::optional<double> fixed_w;
    double beta = 0.2, f_ii = 0.7, f_ij = 0.5;
    SemanticMode mode = SemanticMode::top;
    std::optional<double> threshold;
    double beta_swap = 1.0;
    SwapScope scope = SwapScope::random;
    std::vector<std::int64_t> ood_classes;
    YearRange r_id, r_ood;
    double alpha_text = 1.0, p_char = 1.0;
    AugmentType type = AugmentType::synonym;
    bool operator==(const ShiftParams&) const = default;
};

struct ShiftSpec {
    std::string name;
    ShiftKind kind = ShiftKind::feature_mix;
    ShiftParams params;
    std::uint64_t seed = 0;
    bool operator==(const ShiftSpec&) const = default;
};

struct SbmPreset {
    double beta, f_ii, f_ij;
};
inline constexpr SbmPreset kSbmMild{0.2, 0.7, 0.5};
inline constexpr SbmPreset kSbmMedium{0.5, 0.6, 0.3};
inline constexpr SbmPreset kSbmStrong{1.0, 0.4, 0.7};

inline std::optional<SbmPreset> sbm_preset(std::string_view name) {
    if (name == "mild") return kSbmMild;
    if (name == "medium") return kSbmMedium;
    if (name == "strong") return kSbmStrong;
    return std::nullopt;
}

inline void validate(const ShiftSpec& s) {
    const auto& p = s.params;
    auto unit = [&](double v, const char* what) {
        if (!(v >= 0.0 && v <= 1.0))
            throw std::invalid_argument("shift '" + s.name + "': " + what + " must lie in [0, 1]");
    };
    switch (s.kind) {
        case ShiftKind::feature_mix:
            unit(p.alpha_feat, "alpha_feat");
            if (p.fixed_w) unit(*p.fixed_w, "w");
            break;
        case ShiftKind::sbm_rewire:
            unit(p.beta, "beta");
            unit(p.f_ii, "f_ii");
            unit(p.f_ij, "f_ij");
            break;
        case ShiftKind::semantic_connect:
            if ((p.mode == SemanticMode::threshold_percentile) != p.threshold.has_value())
                throw std::invalid_argument("shift '" + s.name + "': threshold is required iff mode = threshold-percentile");
            if (p.threshold) unit(*p.threshold, "threshold");
            break;
        case ShiftKind::text_swap:
            unit(p.beta_swap, "beta_swap");
            break;
        case ShiftKind::label_leave_out:
            if (p.ood_classes.empty()) throw std::invalid_argument("shift '" + s.name + "': ood_classes is empty");
            break;
        case ShiftKind::temporal_split:
            if (p.r_id.lo > p.r_id.hi || p.r_ood.lo > p.r_ood.hi)
                throw std::invalid_argument("shift '" + s.name + "': year range with lo > hi");
            if (p.r_id.overlaps(p.r_ood))
                throw std::invalid_argument("shift '" + s.name + "': r_id and r_ood overlap");
            break;
        case ShiftKind::text_augment:
            unit(p.alpha_text, "alpha_text");
            unit(p.p_char, "p_char");
            break;
    }
}

inline nlohmann::ordered_json to_json(const ShiftSpec& s) {
    nlohmann::ordered_json j;
    j["name"] = s.name;
    j["kind"] = nlohmann::json(s.kind);
    j["seed"] = s.seed;
    const auto& p = s.params;
    switch (s.kind) {
        case ShiftKind::feature_mix:
            j["alpha_feat"] = p.alpha_feat;
            if (p.fixed_w) j["w"] = *p.fixed_w;
            break;
        case ShiftKind::sbm_rewire:
            j["beta"] = p.beta;
            j["f_ii"] = p.f_ii;
            j["f_ij"] = p.f_ij;
            break;
        case ShiftKind::semantic_connect:
            j["mode"] = nlohmann::json(p.mode);
            if (p.threshold) j["threshold"] = *p.threshold;
            break;
        case ShiftKind::text_swap:
            j["beta_swap"] = p.beta_swap;
            j["scope"] = nlohmann::json(p.scope);
            break;
        case ShiftKind::label_leave_out:
            j["ood_classes"] = p.ood_classes;
            break;
        case ShiftKind::temporal_split:
            j["r_id"] = {p.r_id.lo, p.r_id.hi};
            j["r_ood"] = {p.r_ood.lo, p.r_ood.hi};
            break;
        case ShiftKind::text_augment:
            j["alpha_text"] = p.alpha_text;
            j["p_char"] = p.p_char;
            j["type"] = nlohmann::json(p.type);
            break;
    }
    return j;
}

// nlohmann maps unknown enum strings to the first enumerator; reject them instead.
template <class E, class Json>
E strict_enum(const Json& j, const char* key) {
    const auto& v = j.at(key);
    const E e = v.template get<E>();
    if (!v.is_string() || nlohmann::json(e).template get<std::string>() != v.template get<std::string>())
        throw std::invalid_argument(std::string("unknown value ") + v.dump() + " for '" + key + "'");
    return e;
}

template <class Json>
ShiftSpec shift_from_json(const Json& j) {
    ShiftSpec s;
    s.name = j.at("name").template get<std::string>();
    s.kind = strict_enum<ShiftKind>(j, "kind");
    s.seed = j.value("seed", std::uint64_t{0});
    auto& p = s.params;
    auto range = [&](const char* k) {
        const auto& a = j.at(k);
        return YearRange{a.at(0).template get<std::int64_t>(), a.at(1).template get<std::int64_t>()};
    };
    switch (s.kind) {
        case ShiftKind::feature_mix:
            p.alpha_feat = j.at("alpha_feat").template get<double>();
            if (j.contains("w")) p.fixed_w = j.at("w").template get<double>();
            break;
        case ShiftKind::sbm_rewire:
            p.beta = j.at("beta").template get<double>();
            p.f_ii = j.at("f_ii").template get<double>();
            p.f_ij = j.at("f_ij").template get<double>();
            break;
        case ShiftKind::semantic_connect:
            p.mode = strict_enum<SemanticMode>(j, "mode");
            if (j.contains("threshold")) p.threshold = j.at("threshold").template get<double>();
            break;
        case ShiftKind::text_swap:
            p.beta_swap = j.at("beta_swap").template get<double>();
            p.scope = strict_enum<SwapScope>(j, "scope");
            break;
        case ShiftKind::label_leave_out:
            p.ood_classes = j.at("ood_classes").template get<std::vector<std::int64_t>>();
            break;
        case ShiftKind::temporal_split:
            p.r_id = range("r_id");
            p.r_ood = range("r_ood");
            break;
        case ShiftKind::text_augment:
            p.alpha_text = j.at("alpha_text").template get<double>();
            p.p_char = j.at("p_char").template get<double>();
            p.type = strict_enum<AugmentType>(j, "type");
            break;
    }
    validate(s);
    return s;
}

// ---------------------------------------------------------------------------
// Embedding-level shift.

struct MixDraw {
    NodeId j, k;
    double w;
};

// x~_i = (1 - a) x_i + a (w x_j + (1 - w) x_k), donors read from the original X.
inline TrnGraph feature_mix(const TrnGraph& g, double alpha, Rng& rng, std::optional<double> fixed_w = std::nullopt,
                            std::vector<MixDraw>* log = nullptr) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("feature_mix: alpha_feat must lie in [0, 1]");
    if (g.n < 3) throw std::invalid_argument("feature_mix: need n >= 3 to draw distinct donors j, k");
    TrnGraph out = g;
    const std::size_t d = g.dim();
    for (std::size_t i = 0; i < g.n; ++i) {
        auto j = static_cast<std::size_t>(rng.below(g.n - 1));
        if (j >= i) ++j;
        const std::size_t lo = std::min(i, j), hi = std::max(i, j);
        auto k = static_cast<std::size_t>(rng.below(g.n - 2));
        if (k >= lo) ++k;
        if (k >= hi) ++k;
        const double w = fixed_w ? *fixed_w : rng.uniform();
        if (log) log->push_back({static_cast<NodeId>(j), static_cast<NodeId>(k), w});
        for (std::size_t c = 0; c < d; ++c) {
            const double donor = w * double(g.features(j, c)) + (1.0 - w) * double(g.features(k, c));
            out.features(i, c) = static_cast<float>((1.0 - alpha) * double(g.features(i, c)) + alpha * donor);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Structure-level shifts.

namespace detail {

inline std::uint64_t pair_key(NodeId a, NodeId b) {
    if (a > b) std::swap(a, b);
    return (std::uint64_t(a) << 32) | b;
}

// One Bernoulli realisation of the class-blocked SBM, drawn by geometric skips
// over the linear index of each block pair. Pairs in `taken` are skipped.
inline void sbm_round(const std::vector<std::vector<NodeId>>& blocks, double p_in, double p_out, Rng& rng,
                      const std::unordered_set<std::uint64_t>& taken, std::vector<Edge>& out) {
    for (std::size_t a = 0; a < blocks.size(); ++a) {
        for (std::size_t b = a; b < blocks.size(); ++b) {
            const double p = std::min(1.0, a == b ? p_in : p_out);
            const auto& A = blocks[a];
            const auto& B = blocks[b];
            const std::uint64_t total = a == b ? std::uint64_t(A.size()) * (A.size() - (A.empty() ? 0 : 1)) / 2
                                               : std::uint64_t(A.size()) * B.size();
            if (p <= 0.0 || total == 0) continue;
            std::uint64_t t = rng.geometric(p);
            while (t < total) {
                NodeId u, v;
                if (a == b) {
                    // t enumerates (x, y), x < y, ordered by y: t = y(y-1)/2 + x.
                    auto y = static_cast<std::uint64_t>((1.0 + std::sqrt(1.0 + 8.0 * double(t))) / 2.0);
                    while (y * (y - 1) / 2 > t) --y;
                    while ((y + 1) * y / 2 <= t) ++y;
                    u = A[t - y * (y - 1) / 2];
                    v = A[y];
                } else {
                    u = A[t / B.size()];
                    v = B[t % B.size()];
                }
                if (!taken.count(pair_key(u, v))) out.emplace_back(std::min(u, v), std::max(u, v));
                const auto skip = rng.geometric(p);
                if (skip >= total - t) break;
                t += 1 + skip;
            }
        }
    }
}

}  // namespace detail

struct RewireStats {
    std::size_t kept_original = 0;
    std::size_t from_sbm = 0;
    std::size_t topped_up = 0;
    std::size_t sbm_rounds = 0;
};

// Keeps ceil((1-beta)|E|) original edges and adds ceil(beta|E|) SBM edges with
// p_ii = rho f_ii, p_ij = rho f_ij (blocks = classes). Further SBM realisations
// are drawn while short; original edges only top up once SBM pairs run out.
inline TrnGraph sbm_rewire(const TrnGraph& g, double beta, double f_ii, double f_ij, Rng& rng,
                           RewireStats* stats = nullptr) {
    for (double v : {beta, f_ii, f_ij})
        if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("sbm_rewire: beta, f_ii, f_ij must lie in [0, 1]");
    if (g.n < 2) throw std::invalid_argument("sbm_rewire: need n >= 2");
    if (g.labels.size() != g.n) throw std::invalid_argument("sbm_rewire: labels required for SBM blocks");
    const std::size_t m = g.edges.size();
    const double pairs = double(g.n) * double(g.n - 1) / 2.0;
    const double rho = double(m) / pairs;
    const auto n_keep = static_cast<std::size_t>(std::ceil((1.0 - beta) * double(m)));
    const auto n_sbm = static_cast<std::size_t>(std::ceil(beta * double(m)));

    RewireStats st;
    std::vector<Edge> out;
    std::unordered_set<std::uint64_t> taken;
    Rng keep_rng = rng.child("keep");
    auto keep = keep_rng.sample_indices(m, std::min(n_keep, m));
    std::vector<bool> used(m, false);
    for (auto e : keep) {
        used[e] = true;
        out.push_back(g.edges[e]);
        taken.insert(detail::pair_key(g.edges[e].first, g.edges[e].second));
    }
    st.kept_original = keep.size();

    std::vector<std::vector<NodeId>> blocks(static_cast<std::size_t>(g.num_classes));
    for (std::size_t i = 0; i < g.n; ++i) blocks[static_cast<std::size_t>(g.labels[i])].push_back(static_cast<NodeId>(i));
    auto live = [&](NodeId u, NodeId v) { return rho * (g.labels[u] == g.labels[v] ? f_ii : f_ij) > 0.0; };
    double reachable = 0.0;
    for (std::size_t a = 0; a < blocks.size(); ++a)
        for (std::size_t b = a; b < blocks.size(); ++b) {
            const double cnt = a == b ? double(blocks[a].size()) * (double(blocks[a].size()) - 1) / 2.0
                                      : double(blocks[a].size()) * double(blocks[b].size());
            if ((a == b ? f_ii : f_ij) * rho > 0.0) reachable += cnt;
        }
    double reachable_taken = 0.0;
    for (auto e : keep) reachable_taken += live(g.edges[e].first, g.edges[e].second);

    std::size_t got = 0;
    Rng sbm_rng = rng.child("sbm");
    while (got < n_sbm && reachable_taken < reachable) {
        std::vector<Edge> fresh;
        detail::sbm_round(blocks, rho * f_ii, rho * f_ij, sbm_rng, taken, fresh);
        ++st.sbm_rounds;
        sbm_rng.shuffle(fresh);
        for (auto e : fresh) {
            if (got == n_sbm) break;
            if (!taken.insert(detail::pair_key(e.first, e.second)).second) continue;
            out.push_back(e);
            ++got;
            reachable_taken += 1.0;
        }
    }
    st.from_sbm = got;

    if (got < n_sbm && beta < 1.0) {
        Rng top_rng = rng.child("topup");
        std::vector<std::size_t> rest;
        for (std::size_t e = 0; e < m; ++e)
            if (!used[e]) rest.push_back(e);
        top_rng.shuffle(rest);
        for (auto e : rest) {
            if (got + st.topped_up == n_sbm) break;
            if (!taken.insert(detail::pair_key(g.edges[e].first, g.edges[e].second)).second) continue;
            out.push_back(g.edges[e]);
            ++st.topped_up;
        }
    }
    if (stats) *stats = st;
    TrnGraph res = g;
    res.edges = std::move(out);
    canonicalize_edges(res.edges);
    return res;
}

struct ScoredPair {
    double sim;
    NodeId i, j;
};

// All off-diagonal pairs (i < j) with their cosine similarity, in ascending (sim, i, j) order.
inline std::vector<ScoredPair> sorted_pair_similarities(const TrnGraph& g) {
    const auto s = cosine_similarity_matrix(g.features);
    std::vector<ScoredPair> pairs;
    pairs.reserve(g.n * (g.n - (g.n ? 1 : 0)) / 2);
    for (std::size_t i = 0; i < g.n; ++i)
        for (std::size_t j = i + 1; j < g.n; ++j)
            pairs.push_back({s(i, j), static_cast<NodeId>(i), static_cast<NodeId>(j)});
    std::sort(pairs.begin(), pairs.end(), [](const ScoredPair& a, const ScoredPair& b) {
        if (a.sim != b.sim) return a.sim < b.sim;
        return std::tie(a.i, a.j) < std::tie(b.i, b.j);
    });
    return pairs;
}

// Replaces the edge set by k = |E| pairs chosen by embedding similarity.
// Ties go to the lexicographically smaller (i, j).
inline TrnGraph semantic_connect(const TrnGraph& g, SemanticMode mode, std::optional<double> threshold = std::nullopt,
                                 std::optional<std::size_t> k_override = std::nullopt) {
    const std::size_t k = k_override.value_or(g.edges.size());
    const std::size_t total = g.n * (g.n - (g.n ? 1 : 0)) / 2;
    if (k > total)
        throw std::invalid_argument("semantic_connect: k = " + std::to_string(k) + " exceeds n(n-1)/2 = " +
                                    std::to_string(total));
    if ((mode == SemanticMode::threshold_percentile) != threshold.has_value())
        throw std::invalid_argument("semantic_connect: threshold is required iff mode = threshold-percentile");
    auto pairs = sorted_pair_similarities(g);
    std::size_t begin = 0;
    std::vector<ScoredPair> chosen;
    switch (mode) {
        case SemanticMode::bottom:
            chosen.assign(pairs.begin(), pairs.begin() + static_cast<std::ptrdiff_t>(k));
            break;
        case SemanticMode::top: {
            // Descending similarity, ascending (i, j) within a tie group.
            std::stable_sort(pairs.begin(), pairs.end(),
                             [](const ScoredPair& a, const ScoredPair& b) { return a.sim > b.sim; });
            chosen.assign(pairs.begin(), pairs.begin() + static_cast<std::ptrdiff_t>(k));
            break;
        }
        case SemanticMode::threshold_percentile: {
            if (!(*threshold >= 0.0 && *threshold <= 1.0))
                throw std::invalid_argument("semantic_connect: threshold must lie in [0, 1]");
            const auto p = std::min(total, static_cast<std::size_t>(std::floor(*threshold * double(total))));
            const std::size_t below = k / 2;
            begin = p >= below ? p - below : 0;
            begin = std::min(begin, total - k);
            chosen.assign(pairs.begin() + static_cast<std::ptrdiff_t>(begin),
                          pairs.begin() + static_cast<std::ptrdiff_t>(begin + k));
            break;
        }
    }
    TrnGraph out = g;
    out.edges.clear();
    for (const auto& p : chosen) out.edges.emplace_back(p.i, p.j);
    canonicalize_edges(out.edges);
    return out;
}

// ---------------------------------------------------------------------------
// Text swap. The result row i holds the original row perm[i].

inline TrnGraph apply_permutation(const TrnGraph& g, const std::vector<NodeId>& perm) {
    if (perm.size() != g.n) throw std::invalid_argument("apply_permutation: length != n");
    TrnGraph out = g;
    for (std::size_t i = 0; i < g.n; ++i) {
        auto src = g.features.row(perm[i]);
        std::copy(src.begin(), src.end(), out.features.row(i).begin());
        if (g.texts) (*out.texts)[i] = (*g.texts)[perm[i]];
    }
    return out;
}

// Disjoint swap pairs under the scope; the requested count is clamped to the
// scope's parity limit and any remaining shortfall is an error.
inline std::vector<Edge> select_swap_pairs(const TrnGraph& g, double beta, SwapScope scope, Rng& rng) {
    if (!(beta >= 0.0 && beta <= 1.0)) throw std::invalid_argument("text_swap: beta_swap must lie in [0, 1]");
    const auto n_swap = static_cast<std::size_t>(std::floor(beta * double(g.n)));
    std::size_t want = (n_swap + 1) / 2;
    if (want == 0) return {};
    if (scope != SwapScope::random && g.labels.size() != g.n)
        throw std::invalid_argument("text_swap: labels required for intra/inter scope");
    std::vector<Edge> pairs;
    auto by_class = [&] {
        std::vector<std::vector<NodeId>> cls(static_cast<std::size_t>(g.num_classes));
        for (std::size_t i = 0; i < g.n; ++i) cls[static_cast<std::size_t>(g.labels[i])].push_back(static_cast<NodeId>(i));
        for (auto& c : cls) rng.shuffle(c);
        return cls;
    };
    std::size_t limit = g.n / 2;
    std::size_t available = 0;
    switch (scope) {
        case SwapScope::random: {
            auto perm = rng.permutation(g.n);
            for (std::size_t t = 0; t + 1 < perm.size(); t += 2)
                pairs.emplace_back(static_cast<NodeId>(perm[t]), static_cast<NodeId>(perm[t + 1]));
            available = pairs.size();
            break;
        }
        case SwapScope::intra: {
            auto cls = by_class();
            for (const auto& c : cls)
                for (std::size_t t = 0; t + 1 < c.size(); t += 2) pairs.emplace_back(c[t], c[t + 1]);
            limit = available = pairs.size();
            break;
        }
        case SwapScope::inter: {
            // Repeatedly pair the two largest remaining classes; this reaches
            // the maximum min(floor(n/2), n - largest class).
            auto cls = by_class();
            for (;;) {
                std::size_t a = cls.size(), b = cls.size();
                for (std::size_t c = 0; c < cls.size(); ++c) {
                    if (cls[c].empty()) continue;
                    if (a == cls.size() || cls[c].size() > cls[a].size()) {
                        b = a;
                        a = c;
                    } else if (b == cls.size() || cls[c].size() > cls[b].size()) {
                        b = c;
                    }
                }
                if (b == cls.size()) break;
                pairs.emplace_back(cls[a].back(), cls[b].back());
                cls[a].pop_back();
                cls[b].pop_back();
            }
            available = pairs.size();
            break;
        }
    }
    want = std::min(want, limit);
    if (available < want)
        throw std::runtime_error("text_swap: scope '" + nlohmann::json(scope).get<std::string>() + "' has only " +
                                 std::to_string(available) + " disjoint eligible pairs, short by " +
                                 std::to_string(want - available));
    rng.shuffle(pairs);
    pairs.resize(want);
    return pairs;
}

inline TrnGraph text_swap(const TrnGraph& g, double beta, SwapScope scope, Rng& rng,
                          std::vector<NodeId>* perm_out = nullptr) {
    std::vector<NodeId> perm(g.n);
    for (std::size_t i = 0; i < g.n; ++i) perm[i] = static_cast<NodeId>(i);
    for (auto [a, b] : select_swap_pairs(g, beta, scope, rng)) std::swap(perm[a], perm[b]);
    if (perm_out) *perm_out = perm;
    return apply_permutation(g, perm);
}

// Applies text_augment to every node text with per-node child streams.
inline TrnGraph augment_texts(const TrnGraph& g, AugmentType type, double alpha, double p_char,
                              const LexicalCache& cache, const Rng& rng) {
    if (!g.texts) throw std::invalid_argument("text_augment shift: graph has no texts");
    TrnGraph out = g;
    for (std::size_t i = 0; i < g.n; ++i) {
        Rng r = rng.child(std::to_string(i));
        (*out.texts)[i] = text_augment((*g.texts)[i], type, alpha, p_char, cache, r);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Splits.

// Evaluation node: `ood_side` selects which graph of the split it is scored on.
struct EvalNode {
    bool ood_side;
    NodeId node;
    bool operator==(const EvalNode&) const = default;
};

struct SplitMasks {
    std::vector<NodeId> train, val, test;
    bool operator==(const SplitMasks&) const = default;
};

struct OodSplit {
    TrnGraph id_graph;
    TrnGraph ood_graph;
    std::vector<EvalNode> eval;
    std::vector<bool> ood_flags;
    SplitMasks masks;  // on id_graph
    ShiftSpec spec;
    std::vector<std::string> warnings;
    // id_graph node i is node id_to_ood[i] of ood_graph.
    std::vector<NodeId> id_to_ood;
};

// Per-class shuffle, then floor(f_train c) / floor(f_val c) / rest.
inline SplitMasks stratified_masks(const TrnGraph& g, double f_train, double f_val, Rng rng) {
    if (f_train < 0 || f_val < 0 || f_train + f_val > 1.0)
        throw std::invalid_argument("stratified_masks: fractions must be non-negative and sum to <= 1");
    std::vector<std::vector<NodeId>> cls(static_cast<std::size_t>(std::max<std::int64_t>(g.num_classes, 1)));
    for (std::size_t i = 0; i < g.n; ++i)
        cls[g.labels.empty() ? 0 : static_cast<std::size_t>(g.labels[i])].push_back(static_cast<NodeId>(i));
    SplitMasks m;
    for (auto& c : cls) {
        rng.shuffle(c);
        const auto a = static_cast<std::size_t>(std::floor(f_train * double(c.size())));
        const auto b = static_cast<std::size_t>(std::floor(f_val * double(c.size())));
        m.train.insert(m.train.end(), c.begin(), c.begin() + static_cast<std::ptrdiff_t>(a));
        m.val.insert(m.val.end(), c.begin() + static_cast<std::ptrdiff_t>(a), c.begin() + static_cast<std::ptrdiff_t>(a + b));
        m.test.insert(m.test.end(), c.begin() + static_cast<std::ptrdiff_t>(a + b), c.end());
    }
    std::sort(m.train.begin(), m.train.end());
    std::sort(m.val.begin(), m.val.end());
    std::sort(m.test.begin(), m.test.end());
    return m;
}

// Attribute/structure shifts: ID test nodes on the ID graph versus the same
// node indices on the shifted graph.
inline OodSplit attribute_split(const TrnGraph& g, TrnGraph shifted, const SplitMasks& masks) {
    OodSplit s;
    s.id_graph = g;
    s.ood_graph = std::move(shifted);
    s.masks = masks;
    s.id_to_ood.resize(g.n);
    for (std::size_t i = 0; i < g.n; ++i) s.id_to_ood[i] = static_cast<NodeId>(i);
    for (bool side : {false, true})
        for (auto v : masks.test) {
            s.eval.push_back({side, v});
            s.ood_flags.push_back(side);
        }
    return s;
}

// ID graph = induced subgraph on the remaining classes, labels re-indexed
// densely in ascending class order. Evaluation runs on the full graph: ID test
// nodes (flag 0) and every node of a held-out class (flag 1). Masks must be set
// by the caller (see finish_inductive_split).
inline OodSplit label_leave_out(const TrnGraph& g, const std::vector<std::int64_t>& ood_classes) {
    std::set<std::int64_t> out(ood_classes.begin(), ood_classes.end());
    if (out.empty()) throw std::invalid_argument("label_leave_out: ood_classes is empty");
    for (auto c : out)
        if (c < 0 || c >= g.num_classes)
            throw std::invalid_argument("label_leave_out: class " + std::to_string(c) + " outside [0, " +
                                        std::to_string(g.num_classes) + ")");
    if (out.size() == static_cast<std::size_t>(g.num_classes))
        throw std::invalid_argument("label_leave_out: ood_classes covers every class");
    std::vector<std::int64_t> remap(static_cast<std::size_t>(g.num_classes), -1);
    std::int64_t next = 0;
    for (std::int64_t c = 0; c < g.num_classes; ++c)
        if (!out.count(c)) remap[static_cast<std::size_t>(c)] = next++;
    std::vector<NodeId> keep;
    for (std::size_t i = 0; i < g.n; ++i)
        if (!out.count(g.labels[i])) keep.push_back(static_cast<NodeId>(i));
    OodSplit s;
    s.id_graph = induced_subgraph(g, keep);
    s.id_graph.num_classes = next;
    for (auto& y : s.id_graph.labels) y = remap[static_cast<std::size_t>(y)];
    s.ood_graph = g;
    s.id_to_ood = keep;
    for (std::size_t i = 0; i < g.n; ++i)
        if (out.count(g.labels[i])) {
            s.eval.push_back({true, static_cast<NodeId>(i)});
            s.ood_flags.push_back(true);
        }
    if (s.eval.empty()) s.warnings.push_back("label_leave_out: no node carries a held-out class; OOD set is empty");
    return s;
}

// ID graph = nodes with year in r_id. The OOD graph holds every node published
// up to r_ood.hi with the citations among them; flags mark years in r_ood.
inline OodSplit temporal_split(const TrnGraph& g, YearRange r_id, YearRange r_ood) {
    if (!g.years) throw std::invalid_argument("temporal_split: graph has no years");
    if (r_id.lo > r_id.hi || r_ood.lo > r_ood.hi) throw std::invalid_argument("temporal_split: range with lo > hi");
    if (r_id.overlaps(r_ood)) throw std::invalid_argument("temporal_split: r_id and r_ood overlap");
    const auto& y = *g.years;
    std::vector<NodeId> id_nodes, visible;
    for (std::size_t i = 0; i < g.n; ++i) {
        if (r_id.contains(y[i])) id_nodes.push_back(static_cast<NodeId>(i));
        if (y[i] <= r_ood.hi) visible.push_back(static_cast<NodeId>(i));
    }
    OodSplit s;
    s.id_graph = induced_subgraph(g, id_nodes);
    s.ood_graph = induced_subgraph(g, visible);
    std::vector<std::int64_t> pos(g.n, -1);
    for (std::size_t i = 0; i < visible.size(); ++i) pos[visible[i]] = static_cast<std::int64_t>(i);
    for (auto v : id_nodes) {
        // r_id entirely after r_ood.hi leaves ID nodes invisible on the OOD graph.
        s.id_to_ood.push_back(pos[v] >= 0 ? static_cast<NodeId>(pos[v]) : UINT32_MAX);
    }
    for (std::size_t i = 0; i < visible.size(); ++i)
        if (r_ood.contains(y[visible[i]])) {
            s.eval.push_back({true, static_cast<NodeId>(i)});
            s.ood_flags.push_back(true);
        }
    if (s.eval.empty()) s.warnings.push_back("temporal_split: no node falls in r_ood; OOD set is empty");
    return s;
}

// Adds masks on the ID graph and puts the ID test nodes (mapped onto the OOD
// graph) in front of the OOD evaluation nodes.
inline void finish_inductive_split(OodSplit& s, const SplitMasks& masks) {
    s.masks = masks;
    std::vector<EvalNode> eval;
    std::vector<bool> flags;
    for (auto v : masks.test) {
        const auto mapped = s.id_to_ood[v];
        if (mapped == UINT32_MAX) {
            eval.push_back({false, v});
        } else {
            eval.push_back({true, mapped});
        }
        flags.push_back(false);
    }
    eval.insert(eval.end(), s.eval.begin(), s.eval.end());
    flags.insert(flags.end(), s.ood_flags.begin(), s.ood_flags.end());
    s.eval = std::move(eval);
    s.ood_flags = std::move(flags);
}

struct ShiftContext {
    const LexicalCache* cache = nullptr;
    double f_train = 0.6;
    double f_val = 0.2;
};

// Runs one ShiftSpec for one run seed. Masks are drawn from the ID graph with
// stream "split.masks", so attribute shifts share masks with the base graph.
inline OodSplit generate_split(const TrnGraph& g, const ShiftSpec& spec, std::uint64_t run_seed,
                               const ShiftContext& ctx = {}) {
    validate(spec);
    Rng rng(run_seed ^ mix64(spec.seed), "shift/" + spec.name);
    const auto& p = spec.params;
    auto masks_for = [&](const TrnGraph& id) { return stratified_masks(id, ctx.f_train, ctx.f_val, Rng(run_seed, "split.masks")); };
    OodSplit s;
    switch (spec.kind) {
        case ShiftKind::feature_mix:
            s = attribute_split(g, feature_mix(g, p.alpha_feat, rng, p.fixed_w), masks_for(g));
            break;
        case ShiftKind::sbm_rewire:
            s = attribute_split(g, sbm_rewire(g, p.beta, p.f_ii, p.f_ij, rng), masks_for(g));
            break;
        case ShiftKind::semantic_connect:
            s = attribute_split(g, semantic_connect(g, p.mode, p.threshold), masks_for(g));
            break;
        case ShiftKind::text_swap:
            s = attribute_split(g, text_swap(g, p.beta_swap, p.scope, rng), masks_for(g));
            break;
        case ShiftKind::text_augment: {
            if (!ctx.cache) throw std::invalid_argument("shift '" + spec.name + "': text_augment needs a lexical cache");
            s = attribute_split(g, augment_texts(g, p.type, p.alpha_text, p.p_char, *ctx.cache, rng), masks_for(g));
            s.warnings.push_back("text_augment changes texts only; re-encode ood_graph/texts.jsonl into "
                                 "ood_graph/features.npy before evaluation");
            break;
        }
        case ShiftKind::label_leave_out:
            s = label_leave_out(g, p.ood_classes);
            finish_inductive_split(s, masks_for(s.id_graph));
            break;
        case ShiftKind::temporal_split:
            s = temporal_split(g, p.r_id, p.r_ood);
            finish_inductive_split(s, masks_for(s.id_graph));
            break;
    }
    s.spec = spec;
    return s;
}

// True when the split's ID graph is the untouched input graph.
inline bool shares_base_graph(ShiftKind k) {
    return k != ShiftKind::label_leave_out && k != ShiftKind::temporal_split;
}

}  // namespace trnood
