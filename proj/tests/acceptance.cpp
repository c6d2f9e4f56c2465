// One PASS/FAIL line per acceptance criterion; exit code 1 if any fails.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>

#include "trnood/harness.hpp"
#include "trnood/selfcheck.hpp"

namespace fs = std::filesystem;
using namespace trnood;

namespace {

using Outcome = std::pair<bool, std::string>;

Outcome both(const Outcome& a, const Outcome& b) { return {a.first && b.first, a.second + "; " + b.second}; }

Outcome within(Outcome r, double seconds, double limit) {
    if (seconds > limit) {
        r.first = false;
        r.second += " (over the " + std::to_string(int(limit)) + " s budget)";
    }
    return r;
}

// 1. gradients
Outcome gradients() { return both(check_primitive_grads(), check_end_to_end_grads()); }

// 2. metrics
Outcome metrics() { return check_metric_oracles(200, 64, 0); }

// 3. propagation
Outcome propagation() { return check_propagation(50, 16, 0); }

// 4. shift generators
Outcome shifts() {
    std::string detail;
    bool ok = true;
    const auto cora = make_synthetic_graph(cora_like_spec(0));
    double worst = 0.0;
    for (const auto* name : {"mild", "medium", "strong"}) {
        const auto p = *sbm_preset(name);
        Rng rng(1, name);
        const auto out = sbm_rewire(cora, p.beta, p.f_ii, p.f_ij, rng);
        worst = std::max(worst, std::abs(double(out.edges.size()) - double(cora.edges.size())) / double(cora.edges.size()));
    }
    ok = ok && worst <= 0.01;
    detail += "sbm max edge drift " + sci(100 * worst) + "%";

    {
        Rng rng(2, "beta0");
        const auto out = sbm_rewire(cora, 0.0, 0.7, 0.5, rng);
        const std::set<Edge> orig(cora.edges.begin(), cora.edges.end());
        bool subset = true;
        for (const auto& e : out.edges) subset = subset && orig.count(e);
        ok = ok && subset;
        detail += subset ? ", beta=0 subset" : ", beta=0 NOT subset";
    }

    Rng rng(6, "sem");
    std::size_t sem_bad = 0;
    for (int t = 0; t < 30; ++t) {
        TrnGraph g;
        g.n = 2 + rng.below(31);
        g.features = Matrix<float>(g.n, 3);
        for (auto& v : g.features.data) v = float(int(rng.below(5)) - 2);
        const std::size_t k = rng.below(g.n * (g.n - 1) / 2 + 1);
        sem_bad += semantic_connect(g, SemanticMode::top, std::nullopt, k).edges != oracle::semantic_top(g.features, k);
    }
    ok = ok && sem_bad == 0;
    detail += ", semantic top mismatches " + std::to_string(sem_bad) + "/30";

    auto spec = cora_like_spec(0);
    spec.with_texts = true;
    const auto textual = make_synthetic_graph(spec);
    bool invol = true;
    for (auto scope : {SwapScope::random, SwapScope::intra, SwapScope::inter}) {
        Rng r(3, "swap");
        std::vector<NodeId> perm;
        const auto once = text_swap(textual, 1.0, scope, r, &perm);
        invol = invol && apply_permutation(once, perm) == textual;
    }
    ok = ok && invol;
    detail += invol ? ", text_swap involution" : ", text_swap NOT involution";

    bool counts = true;
    for (const std::vector<std::int64_t>& cls : {std::vector<std::int64_t>{0, 1, 2}, {3, 5, 6}, {6}}) {
        const auto sp = label_leave_out(cora, cls);
        const auto c = oracle::leave_out_counts(cora.labels, cora.edges, cls);
        counts = counts && sp.id_graph.n == c.id_nodes && sp.id_graph.edges.size() == c.id_edges &&
                 sp.eval.size() == c.ood_nodes;
    }
    ok = ok && counts;
    detail += counts ? ", leave-out counts match" : ", leave-out counts DIFFER";
    return {ok, detail};
}

// 5. trend on the synthetic graph
Outcome trend() {
    std::map<double, std::vector<double>> auc;
    for (std::uint64_t seed : {0, 1, 2}) {
        const auto g = make_synthetic_graph(trend_fixture_spec(seed));
        TntConfig cfg;
        cfg.d_p = 32;
        cfg.rank = 8;
        cfg.epochs = 100;
        cfg.seed = seed;
        const auto masks = stratified_masks(g, 0.6, 0.2, Rng(seed, "split.masks"));
        const auto model = train_tnt(g, {masks.train.begin(), masks.train.end()}, cfg).model;
        const auto id_out = infer(model, g);
        MethodConfig m{"tnt", MethodKind::tnt, PropagationDefaults::K, PropagationDefaults::alpha, 1.0};
        const auto sid = method_scores(m, id_out, g, nullptr);
        for (double alpha : {0.5, 0.9}) {
            ShiftSpec sp{"mix", ShiftKind::feature_mix, {}, 0};
            sp.params.alpha_feat = alpha;
            const auto s = generate_split(g, sp, seed);
            const auto sood = method_scores(m, infer(model, s.ood_graph), s.ood_graph, nullptr);
            std::vector<double> v;
            for (const auto& e : s.eval) v.push_back(e.ood_side ? sood.scores[e.node] : sid.scores[e.node]);
            auc[alpha].push_back(auroc(v, s.ood_flags));
        }
    }
    double m5 = 0, m9 = 0;
    int ordered = 0;
    for (int i = 0; i < 3; ++i) {
        m5 += auc[0.5][i] / 3;
        m9 += auc[0.9][i] / 3;
        ordered += auc[0.9][i] >= auc[0.5][i];
    }
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "AUROC(0.5) %.4f %.4f %.4f mean %.4f; AUROC(0.9) %.4f %.4f %.4f mean %.4f; ordered in %d/3",
                  auc[0.5][0], auc[0.5][1], auc[0.5][2], m5, auc[0.9][0], auc[0.9][1], auc[0.9][2], m9, ordered);
    return {m9 >= 0.85 && m9 >= m5 && ordered >= 2, buf};
}

// 6. E-lign with T = 0 against the energy pipeline
Outcome elign_reduction() {
    Rng rng(9, "elign");
    std::size_t bad = 0;
    for (int t = 0; t < 50; ++t) {
        auto g = random_small_graph(rng, 24);
        Matrix<double> logits(g.n, 4), p(g.n, 5), q(g.n, 5);
        for (auto* m : {&logits, &p, &q})
            for (auto& v : m->data) v = rng.normal() * 3;
        const auto e = energy_score(logits);
        const auto a = propagate_scores(elign_score(e, p, q, 0.0), g, 3, 0.5);
        const auto b = propagate_scores(e, g, 3, 0.5);
        bad += std::memcmp(a.scores.data(), b.scores.data(), a.scores.size() * sizeof(double)) != 0;
    }
    return {bad == 0, std::to_string(50 - bad) + "/50 graphs bit-identical"};
}

// 7. pipeline determinism through the CLI
Outcome determinism() {
    const auto dir = fs::temp_directory_path() / "trnood_acceptance_determinism";
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::ofstream(dir / "cfg.toml") << R"(
[dataset]
name = "trend"
fixture = "trend"
[[shifts]]
name = "mix"
kind = "feature_mix"
alpha_feat = 0.7
[[shifts]]
name = "sbm"
kind = "sbm_rewire"
preset = "medium"
[[shifts]]
name = "leave"
kind = "label_leave_out"
ood_classes = [0]
[[methods]]
kind = "msp"
[[methods]]
kind = "maha"
[[methods]]
kind = "gnnsafe"
[[methods]]
kind = "tnt"
[model]
d_p = 16
rank = 4
epochs = 20
[run]
seeds = [0, 1]
)";
    std::map<std::string, std::string> trees[2];
    for (int run = 0; run < 2; ++run) {
        const auto out = dir / ("out" + std::to_string(run));
        for (const char* sub : {"gen-shifts", "train", "eval"}) {
            const auto cmd = std::string(TRNOOD_TOOL) + " " + sub + " --config " + (dir / "cfg.toml").string() +
                             " --out " + out.string() + " > /dev/null 2>&1";
            if (std::system(cmd.c_str()) != 0) return {false, std::string(sub) + " failed"};
        }
        for (const auto& e : fs::recursive_directory_iterator(out))
            if (e.is_regular_file()) trees[run][fs::relative(e.path(), out).string()] = npy::read_file(e.path());
    }
    std::size_t differ = 0;
    for (const auto& [k, v] : trees[0]) differ += !trees[1].count(k) || trees[1].at(k) != v;
    const bool ok = differ == 0 && trees[0].size() == trees[1].size() && !trees[0].empty();
    return {ok, std::to_string(trees[0].size()) + " files, " + std::to_string(differ) + " differ"};
}

// 8. text augmentation contracts
Outcome augmentation() {
    const auto cache = fixture_lexical_cache();
    const std::vector<std::string> vocab{"neural", "learning", "model", "protein", "binding", "market", "demand",
                                         "supply", "graph", "results", "the", "of", "a", "data", "Neural", "GRAPH"};
    const std::vector<std::string> punct{"", "", "", ",", ".", ";", "!", "(", ")"};
    Rng gen(3, "fuzz");
    std::size_t identity_bad = 0, foreign = 0, count_bad = 0, changed = 0;
    for (int s = 0; s < 1000; ++s) {
        std::string text;
        const auto len = gen.below(20);
        for (std::size_t k = 0; k < len; ++k) {
            text += k ? (gen.bernoulli(0.1) ? "  " : " ") : "";
            text += vocab[gen.below(vocab.size())] + punct[gen.below(punct.size())];
        }
        for (auto type : {AugmentType::synonym, AugmentType::antonym}) {
            Rng r0(s, "id");
            identity_bad += text_augment(text, type, 0.0, 1.0, cache, r0) != text;
            Rng r1(s, "aug");
            const auto out = text_augment(text, type, gen.uniform(), 0.0, cache, r1);
            count_bad += count_tokens(out) != count_tokens(text);
            const auto a = tokenize(text), b = tokenize(out);
            if (a.tokens.size() != b.tokens.size()) continue;
            for (std::size_t i = 0; i < a.tokens.size(); ++i) {
                if (a.tokens[i].core == b.tokens[i].core) continue;
                ++changed;
                const auto* alts = cache.lookup(a.tokens[i].core, type);
                foreign += !alts || std::find(alts->begin(), alts->end(), b.tokens[i].core) == alts->end();
            }
        }
    }
    const bool ok = identity_bad == 0 && foreign == 0 && count_bad == 0 && changed > 0;
    return {ok, "1000 sentences: identity failures " + std::to_string(identity_bad) + ", " + std::to_string(changed) +
                    " changed tokens, " + std::to_string(foreign) + " outside cache, token-count changes " +
                    std::to_string(count_bad)};
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        double budget;
        Outcome (*fn)();
    };
    const Criterion all[] = {
        {1, "gradient suite", 60, gradients},
        {2, "metric oracles", 10, metrics},
        {3, "propagation oracle", 1e9, propagation},
        {4, "shift contracts", 30, shifts},
        {5, "feature-mix trend", 120, trend},
        {6, "E-lign T=0 reduction", 1e9, elign_reduction},
        {7, "pipeline determinism", 1e9, determinism},
        {8, "text augmentation", 1e9, augmentation},
    };
    bool ok = true;
    for (const auto& c : all) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome r;
        try {
            r = c.fn();
        } catch (const std::exception& e) {
            r = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        r = within(r, secs, c.budget);
        std::printf("%s [%d] %-22s %8.2fs  %s\n", r.first ? "PASS" : "FAIL", c.id, c.name, secs, r.second.c_str());
        std::fflush(stdout);
        ok = ok && r.first;
    }
    return ok ? 0 : 1;
}
