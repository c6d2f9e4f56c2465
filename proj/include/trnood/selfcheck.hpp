#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "trnood/checkpoint.hpp"
#include "trnood/detectors.hpp"
#include "trnood/fixtures.hpp"
#include "trnood/gradcheck.hpp"
#include "trnood/metrics.hpp"
#include "trnood/oracles.hpp"
#include "trnood/shifts.hpp"
#include "trnood/train.hpp"

namespace trnood {

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
    double seconds = 0.0;
};

inline CheckResult timed(const std::string& name, const std::function<std::pair<bool, std::string>()>& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    CheckResult r{name};
    try {
        std::tie(r.pass, r.detail) = fn();
    } catch (const std::exception& e) {
        r.pass = false;
        r.detail = std::string("exception: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

inline std::string sci(double v) {
    char b[32];
    std::snprintf(b, sizeof b, "%.3g", v);
    return b;
}

inline std::pair<bool, std::string> summarize_grads(const std::vector<GradCheckResult>& rs) {
    double worst = 0.0;
    std::string worst_name, failed;
    for (const auto& r : rs) {
        if (r.max_rel_err >= worst) {
            worst = r.max_rel_err;
            worst_name = r.name;
        }
        if (!r.pass) failed += (failed.empty() ? "" : ", ") + r.name + " (" + sci(r.max_rel_err) + ")";
    }
    if (!failed.empty()) return {false, "failed: " + failed};
    return {true, std::to_string(rs.size()) + " checks, max rel err " + sci(worst) + " at " + worst_name};
}

inline std::pair<bool, std::string> check_primitive_grads(std::uint64_t seed = 0) {
    return summarize_grads(primitive_grad_suite(seed));
}

inline std::pair<bool, std::string> check_end_to_end_grads(std::uint64_t seed = 0) {
    auto a = tnt_end_to_end_grad_check(true, true, seed);
    auto b = tnt_end_to_end_grad_check(false, true, seed);
    a.insert(a.end(), b.begin(), b.end());
    return summarize_grads(a);
}

// Random score/flag instances with heavy ties, n <= max_n, both classes present.
struct MetricInstance {
    std::vector<double> scores;
    std::vector<bool> ood;
};

inline MetricInstance random_metric_instance(Rng& rng, std::size_t max_n) {
    MetricInstance m;
    const auto n = 2 + rng.below(max_n - 1);
    const bool discrete = rng.bernoulli(0.7);
    const auto levels = 1 + rng.below(6);
    for (std::size_t i = 0; i < n; ++i) {
        m.scores.push_back(discrete ? double(rng.below(levels)) * 0.25 : rng.normal());
        m.ood.push_back(rng.bernoulli(0.4));
    }
    m.ood[0] = true;
    m.ood[1] = false;
    rng.shuffle(m.ood);
    return m;
}

inline std::pair<bool, std::string> check_metric_oracles(std::size_t instances = 200, std::size_t max_n = 64,
                                                         std::uint64_t seed = 0) {
    Rng rng(seed, "selfcheck.metrics");
    double worst = 0.0;
    std::size_t fpr_mismatch = 0;
    for (std::size_t t = 0; t < instances; ++t) {
        const auto m = random_metric_instance(rng, max_n);
        worst = std::max(worst, std::abs(auroc(m.scores, m.ood) - oracle::auroc(m.scores, m.ood)));
        worst = std::max(worst, std::abs(aupr(m.scores, m.ood) - oracle::aupr(m.scores, m.ood)));
        fpr_mismatch += fpr95(m.scores, m.ood) != oracle::fpr95(m.scores, m.ood);
    }
    const bool ok = worst <= 1e-12 && fpr_mismatch == 0;
    return {ok, std::to_string(instances) + " instances, max |diff| " + sci(worst) + ", fpr95 mismatches " +
                    std::to_string(fpr_mismatch)};
}

inline TrnGraph random_small_graph(Rng& rng, std::size_t max_n) {
    TrnGraph g;
    g.n = 1 + rng.below(max_n);
    g.features = Matrix<float>(g.n, 1);
    const double p = rng.uniform(0.1, 0.6);
    for (std::size_t i = 0; i < g.n; ++i)
        for (std::size_t j = i + 1; j < g.n; ++j)
            if (rng.bernoulli(p)) g.edges.emplace_back(static_cast<NodeId>(i), static_cast<NodeId>(j));
    return g;
}

inline std::pair<bool, std::string> check_propagation(std::size_t graphs = 50, std::size_t max_n = 16,
                                                      std::uint64_t seed = 0) {
    Rng rng(seed, "selfcheck.propagation");
    double worst = 0.0;
    bool identity = true;
    for (std::size_t t = 0; t < graphs; ++t) {
        const auto g = random_small_graph(rng, max_n);
        ScoreVector s;
        for (std::size_t i = 0; i < g.n; ++i) s.scores.push_back(rng.normal());
        const auto got = propagate_scores(s, g, 3, 0.5).scores;
        const auto want = oracle::propagate(s.scores, g.n, g.edges, 3, 0.5);
        for (std::size_t i = 0; i < g.n; ++i) worst = std::max(worst, std::abs(got[i] - want[i]));
        identity = identity && propagate_scores(s, g, 3, 1.0).scores == s.scores;
    }
    return {worst <= 1e-10 && identity,
            std::to_string(graphs) + " graphs, max |diff| " + sci(worst) + (identity ? ", alpha=1 identity" : ", alpha=1 NOT identity")};
}

inline TntConfig tiny_tnt_config(std::uint64_t seed) {
    TntConfig c;
    c.d_p = 8;
    c.rank = 4;
    c.epochs = 5;
    c.seed = seed;
    return c;
}

inline std::pair<bool, std::string> check_determinism(std::uint64_t seed = 0) {
    auto spec = trend_fixture_spec(seed);
    spec.class_sizes = {20, 20, 20};
    const auto g = make_synthetic_graph(spec);
    if (!(make_synthetic_graph(spec) == g)) return {false, "fixture differs between calls"};
    ShiftSpec sh{"sbm", ShiftKind::sbm_rewire, {}, 7};
    sh.params.beta = 0.5;
    sh.params.f_ii = 0.6;
    sh.params.f_ij = 0.3;
    const auto a = generate_split(g, sh, seed), b = generate_split(g, sh, seed);
    if (!(a.ood_graph == b.ood_graph) || a.masks.test != b.masks.test) return {false, "split differs between runs"};
    std::vector<std::size_t> train(a.masks.train.begin(), a.masks.train.end());
    const auto m1 = train_tnt(g, train, tiny_tnt_config(seed));
    const auto m2 = train_tnt(g, train, tiny_tnt_config(seed));
    if (encode_checkpoint(make_checkpoint(m1.model, "x")) != encode_checkpoint(make_checkpoint(m2.model, "x")))
        return {false, "trained weights differ between runs"};
    return {true, "fixture, split and 5-epoch training reproduce bit-for-bit"};
}

inline std::pair<bool, std::string> check_checkpoint_roundtrip(std::uint64_t seed = 0) {
    auto spec = trend_fixture_spec(seed);
    spec.class_sizes = {10, 10, 10};
    const auto g = make_synthetic_graph(spec);
    std::vector<std::size_t> train{0, 1, 2, 10, 11, 12, 20, 21, 22};
    const auto r = train_tnt(g, train, tiny_tnt_config(seed));
    const auto bytes = encode_checkpoint(make_checkpoint(r.model, "abc"));
    const auto back = tnt_from_checkpoint(decode_checkpoint(bytes));
    const auto o1 = infer(r.model, g), o2 = infer(back, g);
    if (!(o1.logits == o2.logits)) return {false, "logits differ after reload"};
    if (encode_checkpoint(make_checkpoint(back, "abc")) != bytes) return {false, "re-encoded bytes differ"};
    return {true, std::to_string(bytes.size()) + " bytes, logits identical after reload"};
}

inline std::vector<CheckResult> run_selfcheck() {
    return {
        timed("primitive gradients", [] { return check_primitive_grads(); }),
        timed("end-to-end gradients (f32)", [] { return check_end_to_end_grads(); }),
        timed("metric oracles", [] { return check_metric_oracles(); }),
        timed("propagation oracle", [] { return check_propagation(); }),
        timed("determinism", [] { return check_determinism(); }),
        timed("checkpoint round-trip", [] { return check_checkpoint_roundtrip(); }),
    };
}

inline bool print_checks(const std::vector<CheckResult>& rs, std::ostream& os) {
    bool ok = true;
    char line[512];
    for (const auto& r : rs) {
        std::snprintf(line, sizeof line, "%-4s %-30s %8.3fs  %s\n", r.pass ? "PASS" : "FAIL", r.name.c_str(), r.seconds,
                      r.detail.c_str());
        os << line;
        ok = ok && r.pass;
    }
    return ok;
}

}  // namespace trnood
