#pragma once

// Slow reference implementations used by selfcheck, the tests and the
// acceptance binary. They share nothing with the production code paths.

#include <algorithm>
#include <cmath>
#include <functional>
#include <cstdint>
#include <set>
#include <span>
#include <tuple>
#include <vector>

#include "trnood/graph.hpp"

namespace trnood::oracle {

// Pairwise count over every (ood, id) pair.
inline double auroc(std::span<const double> s, const std::vector<bool>& ood) {
    double wins = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!ood[i]) continue;
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (ood[j]) continue;
            ++pairs;
            if (s[i] > s[j]) wins += 1.0;
            else if (s[i] == s[j]) wins += 0.5;
        }
    }
    return wins / double(pairs);
}

// Enumerates every distinct score as a threshold "s >= t", highest first,
// and sums recall increments times precision.
inline double aupr(std::span<const double> s, const std::vector<bool>& ood) {
    std::set<double, std::greater<>> thr(s.begin(), s.end());
    std::size_t pos = 0;
    for (bool b : ood) pos += b;
    double ap = 0.0, prev_recall = 0.0;
    for (double t : thr) {
        std::size_t tp = 0, sel = 0;
        for (std::size_t i = 0; i < s.size(); ++i)
            if (s[i] >= t) {
                ++sel;
                tp += ood[i];
            }
        const double recall = double(tp) / double(pos);
        ap += (recall - prev_recall) * (double(tp) / double(sel));
        prev_recall = recall;
    }
    return ap;
}

// Largest threshold among the scores with TPR >= 0.95, counted exactly.
inline double fpr95(std::span<const double> s, const std::vector<bool>& ood) {
    std::size_t pos = 0, neg = 0;
    for (bool b : ood) (b ? pos : neg)++;
    double best_t = 0.0;
    bool found = false;
    for (double t : s) {
        std::size_t tp = 0;
        for (std::size_t i = 0; i < s.size(); ++i) tp += ood[i] && s[i] >= t;
        if (tp * 100 >= pos * 95 && (!found || t > best_t)) {
            best_t = t;
            found = true;
        }
    }
    std::size_t fp = 0;
    for (std::size_t i = 0; i < s.size(); ++i) fp += !ood[i] && s[i] >= best_t;
    return double(fp) / double(neg);
}

// Dense P = D^{-1} A and s_K = (alpha I + (1 - alpha) P)^K s.
inline std::vector<double> propagate(const std::vector<double>& s, std::size_t n, const std::vector<Edge>& edges,
                                     int K, double alpha) {
    std::vector<std::vector<double>> a(n, std::vector<double>(n, 0.0));
    for (auto [i, j] : edges) a[i][j] = a[j][i] = 1.0;
    std::vector<std::vector<double>> m(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        double deg = 0.0;
        for (std::size_t j = 0; j < n; ++j) deg += a[i][j];
        for (std::size_t j = 0; j < n; ++j) m[i][j] = (deg > 0 ? (1.0 - alpha) * a[i][j] / deg : 0.0);
        m[i][i] += alpha;
    }
    auto cur = s;
    for (int k = 0; k < K; ++k) {
        std::vector<double> next(n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) next[i] += m[i][j] * cur[j];
        cur = next;
    }
    return cur;
}

// Top-k pairs by cosine similarity: scan all pairs k times, each time taking
// the best unused pair (ties to the smaller (i, j)).
inline std::vector<Edge> semantic_top(const Matrix<float>& x, std::size_t k) {
    const std::size_t n = x.rows;
    auto cos = [&](std::size_t i, std::size_t j) {
        double dot = 0, ni = 0, nj = 0;
        for (std::size_t c = 0; c < x.cols; ++c) {
            dot += double(x(i, c)) * double(x(j, c));
            ni += double(x(i, c)) * double(x(i, c));
            nj += double(x(j, c)) * double(x(j, c));
        }
        return ni > 0 && nj > 0 ? dot / (std::sqrt(ni) * std::sqrt(nj)) : 0.0;
    };
    std::set<Edge> used;
    for (std::size_t r = 0; r < k; ++r) {
        bool have = false;
        double best = 0;
        Edge arg{};
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) {
                Edge e{static_cast<NodeId>(i), static_cast<NodeId>(j)};
                if (used.count(e)) continue;
                const double v = cos(i, j);
                if (!have || v > best) {
                    have = true;
                    best = v;
                    arg = e;
                }
            }
        used.insert(arg);
    }
    return {used.begin(), used.end()};
}

struct LeaveOutCounts {
    std::size_t id_nodes = 0;
    std::size_t id_edges = 0;
    std::size_t ood_nodes = 0;
};

// Counts nodes and edges that survive removing the given classes.
inline LeaveOutCounts leave_out_counts(const std::vector<std::int64_t>& labels, const std::vector<Edge>& edges,
                                       const std::vector<std::int64_t>& classes) {
    auto out = [&](std::int64_t y) { return std::find(classes.begin(), classes.end(), y) != classes.end(); };
    LeaveOutCounts c;
    for (auto y : labels) out(y) ? ++c.ood_nodes : ++c.id_nodes;
    for (auto [i, j] : edges) c.id_edges += !out(labels[i]) && !out(labels[j]);
    return c;
}

}  // namespace trnood::oracle
