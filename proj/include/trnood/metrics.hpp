#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "trnood/graph.hpp"

namespace trnood {

struct MetricReport {
    double auroc = 0.0;
    double aupr = 0.0;
    double fpr95 = 0.0;
    double id_acc = 0.0;
    std::size_t n_id = 0;
    std::size_t n_ood = 0;
};

namespace detail {

inline void check_inputs(std::span<const double> scores, const std::vector<bool>& ood) {
    if (scores.size() != ood.size()) throw std::invalid_argument("metrics: scores and flags differ in length");
}

inline std::pair<std::size_t, std::size_t> class_counts(const std::vector<bool>& ood) {
    const auto pos = static_cast<std::size_t>(std::count(ood.begin(), ood.end(), true));
    return {pos, ood.size() - pos};
}

// Indices sorted by descending score.
inline std::vector<std::size_t> descending(std::span<const double> scores) {
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
    return idx;
}

}  // namespace detail

// P(score_ood > score_id) + 0.5 P(equal), via midranks in exact integer arithmetic.
inline double auroc(std::span<const double> scores, const std::vector<bool>& ood) {
    detail::check_inputs(scores, ood);
    const auto [pos, neg] = detail::class_counts(ood);
    if (pos == 0 || neg == 0) throw std::invalid_argument("auroc: need both OOD and ID nodes");
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });
    // Twice the rank sum of positives; a tie group spanning ranks [lo+1, hi] has midrank (lo+1+hi)/2.
    unsigned __int128 twice_rank_sum = 0;
    for (std::size_t lo = 0; lo < idx.size();) {
        std::size_t hi = lo;
        while (hi < idx.size() && scores[idx[hi]] == scores[idx[lo]]) ++hi;
        std::size_t group_pos = 0;
        for (auto k = lo; k < hi; ++k) group_pos += ood[idx[k]];
        twice_rank_sum += static_cast<unsigned __int128>(group_pos) * (lo + 1 + hi);
        lo = hi;
    }
    const auto twice_u = twice_rank_sum - static_cast<unsigned __int128>(pos) * (pos + 1);
    return static_cast<double>(twice_u) / (2.0 * double(pos) * double(neg));
}

// Average precision, OOD as the positive class; tied scores form one threshold.
inline double aupr(std::span<const double> scores, const std::vector<bool>& ood) {
    detail::check_inputs(scores, ood);
    const auto [pos, neg] = detail::class_counts(ood);
    if (pos == 0) throw std::invalid_argument("aupr: no OOD (positive) nodes");
    const auto idx = detail::descending(scores);
    double ap = 0.0;
    std::size_t tp = 0, fp = 0, prev_tp = 0;
    for (std::size_t lo = 0; lo < idx.size();) {
        std::size_t hi = lo;
        while (hi < idx.size() && scores[idx[hi]] == scores[idx[lo]]) {
            ood[idx[hi]] ? ++tp : ++fp;
            ++hi;
        }
        if (tp > prev_tp)
            ap += (double(tp - prev_tp) / double(pos)) * (double(tp) / double(tp + fp));
        prev_tp = tp;
        lo = hi;
    }
    return ap;
}

// FPR over ID nodes at the largest threshold whose OOD recall reaches 95 %.
inline double fpr95(std::span<const double> scores, const std::vector<bool>& ood) {
    detail::check_inputs(scores, ood);
    const auto [pos, neg] = detail::class_counts(ood);
    if (pos == 0 || neg == 0) throw std::invalid_argument("fpr95: need both OOD and ID nodes");
    const auto idx = detail::descending(scores);
    std::size_t tp = 0, fp = 0;
    for (std::size_t lo = 0; lo < idx.size();) {
        std::size_t hi = lo;
        while (hi < idx.size() && scores[idx[hi]] == scores[idx[lo]]) {
            ood[idx[hi]] ? ++tp : ++fp;
            ++hi;
        }
        if (tp * 100 >= pos * 95) return double(fp) / double(neg);
        lo = hi;
    }
    return 1.0;
}

// Fraction of masked rows whose argmax (lowest index on ties) equals the label.
inline double id_accuracy(const Matrix<double>& logits, const std::vector<std::int64_t>& labels,
                          const std::vector<std::size_t>& mask) {
    if (mask.empty()) throw std::invalid_argument("id_accuracy: empty mask");
    std::size_t hit = 0;
    for (auto i : mask) {
        if (i >= logits.rows || i >= labels.size()) throw std::invalid_argument("id_accuracy: mask index out of range");
        auto r = logits.row(i);
        const auto arg = static_cast<std::int64_t>(std::max_element(r.begin(), r.end()) - r.begin());
        hit += arg == labels[i];
    }
    return double(hit) / double(mask.size());
}

inline MetricReport evaluate(std::span<const double> scores, const std::vector<bool>& ood, double id_acc) {
    MetricReport r;
    std::tie(r.n_ood, r.n_id) = detail::class_counts(ood);
    r.auroc = auroc(scores, ood);
    r.aupr = aupr(scores, ood);
    r.fpr95 = fpr95(scores, ood);
    r.id_acc = id_acc;
    return r;
}

}  // namespace trnood
