#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "trnood/graph.hpp"
#include "trnood/tensor.hpp"

namespace trnood {

// GNNSafe-style propagation defaults.
struct PropagationDefaults {
    static constexpr int K = 3;
    static constexpr double alpha = 0.5;
};

// Per-node OOD scores; higher means more OOD.
struct ScoreVector {
    std::vector<double> scores;
    std::string method;
    std::map<std::string, double> params;
};

inline void check_finite(const ScoreVector& s) {
    for (auto v : s.scores)
        if (!std::isfinite(v)) throw std::runtime_error(s.method + ": non-finite score");
}

// e_i = -log sum_c exp(z_ic).
inline ScoreVector energy_score(const Matrix<double>& logits) {
    if (logits.cols == 0) throw std::invalid_argument("energy_score: need at least one class");
    ScoreVector s{std::vector<double>(logits.rows), "energy", {}};
    for (std::size_t i = 0; i < logits.rows; ++i) s.scores[i] = -detail::row_lse(logits.row(i));
    return s;
}

// Negated maximum softmax probability.
inline ScoreVector msp_score(const Matrix<double>& logits) {
    ScoreVector s{std::vector<double>(logits.rows), "msp", {}};
    for (std::size_t i = 0; i < logits.rows; ++i) {
        auto r = logits.row(i);
        const double mx = *std::max_element(r.begin(), r.end());
        s.scores[i] = -std::exp(mx - detail::row_lse(r));
    }
    return s;
}

// Class means and shared covariance with a cached Cholesky factor of (Sigma + eps I).
class MahalanobisModel {
public:
    MahalanobisModel(Matrix<double> means, Matrix<double> covariance, double eps_cov)
        : means_(std::move(means)), cov_(std::move(covariance)), eps_(eps_cov) {
        if (cov_.rows != cov_.cols || cov_.rows != means_.cols)
            throw std::invalid_argument("MahalanobisModel: covariance must be [d x d] with d = mean width");
        factorize();
    }

    // Fits on embeddings of labelled ID nodes; eps_cov = 1e-4 * trace(Sigma) / d.
    static MahalanobisModel fit(const Matrix<double>& feats, const std::vector<std::int64_t>& labels,
                                std::int64_t num_classes) {
        const std::size_t d = feats.cols;
        if (labels.size() != feats.rows || feats.rows == 0)
            throw std::invalid_argument("MahalanobisModel::fit: labels do not match features");
        Matrix<double> mu(static_cast<std::size_t>(num_classes), d);
        std::vector<double> cnt(static_cast<std::size_t>(num_classes), 0.0);
        for (std::size_t i = 0; i < feats.rows; ++i) {
            const auto c = static_cast<std::size_t>(labels[i]);
            cnt[c] += 1.0;
            for (std::size_t j = 0; j < d; ++j) mu(c, j) += feats(i, j);
        }
        for (std::size_t c = 0; c < cnt.size(); ++c)
            for (std::size_t j = 0; j < d; ++j) mu(c, j) = cnt[c] > 0 ? mu(c, j) / cnt[c] : 0.0;
        Matrix<double> cov(d, d);
        for (std::size_t i = 0; i < feats.rows; ++i) {
            const auto c = static_cast<std::size_t>(labels[i]);
            for (std::size_t a = 0; a < d; ++a) {
                const double da = feats(i, a) - mu(c, a);
                for (std::size_t b = 0; b <= a; ++b) cov(a, b) += da * (feats(i, b) - mu(c, b));
            }
        }
        double trace = 0.0;
        for (std::size_t a = 0; a < d; ++a) {
            for (std::size_t b = 0; b <= a; ++b) {
                cov(a, b) /= double(feats.rows);
                cov(b, a) = cov(a, b);
            }
            trace += cov(a, a);
        }
        double eps = 1e-4 * trace / double(d);
        if (!(eps > 0.0)) eps = 1e-12;
        // Drop classes with no training rows so they cannot attract the minimum.
        Matrix<double> present(0, d);
        for (std::size_t c = 0; c < cnt.size(); ++c) {
            if (cnt[c] == 0) continue;
            present.rows += 1;
            present.data.insert(present.data.end(), mu.row(c).begin(), mu.row(c).end());
        }
        return MahalanobisModel(std::move(present), std::move(cov), eps);
    }

    // Squared Mahalanobis distance to the nearest class mean.
    ScoreVector score(const Matrix<double>& feats) const {
        if (feats.cols != means_.cols) throw std::invalid_argument("mahalanobis_score: feature width mismatch");
        const std::size_t d = feats.cols;
        ScoreVector s{std::vector<double>(feats.rows), "maha", {{"eps_cov", eps_}}};
        std::vector<double> diff(d), y(d);
        for (std::size_t i = 0; i < feats.rows; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < means_.rows; ++c) {
                for (std::size_t j = 0; j < d; ++j) diff[j] = feats(i, j) - means_(c, j);
                // Solve L y = diff; distance = |y|^2.
                double dist = 0.0;
                for (std::size_t a = 0; a < d; ++a) {
                    double v = diff[a];
                    for (std::size_t b = 0; b < a; ++b) v -= chol_(a, b) * y[b];
                    y[a] = v / chol_(a, a);
                    dist += y[a] * y[a];
                }
                best = std::min(best, dist);
            }
            s.scores[i] = best;
        }
        return s;
    }

    const Matrix<double>& means() const { return means_; }
    const Matrix<double>& covariance() const { return cov_; }
    double eps_cov() const { return eps_; }

private:
    void factorize() {
        const std::size_t d = cov_.rows;
        chol_ = Matrix<double>(d, d);
        for (std::size_t a = 0; a < d; ++a) {
            for (std::size_t b = 0; b <= a; ++b) {
                double v = cov_(a, b) + (a == b ? eps_ : 0.0);
                for (std::size_t k = 0; k < b; ++k) v -= chol_(a, k) * chol_(b, k);
                if (a == b) {
                    if (!(v > 0.0))
                        throw std::runtime_error("MahalanobisModel: covariance is not positive definite; "
                                                 "increase eps_cov");
                    chol_(a, a) = std::sqrt(v);
                } else {
                    chol_(a, b) = v / chol_(b, b);
                }
            }
        }
    }

    Matrix<double> means_;
    Matrix<double> cov_;
    double eps_;
    Matrix<double> chol_;
};

inline ScoreVector mahalanobis_score(const Matrix<double>& feats, const MahalanobisModel& model) {
    return model.score(feats);
}

// K steps of s <- alpha s + (1 - alpha) D^{-1} A s. Isolated nodes have an
// all-zero row in D^{-1} A, so their score decays to alpha^K s.
inline ScoreVector propagate_scores(const ScoreVector& s, const TrnGraph& g, int K, double alpha) {
    if (K < 0) throw std::invalid_argument("propagate_scores: K must be >= 0");
    if (alpha < 0.0 || alpha > 1.0) throw std::invalid_argument("propagate_scores: alpha must be in [0, 1]");
    if (s.scores.size() != g.n) throw std::invalid_argument("propagate_scores: score length != node count");
    const auto p = row_norm_adj(g);
    ScoreVector out = s;
    out.params["K"] = K;
    out.params["alpha"] = alpha;
    std::vector<double> next(g.n);
    for (int k = 0; k < K; ++k) {
        for (std::size_t i = 0; i < g.n; ++i) {
            double agg = 0.0;
            for (std::size_t q = p.row_ptr[i]; q < p.row_ptr[i + 1]; ++q) agg += p.values[q] * out.scores[p.col_idx[q]];
            next[i] = alpha * out.scores[i] + (1.0 - alpha) * agg;
        }
        out.scores.swap(next);
    }
    return out;
}

// s_i = e_i - T <p_hat_i, g_hat_i>.
inline ScoreVector elign_score(const ScoreVector& energy, const Matrix<double>& p_hat, const Matrix<double>& g_hat,
                               double temperature) {
    if (!p_hat.same_shape(g_hat) || p_hat.rows != energy.scores.size())
        throw std::invalid_argument("elign_score: shape mismatch between energy, P_t and g~");
    ScoreVector s{energy.scores, "elign", energy.params};
    s.params["T"] = temperature;
    for (std::size_t i = 0; i < p_hat.rows; ++i) {
        double align = 0.0;
        for (std::size_t j = 0; j < p_hat.cols; ++j) align += p_hat(i, j) * g_hat(i, j);
        s.scores[i] = energy.scores[i] - temperature * align;
    }
    return s;
}

// flag_i = s_i >= tau.
inline std::vector<bool> threshold(const ScoreVector& s, double tau) {
    std::vector<bool> out(s.scores.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = s.scores[i] >= tau;
    return out;
}

}  // namespace trnood
