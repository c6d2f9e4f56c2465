#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "trnood/graph.hpp"
#include "trnood/optim.hpp"
#include "trnood/rng.hpp"
#include "trnood/tensor.hpp"

namespace trnood {

struct TntConfig {
    std::size_t d_p = 128;          // projection width
    std::size_t rank = 16;          // low-rank factor width
    std::size_t hyper_hidden = 0;   // 0 means d_p
    std::size_t layers = 1;         // structure-encoder GCN layers
    double tau = 0.1;               // contrastive temperature
    double lambda = 0.5;            // contrastive weight
    double lr = 0.01;
    double weight_decay = 5e-4;
    int epochs = 200;
    bool use_low_rank = true;
    std::size_t contrastive_batch = 2048;
    std::size_t full_budget = std::size_t{1} << 27;  // max n * d_p * d for the full hypernetwork
    std::uint64_t seed = 0;

    std::size_t hidden() const { return hyper_hidden ? hyper_hidden : d_p; }

    void validate(std::size_t d) const {
        if (d_p == 0 || layers == 0) throw std::invalid_argument("TntConfig: d_p and layers must be positive");
        if (use_low_rank && (rank == 0 || rank > std::min(d_p, d)))
            throw std::invalid_argument("TntConfig: rank " + std::to_string(rank) + " must be in [1, min(d_p, d) = " +
                                        std::to_string(std::min(d_p, d)) + "]");
        if (!(tau > 0.0)) throw std::invalid_argument("TntConfig: tau must be > 0");
        if (!(lambda >= 0.0)) throw std::invalid_argument("TntConfig: lambda must be >= 0");
        if (epochs < 0) throw std::invalid_argument("TntConfig: epochs must be >= 0");
        if (contrastive_batch == 0) throw std::invalid_argument("TntConfig: contrastive_batch must be positive");
    }
};

// Per-graph constant operators shared by every forward pass.
template <class T>
struct GraphOperators {
    std::size_t n = 0;
    Matrix<T> features;
    Csr<T> a_hat;                          // D~^{-1/2}(A+I)D~^{-1/2}
    std::vector<std::size_t> nbr_offsets;  // CSR offsets of neighbour lists (no self)
    std::vector<std::size_t> nbr_src, nbr_dst;

    explicit GraphOperators(const TrnGraph& g)
        : n(g.n), features(g.features.template cast<T>()), a_hat(sym_norm_adj(g).template cast<T>()) {
        const auto a = adjacency(g);
        nbr_offsets.assign(a.row_ptr.begin(), a.row_ptr.end());
        nbr_src.reserve(a.nnz());
        nbr_dst.reserve(a.nnz());
        for (std::size_t i = 0; i < g.n; ++i)
            for (std::size_t p = a.row_ptr[i]; p < a.row_ptr[i + 1]; ++p) {
                nbr_src.push_back(i);
                nbr_dst.push_back(a.col_idx[p]);
            }
    }
};

template <class T>
struct TntOutputs {
    BasicTensor<T> g;        // structural embeddings [n x d_p]
    BasicTensor<T> z;        // fused representations [n x d]
    BasicTensor<T> p_t;      // projected text [n x d_p]
    BasicTensor<T> g_tilde;  // fuse-GCN output [n x d_p]
    BasicTensor<T> logits;   // [n x C]
};

template <class T>
using Bound = std::map<std::string, BasicTensor<T>>;

template <class T>
const BasicTensor<T>& param(const Bound<T>& b, const std::string& name) {
    auto it = b.find(name);
    if (it == b.end()) throw std::invalid_argument("missing parameter " + name);
    return it->second;
}

template <class T>
BasicTensor<T> encode_structure(Tape<T>& tape, const GraphOperators<T>& ops, const Bound<T>& p, std::size_t layers) {
    auto h = tape.constant(ops.features);
    for (std::size_t l = 0; l < layers; ++l)
        h = relu(sparse_dense_matmul(ops.a_hat, matmul(h, param(p, "enc.W" + std::to_string(l)))));
    return h;
}

// z_i = x_i + sum_{j in N(i)} softmax_j(<q_i, k_j> / sqrt(d_z)) v_j.
template <class T>
BasicTensor<T> cross_attention(Tape<T>& tape, const GraphOperators<T>& ops, const BasicTensor<T>& g,
                               const Bound<T>& p) {
    auto x = tape.constant(ops.features);
    auto q = matmul(g, param(p, "att.Wq"));
    auto k = matmul(x, param(p, "att.Wk"));
    auto v = matmul(x, param(p, "att.Wv"));
    const double inv_sqrt_dz = 1.0 / std::sqrt(double(k.cols()));
    auto scores = scalar_mul(row_dot(gather_rows(q, ops.nbr_src), gather_rows(k, ops.nbr_dst)), inv_sqrt_dz);
    auto weights = segment_softmax(scores, ops.nbr_offsets);
    auto messages = mul(gather_rows(v, ops.nbr_dst), weights);
    return add(x, segment_sum(messages, ops.nbr_offsets));
}

template <class T>
BasicTensor<T> hyper_hidden(const BasicTensor<T>& z, const Bound<T>& p) {
    return relu(add(matmul(z, param(p, "hyper.W1")), param(p, "hyper.b1")));
}

// W_i = reshape(MLP(z_i), [d_p x d]); p_i = W_i x_i.
template <class T>
BasicTensor<T> hyper_project_full(Tape<T>& tape, const GraphOperators<T>& ops, const BasicTensor<T>& z,
                                  const Bound<T>& p, std::size_t d_p) {
    auto w = add(matmul(hyper_hidden(z, p), param(p, "hyper.W2")), param(p, "hyper.b2"));
    return row_matvec(w, tape.constant(ops.features), d_p);
}

// (L_i, R_i) = MLP(z_i); p_i = L_i (R_i x_i), evaluated right to left.
template <class T>
BasicTensor<T> hyper_project_lowrank(Tape<T>& tape, const GraphOperators<T>& ops, const BasicTensor<T>& z,
                                     const Bound<T>& p, std::size_t d_p, std::size_t rank) {
    auto h = hyper_hidden(z, p);
    auto left = add(matmul(h, param(p, "hyper.WL")), param(p, "hyper.bL"));
    auto right = add(matmul(h, param(p, "hyper.WR")), param(p, "hyper.bR"));
    auto inner = row_matvec(right, tape.constant(ops.features), rank);
    return row_matvec(left, inner, d_p);
}

template <class T>
BasicTensor<T> gcn_layer(const Csr<T>& a_hat, const BasicTensor<T>& h, const BasicTensor<T>& w,
                         const BasicTensor<T>& b) {
    return add(sparse_dense_matmul(a_hat, matmul(h, w)), b);
}

// Symmetric InfoNCE between row-normalised projections and structure embeddings.
template <class T>
BasicTensor<T> contrastive_loss(const BasicTensor<T>& p_t, const BasicTensor<T>& g_tilde, double tau) {
    if (!(tau > 0.0)) throw std::invalid_argument("contrastive_loss: tau must be > 0");
    if (!p_t.value().same_shape(g_tilde.value())) shape_error("contrastive_loss", p_t.value(), g_tilde.value());
    auto s = scalar_mul(matmul(l2_normalize(p_t), transpose(l2_normalize(g_tilde))), 1.0 / tau);
    std::vector<std::int64_t> diag(s.rows());
    for (std::size_t i = 0; i < diag.size(); ++i) diag[i] = static_cast<std::int64_t>(i);
    return scalar_mul(add(cross_entropy(s, diag), cross_entropy(transpose(s), diag)), 0.5);
}

template <class T>
class TntModel {
public:
    TntModel() = default;
    TntModel(TntConfig cfg, std::size_t d, std::int64_t num_classes, ParamStore<T> params)
        : cfg_(cfg), d_(d), num_classes_(num_classes), params_(std::move(params)) {}

    static TntModel init(const TntConfig& cfg, std::size_t d, std::int64_t num_classes) {
        cfg.validate(d);
        if (num_classes < 1) throw std::invalid_argument("TntModel: need at least one class");
        Rng rng(cfg.seed, "tnt.init");
        const std::size_t dp = cfg.d_p, h = cfg.hidden(), C = static_cast<std::size_t>(num_classes);
        ParamStore<T> p;
        for (std::size_t l = 0; l < cfg.layers; ++l)
            p["enc.W" + std::to_string(l)] = glorot_uniform<T>(l == 0 ? d : dp, dp, rng);
        p["att.Wq"] = glorot_uniform<T>(dp, dp, rng);
        p["att.Wk"] = glorot_uniform<T>(d, dp, rng);
        p["att.Wv"] = glorot_uniform<T>(d, d, rng);
        p["hyper.W1"] = glorot_uniform<T>(d, h, rng);
        p["hyper.b1"] = Matrix<T>(1, h);
        if (cfg.use_low_rank) {
            p["hyper.WL"] = glorot_uniform<T>(h, dp * cfg.rank, rng, 0.1);
            p["hyper.bL"] = Matrix<T>(1, dp * cfg.rank);
            p["hyper.WR"] = glorot_uniform<T>(h, cfg.rank * d, rng, 0.1);
            p["hyper.bR"] = Matrix<T>(1, cfg.rank * d);
        } else {
            p["hyper.W2"] = glorot_uniform<T>(h, dp * d, rng, 0.1);
            p["hyper.b2"] = Matrix<T>(1, dp * d);
        }
        p["fuse.W"] = glorot_uniform<T>(dp, dp, rng);
        p["fuse.b"] = Matrix<T>(1, dp);
        p["cls.W"] = glorot_uniform<T>(dp, C, rng);
        p["cls.b"] = Matrix<T>(1, C);
        return TntModel(cfg, d, num_classes, std::move(p));
    }

    TntOutputs<T> forward(Tape<T>& tape, const GraphOperators<T>& ops, const Bound<T>& p) const {
        if (ops.features.cols != d_)
            throw std::invalid_argument("TntModel: graph has d = " + std::to_string(ops.features.cols) +
                                        ", model expects " + std::to_string(d_));
        TntOutputs<T> out;
        out.g = encode_structure(tape, ops, p, cfg_.layers);
        out.z = cross_attention(tape, ops, out.g, p);
        if (cfg_.use_low_rank) {
            out.p_t = hyper_project_lowrank(tape, ops, out.z, p, cfg_.d_p, cfg_.rank);
        } else {
            if (ops.n * cfg_.d_p * d_ > cfg_.full_budget)
                throw std::runtime_error("full hypernetwork needs n*d_p*d = " + std::to_string(ops.n * cfg_.d_p * d_) +
                                         " generated weights (budget " + std::to_string(cfg_.full_budget) +
                                         "); enable use_low_rank");
            out.p_t = hyper_project_full(tape, ops, out.z, p, cfg_.d_p);
        }
        out.g_tilde = gcn_layer(ops.a_hat, out.p_t, param(p, "fuse.W"), param(p, "fuse.b"));
        out.logits = gcn_layer(ops.a_hat, relu(out.g_tilde), param(p, "cls.W"), param(p, "cls.b"));
        return out;
    }

    // L = CE(logits[train], y[train]) + lambda * L_cont(batch).
    struct Loss {
        BasicTensor<T> total, cls, cont;
    };

    Loss loss(const TntOutputs<T>& out, const std::vector<std::size_t>& train_idx,
              const std::vector<std::int64_t>& train_labels, const std::vector<std::size_t>& batch) const {
        Loss l;
        l.cls = cross_entropy(gather_rows(out.logits, train_idx), train_labels);
        if (cfg_.lambda > 0.0) {
            l.cont = contrastive_loss(gather_rows(out.p_t, batch), gather_rows(out.g_tilde, batch), cfg_.tau);
            l.total = add(l.cls, scalar_mul(l.cont, cfg_.lambda));
        } else {
            l.total = l.cls;
        }
        return l;
    }

    const TntConfig& config() const { return cfg_; }
    std::size_t input_dim() const { return d_; }
    std::int64_t num_classes() const { return num_classes_; }
    const ParamStore<T>& params() const { return params_; }
    ParamStore<T>& params() { return params_; }

private:
    TntConfig cfg_;
    std::size_t d_ = 0;
    std::int64_t num_classes_ = 0;
    ParamStore<T> params_;
};

// Plain two-layer GCN used as the shared classifier for post-hoc baselines.
struct GcnConfig {
    std::size_t hidden = 128;
    double lr = 0.01;
    double weight_decay = 5e-4;
    int epochs = 200;
    std::uint64_t seed = 0;
};

template <class T>
struct GcnOutputs {
    BasicTensor<T> hidden;
    BasicTensor<T> logits;
};

template <class T>
class GcnModel {
public:
    GcnModel() = default;
    GcnModel(GcnConfig cfg, std::size_t d, std::int64_t num_classes, ParamStore<T> params)
        : cfg_(cfg), d_(d), num_classes_(num_classes), params_(std::move(params)) {}

    static GcnModel init(const GcnConfig& cfg, std::size_t d, std::int64_t num_classes) {
        if (cfg.hidden == 0 || num_classes < 1) throw std::invalid_argument("GcnModel: bad configuration");
        Rng rng(cfg.seed, "gcn.init");
        ParamStore<T> p;
        p["gcn.W1"] = glorot_uniform<T>(d, cfg.hidden, rng);
        p["gcn.b1"] = Matrix<T>(1, cfg.hidden);
        p["gcn.W2"] = glorot_uniform<T>(cfg.hidden, static_cast<std::size_t>(num_classes), rng);
        p["gcn.b2"] = Matrix<T>(1, static_cast<std::size_t>(num_classes));
        return GcnModel(cfg, d, num_classes, std::move(p));
    }

    GcnOutputs<T> forward(Tape<T>& tape, const GraphOperators<T>& ops, const Bound<T>& p) const {
        if (ops.features.cols != d_) throw std::invalid_argument("GcnModel: feature width mismatch");
        GcnOutputs<T> out;
        out.hidden = relu(gcn_layer(ops.a_hat, tape.constant(ops.features), param(p, "gcn.W1"), param(p, "gcn.b1")));
        out.logits = gcn_layer(ops.a_hat, out.hidden, param(p, "gcn.W2"), param(p, "gcn.b2"));
        return out;
    }

    const GcnConfig& config() const { return cfg_; }
    std::size_t input_dim() const { return d_; }
    std::int64_t num_classes() const { return num_classes_; }
    const ParamStore<T>& params() const { return params_; }
    ParamStore<T>& params() { return params_; }

private:
    GcnConfig cfg_;
    std::size_t d_ = 0;
    std::int64_t num_classes_ = 0;
    ParamStore<T> params_;
};

}  // namespace trnood
