#pragma once

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "trnood/graph.hpp"
#include "trnood/optim.hpp"
#include "trnood/tnt_model.hpp"

namespace trnood {

struct EpochLog {
    int epoch = 0;
    double cls_loss = 0.0;
    double cont_loss = 0.0;
    double total = 0.0;
};

class TrainingDiverged : public std::runtime_error {
public:
    explicit TrainingDiverged(int epoch)
        : std::runtime_error("training diverged: non-finite loss at epoch " + std::to_string(epoch)), epoch_(epoch) {}
    int epoch() const { return epoch_; }

private:
    int epoch_;
};

template <class Model>
struct TrainResult {
    Model model;
    AdamState<float> optimizer;
    std::vector<EpochLog> log;
};

inline void check_train_set(const TrnGraph& g, const std::vector<std::size_t>& train_idx) {
    if (train_idx.empty()) throw std::invalid_argument("train: empty training mask");
    for (auto i : train_idx)
        if (i >= g.n) throw std::invalid_argument("train: training index out of range");
    if (g.labels.size() != g.n) throw std::invalid_argument("train: graph has no labels");
}

// Contrastive rows for one epoch: every node when n <= batch, else a uniform sample.
inline std::vector<std::size_t> contrastive_batch(std::size_t n, std::size_t batch, std::uint64_t seed, int epoch) {
    if (n <= batch) {
        std::vector<std::size_t> all(n);
        std::iota(all.begin(), all.end(), std::size_t{0});
        return all;
    }
    Rng rng = Rng(seed, "tnt.contrastive").child(std::to_string(epoch));
    auto idx = rng.sample_indices(n, batch);
    std::sort(idx.begin(), idx.end());
    return idx;
}

inline TrainResult<TntModel<float>> train_tnt(const TrnGraph& g, const std::vector<std::size_t>& train_idx,
                                              const TntConfig& cfg) {
    check_train_set(g, train_idx);
    TrainResult<TntModel<float>> r{TntModel<float>::init(cfg, g.dim(), g.num_classes), {}, {}};
    const GraphOperators<float> ops(g);
    std::vector<std::int64_t> y;
    for (auto i : train_idx) y.push_back(g.labels[i]);
    const AdamConfig adam{cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay};
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Tape<float> tape;
        auto bound = bind_params(tape, r.model.params());
        auto out = r.model.forward(tape, ops, bound);
        auto loss = r.model.loss(out, train_idx, y, contrastive_batch(g.n, cfg.contrastive_batch, cfg.seed, epoch));
        EpochLog row{epoch, loss.cls.value()(0, 0), loss.cont.valid() ? double(loss.cont.value()(0, 0)) : 0.0,
                     loss.total.value()(0, 0)};
        if (!std::isfinite(row.total)) throw TrainingDiverged(epoch);
        tape.backward(loss.total);
        adam_step(r.model.params(), collect_grads(tape, bound), r.optimizer, adam);
        r.log.push_back(row);
    }
    return r;
}

inline TrainResult<GcnModel<float>> train_gcn(const TrnGraph& g, const std::vector<std::size_t>& train_idx,
                                              const GcnConfig& cfg) {
    check_train_set(g, train_idx);
    TrainResult<GcnModel<float>> r{GcnModel<float>::init(cfg, g.dim(), g.num_classes), {}, {}};
    const GraphOperators<float> ops(g);
    std::vector<std::int64_t> y;
    for (auto i : train_idx) y.push_back(g.labels[i]);
    const AdamConfig adam{cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay};
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Tape<float> tape;
        auto bound = bind_params(tape, r.model.params());
        auto out = r.model.forward(tape, ops, bound);
        auto loss = cross_entropy(gather_rows(out.logits, train_idx), y);
        EpochLog row{epoch, loss.value()(0, 0), 0.0, loss.value()(0, 0)};
        if (!std::isfinite(row.total)) throw TrainingDiverged(epoch);
        tape.backward(loss);
        adam_step(r.model.params(), collect_grads(tape, bound), r.optimizer, adam);
        r.log.push_back(row);
    }
    return r;
}

// Frozen-model outputs needed by the detectors, widened to double.
struct ModelOutputs {
    Matrix<double> logits;
    Matrix<double> embedding;  // GCN hidden layer, or g~ for TNT
    Matrix<double> p_hat;      // row-normalised P_t (TNT only)
    Matrix<double> g_hat;      // row-normalised g~ (TNT only)
};

inline ModelOutputs infer(const TntModel<float>& m, const TrnGraph& g) {
    Tape<float> tape;
    const GraphOperators<float> ops(g);
    auto bound = bind_params(tape, m.params(), false);
    auto out = m.forward(tape, ops, bound);
    ModelOutputs r;
    r.logits = out.logits.value().cast<double>();
    r.embedding = out.g_tilde.value().cast<double>();
    r.p_hat = l2_normalize(out.p_t).value().cast<double>();
    r.g_hat = l2_normalize(out.g_tilde).value().cast<double>();
    return r;
}

inline ModelOutputs infer(const GcnModel<float>& m, const TrnGraph& g) {
    Tape<float> tape;
    const GraphOperators<float> ops(g);
    auto bound = bind_params(tape, m.params(), false);
    auto out = m.forward(tape, ops, bound);
    ModelOutputs r;
    r.logits = out.logits.value().cast<double>();
    r.embedding = out.hidden.value().cast<double>();
    return r;
}

}  // namespace trnood
