#pragma once

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

#include "trnood/graph.hpp"
#include "trnood/rng.hpp"
#include "trnood/tensor.hpp"

namespace trnood {

// Named parameter tensors, iterated in name order.
template <class T>
using ParamStore = std::map<std::string, Matrix<T>>;

template <class T>
using GradMap = std::map<std::string, Matrix<T>>;

// Binds every parameter as a leaf on `tape`.
template <class T>
std::map<std::string, BasicTensor<T>> bind_params(Tape<T>& tape, const ParamStore<T>& params, bool requires_grad = true) {
    std::map<std::string, BasicTensor<T>> out;
    for (const auto& [name, value] : params) out.emplace(name, tape.leaf(value, requires_grad, name));
    return out;
}

template <class T>
GradMap<T> collect_grads(const Tape<T>& tape, const std::map<std::string, BasicTensor<T>>& bound) {
    GradMap<T> out;
    for (const auto& [name, t] : bound) out.emplace(name, tape.grad(t));
    return out;
}

template <class U, class T>
ParamStore<U> cast_params(const ParamStore<T>& p) {
    ParamStore<U> out;
    for (const auto& [k, v] : p) out.emplace(k, v.template cast<U>());
    return out;
}

struct AdamConfig {
    double lr = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;  // L2 penalty folded into the gradient
};

template <class T>
struct AdamState {
    std::map<std::string, Matrix<double>> m, v;
    long step = 0;
};

template <class T>
void adam_step(ParamStore<T>& params, const GradMap<T>& grads, AdamState<T>& state, const AdamConfig& cfg) {
    ++state.step;
    const double bc1 = 1.0 - std::pow(cfg.beta1, double(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, double(state.step));
    for (auto& [name, p] : params) {
        auto git = grads.find(name);
        if (git == grads.end()) throw std::invalid_argument("adam_step: no gradient for " + name);
        const auto& g = git->second;
        if (!g.same_shape(p)) throw std::invalid_argument("adam_step: gradient shape mismatch for " + name);
        auto [mit, fresh_m] = state.m.try_emplace(name, Matrix<double>(p.rows, p.cols));
        auto [vit, fresh_v] = state.v.try_emplace(name, Matrix<double>(p.rows, p.cols));
        auto& m = mit->second;
        auto& v = vit->second;
        if (m.rows != p.rows || m.cols != p.cols || v.rows != p.rows || v.cols != p.cols)
            throw std::invalid_argument("adam_step: optimizer state shape mismatch for " + name);
        for (std::size_t i = 0; i < p.data.size(); ++i) {
            const double gi = double(g.data[i]) + cfg.weight_decay * double(p.data[i]);
            m.data[i] = cfg.beta1 * m.data[i] + (1.0 - cfg.beta1) * gi;
            v.data[i] = cfg.beta2 * v.data[i] + (1.0 - cfg.beta2) * gi * gi;
            const double mhat = m.data[i] / bc1;
            const double vhat = v.data[i] / bc2;
            p.data[i] = static_cast<T>(double(p.data[i]) - cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps));
        }
    }
}

// Glorot-uniform in [-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out))], times `gain`.
template <class T>
Matrix<T> glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng, double gain = 1.0) {
    const double bound = gain * std::sqrt(6.0 / double(fan_in + fan_out));
    Matrix<T> w(fan_in, fan_out);
    for (auto& x : w.data) x = static_cast<T>(rng.uniform(-bound, bound));
    return w;
}

}  // namespace trnood
