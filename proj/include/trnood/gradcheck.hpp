#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "trnood/graph.hpp"
#include "trnood/rng.hpp"
#include "trnood/tensor.hpp"
#include "trnood/tnt_model.hpp"

namespace trnood {

struct GradCheckResult {
    std::string name;
    double max_rel_err = 0.0;
    std::size_t checked = 0;
    bool pass = true;
};

// Builds an output from leaves; the checked scalar is sum(out * R) for a fixed
// random R so every output entry contributes a distinct weight.
using GradBuilder = std::function<Tensor64(Tape<double>&, const std::vector<Tensor64>&)>;

// Relative error; entries whose magnitude is below `abs_floor` are compared
// absolutely (0 when within the floor, 1 otherwise).
inline double rel_err(double a, double b, double abs_floor) {
    const double diff = std::abs(a - b);
    const double mag = std::max(std::abs(a), std::abs(b));
    if (mag < abs_floor) return diff < abs_floor ? 0.0 : 1.0;
    return diff / mag;
}

inline GradCheckResult grad_check(const std::string& name, const std::vector<Matrix<double>>& inputs,
                                  const GradBuilder& build, Rng& rng, double tol = 1e-4, double h = 1e-4,
                                  double abs_floor = 1e-6) {
    Matrix<double> weights;
    auto loss_of = [&](Tape<double>& tape, const std::vector<Matrix<double>>& xs, std::vector<Tensor64>* leaves) {
        std::vector<Tensor64> ls;
        for (const auto& x : xs) ls.push_back(tape.leaf(x));
        auto out = build(tape, ls);
        if (weights.size() == 0) {
            weights = Matrix<double>(out.rows(), out.cols());
            for (auto& v : weights.data) v = rng.uniform(0.5, 1.5);
        }
        if (leaves) *leaves = ls;
        return sum(mul(out, tape.constant(weights)));
    };
    GradCheckResult r{name};
    Tape<double> tape;
    std::vector<Tensor64> leaves;
    auto loss = loss_of(tape, inputs, &leaves);
    tape.backward(loss);
    auto xs = inputs;
    for (std::size_t a = 0; a < xs.size(); ++a) {
        const auto analytic = tape.grad(leaves[a]);
        for (std::size_t k = 0; k < xs[a].data.size(); ++k) {
            const double orig = xs[a].data[k];
            xs[a].data[k] = orig + h;
            Tape<double> tp;
            const double up = loss_of(tp, xs, nullptr).value()(0, 0);
            xs[a].data[k] = orig - h;
            Tape<double> tm;
            const double dn = loss_of(tm, xs, nullptr).value()(0, 0);
            xs[a].data[k] = orig;
            const double e = rel_err(analytic.data[k], (up - dn) / (2.0 * h), abs_floor);
            r.max_rel_err = std::max(r.max_rel_err, e);
            ++r.checked;
        }
    }
    r.pass = r.max_rel_err < tol;
    return r;
}

namespace detail {

inline Matrix<double> random_matrix(std::size_t r, std::size_t c, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Matrix<double> m(r, c);
    for (auto& v : m.data) v = rng.uniform(lo, hi);
    return m;
}

// Entries kept at least `gap` away from zero so relu stays differentiable under +-h.
inline Matrix<double> away_from_zero(std::size_t r, std::size_t c, Rng& rng, double gap = 0.05) {
    Matrix<double> m(r, c);
    for (auto& v : m.data) {
        const double u = rng.uniform(gap, 1.0);
        v = rng.bernoulli(0.5) ? u : -u;
    }
    return m;
}

inline Csr<double> random_csr(std::size_t r, std::size_t c, Rng& rng) {
    Csr<double> s;
    s.rows = r;
    s.cols = c;
    s.row_ptr.push_back(0);
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j)
            if (rng.bernoulli(0.4)) {
                s.col_idx.push_back(j);
                s.values.push_back(rng.uniform(-1.0, 1.0));
            }
        s.row_ptr.push_back(s.col_idx.size());
    }
    return s;
}

inline std::vector<std::size_t> random_offsets(std::size_t segs, Rng& rng, std::size_t max_len = 4) {
    std::vector<std::size_t> off{0};
    for (std::size_t s = 0; s < segs; ++s) off.push_back(off.back() + rng.below(max_len + 1));
    if (off.back() == 0) off.back() = 1;  // keep at least one row
    return off;
}

}  // namespace detail

// Every tensor primitive on `shapes` random shapes with entries ~ U(-1, 1).
inline std::vector<GradCheckResult> primitive_grad_suite(std::uint64_t seed = 0, int shapes = 20, double tol = 1e-4) {
    using detail::random_matrix;
    Rng rng(seed, "gradcheck");
    std::vector<GradCheckResult> out;
    auto dim = [&] { return static_cast<std::size_t>(1 + rng.below(5)); };
    auto run = [&](const std::string& name, auto make) {
        GradCheckResult agg{name};
        for (int s = 0; s < shapes; ++s) {
            auto [inputs, fn] = make();
            auto r = grad_check(name, inputs, fn, rng, tol);
            agg.max_rel_err = std::max(agg.max_rel_err, r.max_rel_err);
            agg.checked += r.checked;
            agg.pass = agg.pass && r.pass;
        }
        out.push_back(agg);
    };
    using Case = std::pair<std::vector<Matrix<double>>, GradBuilder>;

    run("matmul", [&]() -> Case {
        auto m = dim(), k = dim(), n = dim();
        return {{random_matrix(m, k, rng), random_matrix(k, n, rng)},
                [](Tape<double>&, const std::vector<Tensor64>& x) { return matmul(x[0], x[1]); }};
    });
    run("sparse_dense_matmul", [&]() -> Case {
        auto m = dim(), k = dim(), n = dim();
        auto s = std::make_shared<Csr<double>>(detail::random_csr(m, k, rng));
        return {{random_matrix(k, n, rng)},
                [s](Tape<double>&, const std::vector<Tensor64>& x) { return sparse_dense_matmul(*s, x[0]); }};
    });
    for (const char* kind : {"same", "row", "col"}) {
        for (const char* op : {"add", "sub", "mul"}) {
            run(std::string(op) + "[" + kind + "]", [&, kind, op]() -> Case {
                auto r = dim(), c = dim();
                const std::string k = kind;
                auto b = k == "same" ? random_matrix(r, c, rng) : k == "row" ? random_matrix(1, c, rng) : random_matrix(r, 1, rng);
                const std::string o = op;
                return {{random_matrix(r, c, rng), b}, [o](Tape<double>&, const std::vector<Tensor64>& x) {
                            return o == "add" ? add(x[0], x[1]) : o == "sub" ? sub(x[0], x[1]) : mul(x[0], x[1]);
                        }};
            });
        }
    }
    run("scalar_mul", [&]() -> Case {
        const double s = rng.uniform(-2.0, 2.0);
        return {{random_matrix(dim(), dim(), rng)},
                [s](Tape<double>&, const std::vector<Tensor64>& x) { return scalar_mul(x[0], s); }};
    });
    run("relu", [&]() -> Case {
        return {{detail::away_from_zero(dim(), dim(), rng)},
                [](Tape<double>&, const std::vector<Tensor64>& x) { return relu(x[0]); }};
    });
    run("transpose", [&]() -> Case {
        return {{random_matrix(dim(), dim(), rng)},
                [](Tape<double>&, const std::vector<Tensor64>& x) { return transpose(x[0]); }};
    });
    run("reshape", [&]() -> Case {
        auto r = dim(), c = dim();
        return {{random_matrix(r, c, rng)},
                [r, c](Tape<double>&, const std::vector<Tensor64>& x) { return reshape(x[0], c, r); }};
    });
    for (int axis : {0, 1}) {
        run("softmax[axis=" + std::to_string(axis) + "]", [&, axis]() -> Case {
            return {{random_matrix(dim(), dim(), rng)},
                    [axis](Tape<double>&, const std::vector<Tensor64>& x) { return softmax(x[0], axis); }};
        });
        run("log_sum_exp[axis=" + std::to_string(axis) + "]", [&, axis]() -> Case {
            return {{random_matrix(dim(), dim(), rng)},
                    [axis](Tape<double>&, const std::vector<Tensor64>& x) { return log_sum_exp(x[0], axis); }};
        });
    }
    run("l2_normalize", [&]() -> Case {
        return {{detail::away_from_zero(dim(), dim(), rng)},
                [](Tape<double>&, const std::vector<Tensor64>& x) { return l2_normalize(x[0]); }};
    });
    run("gather_rows", [&]() -> Case {
        auto r = dim();
        std::vector<std::size_t> idx(1 + rng.below(6));
        for (auto& i : idx) i = static_cast<std::size_t>(rng.below(r));
        return {{random_matrix(r, dim(), rng)},
                [idx](Tape<double>&, const std::vector<Tensor64>& x) { return gather_rows(x[0], idx); }};
    });
    run("concat_rows", [&]() -> Case {
        auto c = dim();
        return {{random_matrix(dim(), c, rng), random_matrix(dim(), c, rng)},
                [](Tape<double>&, const std::vector<Tensor64>& x) { return concat_rows<double>({x[0], x[1]}); }};
    });
    run("cross_entropy", [&]() -> Case {
        auto r = dim(), c = dim();
        std::vector<std::int64_t> y(r);
        for (auto& v : y) v = static_cast<std::int64_t>(rng.below(c));
        return {{random_matrix(r, c, rng)},
                [y](Tape<double>&, const std::vector<Tensor64>& x) { return cross_entropy(x[0], y); }};
    });
    run("sum", [&]() -> Case {
        return {{random_matrix(dim(), dim(), rng)}, [](Tape<double>&, const std::vector<Tensor64>& x) { return sum(x[0]); }};
    });
    run("mean", [&]() -> Case {
        return {{random_matrix(dim(), dim(), rng)}, [](Tape<double>&, const std::vector<Tensor64>& x) { return mean(x[0]); }};
    });
    run("row_dot", [&]() -> Case {
        auto r = dim(), c = dim();
        return {{random_matrix(r, c, rng), random_matrix(r, c, rng)},
                [](Tape<double>&, const std::vector<Tensor64>& x) { return row_dot(x[0], x[1]); }};
    });
    run("segment_softmax", [&]() -> Case {
        auto off = detail::random_offsets(dim(), rng);
        return {{random_matrix(off.back(), 1, rng)},
                [off](Tape<double>&, const std::vector<Tensor64>& x) { return segment_softmax(x[0], off); }};
    });
    run("segment_sum", [&]() -> Case {
        auto off = detail::random_offsets(dim(), rng);
        return {{random_matrix(off.back(), dim(), rng)},
                [off](Tape<double>&, const std::vector<Tensor64>& x) { return segment_sum(x[0], off); }};
    });
    run("row_matvec", [&]() -> Case {
        auto n = dim(), q = dim(), o = dim();
        return {{random_matrix(n, o * q, rng), random_matrix(n, q, rng)},
                [o](Tape<double>&, const std::vector<Tensor64>& x) { return row_matvec(x[0], x[1], o); }};
    });
    return out;
}

// Six-node graph with one isolated node, used by the end-to-end checks.
inline TrnGraph gradcheck_graph(std::size_t d = 5, std::uint64_t seed = 0) {
    Rng rng(seed, "gradcheck.graph");
    TrnGraph g;
    g.n = 6;
    g.num_classes = 3;
    g.labels = {0, 1, 2, 0, 1, 2};
    g.features = Matrix<float>(6, d);
    for (auto& v : g.features.data) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    g.edges = {{0, 1}, {0, 2}, {1, 2}, {2, 3}, {3, 4}};
    return g;
}

// d(total loss)/d(every weight) vs central differences of the 64-bit forward.
// With float_forward the analytic gradient comes from a 32-bit tape.
inline std::vector<GradCheckResult> tnt_end_to_end_grad_check(bool use_low_rank, bool float_forward,
                                                              std::uint64_t seed = 0, double h = 1e-4) {
    const auto g = gradcheck_graph();
    TntConfig cfg;
    cfg.d_p = 4;
    cfg.rank = 2;
    cfg.hyper_hidden = 3;
    cfg.use_low_rank = use_low_rank;
    cfg.seed = seed;
    cfg.tau = 0.5;
    auto model = TntModel<double>::init(cfg, g.dim(), g.num_classes);
    // Lift the hyper output layer to full scale so its gradients are not all tiny.
    for (auto& [name, m] : model.params())
        if (name.rfind("hyper.W", 0) == 0 && name != "hyper.W1")
            for (auto& v : m.data) v *= 10.0;
    const std::vector<std::size_t> train{0, 1, 2, 3};
    const std::vector<std::int64_t> y{0, 1, 2, 0};
    std::vector<std::size_t> batch(g.n);
    for (std::size_t i = 0; i < g.n; ++i) batch[i] = i;

    auto loss64 = [&](const ParamStore<double>& p) {
        Tape<double> tape;
        const GraphOperators<double> ops(g);
        TntModel<double> m(cfg, g.dim(), g.num_classes, p);
        auto b = bind_params(tape, p, false);
        return m.loss(m.forward(tape, ops, b), train, y, batch).total.value()(0, 0);
    };

    std::map<std::string, Matrix<double>> analytic;
    if (float_forward) {
        Tape<float> tape;
        const GraphOperators<float> ops(g);
        TntModel<float> m(cfg, g.dim(), g.num_classes, cast_params<float>(model.params()));
        auto b = bind_params(tape, m.params());
        tape.backward(m.loss(m.forward(tape, ops, b), train, y, batch).total);
        for (auto& [k, v] : collect_grads(tape, b)) analytic[k] = v.template cast<double>();
    } else {
        Tape<double> tape;
        const GraphOperators<double> ops(g);
        auto b = bind_params(tape, model.params());
        tape.backward(model.loss(model.forward(tape, ops, b), train, y, batch).total);
        analytic = collect_grads(tape, b);
    }

    const double tol = float_forward ? 1e-3 : 1e-4;
    // float32 carries ~1e-7 relative noise through every op; below this
    // magnitude a gradient entry is compared absolutely.
    const double floor = float_forward ? 1e-5 : 1e-6;
    std::vector<GradCheckResult> out;
    auto p = model.params();
    for (auto& [name, w] : p) {
        GradCheckResult r{"tnt[" + std::string(use_low_rank ? "lowrank" : "full") + "," +
                          (float_forward ? "f32" : "f64") + "]." + name};
        for (std::size_t k = 0; k < w.data.size(); ++k) {
            const double orig = w.data[k];
            w.data[k] = orig + h;
            const double up = loss64(p);
            w.data[k] = orig - h;
            const double dn = loss64(p);
            w.data[k] = orig;
            r.max_rel_err = std::max(r.max_rel_err, rel_err(analytic.at(name).data[k], (up - dn) / (2 * h), floor));
            ++r.checked;
        }
        r.pass = r.max_rel_err < tol;
        out.push_back(r);
    }
    return out;
}

}  // namespace trnood
