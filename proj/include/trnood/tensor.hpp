#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "trnood/graph.hpp"

// Reverse-mode autodiff over rank-2 tensors. A Tape records primitive
// applications in execution order; BasicTensor is a handle into it.
namespace trnood {

template <class T>
class Tape;

template <class T>
class BasicTensor {
public:
    BasicTensor() = default;
    BasicTensor(Tape<T>* tape, std::size_t id) : tape_(tape), id_(id) {}

    const Matrix<T>& value() const { return tape_->node(id_).value; }
    std::size_t rows() const { return value().rows; }
    std::size_t cols() const { return value().cols; }
    bool requires_grad() const { return tape_->node(id_).requires_grad; }
    Tape<T>* tape() const { return tape_; }
    std::size_t id() const { return id_; }
    bool valid() const { return tape_ != nullptr; }

private:
    Tape<T>* tape_ = nullptr;
    std::size_t id_ = 0;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

inline std::string shape_str(std::size_t r, std::size_t c) {
    return "[" + std::to_string(r) + "x" + std::to_string(c) + "]";
}

template <class T>
[[noreturn]] void shape_error(const char* op, const Matrix<T>& a, const Matrix<T>& b) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.rows, a.cols) +
                                " vs " + shape_str(b.rows, b.cols));
}

template <class T>
class Tape {
public:
    using Backward = std::function<void(Tape&, std::size_t self, const Matrix<T>& grad_out)>;

    struct Node {
        std::string op;
        Matrix<T> value;
        Matrix<T> grad;
        bool requires_grad = false;
        std::vector<std::size_t> parents;
        Backward backward;
    };

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    BasicTensor<T> leaf(Matrix<T> value, bool requires_grad = true, std::string name = "leaf") {
        nodes_.push_back(Node{std::move(name), std::move(value), {}, requires_grad, {}, {}});
        return {this, nodes_.size() - 1};
    }

    BasicTensor<T> constant(Matrix<T> value) { return leaf(std::move(value), false, "const"); }

    BasicTensor<T> record(std::string op, Matrix<T> value, std::vector<std::size_t> parents,
                          Backward backward) {
        bool rg = false;
        for (auto p : parents) rg = rg || nodes_[p].requires_grad;
        nodes_.push_back(Node{std::move(op), std::move(value), {}, rg, std::move(parents),
                              rg ? std::move(backward) : Backward{}});
        return {this, nodes_.size() - 1};
    }

    const Node& node(std::size_t id) const { return nodes_.at(id); }
    std::size_t size() const { return nodes_.size(); }

    // Adds `g` into the gradient buffer of node `id` if it takes gradients.
    void accumulate(std::size_t id, const Matrix<T>& g) {
        auto& n = nodes_[id];
        if (!n.requires_grad) return;
        if (n.grad.size() == 0) {
            n.grad = g;
            return;
        }
        for (std::size_t i = 0; i < g.data.size(); ++i) n.grad.data[i] += g.data[i];
    }

    bool wants_grad(std::size_t id) const { return nodes_[id].requires_grad; }

    void backward(const BasicTensor<T>& loss) {
        if (loss.tape() != this) throw std::invalid_argument("backward: loss recorded on another tape");
        const auto& lv = nodes_[loss.id()].value;
        if (lv.rows != 1 || lv.cols != 1)
            throw std::invalid_argument("backward: loss must be scalar, got " + shape_str(lv.rows, lv.cols));
        for (auto& n : nodes_) n.grad = Matrix<T>();
        if (!nodes_[loss.id()].requires_grad) return;
        nodes_[loss.id()].grad = Matrix<T>(1, 1, T(1));
        for (std::size_t k = loss.id() + 1; k-- > 0;) {
            auto& n = nodes_[k];
            if (!n.requires_grad || n.grad.size() == 0 || !n.backward) continue;
            const Matrix<T> g = n.grad;
            n.backward(*this, k, g);
        }
    }

    // Gradient of the last backward() w.r.t. `t`; zeros when unreachable.
    Matrix<T> grad(const BasicTensor<T>& t) const {
        const auto& n = nodes_.at(t.id());
        if (n.grad.size() == 0) return Matrix<T>(n.value.rows, n.value.cols);
        return n.grad;
    }

    std::string dump() const {
        std::ostringstream os;
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            const auto& n = nodes_[i];
            os << "%" << i << " = " << n.op << shape_str(n.value.rows, n.value.cols);
            if (!n.parents.empty()) {
                os << " (";
                for (std::size_t p = 0; p < n.parents.size(); ++p) os << (p ? ", %" : "%") << n.parents[p];
                os << ")";
            }
            if (n.requires_grad) os << " grad";
            os << "\n";
        }
        return os.str();
    }

private:
    std::vector<Node> nodes_;
};

namespace detail {

template <class T>
Matrix<T> transpose_copy(const Matrix<T>& a) {
    Matrix<T> t(a.cols, a.rows);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
    return t;
}

// C = op(A) * op(B) with 64-bit accumulation.
template <class T>
Matrix<T> gemm(const Matrix<T>& a, bool ta, const Matrix<T>& b, bool tb) {
    const std::size_t m = ta ? a.cols : a.rows, k = ta ? a.rows : a.cols;
    const std::size_t kb = tb ? b.cols : b.rows, n = tb ? b.rows : b.cols;
    if (k != kb) throw std::invalid_argument("gemm: inner dimension mismatch");
    Matrix<T> c(m, n);
    if (!ta && !tb) {
        std::vector<double> acc(n);
        for (std::size_t i = 0; i < m; ++i) {
            std::fill(acc.begin(), acc.end(), 0.0);
            const T* arow = a.data.data() + i * a.cols;
            for (std::size_t p = 0; p < k; ++p) {
                const double av = arow[p];
                if (av == 0.0) continue;
                const T* brow = b.data.data() + p * b.cols;
                for (std::size_t j = 0; j < n; ++j) acc[j] += av * double(brow[j]);
            }
            for (std::size_t j = 0; j < n; ++j) c(i, j) = static_cast<T>(acc[j]);
        }
    } else if (!ta && tb) {
        for (std::size_t i = 0; i < m; ++i) {
            const T* arow = a.data.data() + i * a.cols;
            for (std::size_t j = 0; j < n; ++j) {
                const T* brow = b.data.data() + j * b.cols;
                double s = 0.0;
                for (std::size_t p = 0; p < k; ++p) s += double(arow[p]) * double(brow[p]);
                c(i, j) = static_cast<T>(s);
            }
        }
    } else if (ta && !tb) {
        std::vector<double> acc(m * n, 0.0);
        for (std::size_t p = 0; p < k; ++p) {
            const T* arow = a.data.data() + p * a.cols;
            const T* brow = b.data.data() + p * b.cols;
            for (std::size_t i = 0; i < m; ++i) {
                const double av = arow[i];
                if (av == 0.0) continue;
                double* crow = acc.data() + i * n;
                for (std::size_t j = 0; j < n; ++j) crow[j] += av * double(brow[j]);
            }
        }
        for (std::size_t i = 0; i < m * n; ++i) c.data[i] = static_cast<T>(acc[i]);
    } else {
        throw std::invalid_argument("gemm: A^T B^T is not supported");
    }
    return c;
}

enum class Bcast { same, row, col };

template <class T>
Bcast broadcast_kind(const char* op, const Matrix<T>& a, const Matrix<T>& b) {
    if (a.same_shape(b)) return Bcast::same;
    if (b.rows == 1 && b.cols == a.cols) return Bcast::row;
    if (b.cols == 1 && b.rows == a.rows) return Bcast::col;
    shape_error(op, a, b);
}

template <class T>
T bvalue(const Matrix<T>& b, Bcast k, std::size_t i, std::size_t j) {
    switch (k) {
        case Bcast::same: return b(i, j);
        case Bcast::row: return b(0, j);
        default: return b(i, 0);
    }
}

// Sums a full-shape gradient down to the broadcast operand's shape.
template <class T>
Matrix<T> reduce_to(const Matrix<T>& g, Bcast k, std::size_t rows, std::size_t cols) {
    if (k == Bcast::same) return g;
    std::vector<double> acc(rows * cols, 0.0);
    for (std::size_t i = 0; i < g.rows; ++i)
        for (std::size_t j = 0; j < g.cols; ++j) acc[k == Bcast::row ? j : i] += g(i, j);
    Matrix<T> out(rows, cols);
    for (std::size_t i = 0; i < acc.size(); ++i) out.data[i] = static_cast<T>(acc[i]);
    return out;
}

template <class T>
void check_same_tape(const char* op, const BasicTensor<T>& a, const BasicTensor<T>& b) {
    if (a.tape() != b.tape()) throw std::invalid_argument(std::string(op) + ": operands on different tapes");
}

}  // namespace detail

template <class T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    detail::check_same_tape("matmul", a, b);
    if (a.cols() != b.rows()) shape_error("matmul", a.value(), b.value());
    const auto ia = a.id(), ib = b.id();
    return a.tape()->record("matmul", detail::gemm(a.value(), false, b.value(), false), {ia, ib},
                            [ia, ib](Tape<T>& t, std::size_t, const Matrix<T>& g) {
                                if (t.wants_grad(ia)) t.accumulate(ia, detail::gemm(g, false, t.node(ib).value, true));
                                if (t.wants_grad(ib)) t.accumulate(ib, detail::gemm(t.node(ia).value, true, g, false));
                            });
}

// S * B for a constant sparse S; only B receives a gradient.
template <class T>
BasicTensor<T> sparse_dense_matmul(const Csr<T>& s, const BasicTensor<T>& b) {
    const auto& bv = b.value();
    if (s.cols != bv.rows)
        throw std::invalid_argument("sparse_dense_matmul: shape mismatch " + shape_str(s.rows, s.cols) + " vs " +
                                    shape_str(bv.rows, bv.cols));
    Matrix<T> out(s.rows, bv.cols);
    std::vector<double> acc(bv.cols);
    for (std::size_t i = 0; i < s.rows; ++i) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (std::size_t p = s.row_ptr[i]; p < s.row_ptr[i + 1]; ++p) {
            const double w = s.values[p];
            auto brow = bv.row(s.col_idx[p]);
            for (std::size_t j = 0; j < bv.cols; ++j) acc[j] += w * double(brow[j]);
        }
        for (std::size_t j = 0; j < bv.cols; ++j) out(i, j) = static_cast<T>(acc[j]);
    }
    const auto ib = b.id();
    const Csr<T>* sp = &s;
    return b.tape()->record("sparse_dense_matmul", std::move(out), {ib},
                            [ib, sp](Tape<T>& t, std::size_t, const Matrix<T>& g) {
                                const auto& sm = *sp;
                                std::vector<double> acc(sm.cols * g.cols, 0.0);
                                for (std::size_t i = 0; i < sm.rows; ++i)
                                    for (std::size_t p = sm.row_ptr[i]; p < sm.row_ptr[i + 1]; ++p) {
                                        const double w = sm.values[p];
                                        double* dst = acc.data() + std::size_t(sm.col_idx[p]) * g.cols;
                                        for (std::size_t j = 0; j < g.cols; ++j) dst[j] += w * double(g(i, j));
                                    }
                                Matrix<T> gb(sm.cols, g.cols);
                                for (std::size_t k = 0; k < acc.size(); ++k) gb.data[k] = static_cast<T>(acc[k]);
                                t.accumulate(ib, gb);
                            });
}

namespace detail {

template <class T, class F, class GA, class GB>
BasicTensor<T> binary(const char* op, const BasicTensor<T>& a, const BasicTensor<T>& b, F f, GA ga, GB gb) {
    check_same_tape(op, a, b);
    const auto& av = a.value();
    const auto& bv = b.value();
    const Bcast k = broadcast_kind(op, av, bv);
    Matrix<T> out(av.rows, av.cols);
    for (std::size_t i = 0; i < av.rows; ++i)
        for (std::size_t j = 0; j < av.cols; ++j) out(i, j) = f(av(i, j), bvalue(bv, k, i, j));
    const auto ia = a.id(), ib = b.id();
    return a.tape()->record(op, std::move(out), {ia, ib}, [ia, ib, k, ga, gb](Tape<T>& t, std::size_t, const Matrix<T>& g) {
        const auto& x = t.node(ia).value;
        const auto& y = t.node(ib).value;
        if (t.wants_grad(ia)) {
            Matrix<T> da(g.rows, g.cols);
            for (std::size_t i = 0; i < g.rows; ++i)
                for (std::size_t j = 0; j < g.cols; ++j) da(i, j) = ga(g(i, j), x(i, j), bvalue(y, k, i, j));
            t.accumulate(ia, da);
        }
        if (t.wants_grad(ib)) {
            Matrix<T> db(g.rows, g.cols);
            for (std::size_t i = 0; i < g.rows; ++i)
                for (std::size_t j = 0; j < g.cols; ++j) db(i, j) = gb(g(i, j), x(i, j), bvalue(y, k, i, j));
            t.accumulate(ib, reduce_to(db, k, y.rows, y.cols));
        }
    });
}

}  // namespace detail

// Elementwise binary ops; `b` may also be a [1 x cols] row or [rows x 1] column.
template <class T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    return detail::binary(
        "add", a, b, [](T x, T y) { return x + y; }, [](T g, T, T) { return g; }, [](T g, T, T) { return g; });
}

template <class T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    return detail::binary(
        "sub", a, b, [](T x, T y) { return x - y; }, [](T g, T, T) { return g; }, [](T g, T, T) { return -g; });
}

template <class T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    return detail::binary(
        "mul", a, b, [](T x, T y) { return x * y; }, [](T g, T, T y) { return g * y; },
        [](T g, T x, T) { return g * x; });
}

template <class T>
BasicTensor<T> scalar_mul(const BasicTensor<T>& a, double s) {
    Matrix<T> out = a.value();
    for (auto& v : out.data) v = static_cast<T>(v * s);
    const auto ia = a.id();
    return a.tape()->record("scalar_mul", std::move(out), {ia}, [ia, s](Tape<T>& t, std::size_t, const Matrix<T>& g) {
        Matrix<T> d = g;
        for (auto& v : d.data) v = static_cast<T>(v * s);
        t.accumulate(ia, d);
    });
}

template <class T>
BasicTensor<T> relu(const BasicTensor<T>& a) {
    Matrix<T> out = a.value();
    for (auto& v : out.data) v = v < T(0) ? T(0) : v;  // NaN passes through
    const auto ia = a.id();
    return a.tape()->record("relu", std::move(out), {ia}, [ia](Tape<T>& t, std::size_t, const Matrix<T>& g) {
        const auto& x = t.node(ia).value;
        Matrix<T> d(g.rows, g.cols);
        for (std::size_t i = 0; i < d.data.size(); ++i) d.data[i] = x.data[i] > T(0) ? g.data[i] : T(0);
        t.accumulate(ia, d);
    });
}

template <class T>
BasicTensor<T> transpose(const BasicTensor<T>& a) {
    const auto ia = a.id();
    return a.tape()->record("transpose", detail::transpose_copy(a.value()), {ia},
                            [ia](Tape<T>& t, std::size_t, const Matrix<T>& g) { t.accumulate(ia, detail::transpose_copy(g)); });
}

template <class T>
BasicTensor<T> reshape(const BasicTensor<T>& a, std::size_t rows, std::size_t cols) {
    if (rows * cols != a.value().size())
        throw std::invalid_argument("reshape: cannot view " + shape_str(a.rows(), a.cols()) + " as " +
                                    shape_str(rows, cols));
    Matrix<T> out(rows, cols, a.value().data);
    const auto ia = a.id();
    const std::size_t r0 = a.rows(), c0 = a.cols();
    return a.tape()->record("reshape", std::move(out), {ia}, [ia, r0, c0](Tape<T>& t, std::size_t, const Matrix<T>& g) {
        t.accumulate(ia, Matrix<T>(r0, c0, g.data));
    });
}

namespace detail {

template <class T>
Matrix<T> softmax_rows(const Matrix<T>& x) {
    Matrix<T> out(x.rows, x.cols);
    for (std::size_t i = 0; i < x.rows; ++i) {
        auto r = x.row(i);
        double mx = -std::numeric_limits<double>::infinity();
        for (auto v : r) mx = std::max(mx, double(v));
        double s = 0.0;
        for (auto v : r) s += std::exp(double(v) - mx);
        for (std::size_t j = 0; j < x.cols; ++j) out(i, j) = static_cast<T>(std::exp(double(r[j]) - mx) / s);
    }
    return out;
}

inline double log_sum_exp(std::span<const double> r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (auto v : r) mx = std::max(mx, v);
    if (std::isinf(mx)) return mx;
    double s = 0.0;
    for (auto v : r) s += std::exp(v - mx);
    return mx + std::log(s);
}

template <class T>
double row_lse(std::span<const T> r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (auto v : r) mx = std::max(mx, double(v));
    if (std::isinf(mx)) return mx;
    double s = 0.0;
    for (auto v : r) s += std::exp(double(v) - mx);
    return mx + std::log(s);
}

template <class T>
BasicTensor<T> softmax_rows(const BasicTensor<T>& a) {
    const auto ia = a.id();
    return a.tape()->record("softmax", softmax_rows(a.value()), {ia},
                            [ia](Tape<T>& t, std::size_t self, const Matrix<T>& g) {
                                const auto& y = t.node(self).value;
                                Matrix<T> d(g.rows, g.cols);
                                for (std::size_t i = 0; i < g.rows; ++i) {
                                    double dot = 0.0;
                                    for (std::size_t j = 0; j < g.cols; ++j) dot += double(g(i, j)) * double(y(i, j));
                                    for (std::size_t j = 0; j < g.cols; ++j) {
                                        double v = double(y(i, j)) * (double(g(i, j)) - dot);
#ifdef TRNOOD_FAULT_INJECTION
                                        v *= 1.05;  // mutation canary for the self-check
#endif
                                        d(i, j) = static_cast<T>(v);
                                    }
                                }
                                t.accumulate(ia, d);
                            });
}

template <class T>
BasicTensor<T> lse_rows(const BasicTensor<T>& a) {
    const auto& x = a.value();
    Matrix<T> out(x.rows, 1);
    for (std::size_t i = 0; i < x.rows; ++i) out(i, 0) = static_cast<T>(row_lse(x.row(i)));
    const auto ia = a.id();
    return a.tape()->record("log_sum_exp", std::move(out), {ia},
                            [ia](Tape<T>& t, std::size_t self, const Matrix<T>& g) {
                                const auto& xv = t.node(ia).value;
                                const auto& lse = t.node(self).value;
                                Matrix<T> d(xv.rows, xv.cols);
                                for (std::size_t i = 0; i < xv.rows; ++i)
                                    for (std::size_t j = 0; j < xv.cols; ++j)
                                        d(i, j) = static_cast<T>(double(g(i, 0)) *
                                                                 std::exp(double(xv(i, j)) - double(lse(i, 0))));
                                t.accumulate(ia, d);
                            });
}

}  // namespace detail

// Numerically stable softmax; axis 1 normalises each row, axis 0 each column.
template <class T>
BasicTensor<T> softmax(const BasicTensor<T>& a, int axis = 1) {
    if (axis == 1) return detail::softmax_rows(a);
    if (axis == 0) return transpose(detail::softmax_rows(transpose(a)));
    throw std::invalid_argument("softmax: axis must be 0 or 1");
}

// Shifted log-sum-exp; axis 1 yields [rows x 1], axis 0 yields [1 x cols].
template <class T>
BasicTensor<T> log_sum_exp(const BasicTensor<T>& a, int axis = 1) {
    if (axis == 1) return detail::lse_rows(a);
    if (axis == 0) return transpose(detail::lse_rows(transpose(a)));
    throw std::invalid_argument("log_sum_exp: axis must be 0 or 1");
}

// Rows scaled to unit norm; zero rows stay zero.
template <class T>
BasicTensor<T> l2_normalize(const BasicTensor<T>& a) {
    const auto& x = a.value();
    Matrix<T> out(x.rows, x.cols);
    std::vector<double> norms(x.rows, 0.0);
    for (std::size_t i = 0; i < x.rows; ++i) {
        double s = 0.0;
        for (auto v : x.row(i)) s += double(v) * double(v);
        norms[i] = std::sqrt(s);
        if (norms[i] > 0.0)
            for (std::size_t j = 0; j < x.cols; ++j) out(i, j) = static_cast<T>(double(x(i, j)) / norms[i]);
    }
    const auto ia = a.id();
    return a.tape()->record("l2_normalize", std::move(out), {ia},
                            [ia, norms](Tape<T>& t, std::size_t self, const Matrix<T>& g) {
                                const auto& y = t.node(self).value;
                                Matrix<T> d(g.rows, g.cols);
                                for (std::size_t i = 0; i < g.rows; ++i) {
                                    if (norms[i] == 0.0) continue;
                                    double dot = 0.0;
                                    for (std::size_t j = 0; j < g.cols; ++j) dot += double(g(i, j)) * double(y(i, j));
                                    for (std::size_t j = 0; j < g.cols; ++j)
                                        d(i, j) = static_cast<T>((double(g(i, j)) - double(y(i, j)) * dot) / norms[i]);
                                }
                                t.accumulate(ia, d);
                            });
}

template <class T>
BasicTensor<T> gather_rows(const BasicTensor<T>& a, std::vector<std::size_t> idx) {
    const auto& x = a.value();
    Matrix<T> out(idx.size(), x.cols);
    for (std::size_t r = 0; r < idx.size(); ++r) {
        if (idx[r] >= x.rows)
            throw std::invalid_argument("gather_rows: index " + std::to_string(idx[r]) + " out of range for " +
                                        shape_str(x.rows, x.cols));
        auto src = x.row(idx[r]);
        std::copy(src.begin(), src.end(), out.row(r).begin());
    }
    const auto ia = a.id();
    const std::size_t src_rows = x.rows;
    return a.tape()->record("gather_rows", std::move(out), {ia},
                            [ia, idx = std::move(idx), src_rows](Tape<T>& t, std::size_t, const Matrix<T>& g) {
                                std::vector<double> acc(src_rows * g.cols, 0.0);
                                for (std::size_t r = 0; r < idx.size(); ++r)
                                    for (std::size_t j = 0; j < g.cols; ++j) acc[idx[r] * g.cols + j] += g(r, j);
                                Matrix<T> d(src_rows, g.cols);
                                for (std::size_t k = 0; k < acc.size(); ++k) d.data[k] = static_cast<T>(acc[k]);
                                t.accumulate(ia, d);
                            });
}

template <class T>
BasicTensor<T> concat_rows(const std::vector<BasicTensor<T>>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
    const std::size_t cols = parts.front().cols();
    std::size_t rows = 0;
    std::vector<std::size_t> ids;
    for (const auto& p : parts) {
        if (p.cols() != cols) shape_error("concat_rows", parts.front().value(), p.value());
        detail::check_same_tape("concat_rows", parts.front(), p);
        rows += p.rows();
        ids.push_back(p.id());
    }
    Matrix<T> out(rows, cols);
    std::size_t off = 0;
    for (const auto& p : parts) {
        std::copy(p.value().data.begin(), p.value().data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(off));
        off += p.value().size();
    }
    return parts.front().tape()->record("concat_rows", std::move(out), ids,
                                        [ids](Tape<T>& t, std::size_t, const Matrix<T>& g) {
                                            std::size_t off = 0;
                                            for (auto id : ids) {
                                                const auto& v = t.node(id).value;
                                                Matrix<T> d(v.rows, v.cols);
                                                std::copy(g.data.begin() + static_cast<std::ptrdiff_t>(off),
                                                          g.data.begin() + static_cast<std::ptrdiff_t>(off + v.size()),
                                                          d.data.begin());
                                                off += v.size();
                                                t.accumulate(id, d);
                                            }
                                        });
}

// Mean over rows of -log softmax(logits)[target]; fused log-softmax.
template <class T>
BasicTensor<T> cross_entropy(const BasicTensor<T>& logits, std::vector<std::int64_t> targets) {
    const auto& z = logits.value();
    if (targets.size() != z.rows)
        throw std::invalid_argument("cross_entropy: " + std::to_string(targets.size()) + " targets for logits " +
                                    shape_str(z.rows, z.cols));
    if (z.rows == 0) throw std::invalid_argument("cross_entropy: empty batch");
    double loss = 0.0;
    for (std::size_t i = 0; i < z.rows; ++i) {
        if (targets[i] < 0 || static_cast<std::size_t>(targets[i]) >= z.cols)
            throw std::invalid_argument("cross_entropy: target out of range");
        loss += detail::row_lse(z.row(i)) - double(z(i, targets[i]));
    }
    loss /= double(z.rows);
    const auto il = logits.id();
    return logits.tape()->record("cross_entropy", Matrix<T>(1, 1, static_cast<T>(loss)), {il},
                                 [il, targets = std::move(targets)](Tape<T>& t, std::size_t, const Matrix<T>& g) {
                                     const auto& zv = t.node(il).value;
                                     auto d = detail::softmax_rows(zv);
                                     const double scale = double(g(0, 0)) / double(zv.rows);
                                     for (std::size_t i = 0; i < zv.rows; ++i) {
                                         for (std::size_t j = 0; j < zv.cols; ++j) {
                                             double v = double(d(i, j));
                                             if (static_cast<std::int64_t>(j) == targets[i]) v -= 1.0;
                                             d(i, j) = static_cast<T>(v * scale);
                                         }
                                     }
                                     t.accumulate(il, d);
                                 });
}

template <class T>
BasicTensor<T> sum(const BasicTensor<T>& a) {
    double s = 0.0;
    for (auto v : a.value().data) s += v;
    const auto ia = a.id();
    const std::size_t r = a.rows(), c = a.cols();
    return a.tape()->record("sum", Matrix<T>(1, 1, static_cast<T>(s)), {ia},
                            [ia, r, c](Tape<T>& t, std::size_t, const Matrix<T>& g) {
                                t.accumulate(ia, Matrix<T>(r, c, g(0, 0)));
                            });
}

template <class T>
BasicTensor<T> mean(const BasicTensor<T>& a) {
    return scalar_mul(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

// Row-wise inner product: [n x k] . [n x k] -> [n x 1].
template <class T>
BasicTensor<T> row_dot(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    detail::check_same_tape("row_dot", a, b);
    if (!a.value().same_shape(b.value())) shape_error("row_dot", a.value(), b.value());
    const auto& x = a.value();
    const auto& y = b.value();
    Matrix<T> out(x.rows, 1);
    for (std::size_t i = 0; i < x.rows; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < x.cols; ++j) s += double(x(i, j)) * double(y(i, j));
        out(i, 0) = static_cast<T>(s);
    }
    const auto ia = a.id(), ib = b.id();
    return a.tape()->record("row_dot", std::move(out), {ia, ib},
                            [ia, ib](Tape<T>& t, std::size_t, const Matrix<T>& g) {
                                const auto& xv = t.node(ia).value;
                                const auto& yv = t.node(ib).value;
                                Matrix<T> da(xv.rows, xv.cols), db(xv.rows, xv.cols);
                                for (std::size_t i = 0; i < xv.rows; ++i)
                                    for (std::size_t j = 0; j < xv.cols; ++j) {
                                        da(i, j) = g(i, 0) * yv(i, j);
                                        db(i, j) = g(i, 0) * xv(i, j);
                                    }
                                t.accumulate(ia, da);
                                t.accumulate(ib, db);
                            });
}

// Softmax of a [E x 1] column within each segment [offsets[s], offsets[s+1]).
template <class T>
BasicTensor<T> segment_softmax(const BasicTensor<T>& scores, std::vector<std::size_t> offsets) {
    const auto& x = scores.value();
    if (x.cols != 1 || offsets.empty() || offsets.back() != x.rows)
        throw std::invalid_argument("segment_softmax: scores " + shape_str(x.rows, x.cols) +
                                    " do not match segment offsets");
    Matrix<T> out(x.rows, 1);
    for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
        const auto b = offsets[s], e = offsets[s + 1];
        if (b == e) continue;
        double mx = -std::numeric_limits<double>::infinity();
        for (auto k = b; k < e; ++k) mx = std::max(mx, double(x(k, 0)));
        double tot = 0.0;
        for (auto k = b; k < e; ++k) tot += std::exp(double(x(k, 0)) - mx);
        for (auto k = b; k < e; ++k) out(k, 0) = static_cast<T>(std::exp(double(x(k, 0)) - mx) / tot);
    }
    const auto ia = scores.id();
    return scores.tape()->record(
        "segment_softmax", std::move(out), {ia},
        [ia, offsets = std::move(offsets)](Tape<T>& t, std::size_t self, const Matrix<T>& g) {
            const auto& y = t.node(self).value;
            Matrix<T> d(y.rows, 1);
            for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
                double dot = 0.0;
                for (auto k = offsets[s]; k < offsets[s + 1]; ++k) dot += double(g(k, 0)) * double(y(k, 0));
                for (auto k = offsets[s]; k < offsets[s + 1]; ++k)
                    d(k, 0) = static_cast<T>(double(y(k, 0)) * (double(g(k, 0)) - dot));
            }
            t.accumulate(ia, d);
        });
}

// Sum of rows within each segment: [E x c] -> [S x c]; empty segments give zero rows.
template <class T>
BasicTensor<T> segment_sum(const BasicTensor<T>& a, std::vector<std::size_t> offsets) {
    const auto& x = a.value();
    if (offsets.empty() || offsets.back() != x.rows)
        throw std::invalid_argument("segment_sum: rows " + std::to_string(x.rows) + " do not match offsets");
    const std::size_t segs = offsets.size() - 1;
    Matrix<T> out(segs, x.cols);
    std::vector<double> acc(x.cols);
    for (std::size_t s = 0; s < segs; ++s) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (auto k = offsets[s]; k < offsets[s + 1]; ++k)
            for (std::size_t j = 0; j < x.cols; ++j) acc[j] += x(k, j);
        for (std::size_t j = 0; j < x.cols; ++j) out(s, j) = static_cast<T>(acc[j]);
    }
    const auto ia = a.id();
    const std::size_t rows = x.rows;
    return a.tape()->record("segment_sum", std::move(out), {ia},
                            [ia, rows, offsets = std::move(offsets)](Tape<T>& t, std::size_t, const Matrix<T>& g) {
                                Matrix<T> d(rows, g.cols);
                                for (std::size_t s = 0; s + 1 < offsets.size(); ++s)
                                    for (auto k = offsets[s]; k < offsets[s + 1]; ++k)
                                        for (std::size_t j = 0; j < g.cols; ++j) d(k, j) = g(s, j);
                                t.accumulate(ia, d);
                            });
}

// Per-row matrix-vector product. Row i of `w` holds a row-major [out_dim x q]
// matrix W_i; the result row i is W_i x_i.
template <class T>
BasicTensor<T> row_matvec(const BasicTensor<T>& w, const BasicTensor<T>& x, std::size_t out_dim) {
    detail::check_same_tape("row_matvec", w, x);
    const auto& wv = w.value();
    const auto& xv = x.value();
    const std::size_t q = xv.cols;
    if (wv.rows != xv.rows || wv.cols != out_dim * q)
        throw std::invalid_argument("row_matvec: shape mismatch " + shape_str(wv.rows, wv.cols) + " vs " +
                                    shape_str(xv.rows, xv.cols) + " for output width " + std::to_string(out_dim));
    Matrix<T> out(xv.rows, out_dim);
    for (std::size_t i = 0; i < xv.rows; ++i) {
        const T* wi = wv.data.data() + i * wv.cols;
        const T* xi = xv.data.data() + i * q;
        for (std::size_t a = 0; a < out_dim; ++a) {
            double s = 0.0;
            for (std::size_t b = 0; b < q; ++b) s += double(wi[a * q + b]) * double(xi[b]);
            out(i, a) = static_cast<T>(s);
        }
    }
    const auto iw = w.id(), ix = x.id();
    return w.tape()->record("row_matvec", std::move(out), {iw, ix},
                            [iw, ix, out_dim, q](Tape<T>& t, std::size_t, const Matrix<T>& g) {
                                const auto& wv = t.node(iw).value;
                                const auto& xv = t.node(ix).value;
                                if (t.wants_grad(iw)) {
                                    Matrix<T> dw(wv.rows, wv.cols);
                                    for (std::size_t i = 0; i < wv.rows; ++i)
                                        for (std::size_t a = 0; a < out_dim; ++a)
                                            for (std::size_t b = 0; b < q; ++b)
                                                dw(i, a * q + b) = g(i, a) * xv(i, b);
                                    t.accumulate(iw, dw);
                                }
                                if (t.wants_grad(ix)) {
                                    Matrix<T> dx(xv.rows, q);
                                    for (std::size_t i = 0; i < xv.rows; ++i)
                                        for (std::size_t b = 0; b < q; ++b) {
                                            double s = 0.0;
                                            for (std::size_t a = 0; a < out_dim; ++a)
                                                s += double(g(i, a)) * double(wv(i, a * q + b));
                                            dx(i, b) = static_cast<T>(s);
                                        }
                                    t.accumulate(ix, dx);
                                }
                            });
}

}  // namespace trnood
