#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace trnood {

using NodeId = std::uint32_t;
using Edge = std::pair<NodeId, NodeId>;

// Row-major dense matrix. Used both for graph data and as tensor storage.
template <class T>
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<T> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, T fill = T(0)) : rows(r), cols(c), data(r * c, fill) {}
    Matrix(std::size_t r, std::size_t c, std::vector<T> d) : rows(r), cols(c), data(std::move(d)) {
        if (data.size() != r * c) throw std::invalid_argument("Matrix: data size does not match shape");
    }

    T& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    const T& operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    std::span<T> row(std::size_t i) { return {data.data() + i * cols, cols}; }
    std::span<const T> row(std::size_t i) const { return {data.data() + i * cols, cols}; }

    std::size_t size() const { return data.size(); }
    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

    template <class U>
    Matrix<U> cast() const {
        Matrix<U> out(rows, cols);
        for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
        return out;
    }

    bool operator==(const Matrix&) const = default;
};

// Compressed sparse row matrix.
template <class T>
struct Csr {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::size_t> row_ptr{0};
    std::vector<NodeId> col_idx;
    std::vector<T> values;

    std::size_t nnz() const { return col_idx.size(); }

    T at(std::size_t i, std::size_t j) const {
        for (std::size_t p = row_ptr[i]; p < row_ptr[i + 1]; ++p)
            if (col_idx[p] == j) return values[p];
        return T(0);
    }

    template <class U>
    Csr<U> cast() const {
        Csr<U> out;
        out.rows = rows;
        out.cols = cols;
        out.row_ptr = row_ptr;
        out.col_idx = col_idx;
        out.values.assign(values.begin(), values.end());
        return out;
    }

    Matrix<T> to_dense() const {
        Matrix<T> d(rows, cols);
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t p = row_ptr[i]; p < row_ptr[i + 1]; ++p) d(i, col_idx[p]) = values[p];
        return d;
    }
};

// Text-rich network: embeddings, undirected edges (i < j, unique), labels and
// optional raw text / publication year per node.
struct TrnGraph {
    std::size_t n = 0;
    Matrix<float> features;
    std::vector<Edge> edges;
    std::vector<std::int64_t> labels;
    std::int64_t num_classes = 0;
    std::optional<std::vector<std::string>> texts;
    std::optional<std::vector<std::int64_t>> years;

    std::size_t dim() const { return features.cols; }

    bool operator==(const TrnGraph&) const = default;
};

// Sorts and deduplicates a pair list into canonical i < j form, dropping
// self-pairs. Returns the number of self-pairs removed.
inline std::size_t canonicalize_edges(std::vector<Edge>& edges) {
    std::size_t self_loops = 0;
    std::vector<Edge> out;
    out.reserve(edges.size());
    for (auto [a, b] : edges) {
        if (a == b) {
            ++self_loops;
            continue;
        }
        out.emplace_back(std::min(a, b), std::max(a, b));
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    edges = std::move(out);
    return self_loops;
}

inline void validate(const TrnGraph& g) {
    if (g.features.rows != g.n)
        throw std::invalid_argument("TrnGraph: features has " + std::to_string(g.features.rows) +
                                    " rows, expected " + std::to_string(g.n));
    if (!g.labels.empty() && g.labels.size() != g.n)
        throw std::invalid_argument("TrnGraph: labels length " + std::to_string(g.labels.size()) +
                                    " != n " + std::to_string(g.n));
    for (auto y : g.labels)
        if (y < 0 || y >= g.num_classes)
            throw std::invalid_argument("TrnGraph: label " + std::to_string(y) + " outside [0, " +
                                        std::to_string(g.num_classes) + ")");
    for (auto [a, b] : g.edges) {
        if (a >= b) throw std::invalid_argument("TrnGraph: edge pairs must satisfy i < j");
        if (b >= g.n) throw std::invalid_argument("TrnGraph: edge endpoint out of range");
    }
    if (!std::is_sorted(g.edges.begin(), g.edges.end()) ||
        std::adjacent_find(g.edges.begin(), g.edges.end()) != g.edges.end())
        throw std::invalid_argument("TrnGraph: edges must be sorted and unique");
    if (g.texts && g.texts->size() != g.n)
        throw std::invalid_argument("TrnGraph: texts length does not match n");
    if (g.years && g.years->size() != g.n)
        throw std::invalid_argument("TrnGraph: years length does not match n");
}

inline std::vector<double> degree_vector(const TrnGraph& g) {
    std::vector<double> deg(g.n, 0.0);
    for (auto [a, b] : g.edges) {
        deg[a] += 1.0;
        deg[b] += 1.0;
    }
    return deg;
}

// Symmetric neighbour lists in CSR layout, columns ascending, unit values.
inline Csr<double> adjacency(const TrnGraph& g) {
    std::vector<std::size_t> count(g.n, 0);
    for (auto [a, b] : g.edges) {
        ++count[a];
        ++count[b];
    }
    Csr<double> m;
    m.rows = m.cols = g.n;
    m.row_ptr.assign(g.n + 1, 0);
    for (std::size_t i = 0; i < g.n; ++i) m.row_ptr[i + 1] = m.row_ptr[i] + count[i];
    m.col_idx.resize(m.row_ptr[g.n]);
    m.values.assign(m.row_ptr[g.n], 1.0);
    std::vector<std::size_t> fill(m.row_ptr.begin(), m.row_ptr.end() - 1);
    for (auto [a, b] : g.edges) {
        m.col_idx[fill[a]++] = b;
        m.col_idx[fill[b]++] = a;
    }
    for (std::size_t i = 0; i < g.n; ++i)
        std::sort(m.col_idx.begin() + static_cast<std::ptrdiff_t>(m.row_ptr[i]),
                  m.col_idx.begin() + static_cast<std::ptrdiff_t>(m.row_ptr[i + 1]));
    return m;
}

// D~^{-1/2} (A + I) D~^{-1/2}.
inline Csr<double> sym_norm_adj(const TrnGraph& g) {
    const auto a = adjacency(g);
    std::vector<double> inv_sqrt(g.n);
    for (std::size_t i = 0; i < g.n; ++i)
        inv_sqrt[i] = 1.0 / std::sqrt(static_cast<double>(a.row_ptr[i + 1] - a.row_ptr[i] + 1));
    Csr<double> m;
    m.rows = m.cols = g.n;
    m.row_ptr.assign(g.n + 1, 0);
    m.col_idx.reserve(a.nnz() + g.n);
    m.values.reserve(a.nnz() + g.n);
    for (std::size_t i = 0; i < g.n; ++i) {
        bool self_done = false;
        auto emit = [&](std::size_t j) {
            m.col_idx.push_back(static_cast<NodeId>(j));
            // Same product order for (i, j) and (j, i) so the result is bitwise symmetric.
            const double lo = inv_sqrt[std::min(i, j)], hi = inv_sqrt[std::max(i, j)];
            m.values.push_back(lo * hi);
        };
        for (std::size_t p = a.row_ptr[i]; p < a.row_ptr[i + 1]; ++p) {
            const std::size_t j = a.col_idx[p];
            if (!self_done && j > i) {
                emit(i);
                self_done = true;
            }
            emit(j);
        }
        if (!self_done) emit(i);
        m.row_ptr[i + 1] = m.col_idx.size();
    }
    return m;
}

// D^{-1} A without self-loops; isolated nodes get an all-zero row.
inline Csr<double> row_norm_adj(const TrnGraph& g) {
    auto m = adjacency(g);
    for (std::size_t i = 0; i < g.n; ++i) {
        const auto deg = m.row_ptr[i + 1] - m.row_ptr[i];
        for (std::size_t p = m.row_ptr[i]; p < m.row_ptr[i + 1]; ++p)
            m.values[p] = 1.0 / static_cast<double>(deg);
    }
    return m;
}

template <class T>
Matrix<double> cosine_similarity_matrix(const Matrix<T>& feats) {
    const std::size_t n = feats.rows, d = feats.cols;
    std::vector<double> norm(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t k = 0; k < d; ++k) s += double(feats(i, k)) * double(feats(i, k));
        norm[i] = std::sqrt(s);
    }
    Matrix<double> s(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            double v = 0.0;
            if (norm[i] > 0.0 && norm[j] > 0.0) {
                double dot = 0.0;
                for (std::size_t k = 0; k < d; ++k) dot += double(feats(i, k)) * double(feats(j, k));
                v = dot / (norm[i] * norm[j]);
            }
            s(i, j) = v;
            s(j, i) = v;
        }
    }
    return s;
}

// Subgraph induced by `keep` (ascending node ids). Node i of the result is keep[i].
inline TrnGraph induced_subgraph(const TrnGraph& g, std::span<const NodeId> keep) {
    std::vector<std::int64_t> remap(g.n, -1);
    for (std::size_t i = 0; i < keep.size(); ++i) remap[keep[i]] = static_cast<std::int64_t>(i);
    TrnGraph out;
    out.n = keep.size();
    out.num_classes = g.num_classes;
    out.features = Matrix<float>(out.n, g.features.cols);
    for (std::size_t i = 0; i < keep.size(); ++i) {
        auto src = g.features.row(keep[i]);
        std::copy(src.begin(), src.end(), out.features.row(i).begin());
        if (!g.labels.empty()) out.labels.push_back(g.labels[keep[i]]);
    }
    if (g.texts) {
        out.texts.emplace();
        for (auto v : keep) out.texts->push_back((*g.texts)[v]);
    }
    if (g.years) {
        out.years.emplace();
        for (auto v : keep) out.years->push_back((*g.years)[v]);
    }
    for (auto [a, b] : g.edges)
        if (remap[a] >= 0 && remap[b] >= 0)
            out.edges.emplace_back(static_cast<NodeId>(remap[a]), static_cast<NodeId>(remap[b]));
    canonicalize_edges(out.edges);
    return out;
}

}  // namespace trnood
