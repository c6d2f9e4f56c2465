#include <gtest/gtest.h>

#include <cmath>

#include "trnood/fixtures.hpp"
#include "trnood/gradcheck.hpp"
#include "trnood/metrics.hpp"
#include "trnood/train.hpp"

using namespace trnood;
using trnood::detail::random_matrix;

namespace {

TrnGraph graph_from(std::size_t n, std::size_t d, std::vector<Edge> edges, Rng& rng, bool nonneg = false) {
    TrnGraph g;
    g.n = n;
    g.num_classes = 2;
    g.features = Matrix<float>(n, d);
    for (auto& v : g.features.data) v = static_cast<float>(nonneg ? rng.uniform() : rng.uniform(-1, 1));
    g.labels.assign(n, 0);
    g.edges = std::move(edges);
    canonicalize_edges(g.edges);
    return g;
}

Matrix<double> dense_mm(const Matrix<double>& a, const Matrix<double>& b) {
    Matrix<double> c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t k = 0; k < a.cols; ++k)
            for (std::size_t j = 0; j < b.cols; ++j) c(i, j) += a(i, k) * b(k, j);
    return c;
}

TntConfig small_cfg(bool low_rank = true) {
    TntConfig c;
    c.d_p = 4;
    c.rank = 2;
    c.hyper_hidden = 3;
    c.use_low_rank = low_rank;
    return c;
}

void zero_all(ParamStore<double>& p) {
    for (auto& [k, m] : p) std::fill(m.data.begin(), m.data.end(), 0.0);
}

}  // namespace

TEST(EncodeStructure, IsolatedNodeWithIdentityWeightKeepsRow) {
    Rng rng(1, "t");
    auto g = graph_from(3, 3, {{0, 1}}, rng, true);
    Tape<double> tape;
    GraphOperators<double> ops(g);
    Matrix<double> w(3, 4);
    for (std::size_t i = 0; i < 3; ++i) w(i, i) = 1.0;
    Bound<double> p{{"enc.W0", tape.leaf(w)}};
    const auto out = encode_structure(tape, ops, p, 1).value();
    for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(out(2, k), g.features(2, k), 1e-7);
    EXPECT_EQ(out(2, 3), 0.0);
}

TEST(EncodeStructure, ZeroWeightsGiveZero) {
    Rng rng(2, "t");
    auto g = graph_from(4, 3, {{0, 1}, {1, 2}}, rng);
    Tape<double> tape;
    GraphOperators<double> ops(g);
    Bound<double> p{{"enc.W0", tape.leaf(Matrix<double>(3, 5))}};
    for (double v : encode_structure(tape, ops, p, 1).value().data) EXPECT_EQ(v, 0.0);
}

TEST(EncodeStructure, MatchesDenseOracle) {
    Rng rng(3, "t");
    auto g = graph_from(6, 4, {{0, 1}, {1, 2}, {2, 3}, {0, 3}, {4, 5}}, rng);
    const auto w0 = random_matrix(4, 5, rng), w1 = random_matrix(5, 5, rng);
    Tape<double> tape;
    GraphOperators<double> ops(g);
    Bound<double> p{{"enc.W0", tape.leaf(w0)}, {"enc.W1", tape.leaf(w1)}};
    const auto got = encode_structure(tape, ops, p, 2).value();
    // Dense A~ = D~^-1/2 (A + I) D~^-1/2 built from scratch.
    Matrix<double> a(6, 6);
    for (std::size_t i = 0; i < 6; ++i) a(i, i) = 1;
    for (auto [i, j] : g.edges) a(i, j) = a(j, i) = 1;
    std::vector<double> deg(6, 0);
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 6; ++j) deg[i] += a(i, j);
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 6; ++j) a(i, j) /= std::sqrt(deg[i] * deg[j]);
    auto h = g.features.cast<double>();
    for (const auto* w : {&w0, &w1}) {
        h = dense_mm(a, dense_mm(h, *w));
        for (auto& v : h.data) v = std::max(v, 0.0);
    }
    for (std::size_t i = 0; i < h.data.size(); ++i) EXPECT_NEAR(got.data[i], h.data[i], 1e-5);
}

TEST(CrossAttention, NoNeighboursKeepsFeatures) {
    Rng rng(4, "t");
    auto g = graph_from(3, 2, {}, rng);
    Tape<double> tape;
    GraphOperators<double> ops(g);
    Bound<double> p{{"att.Wq", tape.leaf(random_matrix(3, 3, rng))},
                    {"att.Wk", tape.leaf(random_matrix(2, 3, rng))},
                    {"att.Wv", tape.leaf(random_matrix(2, 2, rng))}};
    const auto z = cross_attention(tape, ops, tape.leaf(random_matrix(3, 3, rng)), p).value();
    for (std::size_t i = 0; i < z.data.size(); ++i) EXPECT_EQ(z.data[i], double(g.features.data[i]));
}

TEST(CrossAttention, SingleNeighbourAddsItsValue) {
    Rng rng(5, "t");
    auto g = graph_from(2, 2, {{0, 1}}, rng);
    const auto wv = random_matrix(2, 2, rng);
    Tape<double> tape;
    GraphOperators<double> ops(g);
    Bound<double> p{{"att.Wq", tape.leaf(random_matrix(3, 3, rng))},
                    {"att.Wk", tape.leaf(random_matrix(2, 3, rng))},
                    {"att.Wv", tape.leaf(wv)}};
    const auto z = cross_attention(tape, ops, tape.leaf(random_matrix(2, 3, rng)), p).value();
    const auto x = g.features.cast<double>();
    for (std::size_t c = 0; c < 2; ++c) {
        const double v1 = x(1, 0) * wv(0, c) + x(1, 1) * wv(1, c);
        EXPECT_NEAR(z(0, c), x(0, c) + v1, 1e-12);
    }
}

TEST(CrossAttention, TwoNeighboursMatchScalarLoop) {
    Rng rng(6, "t");
    auto g = graph_from(3, 2, {{0, 1}, {0, 2}}, rng);
    const auto wq = random_matrix(3, 3, rng), wk = random_matrix(2, 3, rng), wv = random_matrix(2, 2, rng),
               gs = random_matrix(3, 3, rng);
    Tape<double> tape;
    GraphOperators<double> ops(g);
    Bound<double> p{{"att.Wq", tape.leaf(wq)}, {"att.Wk", tape.leaf(wk)}, {"att.Wv", tape.leaf(wv)}};
    const auto z = cross_attention(tape, ops, tape.leaf(gs), p).value();
    const auto x = g.features.cast<double>();
    const auto q = dense_mm(gs, wq), k = dense_mm(x, wk), v = dense_mm(x, wv);
    double e[2];
    for (int t = 0; t < 2; ++t) {
        double dot = 0;
        for (int c = 0; c < 3; ++c) dot += q(0, c) * k(t + 1, c);
        e[t] = std::exp(dot / std::sqrt(3.0));
    }
    for (std::size_t c = 0; c < 2; ++c) {
        const double want = x(0, c) + (e[0] * v(1, c) + e[1] * v(2, c)) / (e[0] + e[1]);
        EXPECT_NEAR(z(0, c), want, 1e-6);
    }
}

TEST(Hypernetwork, ZeroOutputGivesZeroProjection) {
    Rng rng(7, "t");
    auto g = graph_from(3, 3, {{0, 1}}, rng);
    Tape<double> tape;
    GraphOperators<double> ops(g);
    Bound<double> p{{"hyper.W1", tape.leaf(random_matrix(3, 2, rng))},
                    {"hyper.b1", tape.leaf(Matrix<double>(1, 2))},
                    {"hyper.W2", tape.leaf(Matrix<double>(2, 6))},
                    {"hyper.b2", tape.leaf(Matrix<double>(1, 6))}};
    const auto out = hyper_project_full(tape, ops, tape.leaf(random_matrix(3, 3, rng)), p, 2).value();
    for (double v : out.data) EXPECT_EQ(v, 0.0);
}

TEST(Hypernetwork, IdentityOperatorReturnsInput) {
    Rng rng(8, "t");
    auto g = graph_from(4, 3, {{0, 1}}, rng);
    Matrix<double> b2(1, 9);
    for (std::size_t i = 0; i < 3; ++i) b2(0, i * 3 + i) = 1.0;
    Tape<double> tape;
    GraphOperators<double> ops(g);
    Bound<double> p{{"hyper.W1", tape.leaf(random_matrix(3, 2, rng))},
                    {"hyper.b1", tape.leaf(Matrix<double>(1, 2))},
                    {"hyper.W2", tape.leaf(Matrix<double>(2, 9))},
                    {"hyper.b2", tape.leaf(b2)}};
    const auto out = hyper_project_full(tape, ops, tape.leaf(random_matrix(4, 3, rng)), p, 3).value();
    for (std::size_t i = 0; i < out.data.size(); ++i) EXPECT_NEAR(out.data[i], g.features.data[i], 1e-7);
}

TEST(Hypernetwork, FullMatchesPerNodeLoop) {
    Rng rng(9, "t");
    auto g = graph_from(4, 3, {{0, 1}, {2, 3}}, rng);
    const auto z = random_matrix(4, 3, rng), w1 = random_matrix(3, 5, rng), b1 = random_matrix(1, 5, rng),
               w2 = random_matrix(5, 6, rng), b2 = random_matrix(1, 6, rng);
    Tape<double> tape;
    GraphOperators<double> ops(g);
    Bound<double> p{{"hyper.W1", tape.leaf(w1)}, {"hyper.b1", tape.leaf(b1)}, {"hyper.W2", tape.leaf(w2)},
                    {"hyper.b2", tape.leaf(b2)}};
    const auto out = hyper_project_full(tape, ops, tape.leaf(z), p, 2).value();
    for (std::size_t i = 0; i < 4; ++i) {
        std::vector<double> h(5), w(6);
        for (std::size_t a = 0; a < 5; ++a) {
            double s = b1(0, a);
            for (std::size_t c = 0; c < 3; ++c) s += z(i, c) * w1(c, a);
            h[a] = std::max(s, 0.0);
        }
        for (std::size_t b = 0; b < 6; ++b) {
            double s = b2(0, b);
            for (std::size_t a = 0; a < 5; ++a) s += h[a] * w2(a, b);
            w[b] = s;
        }
        for (std::size_t r = 0; r < 2; ++r) {
            double s = 0;
            for (std::size_t c = 0; c < 3; ++c) s += w[r * 3 + c] * g.features(i, c);
            EXPECT_NEAR(out(i, r), s, 1e-6);
        }
    }
}

// With r = min(d_p, d) and factors wired to emit L_i, R_i, the low-rank path
// equals the full path fed W_i = L_i R_i.
TEST(Hypernetwork, LowRankMatchesFullWithProductWeights) {
    Rng rng(10, "t");
    const std::size_t n = 5, d = 3, dp = 4, r = 3;
    auto g = graph_from(n, d, {{0, 1}, {1, 2}}, rng);
    // Hidden layer = one-hot node id (W1 maps z = I_n rows through identity).
    Matrix<double> z(n, n), w1(n, n);
    for (std::size_t i = 0; i < n; ++i) z(i, i) = w1(i, i) = 1.0;
    const auto wl = random_matrix(n, dp * r, rng), wr = random_matrix(n, r * d, rng);
    Matrix<double> w2(n, dp * d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t a = 0; a < dp; ++a)
            for (std::size_t b = 0; b < d; ++b) {
                double s = 0;
                for (std::size_t k = 0; k < r; ++k) s += wl(i, a * r + k) * wr(i, k * d + b);
                w2(i, a * d + b) = s;
            }
    Tape<double> tape;
    GraphOperators<double> ops(g);
    Bound<double> p{{"hyper.W1", tape.leaf(w1)}, {"hyper.b1", tape.leaf(Matrix<double>(1, n))},
                    {"hyper.WL", tape.leaf(wl)}, {"hyper.bL", tape.leaf(Matrix<double>(1, dp * r))},
                    {"hyper.WR", tape.leaf(wr)}, {"hyper.bR", tape.leaf(Matrix<double>(1, r * d))},
                    {"hyper.W2", tape.leaf(w2)}, {"hyper.b2", tape.leaf(Matrix<double>(1, dp * d))}};
    auto zt = tape.leaf(z);
    const auto low = hyper_project_lowrank(tape, ops, zt, p, dp, r).value();
    const auto full = hyper_project_full(tape, ops, zt, p, dp).value();
    for (std::size_t i = 0; i < low.data.size(); ++i) EXPECT_NEAR(low.data[i], full.data[i], 1e-5);
}

TEST(Hypernetwork, ZeroRightFactorAnnihilates) {
    Rng rng(11, "t");
    auto g = graph_from(3, 3, {}, rng);
    Tape<double> tape;
    GraphOperators<double> ops(g);
    Bound<double> p{{"hyper.W1", tape.leaf(random_matrix(3, 2, rng))}, {"hyper.b1", tape.leaf(Matrix<double>(1, 2))},
                    {"hyper.WL", tape.leaf(random_matrix(2, 4, rng))}, {"hyper.bL", tape.leaf(random_matrix(1, 4, rng))},
                    {"hyper.WR", tape.leaf(Matrix<double>(2, 6))}, {"hyper.bR", tape.leaf(Matrix<double>(1, 6))}};
    for (double v : hyper_project_lowrank(tape, ops, tape.leaf(random_matrix(3, 3, rng)), p, 2, 2).value().data)
        EXPECT_EQ(v, 0.0);
}

TEST(Hypernetwork, LowRankParameterCount) {
    TntConfig c;
    c.d_p = 128;
    c.rank = 16;
    const std::size_t d = 384;
    auto m = TntModel<double>::init(c, d, 3);
    // Generated numbers per node: d_p * r + r * d.
    EXPECT_EQ(m.params().at("hyper.bL").cols + m.params().at("hyper.bR").cols, 2048u + 6144u);
    EXPECT_LT(2048u + 6144u, 128u * 384u);
}

TEST(Hypernetwork, FullBudgetIsEnforced) {
    Rng rng(12, "t");
    auto g = graph_from(10, 3, {}, rng);
    auto c = small_cfg(false);
    c.full_budget = 10;
    auto m = TntModel<double>::init(c, 3, 2);
    Tape<double> tape;
    GraphOperators<double> ops(g);
    auto b = bind_params(tape, m.params());
    try {
        m.forward(tape, ops, b);
        FAIL();
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find("use_low_rank"), std::string::npos);
    }
}

TEST(Forward, ShapesFollowConfig) {
    Rng rng(13, "t");
    auto g = graph_from(7, 5, {{0, 1}, {1, 2}, {3, 4}}, rng);
    auto m = TntModel<double>::init(small_cfg(), 5, 3);
    Tape<double> tape;
    GraphOperators<double> ops(g);
    auto b = bind_params(tape, m.params());
    const auto out = m.forward(tape, ops, b);
    EXPECT_EQ(out.logits.rows(), 7u);
    EXPECT_EQ(out.logits.cols(), 3u);
    EXPECT_EQ(out.p_t.rows(), 7u);
    EXPECT_EQ(out.p_t.cols(), 4u);
    EXPECT_EQ(out.g.cols(), 4u);
    EXPECT_EQ(out.z.cols(), 5u);
    EXPECT_EQ(out.g_tilde.cols(), 4u);
}

TEST(Forward, ZeroWeightsGiveUniformSoftmax) {
    Rng rng(14, "t");
    auto g = graph_from(5, 3, {{0, 1}, {2, 3}}, rng);
    auto m = TntModel<double>::init(small_cfg(), 3, 3);
    zero_all(m.params());
    Tape<double> tape;
    GraphOperators<double> ops(g);
    auto b = bind_params(tape, m.params());
    const auto out = m.forward(tape, ops, b);
    for (double v : out.logits.value().data) EXPECT_EQ(v, 0.0);
    for (double v : softmax(out.logits).value().data) EXPECT_DOUBLE_EQ(v, 1.0 / 3);
}

TEST(Forward, SingleNodeMatchesScalarTrace) {
    Rng rng(15, "t");
    auto g = graph_from(1, 3, {}, rng);
    auto m = TntModel<double>::init(small_cfg(), 3, 2);
    for (auto& [k, w] : m.params())
        for (auto& v : w.data) v = rng.uniform(-1, 1);
    Tape<double> tape;
    GraphOperators<double> ops(g);
    auto b = bind_params(tape, m.params());
    const auto got = m.forward(tape, ops, b).logits.value();

    const auto& P = m.params();
    const auto x = g.features.cast<double>();
    auto affine = [](const std::vector<double>& in, const Matrix<double>& w, const Matrix<double>* bias) {
        std::vector<double> o(w.cols, 0.0);
        for (std::size_t j = 0; j < w.cols; ++j) {
            o[j] = bias ? (*bias)(0, j) : 0.0;
            for (std::size_t k = 0; k < in.size(); ++k) o[j] += in[k] * w(k, j);
        }
        return o;
    };
    auto relu_v = [](std::vector<double> v) {
        for (auto& e : v) e = std::max(e, 0.0);
        return v;
    };
    const std::vector<double> xv(x.data.begin(), x.data.end());
    // Single node: A~ = [1], no neighbours, so z = x.
    const auto h = relu_v(affine(xv, P.at("hyper.W1"), &P.at("hyper.b1")));
    const auto L = affine(h, P.at("hyper.WL"), &P.at("hyper.bL"));
    const auto R = affine(h, P.at("hyper.WR"), &P.at("hyper.bR"));
    std::vector<double> inner(2, 0.0), pt(4, 0.0);
    for (std::size_t k = 0; k < 2; ++k)
        for (std::size_t c = 0; c < 3; ++c) inner[k] += R[k * 3 + c] * xv[c];
    for (std::size_t a = 0; a < 4; ++a)
        for (std::size_t k = 0; k < 2; ++k) pt[a] += L[a * 2 + k] * inner[k];
    const auto gt = affine(pt, P.at("fuse.W"), &P.at("fuse.b"));
    const auto logits = affine(relu_v(gt), P.at("cls.W"), &P.at("cls.b"));
    for (std::size_t c = 0; c < 2; ++c) EXPECT_NEAR(got(0, c), logits[c], 1e-12);
}

TEST(Contrastive, OrthonormalTwoByTwo) {
    Tape<double> tape;
    auto p = tape.leaf(Matrix<double>(2, 2, {1, 0, 0, 1}));
    auto g = tape.leaf(Matrix<double>(2, 2, {1, 0, 0, 1}));
    const double e = std::exp(1.0);
    EXPECT_NEAR(contrastive_loss(p, g, 1.0).value()(0, 0), -std::log(e / (e + 1)), 1e-12);
    EXPECT_NEAR(-std::log(e / (e + 1)), 0.3133, 1e-4);
}

TEST(Contrastive, SingleRowIsZero) {
    Tape<double> tape;
    auto p = tape.leaf(Matrix<double>(1, 3, {1, 2, 3}));
    auto g = tape.leaf(Matrix<double>(1, 3, {-1, 0, 4}));
    EXPECT_EQ(contrastive_loss(p, g, 0.1).value()(0, 0), 0.0);
}

TEST(Contrastive, DefaultTemperature) { EXPECT_DOUBLE_EQ(TntConfig{}.tau, 0.1); }

TEST(Train, LambdaZeroDropsContrastiveTerm) {
    auto spec = trend_fixture_spec(0);
    spec.class_sizes = {10, 10};
    const auto g = make_synthetic_graph(spec);
    auto c = small_cfg();
    c.lambda = 0.0;
    c.epochs = 3;
    const auto r = train_tnt(g, {0, 1, 10, 11}, c);
    for (const auto& row : r.log) {
        EXPECT_EQ(row.cont_loss, 0.0);
        EXPECT_EQ(row.total, row.cls_loss);
    }
}

TEST(Train, ZeroEpochsKeepsInitialisation) {
    auto spec = trend_fixture_spec(0);
    spec.class_sizes = {5, 5};
    const auto g = make_synthetic_graph(spec);
    auto c = small_cfg();
    c.epochs = 0;
    const auto r = train_tnt(g, {0, 5}, c);
    EXPECT_EQ(r.model.params(), TntModel<float>::init(c, g.dim(), 2).params());
    EXPECT_TRUE(r.log.empty());
}

TEST(Train, SeparableToyGraphIsLearned) {
    // Two well separated Gaussian classes of 30 nodes, mostly intra-class edges.
    SyntheticSpec spec;
    spec.class_sizes = {30, 30};
    spec.d = 8;
    spec.mean_scale = 3.0;
    spec.noise = 0.5;
    spec.seed = 1;
    const auto g = make_synthetic_graph(spec);
    std::vector<std::size_t> all(g.n);
    for (std::size_t i = 0; i < g.n; ++i) all[i] = i;
    TntConfig c;
    c.d_p = 16;
    c.rank = 4;
    c.epochs = 200;
    const auto r = train_tnt(g, all, c);
    EXPECT_GE(id_accuracy(infer(r.model, g).logits, g.labels, all), 0.95);
}

TEST(Train, DivergenceReportsEpoch) {
    auto spec = trend_fixture_spec(0);
    spec.class_sizes = {5, 5};
    auto g = make_synthetic_graph(spec);
    g.features(0, 0) = std::numeric_limits<float>::quiet_NaN();
    auto c = small_cfg();
    c.epochs = 2;
    try {
        train_tnt(g, {0, 5}, c);
        FAIL();
    } catch (const TrainingDiverged& e) {
        EXPECT_EQ(e.epoch(), 0);
    }
}

TEST(Train, DeterministicGivenSeed) {
    auto spec = trend_fixture_spec(0);
    spec.class_sizes = {8, 8};
    const auto g = make_synthetic_graph(spec);
    auto c = small_cfg();
    c.epochs = 4;
    EXPECT_EQ(train_tnt(g, {0, 1, 8, 9}, c).model.params(), train_tnt(g, {0, 1, 8, 9}, c).model.params());
}
