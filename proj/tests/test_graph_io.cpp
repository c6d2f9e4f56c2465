#include <gtest/gtest.h>

#include <filesystem>

#include "trnood/fixtures.hpp"
#include "trnood/graph_io.hpp"

namespace fs = std::filesystem;
using namespace trnood;

namespace {

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("trnood_graph_io_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST(Npy, RoundTripEveryDtype) {
    const std::vector<float> f{1.5f, -2.0f, 3.25f, 0.0f, 7.0f, 8.0f};
    auto a = npy::decode(npy::encode(npy::Dtype::f4, {2, 3}, f));
    EXPECT_EQ(a.shape, (std::vector<std::size_t>{2, 3}));
    EXPECT_EQ(a.as<float>(), f);
    const std::vector<std::int64_t> i{-1, 5, 1LL << 40};
    EXPECT_EQ(npy::decode(npy::encode(npy::Dtype::i8, {3}, i)).as<std::int64_t>(), i);
    const std::vector<std::uint32_t> u{0, 4000000000u};
    EXPECT_EQ(npy::decode(npy::encode(npy::Dtype::u4, {2}, u)).as<std::uint32_t>(), u);
    const std::vector<std::uint8_t> b{0, 1, 1};
    EXPECT_EQ(npy::decode(npy::encode(npy::Dtype::u1, {3}, b)).as<std::uint8_t>(), b);
}

TEST(Npy, HeaderIsNumpyCompatible) {
    const auto bytes = npy::encode(npy::Dtype::f4, {2, 3}, std::vector<float>(6, 0.0f));
    ASSERT_GE(bytes.size(), 10u);
    EXPECT_EQ(bytes.substr(0, 6), "\x93NUMPY");
    const std::size_t hlen = std::uint8_t(bytes[8]) | (std::uint8_t(bytes[9]) << 8);
    EXPECT_EQ((10 + hlen) % 64, 0u);
    const auto header = bytes.substr(10, hlen);
    EXPECT_NE(header.find("'descr': '<f4'"), std::string::npos);
    EXPECT_NE(header.find("'fortran_order': False"), std::string::npos);
    EXPECT_NE(header.find("'shape': (2, 3)"), std::string::npos);
    EXPECT_EQ(header.back(), '\n');
}

TEST(Npy, RejectsGarbage) {
    EXPECT_THROW(npy::decode("not an npy file"), std::exception);
    EXPECT_THROW(npy::encode(npy::Dtype::f4, {2, 2}, std::vector<float>(3)), std::invalid_argument);
}

TEST(GraphIo, DirectoryRoundTripIsLossless) {
    auto spec = trend_fixture_spec(3);
    spec.class_sizes = {5, 6, 7};
    spec.with_texts = true;
    spec.first_year = 2001;
    spec.year_span = 10;
    const auto g = make_synthetic_graph(spec);
    const auto dir = scratch("rt");
    save_graph_dir(g, dir);
    EXPECT_EQ(load_graph_dir(dir), g);
}

TEST(GraphIo, IngestDropsSelfLoopsAndDuplicates) {
    const auto dir = scratch("ingest");
    save_npy(dir / "x.npy", npy::Dtype::f4, {3, 2}, std::vector<float>{1, 0, 0, 1, 1, 1});
    save_npy(dir / "y.npy", npy::Dtype::i8, {3}, std::vector<std::int64_t>{0, 1, 1});
    write_file_atomic(dir / "e.txt", "# comment\n0 1\n1 0\n2 2\n1 2\n");
    IngestReport rep;
    const auto g = load_graph({dir / "x.npy", dir / "e.txt", dir / "y.npy", {}, {}}, &rep);
    EXPECT_EQ(g.edges, (std::vector<Edge>{{0, 1}, {1, 2}}));
    EXPECT_EQ(rep.self_loops_removed, 1u);
    EXPECT_EQ(rep.duplicate_pairs_merged, 1u);
    EXPECT_EQ(g.num_classes, 2);
}

TEST(GraphIo, BadInputsAreRejected) {
    const auto dir = scratch("bad");
    save_npy(dir / "x.npy", npy::Dtype::f4, {2, 1}, std::vector<float>{1, 2});
    save_npy(dir / "y.npy", npy::Dtype::i8, {3}, std::vector<std::int64_t>{0, 1, 1});
    write_file_atomic(dir / "e.txt", "0 1\n");
    EXPECT_THROW(load_graph({dir / "x.npy", dir / "e.txt", dir / "y.npy", {}, {}}), std::runtime_error);
    save_npy(dir / "y.npy", npy::Dtype::i8, {2}, std::vector<std::int64_t>{0, 1});
    write_file_atomic(dir / "e.txt", "0 5\n");
    EXPECT_THROW(load_graph({dir / "x.npy", dir / "e.txt", dir / "y.npy", {}, {}}), std::runtime_error);
    write_file_atomic(dir / "e.txt", "0 one\n");
    EXPECT_THROW(load_graph({dir / "x.npy", dir / "e.txt", dir / "y.npy", {}, {}}), std::runtime_error);
}

TEST(GraphIo, TextsJsonlNeedsEveryId) {
    const auto dir = scratch("texts");
    write_file_atomic(dir / "t.jsonl", "{\"id\": 1, \"text\": \"b\"}\n{\"id\": 0, \"text\": \"a\"}\n");
    EXPECT_EQ(load_texts_jsonl(dir / "t.jsonl", 2), (std::vector<std::string>{"a", "b"}));
    EXPECT_THROW(load_texts_jsonl(dir / "t.jsonl", 3), std::runtime_error);
    write_file_atomic(dir / "t.jsonl", "{\"id\": 0, \"text\": \"a\"}\n{broken\n");
    EXPECT_THROW(load_texts_jsonl(dir / "t.jsonl", 2), std::runtime_error);
}

TEST(GraphIo, NormalizedAdjacencies) {
    TrnGraph g;
    g.n = 3;
    g.features = Matrix<float>(3, 1);
    g.edges = {{0, 1}, {0, 2}};
    const auto p = row_norm_adj(g).to_dense();
    EXPECT_DOUBLE_EQ(p(0, 1), 0.5);
    EXPECT_DOUBLE_EQ(p(1, 0), 1.0);
    EXPECT_DOUBLE_EQ(p(0, 0), 0.0);
    const auto a = sym_norm_adj(g).to_dense();
    // D~ = diag(3, 2, 2)
    EXPECT_NEAR(a(0, 0), 1.0 / 3, 1e-15);
    EXPECT_NEAR(a(0, 1), 1.0 / std::sqrt(6.0), 1e-15);
    EXPECT_NEAR(a(1, 1), 0.5, 1e-15);
    EXPECT_DOUBLE_EQ(a(1, 2), 0.0);
}

TEST(GraphIo, InducedSubgraphRemapsEdges) {
    TrnGraph g;
    g.n = 4;
    g.num_classes = 2;
    g.features = Matrix<float>(4, 1, {0, 1, 2, 3});
    g.labels = {0, 1, 0, 1};
    g.edges = {{0, 1}, {1, 2}, {1, 3}, {2, 3}};
    const std::vector<NodeId> keep{1, 3};
    const auto s = induced_subgraph(g, keep);
    EXPECT_EQ(s.n, 2u);
    EXPECT_EQ(s.edges, (std::vector<Edge>{{0, 1}}));
    EXPECT_EQ(s.features.data, (std::vector<float>{1, 3}));
    EXPECT_EQ(s.labels, (std::vector<std::int64_t>{1, 1}));
}
