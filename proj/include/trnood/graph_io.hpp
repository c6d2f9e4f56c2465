#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "trnood/graph.hpp"
#include "trnood/npy.hpp"

namespace trnood {

namespace fs = std::filesystem;

// Writes through a sibling temp file and renames it into place.
inline void write_file_atomic(const fs::path& path, const std::string& bytes) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw std::runtime_error("write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

template <class T>
void save_npy(const fs::path& path, npy::Dtype t, const std::vector<std::size_t>& shape,
              const std::vector<T>& values) {
    write_file_atomic(path, npy::encode(t, shape, values));
}

struct IngestReport {
    std::size_t self_loops_removed = 0;
    std::size_t duplicate_pairs_merged = 0;
};

inline Matrix<float> load_features(const fs::path& p) {
    auto a = npy::load(p);
    if (a.shape.size() != 2) throw std::runtime_error(p.string() + ": features must be 2-D");
    return Matrix<float>(a.shape[0], a.shape[1], a.as<float>());
}

inline std::vector<std::int64_t> load_int_vector(const fs::path& p) {
    auto a = npy::load(p);
    if (a.shape.size() != 1) throw std::runtime_error(p.string() + ": expected a 1-D array");
    return a.as<std::int64_t>();
}

// Edge list from .npy ([m x 2]) or whitespace text (two columns, '#' comments).
inline std::vector<Edge> load_edge_list(const fs::path& p) {
    std::vector<Edge> edges;
    if (p.extension() == ".npy") {
        auto a = npy::load(p);
        if (a.shape.size() != 2 || a.shape[1] != 2)
            throw std::runtime_error(p.string() + ": edge array must have shape [m x 2]");
        auto v = a.as<std::int64_t>();
        for (std::size_t e = 0; e < a.shape[0]; ++e) {
            if (v[2 * e] < 0 || v[2 * e + 1] < 0) throw std::runtime_error(p.string() + ": negative node id");
            edges.emplace_back(static_cast<NodeId>(v[2 * e]), static_cast<NodeId>(v[2 * e + 1]));
        }
    } else if (p.extension() == ".txt") {
        std::ifstream in(p);
        if (!in) throw std::runtime_error("cannot open " + p.string());
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty() || line[0] == '#') continue;
            std::istringstream ls(line);
            long long a, b;
            if (!(ls >> a >> b) || a < 0 || b < 0)
                throw std::runtime_error(p.string() + ":" + std::to_string(lineno) + ": malformed edge");
            edges.emplace_back(static_cast<NodeId>(a), static_cast<NodeId>(b));
        }
    } else {
        throw std::runtime_error(p.string() + ": edge list must end in .npy or .txt");
    }
    return edges;
}

inline std::vector<std::string> load_texts_jsonl(const fs::path& p, std::size_t n) {
    std::ifstream in(p);
    if (!in) throw std::runtime_error("cannot open " + p.string());
    std::vector<std::string> texts(n);
    std::vector<bool> seen(n, false);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const std::exception& e) {
            throw std::runtime_error(p.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
        const auto id = j.at("id").get<long long>();
        if (id < 0 || static_cast<std::size_t>(id) >= n || seen[id])
            throw std::runtime_error(p.string() + ":" + std::to_string(lineno) + ": bad or repeated id");
        seen[id] = true;
        texts[id] = j.at("text").get<std::string>();
    }
    if (std::find(seen.begin(), seen.end(), false) != seen.end())
        throw std::runtime_error(p.string() + ": texts missing for some node ids");
    return texts;
}

inline std::string texts_to_jsonl(const std::vector<std::string>& texts) {
    std::string out;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        nlohmann::json j = {{"id", i}, {"text", texts[i]}};
        out += j.dump() + "\n";
    }
    return out;
}

struct GraphPaths {
    fs::path features, edges, labels;
    fs::path texts, years;  // optional, empty when absent
};

inline TrnGraph load_graph(const GraphPaths& paths, IngestReport* report = nullptr,
                           std::int64_t num_classes = -1) {
    TrnGraph g;
    g.features = load_features(paths.features);
    g.n = g.features.rows;
    g.labels = load_int_vector(paths.labels);
    if (g.labels.size() != g.n) throw std::runtime_error("labels length does not match feature rows");
    std::int64_t max_label = -1;
    for (auto y : g.labels) max_label = std::max(max_label, y);
    g.num_classes = num_classes >= 0 ? num_classes : max_label + 1;
    g.edges = load_edge_list(paths.edges);
    for (auto [a, b] : g.edges)
        if (a >= g.n || b >= g.n) throw std::runtime_error("edge endpoint exceeds node count");
    const std::size_t raw = g.edges.size();
    const std::size_t loops = canonicalize_edges(g.edges);
    if (report) {
        report->self_loops_removed = loops;
        report->duplicate_pairs_merged = raw - loops - g.edges.size();
    }
    if (!paths.texts.empty()) g.texts = load_texts_jsonl(paths.texts, g.n);
    if (!paths.years.empty()) {
        g.years = load_int_vector(paths.years);
        if (g.years->size() != g.n) throw std::runtime_error("years length does not match n");
    }
    validate(g);
    return g;
}

// Directory layout: features.npy, edges.npy, labels.npy, graph.json,
// optional texts.jsonl and years.npy.
inline void save_graph_dir(const TrnGraph& g, const fs::path& dir) {
    fs::create_directories(dir);
    save_npy(dir / "features.npy", npy::Dtype::f4, {g.n, g.features.cols}, g.features.data);
    std::vector<std::uint32_t> flat;
    flat.reserve(g.edges.size() * 2);
    for (auto [a, b] : g.edges) {
        flat.push_back(a);
        flat.push_back(b);
    }
    save_npy(dir / "edges.npy", npy::Dtype::u4, {g.edges.size(), 2}, flat);
    save_npy(dir / "labels.npy", npy::Dtype::i8, {g.labels.size()}, g.labels);
    if (g.texts) write_file_atomic(dir / "texts.jsonl", texts_to_jsonl(*g.texts));
    if (g.years) save_npy(dir / "years.npy", npy::Dtype::i8, {g.years->size()}, *g.years);
    nlohmann::ordered_json meta = {{"n", g.n},
                                   {"d", g.features.cols},
                                   {"num_classes", g.num_classes},
                                   {"num_edges", g.edges.size()},
                                   {"has_texts", g.texts.has_value()},
                                   {"has_years", g.years.has_value()}};
    write_file_atomic(dir / "graph.json", meta.dump(2) + "\n");
}

inline TrnGraph load_graph_dir(const fs::path& dir) {
    auto meta = nlohmann::json::parse(npy::read_file(dir / "graph.json"));
    GraphPaths p{dir / "features.npy", dir / "edges.npy", dir / "labels.npy", {}, {}};
    if (meta.value("has_texts", false)) p.texts = dir / "texts.jsonl";
    if (meta.value("has_years", false)) p.years = dir / "years.npy";
    return load_graph(p, nullptr, meta.at("num_classes").get<std::int64_t>());
}

}  // namespace trnood
