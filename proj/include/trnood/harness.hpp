#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "trnood/checkpoint.hpp"
#include "trnood/config.hpp"
#include "trnood/detectors.hpp"
#include "trnood/fixtures.hpp"
#include "trnood/graph_io.hpp"
#include "trnood/metrics.hpp"
#include "trnood/shifts.hpp"
#include "trnood/train.hpp"

namespace trnood {

inline constexpr const char* kToolkitVersion = "0.1.0";

enum ExitCode { kExitOk = 0, kExitConfig = 1, kExitRuntime = 2, kExitSelfcheck = 3 };

struct RunOptions {
    std::optional<std::string> out;
    std::optional<std::vector<std::uint64_t>> seeds;
    bool force = false;
    std::ostream* log = &std::cout;
};

// ---------------------------------------------------------------------------
// Small formatting / IO helpers.

inline std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

inline std::string hash_line(const std::string& h) { return "# config_hash: " + h + "\n"; }

// Worker count from TRN_OOD_THREADS (default: hardware concurrency), at least 1.
inline unsigned worker_count() {
    unsigned n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* e = std::getenv("TRN_OOD_THREADS")) {
        const long v = std::strtol(e, nullptr, 10);
        if (v >= 1) n = static_cast<unsigned>(v);
    }
    return n;
}

// Runs fn(i) for i in [0, n) on up to worker_count() threads. Each task's
// exception message is returned in its slot (empty on success).
inline std::vector<std::string> parallel_tasks(std::size_t n, const std::function<void(std::size_t)>& fn) {
    std::vector<std::string> errors(n);
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < n;) {
            try {
                fn(i);
            } catch (const std::exception& e) {
                errors[i] = e.what();
                if (errors[i].empty()) errors[i] = "unknown error";
            }
        }
    };
    const unsigned t = std::min<std::size_t>(worker_count(), std::max<std::size_t>(n, 1));
    std::vector<std::thread> pool;
    for (unsigned k = 1; k < t; ++k) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();
    return errors;
}

inline std::string seeded(const std::string& name, std::uint64_t seed) {
    return name + "__seed" + std::to_string(seed);
}

// ---------------------------------------------------------------------------
// Dataset loading.

inline TrnGraph load_dataset(const ExperimentConfig& c, IngestReport* report = nullptr) {
    const auto& d = c.dataset;
    if (!d.fixture.empty()) {
        auto spec = d.fixture == "trend" ? trend_fixture_spec(d.fixture_seed) : cora_like_spec(d.fixture_seed);
        spec.with_texts = d.fixture_texts;
        return make_synthetic_graph(spec);
    }
    GraphPaths p{c.resolve(d.features), c.resolve(d.edges), c.resolve(d.labels), c.resolve(d.texts), c.resolve(d.years)};
    for (const auto& f : {p.features, p.edges, p.labels, p.texts, p.years})
        if (!f.empty() && !fs::exists(f)) throw ConfigError("dataset: file not found: " + f.string());
    try {
        return load_graph(p, report, d.num_classes);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("dataset: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Split directories.

inline void save_split(const OodSplit& s, const fs::path& dir, std::uint64_t seed, const std::string& hash) {
    save_graph_dir(s.id_graph, dir / "id_graph");
    save_graph_dir(s.ood_graph, dir / "ood_graph");
    std::vector<std::uint32_t> eval;
    std::vector<std::uint8_t> flags;
    for (std::size_t i = 0; i < s.eval.size(); ++i) {
        eval.push_back(s.eval[i].ood_side ? 1u : 0u);
        eval.push_back(s.eval[i].node);
        flags.push_back(s.ood_flags[i] ? 1 : 0);
    }
    save_npy(dir / "eval_nodes.npy", npy::Dtype::u4, {s.eval.size(), 2}, eval);
    save_npy(dir / "ood_flags.npy", npy::Dtype::u1, {flags.size()}, flags);
    save_npy(dir / "train.npy", npy::Dtype::u4, {s.masks.train.size()}, s.masks.train);
    save_npy(dir / "val.npy", npy::Dtype::u4, {s.masks.val.size()}, s.masks.val);
    save_npy(dir / "test.npy", npy::Dtype::u4, {s.masks.test.size()}, s.masks.test);
    const auto n_ood = static_cast<std::size_t>(std::count(s.ood_flags.begin(), s.ood_flags.end(), true));
    ojson meta = {{"toolkit_version", kToolkitVersion},
                  {"config_hash", hash},
                  {"seed", seed},
                  {"spec", to_json(s.spec)},
                  {"ood_flags", "ood_flags.npy"},
                  {"eval_nodes", "eval_nodes.npy"},
                  {"n_eval", s.eval.size()},
                  {"n_ood", n_ood},
                  {"n_id", s.eval.size() - n_ood},
                  {"warnings", s.warnings}};
    write_file_atomic(dir / "split.json", meta.dump(2) + "\n");
}

struct LoadedSplit {
    OodSplit split;
    ojson meta;
};

inline LoadedSplit load_split(const fs::path& dir) {
    LoadedSplit l;
    l.meta = ojson::parse(npy::read_file(dir / "split.json"));
    auto& s = l.split;
    s.spec = shift_from_json(l.meta.at("spec"));
    s.id_graph = load_graph_dir(dir / "id_graph");
    s.ood_graph = load_graph_dir(dir / "ood_graph");
    const auto ev = npy::load(dir / "eval_nodes.npy").as<std::uint32_t>();
    const auto fl = npy::load(dir / "ood_flags.npy").as<std::uint8_t>();
    if (ev.size() != 2 * fl.size()) throw std::runtime_error(dir.string() + ": eval_nodes / ood_flags length mismatch");
    for (std::size_t i = 0; i < fl.size(); ++i) {
        s.eval.push_back({ev[2 * i] != 0, ev[2 * i + 1]});
        s.ood_flags.push_back(fl[i] != 0);
    }
    s.masks.train = npy::load(dir / "train.npy").as<std::uint32_t>();
    s.masks.val = npy::load(dir / "val.npy").as<std::uint32_t>();
    s.masks.test = npy::load(dir / "test.npy").as<std::uint32_t>();
    for (auto w : l.meta.value("warnings", std::vector<std::string>{})) s.warnings.push_back(w);
    return l;
}

// Split directory a model is trained from: attribute shifts share the base graph.
inline std::string model_key(const ShiftSpec& s) { return shares_base_graph(s.kind) ? "base" : s.name; }

struct Layout {
    fs::path root;
    fs::path splits() const { return root / "splits"; }
    fs::path manifest() const { return splits() / "manifest.json"; }
    fs::path split(const std::string& name, std::uint64_t seed) const { return splits() / seeded(name, seed); }
    fs::path model(const std::string& key, std::uint64_t seed) const { return root / "models" / seeded(key, seed); }
    fs::path scores() const { return root / "scores"; }
    fs::path reports() const { return root / "reports"; }
};

inline Layout layout_for(const ExperimentConfig& c, const RunOptions& o) {
    return {o.out ? fs::path(*o.out) : c.resolve(c.run.out)};
}

inline std::vector<std::uint64_t> seeds_for(const ExperimentConfig& c, const RunOptions& o) {
    return o.seeds ? *o.seeds : c.run.seeds;
}

// ---------------------------------------------------------------------------
// gen-shifts

inline int cmd_gen_shifts(const ExperimentConfig& c, const RunOptions& o) {
    auto& log = *o.log;
    const auto hash = config_hash(c);
    const auto lay = layout_for(c, o);
    const auto seeds = seeds_for(c, o);
    const TrnGraph g = load_dataset(c);
    validate(g);
    std::optional<LexicalCache> cache;
    if (!c.run.lexical_cache.empty()) {
        const auto p = c.resolve(c.run.lexical_cache);
        if (!fs::exists(p)) throw ConfigError("run.lexical_cache: file not found: " + p.string());
        cache = LexicalCache::parse(npy::read_file(p));
    }
    ShiftContext ctx{cache ? &*cache : nullptr, c.split.train, c.split.val};

    struct Cell {
        std::size_t shift;
        std::uint64_t seed;
    };
    std::vector<Cell> cells;
    for (std::size_t k = 0; k < c.shifts.size(); ++k)
        for (auto s : seeds) cells.push_back({k, s});
    std::vector<ojson> entries(cells.size());
    auto errors = parallel_tasks(cells.size(), [&](std::size_t i) {
        const auto& raw = c.shifts[cells[i].shift];
        const auto name = raw.at("name").get<std::string>();
        entries[i] = {{"name", name}, {"seed", cells[i].seed}, {"dir", seeded(name, cells[i].seed)}};
        const auto spec = parse_shift_entry(raw);
        entries[i]["kind"] = nlohmann::json(spec.kind);
        entries[i]["model_key"] = model_key(spec);
        const auto split = generate_split(g, spec, cells[i].seed, ctx);
        save_split(split, lay.split(name, cells[i].seed), cells[i].seed, hash);
        entries[i]["n_eval"] = split.eval.size();
        entries[i]["warnings"] = split.warnings;
    });
    int rc = kExitOk;
    ojson manifest = {{"toolkit_version", kToolkitVersion}, {"config_hash", hash}, {"dataset", c.dataset.name},
                      {"entries", ojson::array()}};
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (errors[i].empty()) {
            entries[i]["status"] = "ok";
            log << "split " << entries[i]["dir"].get<std::string>() << ": " << entries[i]["n_eval"] << " eval nodes\n";
            for (const auto& w : entries[i]["warnings"]) log << "  warning: " << w.get<std::string>() << "\n";
        } else {
            entries[i]["status"] = "error";
            entries[i]["error"] = errors[i];
            log << "split " << entries[i]["dir"].get<std::string>() << ": ERROR " << errors[i] << "\n";
            rc = kExitRuntime;
        }
        manifest["entries"].push_back(entries[i]);
    }
    write_file_atomic(lay.manifest(), manifest.dump(2) + "\n");
    log << "manifest: " << lay.manifest().string() << " (" << cells.size() << " entries)\n";
    return rc;
}

inline ojson load_manifest(const Layout& lay) {
    if (!fs::exists(lay.manifest()))
        throw std::runtime_error("no manifest at " + lay.manifest().string() + "; run gen-shifts first");
    return ojson::parse(npy::read_file(lay.manifest()));
}

inline void check_hash(const std::string& what, const std::string& found, const std::string& expected, bool force,
                       std::ostream& log) {
    if (found == expected) return;
    if (!force)
        throw std::runtime_error(what + " has config hash " + found + ", current config is " + expected +
                                 " (rerun, or pass --force)");
    log << "warning: " << what << " config hash " << found << " != " << expected << " (--force)\n";
}

// ---------------------------------------------------------------------------
// train

inline std::string log_csv(const std::vector<EpochLog>& rows, const std::string& hash) {
    std::string out = hash_line(hash) + "epoch,cls_loss,cont_loss,total\n";
    for (const auto& r : rows)
        out += std::to_string(r.epoch) + "," + fmt("%.9g", r.cls_loss) + "," + fmt("%.9g", r.cont_loss) + "," +
               fmt("%.9g", r.total) + "\n";
    return out;
}

inline std::vector<std::size_t> widen(const std::vector<NodeId>& v) { return {v.begin(), v.end()}; }

inline int cmd_train(const ExperimentConfig& c, const RunOptions& o) {
    auto& log = *o.log;
    const auto hash = config_hash(c);
    const auto lay = layout_for(c, o);
    const auto manifest = load_manifest(lay);
    check_hash("manifest", manifest.at("config_hash").get<std::string>(), hash, o.force, log);
    const auto seeds = seeds_for(c, o);

    // One training job per (model key, seed), taken from the first split that uses it.
    std::map<std::pair<std::string, std::uint64_t>, std::string> jobs;
    for (const auto& e : manifest.at("entries")) {
        if (e.at("status") != "ok") continue;
        const auto seed = e.at("seed").get<std::uint64_t>();
        if (std::find(seeds.begin(), seeds.end(), seed) == seeds.end()) continue;
        jobs.emplace(std::pair{e.at("model_key").get<std::string>(), seed}, e.at("dir").get<std::string>());
    }
    std::vector<std::pair<std::pair<std::string, std::uint64_t>, std::string>> list(jobs.begin(), jobs.end());
    std::vector<std::string> summary(list.size());
    auto errors = parallel_tasks(list.size(), [&](std::size_t i) {
        const auto& [key_seed, dir] = list[i];
        const auto& [key, seed] = key_seed;
        const auto l = load_split(lay.splits() / dir);
        check_hash("split " + dir, l.meta.at("config_hash").get<std::string>(), hash, o.force, log);
        const auto& g = l.split.id_graph;
        const auto train_idx = widen(l.split.masks.train);
        const auto out = lay.model(key, seed);
        ojson info = {{"config_hash", hash}, {"model_key", key}, {"seed", seed}, {"split", dir}};
        std::ostringstream line;
        line << seeded(key, seed) << ":";
        auto accuracy = [&](const Matrix<double>& logits, const std::vector<NodeId>& mask) {
            return mask.empty() ? std::nan("") : id_accuracy(logits, g.labels, widen(mask));
        };
        if (c.needs_tnt()) {
            auto cfg = c.model;
            cfg.seed = seed;
            auto r = train_tnt(g, train_idx, cfg);
            save_checkpoint(out / "tnt.ckpt", make_checkpoint(r.model, hash));
            write_file_atomic(out / "tnt_log.csv", log_csv(r.log, hash));
            const auto mo = infer(r.model, g);
            info["tnt"] = {{"train_acc", accuracy(mo.logits, l.split.masks.train)},
                           {"val_acc", accuracy(mo.logits, l.split.masks.val)}};
            line << " tnt val_acc=" << fmt("%.4f", info["tnt"]["val_acc"].get<double>());
        }
        if (c.needs_gcn()) {
            auto cfg = c.baseline;
            cfg.seed = seed;
            auto r = train_gcn(g, train_idx, cfg);
            save_checkpoint(out / "gcn.ckpt", make_checkpoint(r.model, hash));
            write_file_atomic(out / "gcn_log.csv", log_csv(r.log, hash));
            const auto mo = infer(r.model, g);
            info["gcn"] = {{"train_acc", accuracy(mo.logits, l.split.masks.train)},
                           {"val_acc", accuracy(mo.logits, l.split.masks.val)}};
            line << " gcn val_acc=" << fmt("%.4f", info["gcn"]["val_acc"].get<double>());
        }
        write_file_atomic(out / "train.json", info.dump(2) + "\n");
        summary[i] = line.str();
    });
    int rc = kExitOk;
    for (std::size_t i = 0; i < list.size(); ++i) {
        if (errors[i].empty()) {
            log << "trained " << summary[i] << "\n";
        } else {
            log << "train " << seeded(list[i].first.first, list[i].first.second) << ": ERROR " << errors[i] << "\n";
            rc = kExitRuntime;
        }
    }
    return rc;
}

// ---------------------------------------------------------------------------
// eval

// Scores for every node of one graph under one method, after propagation.
inline ScoreVector method_scores(const MethodConfig& m, const ModelOutputs& out, const TrnGraph& g,
                                 const MahalanobisModel* maha) {
    ScoreVector s;
    switch (m.kind) {
        case MethodKind::msp:
            s = msp_score(out.logits);
            break;
        case MethodKind::energy:
        case MethodKind::gnnsafe:
            s = energy_score(out.logits);
            break;
        case MethodKind::maha:
            s = maha->score(out.embedding);
            break;
        case MethodKind::tnt:
            s = elign_score(energy_score(out.logits), out.p_hat, out.g_hat, m.T);
            break;
    }
    if (m.K > 0) s = propagate_scores(s, g, m.K, m.alpha);
    s.method = m.name;
    check_finite(s);
    return s;
}

struct EvalRow {
    std::string shift;
    std::string kind;
    std::string method;
    std::uint64_t seed;
    MetricReport report;
};

inline std::string aggregate_csv(const std::string& dataset, const std::vector<EvalRow>& rows, const std::string& hash) {
    std::string out = hash_line(hash) + "dataset,shift,method,auroc,aupr,fpr95,id_acc,seed\n";
    for (const auto& r : rows)
        out += dataset + "," + r.shift + "," + r.method + "," + fmt("%.6f", r.report.auroc) + "," +
               fmt("%.6f", r.report.aupr) + "," + fmt("%.6f", r.report.fpr95) + "," + fmt("%.6f", r.report.id_acc) +
               "," + std::to_string(r.seed) + "\n";
    return out;
}

// Mean and population std per (shift, method) over seeds, then per
// (shift kind, method) over every configuration and seed ("all:<kind>").
inline std::string summary_csv(const std::string& dataset, const std::vector<EvalRow>& rows, const std::string& hash) {
    struct Acc {
        std::vector<MetricReport> v;
    };
    std::vector<std::pair<std::string, std::string>> order;
    std::map<std::pair<std::string, std::string>, Acc> groups;
    auto add = [&](const std::string& shift, const std::string& method, const MetricReport& r) {
        auto key = std::pair{shift, method};
        if (!groups.count(key)) order.push_back(key);
        groups[key].v.push_back(r);
    };
    for (const auto& r : rows) add(r.shift, r.method, r.report);
    for (const auto& r : rows) add("all:" + r.kind, r.method, r.report);
    std::string out = hash_line(hash) +
                      "dataset,shift,method,n,auroc_mean,auroc_std,aupr_mean,aupr_std,fpr95_mean,fpr95_std,"
                      "id_acc_mean,id_acc_std\n";
    for (const auto& key : order) {
        const auto& v = groups[key].v;
        out += dataset + "," + key.first + "," + key.second + "," + std::to_string(v.size());
        for (auto field : {&MetricReport::auroc, &MetricReport::aupr, &MetricReport::fpr95, &MetricReport::id_acc}) {
            double mean = 0.0, var = 0.0;
            for (const auto& r : v) mean += r.*field;
            mean /= double(v.size());
            for (const auto& r : v) var += (r.*field - mean) * (r.*field - mean);
            out += "," + fmt("%.6f", mean) + "," + fmt("%.6f", std::sqrt(var / double(v.size())));
        }
        out += "\n";
    }
    return out;
}

inline int cmd_eval(const ExperimentConfig& c, const RunOptions& o) {
    auto& log = *o.log;
    const auto hash = config_hash(c);
    const auto lay = layout_for(c, o);
    const auto manifest = load_manifest(lay);
    check_hash("manifest", manifest.at("config_hash").get<std::string>(), hash, o.force, log);
    const auto seeds = seeds_for(c, o);
    if (c.methods.empty()) throw ConfigError("eval: no [[methods]] configured");

    std::vector<ojson> cells;
    for (const auto& e : manifest.at("entries")) {
        if (e.at("status") != "ok") continue;
        if (std::find(seeds.begin(), seeds.end(), e.at("seed").get<std::uint64_t>()) == seeds.end()) continue;
        cells.push_back(e);
    }
    std::vector<std::vector<EvalRow>> results(cells.size());
    std::vector<std::vector<std::string>> skipped(cells.size());
    auto errors = parallel_tasks(cells.size(), [&](std::size_t i) {
        const auto& e = cells[i];
        const auto dir = e.at("dir").get<std::string>();
        const auto seed = e.at("seed").get<std::uint64_t>();
        const auto l = load_split(lay.splits() / dir);
        check_hash("split " + dir, l.meta.at("config_hash").get<std::string>(), hash, o.force, log);
        const auto& s = l.split;
        const auto mdir = lay.model(e.at("model_key").get<std::string>(), seed);

        struct Loaded {
            ModelOutputs id, ood;
            double id_acc = 0.0;
        };
        std::optional<Loaded> tnt, gcn;
        std::optional<MahalanobisModel> maha;
        auto load = [&](const char* file, auto from_ckpt) -> std::optional<Loaded> {
            const auto p = mdir / file;
            if (!fs::exists(p)) {
                skipped[i].push_back("missing checkpoint " + p.string());
                return std::nullopt;
            }
            const auto ck = load_checkpoint(p);
            check_hash("checkpoint " + p.string(), ck.header.at("config_hash").get<std::string>(), hash, o.force, log);
            const auto model = from_ckpt(ck);
            Loaded r{infer(model, s.id_graph), infer(model, s.ood_graph), 0.0};
            r.id_acc = id_accuracy(r.id.logits, s.id_graph.labels, widen(s.masks.test));
            return r;
        };
        if (c.needs_tnt()) tnt = load("tnt.ckpt", tnt_from_checkpoint);
        if (c.needs_gcn()) gcn = load("gcn.ckpt", gcn_from_checkpoint);
        if (gcn) {
            const auto& emb = gcn->id.embedding;
            Matrix<double> rows(0, emb.cols);
            std::vector<std::int64_t> y;
            for (auto v : s.masks.train) {
                rows.data.insert(rows.data.end(), emb.row(v).begin(), emb.row(v).end());
                ++rows.rows;
                y.push_back(s.id_graph.labels[v]);
            }
            maha = MahalanobisModel::fit(rows, y, s.id_graph.num_classes);
        }
        for (const auto& m : c.methods) {
            const auto& src = m.kind == MethodKind::tnt ? tnt : gcn;
            if (!src) continue;
            const auto sid = method_scores(m, src->id, s.id_graph, maha ? &*maha : nullptr);
            const auto sood = method_scores(m, src->ood, s.ood_graph, maha ? &*maha : nullptr);
            std::vector<double> scores;
            std::string csv = hash_line(hash) + "graph,node_id,score\n";
            for (const auto& ev : s.eval) {
                const double v = ev.ood_side ? sood.scores[ev.node] : sid.scores[ev.node];
                scores.push_back(v);
                csv += std::string(ev.ood_side ? "ood" : "id") + "," + std::to_string(ev.node) + "," + fmt("%.9g", v) + "\n";
            }
            const auto stem = dir + "__" + m.name;
            write_file_atomic(lay.scores() / (stem + ".csv"), csv);
            ojson side = {{"config_hash", hash}, {"method", m.name}, {"kind", nlohmann::json(m.kind)},
                          {"params", sid.params}, {"split", dir}, {"seed", seed}};
            write_file_atomic(lay.scores() / (stem + ".json"), side.dump(2) + "\n");
            const auto rep = evaluate(scores, s.ood_flags, src->id_acc);
            ojson rj = {{"config_hash", hash}, {"dataset", c.dataset.name}, {"shift", s.spec.name},
                        {"kind", nlohmann::json(s.spec.kind)}, {"method", m.name}, {"seed", seed},
                        {"auroc", rep.auroc}, {"aupr", rep.aupr}, {"fpr95", rep.fpr95}, {"id_acc", rep.id_acc},
                        {"n_id", rep.n_id}, {"n_ood", rep.n_ood}};
            write_file_atomic(lay.reports() / (stem + ".json"), rj.dump(2) + "\n");
            results[i].push_back({s.spec.name, nlohmann::json(s.spec.kind).get<std::string>(), m.name, seed, rep});
        }
    });
    int rc = kExitOk;
    std::vector<EvalRow> rows;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const auto dir = cells[i].at("dir").get<std::string>();
        for (const auto& sk : skipped[i]) {
            log << dir << ": skipped, " << sk << "\n";
            rc = kExitRuntime;
        }
        if (!errors[i].empty()) {
            log << dir << ": ERROR " << errors[i] << "\n";
            rc = kExitRuntime;
            continue;
        }
        rows.insert(rows.end(), results[i].begin(), results[i].end());
    }
    write_file_atomic(lay.root / "aggregate.csv", aggregate_csv(c.dataset.name, rows, hash));
    write_file_atomic(lay.root / "summary.csv", summary_csv(c.dataset.name, rows, hash));
    char line[256];
    std::snprintf(line, sizeof line, "%-28s %-10s %5s %8s %8s %8s %8s\n", "shift", "method", "seed", "AUROC", "AUPR",
                  "FPR95", "ID acc");
    log << line;
    for (const auto& r : rows) {
        std::snprintf(line, sizeof line, "%-28s %-10s %5llu %8.4f %8.4f %8.4f %8.4f\n", r.shift.c_str(),
                      r.method.c_str(), static_cast<unsigned long long>(r.seed), r.report.auroc, r.report.aupr,
                      r.report.fpr95, r.report.id_acc);
        log << line;
    }
    return rc;
}

// Writes a bundled synthetic dataset (with texts and years) plus the fixture
// lexical cache, so path-based configs can be exercised end to end.
inline void cmd_make_fixture(const std::string& kind, std::uint64_t seed, const fs::path& dir) {
    auto spec = kind == "cora_like" ? cora_like_spec(seed) : trend_fixture_spec(seed);
    if (kind != "cora_like" && kind != "trend") throw ConfigError("make-fixture: unknown fixture '" + kind + "'");
    spec.with_texts = true;
    spec.first_year = 2000;
    spec.year_span = 20;
    const auto g = make_synthetic_graph(spec);
    fs::create_directories(dir);
    save_graph_dir(g, dir);
    write_file_atomic(dir / "lexical_cache.json", fixture_lexical_cache().to_json().dump(2) + "\n");
}

}  // namespace trnood
