#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>
#include <toml.hpp>

#include "trnood/checkpoint.hpp"
#include "trnood/detectors.hpp"
#include "trnood/rng.hpp"
#include "trnood/shifts.hpp"
#include "trnood/tnt_model.hpp"

namespace trnood {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct DatasetConfig {
    std::string name = "dataset";
    std::string fixture;  // "trend" | "cora_like" | "" (use paths)
    std::uint64_t fixture_seed = 0;
    bool fixture_texts = false;
    std::string features, edges, labels, texts, years;
    std::int64_t num_classes = -1;
    bool operator==(const DatasetConfig&) const = default;
};

struct SplitConfig {
    double train = 0.6;
    double val = 0.2;
    bool operator==(const SplitConfig&) const = default;
};

enum class MethodKind { msp, energy, maha, gnnsafe, tnt };
NLOHMANN_JSON_SERIALIZE_ENUM(MethodKind, {{MethodKind::msp, "msp"},
                                          {MethodKind::energy, "energy"},
                                          {MethodKind::maha, "maha"},
                                          {MethodKind::gnnsafe, "gnnsafe"},
                                          {MethodKind::tnt, "tnt"}})

struct MethodConfig {
    std::string name;
    MethodKind kind = MethodKind::energy;
    int K = 0;
    double alpha = PropagationDefaults::alpha;
    double T = 1.0;
    bool operator==(const MethodConfig&) const = default;
};

struct RunConfig {
    std::vector<std::uint64_t> seeds{0};
    std::string out = "out";
    std::string lexical_cache;
    bool operator==(const RunConfig&) const = default;
};

struct ExperimentConfig {
    fs::path base_dir;  // relative paths resolve against the config file's directory
    DatasetConfig dataset;
    SplitConfig split;
    std::vector<ojson> shifts;  // raw entries; each is validated on its own by gen-shifts
    std::vector<MethodConfig> methods;
    TntConfig model;
    GcnConfig baseline;
    RunConfig run;

    fs::path resolve(const std::string& p) const {
        if (p.empty()) return {};
        fs::path q(p);
        return q.is_absolute() ? q : base_dir / q;
    }
    bool needs_tnt() const {
        for (const auto& m : methods)
            if (m.kind == MethodKind::tnt) return true;
        return false;
    }
    bool needs_gcn() const {
        for (const auto& m : methods)
            if (m.kind != MethodKind::tnt) return true;
        return false;
    }
};

inline bool operator==(const TntConfig& a, const TntConfig& b) { return to_json(a) == to_json(b); }
inline bool operator==(const GcnConfig& a, const GcnConfig& b) { return to_json(a) == to_json(b); }

// ---------------------------------------------------------------------------
// TOML <-> JSON bridge.

inline ojson toml_to_json(const toml::node& n) {
    if (auto t = n.as_table()) {
        ojson j = ojson::object();
        for (auto&& [k, v] : *t) j[std::string(k.str())] = toml_to_json(v);
        return j;
    }
    if (auto a = n.as_array()) {
        ojson j = ojson::array();
        for (auto&& v : *a) j.push_back(toml_to_json(v));
        return j;
    }
    if (auto s = n.as_string()) return s->get();
    if (auto i = n.as_integer()) return i->get();
    if (auto f = n.as_floating_point()) return f->get();
    if (auto b = n.as_boolean()) return b->get();
    throw ConfigError("config: date/time values are not supported");
}

inline void json_to_toml_into(toml::table& t, const std::string& key, const ojson& v);

inline toml::array json_to_toml_array(const ojson& j) {
    toml::array a;
    for (const auto& v : j) {
        if (v.is_object()) {
            toml::table t;
            for (auto it = v.begin(); it != v.end(); ++it) json_to_toml_into(t, it.key(), it.value());
            a.push_back(std::move(t));
        } else if (v.is_array()) {
            a.push_back(json_to_toml_array(v));
        } else if (v.is_string()) {
            a.push_back(v.get<std::string>());
        } else if (v.is_boolean()) {
            a.push_back(v.get<bool>());
        } else if (v.is_number_integer()) {
            a.push_back(v.get<std::int64_t>());
        } else if (v.is_number()) {
            a.push_back(v.get<double>());
        }
    }
    return a;
}

inline void json_to_toml_into(toml::table& t, const std::string& key, const ojson& v) {
    if (v.is_null()) return;
    if (v.is_object()) {
        toml::table sub;
        for (auto it = v.begin(); it != v.end(); ++it) json_to_toml_into(sub, it.key(), it.value());
        t.insert_or_assign(key, std::move(sub));
    } else if (v.is_array()) {
        t.insert_or_assign(key, json_to_toml_array(v));
    } else if (v.is_string()) {
        t.insert_or_assign(key, v.get<std::string>());
    } else if (v.is_boolean()) {
        t.insert_or_assign(key, v.get<bool>());
    } else if (v.is_number_integer()) {
        t.insert_or_assign(key, v.get<std::int64_t>());
    } else {
        t.insert_or_assign(key, v.get<double>());
    }
}

// ---------------------------------------------------------------------------
// ExperimentConfig <-> JSON.

inline ojson to_json(const DatasetConfig& d) {
    ojson j = {{"name", d.name}};
    if (!d.fixture.empty()) {
        j["fixture"] = d.fixture;
        j["fixture_seed"] = d.fixture_seed;
        j["fixture_texts"] = d.fixture_texts;
    }
    for (auto [k, v] : {std::pair{"features", &d.features}, std::pair{"edges", &d.edges}, std::pair{"labels", &d.labels},
                        std::pair{"texts", &d.texts}, std::pair{"years", &d.years}})
        if (!v->empty()) j[k] = *v;
    if (d.num_classes >= 0) j["num_classes"] = d.num_classes;
    return j;
}

inline ojson to_json(const MethodConfig& m) {
    ojson j = {{"name", m.name}, {"kind", nlohmann::json(m.kind)}, {"K", m.K}, {"alpha", m.alpha}};
    if (m.kind == MethodKind::tnt) j["T"] = m.T;
    return j;
}

inline ojson to_json(const ExperimentConfig& c) {
    ojson j;
    j["dataset"] = to_json(c.dataset);
    j["split"] = {{"train", c.split.train}, {"val", c.split.val}};
    j["shifts"] = ojson::array();
    for (const auto& s : c.shifts) j["shifts"].push_back(s);
    j["methods"] = ojson::array();
    for (const auto& m : c.methods) j["methods"].push_back(to_json(m));
    j["model"] = to_json(c.model);
    j["baseline"] = to_json(c.baseline);
    j["run"] = {{"seeds", c.run.seeds}, {"out", c.run.out}};
    if (!c.run.lexical_cache.empty()) j["run"]["lexical_cache"] = c.run.lexical_cache;
    return j;
}

inline std::string to_toml(const ExperimentConfig& c) {
    toml::table t;
    const auto j = to_json(c);
    for (auto it = j.begin(); it != j.end(); ++it) {
        if ((it.key() == "shifts" || it.key() == "methods") && it.value().empty()) continue;
        json_to_toml_into(t, it.key(), it.value());
    }
    std::ostringstream os;
    os << t << "\n";
    return os.str();
}

namespace detail {

template <class F>
auto config_field(const std::string& where, F f) -> decltype(f()) {
    try {
        return f();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(where + ": " + e.what());
    }
}

inline void reject_unknown(const ojson& j, std::initializer_list<const char*> keys, const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (auto k : keys) ok = ok || it.key() == k;
        if (!ok) throw ConfigError(where + ": unknown key '" + it.key() + "'");
    }
}

}  // namespace detail

inline MethodConfig method_from_json(const ojson& j) {
    return detail::config_field("methods", [&] {
        detail::reject_unknown(j, {"name", "kind", "K", "alpha", "T"}, "methods");
        MethodConfig m;
        m.kind = j.at("kind").get<MethodKind>();
        if (nlohmann::json(m.kind).get<std::string>() != j.at("kind").get<std::string>()) throw ConfigError("methods: unknown kind " + j.at("kind").dump());
        m.name = j.value("name", j.at("kind").get<std::string>());
        const bool propagates = m.kind == MethodKind::gnnsafe || m.kind == MethodKind::tnt;
        m.K = j.value("K", propagates ? PropagationDefaults::K : 0);
        m.alpha = j.value("alpha", PropagationDefaults::alpha);
        m.T = j.value("T", 1.0);
        if (m.K < 0) throw ConfigError("methods '" + m.name + "': K must be >= 0");
        if (!(m.alpha >= 0.0 && m.alpha <= 1.0)) throw ConfigError("methods '" + m.name + "': alpha must lie in [0, 1]");
        return m;
    });
}

inline ShiftSpec parse_shift_entry(const ojson& raw);

inline ExperimentConfig config_from_json(const ojson& j, fs::path base_dir = {}) {
    detail::reject_unknown(j, {"dataset", "split", "shifts", "methods", "model", "baseline", "run"}, "config");
    ExperimentConfig c;
    c.base_dir = std::move(base_dir);
    if (!j.contains("dataset")) throw ConfigError("config: missing [dataset]");
    detail::config_field("dataset", [&] {
        const auto& d = j.at("dataset");
        detail::reject_unknown(d, {"name", "fixture", "fixture_seed", "fixture_texts", "features", "edges", "labels",
                                   "texts", "years", "num_classes"},
                               "dataset");
        c.dataset.name = d.value("name", c.dataset.name);
        c.dataset.fixture = d.value("fixture", std::string{});
        c.dataset.fixture_seed = d.value("fixture_seed", std::uint64_t{0});
        c.dataset.fixture_texts = d.value("fixture_texts", false);
        c.dataset.features = d.value("features", std::string{});
        c.dataset.edges = d.value("edges", std::string{});
        c.dataset.labels = d.value("labels", std::string{});
        c.dataset.texts = d.value("texts", std::string{});
        c.dataset.years = d.value("years", std::string{});
        c.dataset.num_classes = d.value("num_classes", std::int64_t{-1});
        if (c.dataset.fixture.empty() &&
            (c.dataset.features.empty() || c.dataset.edges.empty() || c.dataset.labels.empty()))
            throw ConfigError("dataset: need features, edges and labels paths (or a fixture)");
        if (!c.dataset.fixture.empty() && c.dataset.fixture != "trend" && c.dataset.fixture != "cora_like")
            throw ConfigError("dataset: unknown fixture '" + c.dataset.fixture + "' (trend | cora_like)");
        return 0;
    });
    if (j.contains("split"))
        detail::config_field("split", [&] {
            const auto& s = j.at("split");
            detail::reject_unknown(s, {"train", "val"}, "split");
            c.split.train = s.value("train", c.split.train);
            c.split.val = s.value("val", c.split.val);
            if (c.split.train <= 0 || c.split.val < 0 || c.split.train + c.split.val >= 1.0)
                throw ConfigError("split: need train > 0, val >= 0, train + val < 1");
            return 0;
        });
    if (j.contains("shifts")) {
        for (const auto& s : j.at("shifts")) {
            if (!s.is_object() || !s.contains("name") || !s.at("name").is_string())
                throw ConfigError("shifts: every entry needs a string 'name'");
            for (const auto& prev : c.shifts)
                if (prev.at("name") == s.at("name"))
                    throw ConfigError("shifts: duplicate name " + s.at("name").dump());
            detail::config_field("shifts '" + s.at("name").get<std::string>() + "'", [&] {
                validate(parse_shift_entry(s));
                return 0;
            });
            c.shifts.push_back(s);
        }
    }
    if (j.contains("methods"))
        for (const auto& m : j.at("methods")) c.methods.push_back(method_from_json(m));
    if (j.contains("model"))
        c.model = detail::config_field("model", [&] { return tnt_config_from_json(j.at("model")); });
    c.baseline.hidden = c.model.d_p;
    c.baseline.epochs = c.model.epochs;
    c.baseline.lr = c.model.lr;
    c.baseline.weight_decay = c.model.weight_decay;
    if (j.contains("baseline"))
        detail::config_field("baseline", [&] {
            detail::reject_unknown(j.at("baseline"), {"hidden", "lr", "weight_decay", "epochs", "seed"}, "baseline");
            auto b = gcn_config_from_json(j.at("baseline"));
            c.baseline = b;
            if (!j.at("baseline").contains("hidden")) c.baseline.hidden = c.model.d_p;
            if (!j.at("baseline").contains("epochs")) c.baseline.epochs = c.model.epochs;
            if (!j.at("baseline").contains("lr")) c.baseline.lr = c.model.lr;
            if (!j.at("baseline").contains("weight_decay")) c.baseline.weight_decay = c.model.weight_decay;
            return 0;
        });
    if (j.contains("run"))
        detail::config_field("run", [&] {
            const auto& r = j.at("run");
            detail::reject_unknown(r, {"seeds", "out", "lexical_cache"}, "run");
            if (r.contains("seeds")) c.run.seeds = r.at("seeds").get<std::vector<std::uint64_t>>();
            c.run.out = r.value("out", c.run.out);
            c.run.lexical_cache = r.value("lexical_cache", std::string{});
            return 0;
        });
    if (c.run.seeds.empty()) throw ConfigError("run: seed list is empty");
    return c;
}

inline ExperimentConfig parse_config_toml(std::string_view text, fs::path base_dir = {}) {
    try {
        auto tbl = toml::parse(text);
        return config_from_json(toml_to_json(tbl), std::move(base_dir));
    } catch (const toml::parse_error& e) {
        std::ostringstream os;
        os << "config: TOML parse error at line " << e.source().begin.line << ": " << e.description();
        throw ConfigError(os.str());
    }
}

inline ExperimentConfig load_config(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ConfigError("config: cannot open " + p.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_toml(ss.str(), p.has_parent_path() ? p.parent_path() : fs::path("."));
}

// FNV-1a over the canonical (key-sorted) JSON of the parts that determine
// splits and models. Methods and output paths are left out.
inline std::string config_hash(const ExperimentConfig& c) {
    const auto full = to_json(c);
    ojson parts = {{"dataset", full["dataset"]},
                   {"split", full["split"]},
                   {"shifts", full["shifts"]},
                   {"model", full["model"]},
                   {"baseline", full["baseline"]}};
    const auto canon = nlohmann::json::parse(parts.dump());
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(canon.dump())));
    return buf;
}

// Raw shift entry -> ShiftSpec. An SBM `preset` fills beta / f_ii / f_ij
// unless they are given explicitly.
inline ShiftSpec parse_shift_entry(const ojson& raw) {
    ojson j = raw;
    if (j.contains("preset")) {
        const auto name = j.at("preset").get<std::string>();
        const auto p = sbm_preset(name);
        if (!p) throw std::invalid_argument("shift '" + j.value("name", "") + "': unknown preset '" + name + "'");
        if (!j.contains("beta")) j["beta"] = p->beta;
        if (!j.contains("f_ii")) j["f_ii"] = p->f_ii;
        if (!j.contains("f_ij")) j["f_ij"] = p->f_ij;
        j.erase("preset");
    }
    return shift_from_json(j);
}

}  // namespace trnood
