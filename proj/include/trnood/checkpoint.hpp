#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "trnood/graph_io.hpp"
#include "trnood/optim.hpp"
#include "trnood/tnt_model.hpp"

namespace trnood {

inline nlohmann::ordered_json to_json(const TntConfig& c) {
    return {{"d_p", c.d_p},
            {"rank", c.rank},
            {"hyper_hidden", c.hyper_hidden},
            {"layers", c.layers},
            {"tau", c.tau},
            {"lambda", c.lambda},
            {"lr", c.lr},
            {"weight_decay", c.weight_decay},
            {"epochs", c.epochs},
            {"use_low_rank", c.use_low_rank},
            {"contrastive_batch", c.contrastive_batch},
            {"full_budget", c.full_budget},
            {"seed", c.seed}};
}

// Missing keys keep their defaults; unknown keys are rejected.
template <class Json>
TntConfig tnt_config_from_json(const Json& j) {
    TntConfig c;
    for (auto it = j.begin(); it != j.end(); ++it) {
        const auto& k = it.key();
        const auto& v = it.value();
        if (k == "d_p") c.d_p = v.template get<std::size_t>();
        else if (k == "rank") c.rank = v.template get<std::size_t>();
        else if (k == "hyper_hidden") c.hyper_hidden = v.template get<std::size_t>();
        else if (k == "layers") c.layers = v.template get<std::size_t>();
        else if (k == "tau") c.tau = v.template get<double>();
        else if (k == "lambda") c.lambda = v.template get<double>();
        else if (k == "lr") c.lr = v.template get<double>();
        else if (k == "weight_decay") c.weight_decay = v.template get<double>();
        else if (k == "epochs") c.epochs = v.template get<int>();
        else if (k == "use_low_rank") c.use_low_rank = v.template get<bool>();
        else if (k == "contrastive_batch") c.contrastive_batch = v.template get<std::size_t>();
        else if (k == "full_budget") c.full_budget = v.template get<std::size_t>();
        else if (k == "seed") c.seed = v.template get<std::uint64_t>();
        else throw std::invalid_argument("model config: unknown key '" + k + "'");
    }
    return c;
}

inline nlohmann::ordered_json to_json(const GcnConfig& c) {
    return {{"hidden", c.hidden}, {"lr", c.lr}, {"weight_decay", c.weight_decay}, {"epochs", c.epochs}, {"seed", c.seed}};
}

template <class Json>
GcnConfig gcn_config_from_json(const Json& j) {
    GcnConfig c;
    c.hidden = j.value("hidden", c.hidden);
    c.lr = j.value("lr", c.lr);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.epochs = j.value("epochs", c.epochs);
    c.seed = j.value("seed", c.seed);
    return c;
}

// "TNT1" | u32 header length | header JSON | u32 tensor count |
// per tensor: u32 name length, name, u32 rank, u64 dims[rank], f32 data.
// Little-endian throughout; tensors are written in name order.
struct Checkpoint {
    nlohmann::ordered_json header;
    ParamStore<float> tensors;
};

namespace detail {

template <class T>
void put(std::string& out, T v) {
    static_assert(std::endian::native == std::endian::little, "checkpoint writer assumes a little-endian host");
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

class Reader {
public:
    explicit Reader(const std::string& b) : buf_(b) {}
    template <class T>
    T get() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, buf_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    std::string bytes(std::size_t n) {
        need(n);
        std::string s = buf_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    bool done() const { return pos_ == buf_.size(); }

private:
    void need(std::size_t n) const {
        if (buf_.size() - pos_ < n) throw std::runtime_error("checkpoint: truncated file");
    }
    const std::string& buf_;
    std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string encode_checkpoint(const Checkpoint& c) {
    std::string out = "TNT1";
    const std::string h = c.header.dump();
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(h.size()));
    out += h;
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(c.tensors.size()));
    for (const auto& [name, m] : c.tensors) {
        detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out += name;
        detail::put<std::uint32_t>(out, 2);
        detail::put<std::uint64_t>(out, m.rows);
        detail::put<std::uint64_t>(out, m.cols);
        for (float v : m.data) detail::put<float>(out, v);
    }
    return out;
}

inline Checkpoint decode_checkpoint(const std::string& buf) {
    detail::Reader r(buf);
    if (r.bytes(4) != "TNT1") throw std::runtime_error("checkpoint: bad magic (expected TNT1)");
    Checkpoint c;
    c.header = nlohmann::ordered_json::parse(r.bytes(r.get<std::uint32_t>()));
    const auto count = r.get<std::uint32_t>();
    for (std::uint32_t t = 0; t < count; ++t) {
        std::string name = r.bytes(r.get<std::uint32_t>());
        const auto rank = r.get<std::uint32_t>();
        if (rank == 0 || rank > 2) throw std::runtime_error("checkpoint: tensor '" + name + "' has unsupported rank");
        std::uint64_t dims[2] = {1, 1};
        for (std::uint32_t k = 0; k < rank; ++k) dims[2 - rank + k] = r.get<std::uint64_t>();
        Matrix<float> m(dims[0], dims[1]);
        for (auto& v : m.data) v = r.get<float>();
        c.tensors[name] = std::move(m);
    }
    if (!r.done()) throw std::runtime_error("checkpoint: trailing bytes");
    return c;
}

inline void save_checkpoint(const std::filesystem::path& p, const Checkpoint& c) {
    write_file_atomic(p, encode_checkpoint(c));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& p) { return decode_checkpoint(npy::read_file(p)); }

inline Checkpoint make_checkpoint(const TntModel<float>& m, const std::string& config_hash) {
    return {{{"model", "tnt"},
             {"config_hash", config_hash},
             {"d", m.input_dim()},
             {"num_classes", m.num_classes()},
             {"config", to_json(m.config())}},
            m.params()};
}

inline Checkpoint make_checkpoint(const GcnModel<float>& m, const std::string& config_hash) {
    return {{{"model", "gcn"},
             {"config_hash", config_hash},
             {"d", m.input_dim()},
             {"num_classes", m.num_classes()},
             {"config", to_json(m.config())}},
            m.params()};
}

inline TntModel<float> tnt_from_checkpoint(const Checkpoint& c) {
    if (c.header.at("model") != "tnt") throw std::runtime_error("checkpoint: not a TNT-OOD model");
    return TntModel<float>(tnt_config_from_json(c.header.at("config")), c.header.at("d").get<std::size_t>(),
                           c.header.at("num_classes").get<std::int64_t>(), c.tensors);
}

inline GcnModel<float> gcn_from_checkpoint(const Checkpoint& c) {
    if (c.header.at("model") != "gcn") throw std::runtime_error("checkpoint: not a GCN classifier");
    return GcnModel<float>(gcn_config_from_json(c.header.at("config")), c.header.at("d").get<std::size_t>(),
                           c.header.at("num_classes").get<std::int64_t>(), c.tensors);
}

}  // namespace trnood
