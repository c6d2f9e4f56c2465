#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

// Minimal NPY v1.0 reader/writer (little-endian, C order).
namespace trnood::npy {

static_assert(std::endian::native == std::endian::little, "NPY I/O assumes a little-endian host");

enum class Dtype { f4, f8, i4, i8, u4, u1, b1 };

inline const char* descr(Dtype t) {
    switch (t) {
        case Dtype::f4: return "<f4";
        case Dtype::f8: return "<f8";
        case Dtype::i4: return "<i4";
        case Dtype::i8: return "<i8";
        case Dtype::u4: return "<u4";
        case Dtype::u1: return "|u1";
        case Dtype::b1: return "|b1";
    }
    return "";
}

inline std::size_t item_size(Dtype t) {
    switch (t) {
        case Dtype::f8:
        case Dtype::i8: return 8;
        case Dtype::f4:
        case Dtype::i4:
        case Dtype::u4: return 4;
        default: return 1;
    }
}

struct Array {
    Dtype dtype = Dtype::f4;
    std::vector<std::size_t> shape;
    std::vector<char> bytes;

    std::size_t count() const {
        std::size_t c = 1;
        for (auto s : shape) c *= s;
        return c;
    }

    template <class T>
    std::vector<T> as() const {
        std::vector<T> out(count());
        auto load = [&]<class S>(S) {
            for (std::size_t i = 0; i < out.size(); ++i) {
                S v;
                std::memcpy(&v, bytes.data() + i * sizeof(S), sizeof(S));
                out[i] = static_cast<T>(v);
            }
        };
        switch (dtype) {
            case Dtype::f4: load(float{}); break;
            case Dtype::f8: load(double{}); break;
            case Dtype::i4: load(std::int32_t{}); break;
            case Dtype::i8: load(std::int64_t{}); break;
            case Dtype::u4: load(std::uint32_t{}); break;
            case Dtype::u1:
            case Dtype::b1: load(std::uint8_t{}); break;
        }
        return out;
    }
};

inline std::string header_for(Dtype t, const std::vector<std::size_t>& shape) {
    std::ostringstream h;
    h << "{'descr': '" << descr(t) << "', 'fortran_order': False, 'shape': (";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        h << shape[i];
        if (shape.size() == 1 || i + 1 < shape.size()) h << ",";
        if (i + 1 < shape.size()) h << " ";
    }
    h << "), }";
    std::string s = h.str();
    const std::size_t total = 10 + s.size() + 1;
    s.append((64 - total % 64) % 64, ' ');
    s.push_back('\n');
    return s;
}

template <class T>
std::string encode(Dtype t, const std::vector<std::size_t>& shape, const std::vector<T>& values) {
    if (sizeof(T) != item_size(t)) throw std::invalid_argument("npy::encode: element size mismatch");
    std::size_t expected = 1;
    for (auto s : shape) expected *= s;
    if (expected != values.size()) throw std::invalid_argument("npy::encode: shape/data mismatch");
    const std::string header = header_for(t, shape);
    std::string out = "\x93NUMPY";
    out.push_back(1);
    out.push_back(0);
    const auto hl = static_cast<std::uint16_t>(header.size());
    out.push_back(static_cast<char>(hl & 0xff));
    out.push_back(static_cast<char>(hl >> 8));
    out += header;
    out.append(reinterpret_cast<const char*>(values.data()), values.size() * sizeof(T));
    return out;
}

inline Array decode(const std::string& buf, const std::string& what = "npy") {
    if (buf.size() < 10 || buf.compare(0, 6, "\x93NUMPY") != 0)
        throw std::runtime_error(what + ": not an NPY file");
    const int major = static_cast<unsigned char>(buf[6]);
    std::size_t hlen, off;
    if (major == 1) {
        hlen = static_cast<unsigned char>(buf[8]) | (static_cast<unsigned char>(buf[9]) << 8);
        off = 10;
    } else {
        if (buf.size() < 12) throw std::runtime_error(what + ": truncated header");
        hlen = 0;
        for (int k = 0; k < 4; ++k) hlen |= std::size_t(static_cast<unsigned char>(buf[8 + k])) << (8 * k);
        off = 12;
    }
    if (buf.size() < off + hlen) throw std::runtime_error(what + ": truncated header");
    const std::string header = buf.substr(off, hlen);

    auto field = [&](const std::string& key) {
        auto p = header.find("'" + key + "'");
        if (p == std::string::npos) throw std::runtime_error(what + ": header lacks " + key);
        return header.substr(header.find(':', p) + 1);
    };
    Array a;
    {
        std::string d = field("descr");
        auto q1 = d.find('\''), q2 = d.find('\'', q1 + 1);
        d = d.substr(q1 + 1, q2 - q1 - 1);
        if (d == "<f4") a.dtype = Dtype::f4;
        else if (d == "<f8") a.dtype = Dtype::f8;
        else if (d == "<i4") a.dtype = Dtype::i4;
        else if (d == "<i8") a.dtype = Dtype::i8;
        else if (d == "<u4") a.dtype = Dtype::u4;
        else if (d == "|u1") a.dtype = Dtype::u1;
        else if (d == "|b1") a.dtype = Dtype::b1;
        else throw std::runtime_error(what + ": unsupported dtype " + d);
    }
    if (field("fortran_order").find("True") < field("fortran_order").find(','))
        throw std::runtime_error(what + ": fortran_order arrays are not supported");
    {
        std::string s = field("shape");
        s = s.substr(s.find('(') + 1, s.find(')') - s.find('(') - 1);
        std::istringstream in(s);
        std::string tok;
        while (std::getline(in, tok, ',')) {
            if (tok.find_first_not_of(" ") == std::string::npos) continue;
            a.shape.push_back(std::stoull(tok));
        }
    }
    const std::size_t nbytes = a.count() * item_size(a.dtype);
    if (buf.size() < off + hlen + nbytes) throw std::runtime_error(what + ": truncated data");
    a.bytes.assign(buf.begin() + static_cast<std::ptrdiff_t>(off + hlen),
                   buf.begin() + static_cast<std::ptrdiff_t>(off + hlen + nbytes));
    return a;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline Array load(const std::filesystem::path& p) { return decode(read_file(p), p.string()); }

}  // namespace trnood::npy
