#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "relu/errors.hpp"
#include "relu/matrix.hpp"

namespace relu {

// NPY binary format, version 1.0 only: little-endian 32/64-bit floats for
// matrices and 32/64-bit signed integers for label vectors, C order. Version
// 2/3 headers are rejected with an explicit message. Errors carry the byte or
// row location that triggered them.

namespace npy {

constexpr char kMagic[7] = "\x93NUMPY";

struct Header {
    std::string descr;
    bool fortran_order = false;
    std::vector<std::size_t> shape;
    std::size_t data_offset = 0;
};

namespace detail {

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open file: " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return bytes;
}

inline Header parse_header(const std::string& bytes, const std::string& path) {
    if (bytes.size() < 10 || std::memcmp(bytes.data(), kMagic, 6) != 0)
        throw InputError(path + ": not an NPY file (magic mismatch at byte 0)");
    const unsigned major = static_cast<unsigned char>(bytes[6]);
    const unsigned minor = static_cast<unsigned char>(bytes[7]);
    if (major != 1 || minor != 0)
        throw InputError(path + ": NPY version " + std::to_string(major) + "." +
                         std::to_string(minor) + " not supported (only 1.0)");
    const std::size_t header_len = static_cast<unsigned char>(bytes[8]) |
                                   (static_cast<std::size_t>(static_cast<unsigned char>(bytes[9])) << 8);
    if (bytes.size() < 10 + header_len)
        throw InputError(path + ": truncated header, need " + std::to_string(10 + header_len) +
                         " bytes, file has " + std::to_string(bytes.size()));
    const std::string dict = bytes.substr(10, header_len);

    Header h;
    h.data_offset = 10 + header_len;

    const auto find_value = [&](const std::string& key) {
        const auto pos = dict.find("'" + key + "'");
        if (pos == std::string::npos)
            throw InputError(path + ": NPY header missing key '" + key + "'");
        auto colon = dict.find(':', pos);
        if (colon == std::string::npos) throw InputError(path + ": malformed NPY header");
        ++colon;
        while (colon < dict.size() && dict[colon] == ' ') ++colon;
        return colon;
    };

    auto at = find_value("descr");
    if (dict[at] != '\'') throw InputError(path + ": malformed 'descr' in NPY header");
    const auto end = dict.find('\'', at + 1);
    h.descr = dict.substr(at + 1, end - at - 1);

    at = find_value("fortran_order");
    if (dict.compare(at, 4, "True") == 0)
        h.fortran_order = true;
    else if (dict.compare(at, 5, "False") == 0)
        h.fortran_order = false;
    else
        throw InputError(path + ": malformed 'fortran_order' in NPY header");

    at = find_value("shape");
    if (dict[at] != '(') throw InputError(path + ": malformed 'shape' in NPY header");
    ++at;
    while (at < dict.size() && dict[at] != ')') {
        while (at < dict.size() && (dict[at] == ' ' || dict[at] == ',')) ++at;
        if (at < dict.size() && dict[at] == ')') break;
        std::size_t dim = 0;
        bool any = false;
        while (at < dict.size() && dict[at] >= '0' && dict[at] <= '9') {
            dim = dim * 10 + static_cast<std::size_t>(dict[at] - '0');
            ++at;
            any = true;
        }
        if (!any) throw InputError(path + ": malformed 'shape' in NPY header");
        h.shape.push_back(dim);
    }
    return h;
}

inline void check_payload(const std::string& bytes, const Header& h, std::size_t itemsize,
                          std::size_t count, const std::string& path) {
    const std::size_t need = h.data_offset + itemsize * count;
    if (bytes.size() < need)
        throw InputError(path + ": truncated data, need " + std::to_string(need) +
                         " bytes, file has " + std::to_string(bytes.size()) + " (data starts at byte " +
                         std::to_string(h.data_offset) + ")");
}

template <typename T>
inline T load_scalar(const char* p) {
    T v;
    std::memcpy(&v, p, sizeof(T));
    return v;
}

inline std::string build_header(const std::string& descr, const std::vector<std::size_t>& shape) {
    std::string dict = "{'descr': '" + descr + "', 'fortran_order': False, 'shape': (";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        dict += std::to_string(shape[i]);
        if (shape.size() == 1 || i + 1 < shape.size()) dict += ",";
        if (i + 1 < shape.size()) dict += " ";
    }
    dict += "), }";
    // Pad with spaces so the full header (10-byte preamble + dict + newline)
    // is a multiple of 64 bytes.
    const std::size_t unpadded = 10 + dict.size() + 1;
    const std::size_t padded = (unpadded + 63) / 64 * 64;
    dict.append(padded - unpadded, ' ');
    dict += '\n';

    std::string out(kMagic, 6);
    out += '\x01';
    out += '\x00';
    const std::size_t len = dict.size();
    out += static_cast<char>(len & 0xff);
    out += static_cast<char>((len >> 8) & 0xff);
    out += dict;
    return out;
}

} // namespace detail

// 2-d float matrix, widened to 64-bit.
inline Matrix load_matrix(const std::string& path) {
    const std::string bytes = detail::read_file(path);
    const Header h = detail::parse_header(bytes, path);
    if (h.fortran_order) throw InputError(path + ": Fortran-order NPY not supported");
    if (h.shape.size() != 2)
        throw InputError(path + ": expected a 2-d array, got " + std::to_string(h.shape.size()) +
                         " dimensions");
    const std::size_t count = h.shape[0] * h.shape[1];
    if (h.shape[0] == 0) throw InputError(path + ": empty dataset (zero rows)");

    Matrix m(h.shape[0], h.shape[1]);
    if (h.descr == "<f8") {
        detail::check_payload(bytes, h, 8, count, path);
        const char* p = bytes.data() + h.data_offset;
        for (std::size_t i = 0; i < count; ++i) m.data[i] = detail::load_scalar<double>(p + 8 * i);
    } else if (h.descr == "<f4") {
        detail::check_payload(bytes, h, 4, count, path);
        const char* p = bytes.data() + h.data_offset;
        for (std::size_t i = 0; i < count; ++i)
            m.data[i] = static_cast<double>(detail::load_scalar<float>(p + 4 * i));
    } else {
        throw InputError(path + ": dtype '" + h.descr +
                         "' not supported for matrices (expected <f4 or <f8)");
    }
    return m;
}

// 1-d integer vector.
inline std::vector<long long> load_int_vector(const std::string& path) {
    const std::string bytes = detail::read_file(path);
    const Header h = detail::parse_header(bytes, path);
    if (h.fortran_order) throw InputError(path + ": Fortran-order NPY not supported");
    if (h.shape.size() != 1)
        throw InputError(path + ": expected a 1-d array, got " + std::to_string(h.shape.size()) +
                         " dimensions");
    if (h.shape[0] == 0) throw InputError(path + ": empty dataset (zero rows)");

    std::vector<long long> out(h.shape[0]);
    if (h.descr == "<i8") {
        detail::check_payload(bytes, h, 8, out.size(), path);
        const char* p = bytes.data() + h.data_offset;
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] = static_cast<long long>(detail::load_scalar<std::int64_t>(p + 8 * i));
    } else if (h.descr == "<i4") {
        detail::check_payload(bytes, h, 4, out.size(), path);
        const char* p = bytes.data() + h.data_offset;
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] = detail::load_scalar<std::int32_t>(p + 4 * i);
    } else {
        throw InputError(path + ": dtype '" + h.descr +
                         "' not supported for labels (expected <i4 or <i8)");
    }
    return out;
}

inline bool looks_like_npy(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open file: " + path);
    char magic[6] = {};
    in.read(magic, 6);
    return in.gcount() == 6 && std::memcmp(magic, kMagic, 6) == 0;
}

inline void save_matrix(const std::string& path, const Matrix& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write file: " + path);
    out << detail::build_header("<f8", {m.rows, m.cols});
    out.write(reinterpret_cast<const char*>(m.data.data()),
              static_cast<std::streamsize>(m.data.size() * sizeof(double)));
    if (!out) throw InputError("write failed: " + path);
}

inline void save_int_vector(const std::string& path, const std::vector<long long>& v) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write file: " + path);
    out << detail::build_header("<i8", {v.size()});
    static_assert(sizeof(long long) == 8);
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(long long)));
    if (!out) throw InputError("write failed: " + path);
}

} // namespace npy

} // namespace relu
