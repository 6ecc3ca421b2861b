#pragma once

// MetaImage (.mhd + raw, or .mha with LOCAL data) reader and writer.

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "vfs/error.hpp"
#include "vfs/volume.hpp"

namespace vfs {

/// Shortest decimal text that reads back to the same double.
inline std::string format_number(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, r.ptr);
}

enum class ElementType { UInt8, Int16, UInt16, Float32, Float64 };

inline std::size_t element_size(ElementType t) {
    switch (t) {
        case ElementType::UInt8: return 1;
        case ElementType::Int16:
        case ElementType::UInt16: return 2;
        case ElementType::Float32: return 4;
        case ElementType::Float64: return 8;
    }
    return 0;
}

inline std::string metaimage_type_name(ElementType t) {
    switch (t) {
        case ElementType::UInt8: return "MET_UCHAR";
        case ElementType::Int16: return "MET_SHORT";
        case ElementType::UInt16: return "MET_USHORT";
        case ElementType::Float32: return "MET_FLOAT";
        case ElementType::Float64: return "MET_DOUBLE";
    }
    return "?";
}

inline ElementType parse_metaimage_type(const std::string& s) {
    if (s == "MET_UCHAR") return ElementType::UInt8;
    if (s == "MET_SHORT") return ElementType::Int16;
    if (s == "MET_USHORT") return ElementType::UInt16;
    if (s == "MET_FLOAT") return ElementType::Float32;
    if (s == "MET_DOUBLE") return ElementType::Float64;
    throw IoError("metaimage: unsupported element type '" + s + "'");
}

inline bool is_integer_type(ElementType t) {
    return t == ElementType::UInt8 || t == ElementType::Int16 || t == ElementType::UInt16;
}

struct VolumeHeader {
    GridGeometry geometry;
    ElementType element_type = ElementType::Float32;
    int channels = 1;
    bool msb = false;           // big-endian payload
    std::string data_file;      // "LOCAL" for embedded payloads
};

/// Header plus payload converted to doubles, channels interleaved per voxel.
struct MetaImageData {
    VolumeHeader header;
    std::vector<double> values;
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& value) {
    std::istringstream in(value);
    std::vector<T> out;
    T x;
    while (in >> x) out.push_back(x);
    if (!in.eof()) throw IoError("metaimage: invalid value for " + key + ": '" + value + "'");
    return out;
}

template <typename T>
T swap_bytes(T v) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    std::reverse(b, b + sizeof(T));
    std::memcpy(&v, b, sizeof(T));
    return v;
}

template <typename T>
void decode(const char* src, std::size_t n, bool swap, std::vector<double>& out) {
    for (std::size_t i = 0; i < n; ++i) {
        T v;
        std::memcpy(&v, src + i * sizeof(T), sizeof(T));
        if (swap) v = swap_bytes(v);
        out[i] = static_cast<double>(v);
    }
}

template <typename T>
void encode(const std::vector<double>& values, std::string& dst) {
    dst.resize(values.size() * sizeof(T));
    for (std::size_t i = 0; i < values.size(); ++i) {
        double v = values[i];
        if constexpr (std::is_integral_v<T>) {
            v = std::clamp(std::round(v), double(std::numeric_limits<T>::lowest()), double(std::numeric_limits<T>::max()));
        }
        const T t = static_cast<T>(v);
        std::memcpy(dst.data() + i * sizeof(T), &t, sizeof(T));
    }
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot open '" + p.string() + "'");
    return std::string(std::istreambuf_iterator<char>(in), {});
}

inline void write_file(const std::filesystem::path& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + p.string() + "'");
    out.write(bytes.data(), std::streamsize(bytes.size()));
    if (!out) throw IoError("write failed for '" + p.string() + "'");
}

}  // namespace detail

inline MetaImageData read_metaimage_data(const std::filesystem::path& path) {
    const std::string text = detail::read_file(path);
    std::map<std::string, std::string> keys;
    std::size_t pos = 0;
    std::size_t payload_offset = std::string::npos;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        const std::string line = text.substr(pos, eol - pos);
        pos = eol + 1;
        const std::string t = detail::trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw IoError("metaimage: malformed header line '" + t + "'");
        const std::string key = detail::trim(t.substr(0, eq));
        keys[key] = detail::trim(t.substr(eq + 1));
        if (key == "ElementDataFile") {
            payload_offset = std::min(pos, text.size());
            break;
        }
    }
    auto require = [&](const char* k) -> const std::string& {
        auto it = keys.find(k);
        if (it == keys.end()) throw IoError(std::string("metaimage: missing key ") + k + " in '" + path.string() + "'");
        return it->second;
    };

    const auto ndims = detail::parse_list<int>("NDims", require("NDims"));
    if (ndims.size() != 1 || (ndims[0] != 2 && ndims[0] != 3)) throw IoError("metaimage: NDims must be 2 or 3");
    const int n = ndims[0];
    const auto dims = detail::parse_list<std::size_t>("DimSize", require("DimSize"));
    std::vector<double> spacing(n, 1.0), origin(n, 0.0);
    for (const char* k : {"ElementSpacing", "ElementSize"}) {
        if (keys.count(k)) {
            spacing = detail::parse_list<double>(k, keys[k]);
            break;
        }
    }
    for (const char* k : {"Offset", "Origin", "Position"}) {
        if (keys.count(k)) {
            origin = detail::parse_list<double>(k, keys[k]);
            break;
        }
    }
    if (dims.size() != std::size_t(n) || spacing.size() != std::size_t(n) || origin.size() != std::size_t(n)) {
        throw IoError("metaimage: DimSize/ElementSpacing/Offset must have NDims entries");
    }

    MetaImageData out;
    out.header.geometry = GridGeometry(dims, spacing, origin);
    out.header.element_type = parse_metaimage_type(require("ElementType"));
    if (keys.count("ElementNumberOfChannels")) {
        const auto ch = detail::parse_list<int>("ElementNumberOfChannels", keys["ElementNumberOfChannels"]);
        if (ch.size() != 1 || ch[0] < 1) throw IoError("metaimage: invalid ElementNumberOfChannels");
        out.header.channels = ch[0];
    }
    for (const char* k : {"BinaryDataByteOrderMSB", "ElementByteOrderMSB"}) {
        if (keys.count(k)) out.header.msb = keys[k] == "True" || keys[k] == "true" || keys[k] == "1";
    }
    if (keys.count("CompressedData") && (keys["CompressedData"] == "True" || keys["CompressedData"] == "true")) {
        throw IoError("metaimage: compressed payloads are not supported");
    }
    out.header.data_file = require("ElementDataFile");

    const std::size_t count = out.header.geometry.voxel_count() * std::size_t(out.header.channels);
    const std::size_t bytes = count * element_size(out.header.element_type);
    std::string payload;
    if (out.header.data_file == "LOCAL") {
        payload = text.substr(payload_offset);
    } else {
        std::filesystem::path data = out.header.data_file;
        if (data.is_relative()) data = path.parent_path() / data;
        payload = detail::read_file(data);
    }
    if (payload.size() != bytes) {
        throw IoError("metaimage: payload of '" + path.string() + "' has " + std::to_string(payload.size()) +
                      " bytes, header implies " + std::to_string(bytes));
    }
    const bool swap = out.header.msb != (std::endian::native == std::endian::big);
    out.values.resize(count);
    switch (out.header.element_type) {
        case ElementType::UInt8: detail::decode<std::uint8_t>(payload.data(), count, swap, out.values); break;
        case ElementType::Int16: detail::decode<std::int16_t>(payload.data(), count, swap, out.values); break;
        case ElementType::UInt16: detail::decode<std::uint16_t>(payload.data(), count, swap, out.values); break;
        case ElementType::Float32: detail::decode<float>(payload.data(), count, swap, out.values); break;
        case ElementType::Float64: detail::decode<double>(payload.data(), count, swap, out.values); break;
    }
    for (double v : out.values) {
        if (!std::isfinite(v)) throw IoError("metaimage: non-finite value in '" + path.string() + "'");
    }
    return out;
}

inline void write_metaimage_data(const std::filesystem::path& path, const MetaImageData& img) {
    const VolumeHeader& h = img.header;
    const GridGeometry& g = h.geometry;
    const bool local = path.extension() == ".mha";
    const std::string data_name = local ? "LOCAL" : path.stem().string() + ".raw";
    auto join = [&](auto get) {
        std::string s;
        for (int a = 0; a < g.ndim(); ++a) s += (a ? " " : "") + get(a);
        return s;
    };
    std::string header;
    header += "ObjectType = Image\n";
    header += "NDims = " + std::to_string(g.ndim()) + "\n";
    header += "BinaryData = True\n";
    header += "BinaryDataByteOrderMSB = False\n";
    header += "CompressedData = False\n";
    header += "Offset = " + join([&](int a) { return format_number(g.origin()[a]); }) + "\n";
    header += "ElementSpacing = " + join([&](int a) { return format_number(g.spacing()[a]); }) + "\n";
    header += "DimSize = " + join([&](int a) { return std::to_string(g.dim(a)); }) + "\n";
    if (h.channels > 1) header += "ElementNumberOfChannels = " + std::to_string(h.channels) + "\n";
    header += "ElementType = " + metaimage_type_name(h.element_type) + "\n";
    header += "ElementDataFile = " + data_name + "\n";

    std::string payload;
    switch (h.element_type) {
        case ElementType::UInt8: detail::encode<std::uint8_t>(img.values, payload); break;
        case ElementType::Int16: detail::encode<std::int16_t>(img.values, payload); break;
        case ElementType::UInt16: detail::encode<std::uint16_t>(img.values, payload); break;
        case ElementType::Float32: detail::encode<float>(img.values, payload); break;
        case ElementType::Float64: detail::encode<double>(img.values, payload); break;
    }
    if constexpr (std::endian::native == std::endian::big) {
        const std::size_t es = element_size(h.element_type);
        for (std::size_t i = 0; i + es <= payload.size(); i += es) std::reverse(payload.begin() + i, payload.begin() + i + es);
    }
    if (local) {
        detail::write_file(path, header + payload);
    } else {
        detail::write_file(path, header);
        detail::write_file(path.parent_path() / data_name, payload);
    }
}

inline void write_metaimage(const std::filesystem::path& path, const ScalarVolume& v,
                            ElementType type = ElementType::Float32) {
    write_metaimage_data(path, {{v.geometry(), type, 1, false, ""}, v.values()});
}

inline void write_metaimage(const std::filesystem::path& path, const VectorField& f,
                            ElementType type = ElementType::Float32) {
    MetaImageData d{{f.geometry(), type, f.ncomponents(), false, ""}, {}};
    d.values.resize(f.size() * std::size_t(f.ncomponents()));
    for (std::size_t i = 0; i < f.size(); ++i)
        for (int c = 0; c < f.ncomponents(); ++c) d.values[i * f.ncomponents() + c] = f.component(c)[i];
    write_metaimage_data(path, d);
}

inline void write_metaimage(const std::filesystem::path& path, const LabelVolume& l,
                            ElementType type = ElementType::UInt16) {
    if (!is_integer_type(type)) throw IoError("metaimage: label volumes need an integer element type");
    const double limit = type == ElementType::UInt8 ? 255.0 : (type == ElementType::Int16 ? 32767.0 : 65535.0);
    MetaImageData d{{l.geometry(), type, 1, false, ""}, std::vector<double>(l.size())};
    for (std::size_t i = 0; i < l.size(); ++i) {
        if (double(l[i]) > limit) throw IoError("metaimage: label " + std::to_string(l[i]) + " does not fit element type");
        d.values[i] = double(l[i]);
    }
    write_metaimage_data(path, d);
}

using AnyVolume = std::variant<ScalarVolume, VectorField, LabelVolume>;

/// Multi-channel files load as vector fields; single-channel integer files
/// load as label volumes when `as_labels` is set.
inline AnyVolume read_metaimage(const std::filesystem::path& path, bool as_labels = false) {
    MetaImageData d = read_metaimage_data(path);
    const GridGeometry& g = d.header.geometry;
    if (d.header.channels > 1) {
        if (d.header.channels != g.ndim()) {
            throw IoError("metaimage: " + std::to_string(d.header.channels) + "-channel image cannot be a " +
                          std::to_string(g.ndim()) + "-D vector field");
        }
        VectorField f(g);
        const int nc = d.header.channels;
        for (std::size_t i = 0; i < g.voxel_count(); ++i)
            for (int c = 0; c < nc; ++c) f.component(c)[i] = d.values[i * nc + c];
        return f;
    }
    if (as_labels) {
        if (!is_integer_type(d.header.element_type)) throw IoError("metaimage: label volumes need an integer element type");
        LabelVolume l(g);
        for (std::size_t i = 0; i < l.size(); ++i) {
            if (d.values[i] < 0.0) throw IoError("metaimage: negative label in '" + path.string() + "'");
            l[i] = static_cast<LabelVolume::Label>(d.values[i]);
        }
        return l;
    }
    return ScalarVolume(g, std::move(d.values));
}

inline ScalarVolume read_scalar_volume(const std::filesystem::path& path) {
    AnyVolume v = read_metaimage(path);
    if (!std::holds_alternative<ScalarVolume>(v)) throw IoError("'" + path.string() + "' is not a scalar volume");
    return std::get<ScalarVolume>(std::move(v));
}

inline VectorField read_vector_field(const std::filesystem::path& path) {
    AnyVolume v = read_metaimage(path);
    if (!std::holds_alternative<VectorField>(v)) throw IoError("'" + path.string() + "' is not a vector field");
    return std::get<VectorField>(std::move(v));
}

inline LabelVolume read_label_volume(const std::filesystem::path& path) {
    return std::get<LabelVolume>(read_metaimage(path, true));
}

}  // namespace vfs
