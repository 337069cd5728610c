#include "patch3d/ply.hpp"

#include "patch3d/error.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace patch3d {

namespace {

enum class Type { Int8, UInt8, Int16, UInt16, Int32, UInt32, Float32, Float64 };

std::optional<Type> parse_type(const std::string& name)
{
    if (name == "char" || name == "int8") return Type::Int8;
    if (name == "uchar" || name == "uint8") return Type::UInt8;
    if (name == "short" || name == "int16") return Type::Int16;
    if (name == "ushort" || name == "uint16") return Type::UInt16;
    if (name == "int" || name == "int32") return Type::Int32;
    if (name == "uint" || name == "uint32") return Type::UInt32;
    if (name == "float" || name == "float32") return Type::Float32;
    if (name == "double" || name == "float64") return Type::Float64;
    return std::nullopt;
}

std::size_t type_size(Type t)
{
    switch (t) {
    case Type::Int8:
    case Type::UInt8: return 1;
    case Type::Int16:
    case Type::UInt16: return 2;
    case Type::Int32:
    case Type::UInt32:
    case Type::Float32: return 4;
    case Type::Float64: return 8;
    }
    return 0;
}

struct Property {
    std::string name;
    Type type = Type::Float32;
    bool is_list = false;
    Type count_type = Type::UInt8;
};

struct Element {
    std::string name;
    std::uint64_t count = 0;
    std::vector<Property> properties;
};

struct Header {
    PlyFormat format = PlyFormat::Ascii;
    std::vector<Element> elements;
};

// Byte-counting reader so errors can report their offset.
class Source {
public:
    explicit Source(std::istream& in) : in_(in) {}

    std::uint64_t offset() const { return offset_; }

    bool getline(std::string& line)
    {
        if (!std::getline(in_, line)) {
            return false;
        }
        offset_ += line.size() + 1;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        return true;
    }

    void read(void* dst, std::size_t n, const char* what)
    {
        if (!in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n))) {
            throw ParseError(std::string("truncated payload while reading ") + what, offset_ + in_.gcount());
        }
        offset_ += n;
    }

private:
    std::istream& in_;
    std::uint64_t offset_ = 0;
};

Header parse_header(Source& src)
{
    std::string line;
    if (!src.getline(line) || line != "ply") {
        throw ParseError("missing 'ply' magic", 0);
    }
    Header header;
    bool have_format = false;
    while (true) {
        const auto line_start = src.offset();
        if (!src.getline(line)) {
            throw ParseError("header ended before end_header", line_start);
        }
        std::istringstream ss(line);
        std::string word;
        ss >> word;
        if (word.empty() || word == "comment" || word == "obj_info") {
            continue;
        }
        if (word == "end_header") {
            break;
        }
        if (word == "format") {
            std::string kind;
            std::string version;
            ss >> kind >> version;
            if (version != "1.0") {
                throw ParseError("unsupported PLY version '" + version + "'", line_start);
            }
            if (kind == "ascii") {
                header.format = PlyFormat::Ascii;
            } else if (kind == "binary_little_endian") {
                header.format = PlyFormat::BinaryLittleEndian;
            } else if (kind == "binary_big_endian") {
                throw ParseError("big-endian PLY is not supported", line_start);
            } else {
                throw ParseError("unknown PLY format '" + kind + "'", line_start);
            }
            have_format = true;
        } else if (word == "element") {
            Element e;
            if (!(ss >> e.name >> e.count)) {
                throw ParseError("malformed element line", line_start);
            }
            header.elements.push_back(e);
        } else if (word == "property") {
            if (header.elements.empty()) {
                throw ParseError("property before any element", line_start);
            }
            Property p;
            std::string type;
            ss >> type;
            if (type == "list") {
                std::string count_type;
                std::string item_type;
                ss >> count_type >> item_type >> p.name;
                auto ct = parse_type(count_type);
                auto it = parse_type(item_type);
                if (!ct || !it || p.name.empty()) {
                    throw ParseError("malformed list property", line_start);
                }
                p.is_list = true;
                p.count_type = *ct;
                p.type = *it;
            } else {
                auto t = parse_type(type);
                ss >> p.name;
                if (!t || p.name.empty()) {
                    throw ParseError("unknown property type '" + type + "'", line_start);
                }
                p.type = *t;
            }
            header.elements.back().properties.push_back(p);
        } else {
            throw ParseError("unexpected header keyword '" + word + "'", line_start);
        }
    }
    if (!have_format) {
        throw ParseError("missing format line", src.offset());
    }
    return header;
}

double decode(const unsigned char* bytes, Type t)
{
    auto load = [&](auto tag) {
        using T = decltype(tag);
        std::array<unsigned char, sizeof(T)> buf{};
        std::memcpy(buf.data(), bytes, sizeof(T));
        if constexpr (std::endian::native == std::endian::big) {
            std::reverse(buf.begin(), buf.end());
        }
        return static_cast<double>(std::bit_cast<T>(buf));
    };
    switch (t) {
    case Type::Int8: return load(std::int8_t{});
    case Type::UInt8: return load(std::uint8_t{});
    case Type::Int16: return load(std::int16_t{});
    case Type::UInt16: return load(std::uint16_t{});
    case Type::Int32: return load(std::int32_t{});
    case Type::UInt32: return load(std::uint32_t{});
    case Type::Float32: return load(float{});
    case Type::Float64: return load(double{});
    }
    return 0.0;
}

double read_binary_scalar(Source& src, Type t)
{
    unsigned char buf[8];
    src.read(buf, type_size(t), "property value");
    return decode(buf, t);
}

void skip_binary_element(Source& src, const Element& e)
{
    std::vector<unsigned char> scratch;
    for (std::uint64_t i = 0; i < e.count; ++i) {
        for (const auto& p : e.properties) {
            if (p.is_list) {
                const double count = read_binary_scalar(src, p.count_type);
                if (!(count >= 0.0)) {
                    throw ParseError("negative list length", src.offset());
                }
                scratch.resize(static_cast<std::size_t>(count) * type_size(p.type));
                src.read(scratch.data(), scratch.size(), "list payload");
            } else {
                scratch.resize(type_size(p.type));
                src.read(scratch.data(), scratch.size(), "property value");
            }
        }
    }
}

struct VertexSlots {
    std::array<int, 3> xyz = {-1, -1, -1};
    std::array<int, 3> normal = {-1, -1, -1};
};

VertexSlots locate_slots(const Element& vertex, std::uint64_t offset)
{
    VertexSlots slots;
    const char* names[] = {"x", "y", "z", "nx", "ny", "nz"};
    for (std::size_t p = 0; p < vertex.properties.size(); ++p) {
        const auto& prop = vertex.properties[p];
        for (int s = 0; s < 6; ++s) {
            if (prop.name != names[s]) {
                continue;
            }
            if (prop.is_list || (prop.type != Type::Float32 && prop.type != Type::Float64)) {
                throw ParseError("vertex property '" + prop.name + "' must be float32 or float64", offset);
            }
            auto& slot = s < 3 ? slots.xyz[s] : slots.normal[s - 3];
            slot = static_cast<int>(p);
        }
    }
    for (int s : slots.xyz) {
        if (s < 0) {
            throw ParseError("vertex element lacks x, y or z", offset);
        }
    }
    const int normals_found = (slots.normal[0] >= 0) + (slots.normal[1] >= 0) + (slots.normal[2] >= 0);
    if (normals_found != 0 && normals_found != 3) {
        throw ParseError("vertex normals need all of nx, ny, nz", offset);
    }
    return slots;
}

} // namespace

PointCloud read_ply(std::istream& in, const std::string& name)
{
    Source src(in);
    const Header header = parse_header(src);

    PointCloud cloud;
    cloud.id = name;
    const Element* vertex = nullptr;
    for (const auto& e : header.elements) {
        if (e.name == "vertex") {
            vertex = &e;
            break;
        }
    }
    if (vertex == nullptr) {
        throw ParseError("no vertex element", src.offset());
    }
    const auto slots = locate_slots(*vertex, src.offset());
    const bool has_normals = slots.normal[0] >= 0;
    cloud.points.resize(vertex->count);
    std::vector<Vec3> normals(has_normals ? vertex->count : 0);
    std::vector<double> values(vertex->properties.size());

    if (header.format == PlyFormat::BinaryLittleEndian) {
        for (const auto& e : header.elements) {
            if (&e != vertex) {
                skip_binary_element(src, e);
                continue;
            }
            for (std::uint64_t i = 0; i < e.count; ++i) {
                for (std::size_t p = 0; p < e.properties.size(); ++p) {
                    const auto& prop = e.properties[p];
                    if (prop.is_list) {
                        const auto count = static_cast<std::size_t>(read_binary_scalar(src, prop.count_type));
                        std::vector<unsigned char> skip(count * type_size(prop.type));
                        src.read(skip.data(), skip.size(), "list payload");
                        values[p] = 0.0;
                    } else {
                        values[p] = read_binary_scalar(src, prop.type);
                    }
                }
                cloud.points[i] = Vec3(values[slots.xyz[0]], values[slots.xyz[1]], values[slots.xyz[2]]);
                if (has_normals) {
                    normals[i] = Vec3(values[slots.normal[0]], values[slots.normal[1]], values[slots.normal[2]]);
                }
            }
            break;
        }
    } else {
        std::string line;
        for (const auto& e : header.elements) {
            for (std::uint64_t i = 0; i < e.count; ++i) {
                const auto line_start = src.offset();
                if (!src.getline(line)) {
                    throw ParseError("truncated ascii payload in element '" + e.name + "'", line_start);
                }
                if (&e != vertex) {
                    continue;
                }
                std::istringstream ss(line);
                for (std::size_t p = 0; p < e.properties.size(); ++p) {
                    const auto& prop = e.properties[p];
                    if (prop.is_list) {
                        double count = 0.0;
                        ss >> count;
                        for (std::size_t j = 0; ss && j < static_cast<std::size_t>(count); ++j) {
                            double ignored = 0.0;
                            ss >> ignored;
                        }
                        values[p] = 0.0;
                    } else {
                        std::string token;
                        ss >> token;
                        if (token.empty()) {
                            throw ParseError("too few values on vertex line", line_start);
                        }
                        char* end = nullptr;
                        values[p] = std::strtod(token.c_str(), &end);
                        if (*end != '\0') {
                            throw ParseError("bad number '" + token + "'", line_start);
                        }
                    }
                    if (!ss && !prop.is_list) {
                        throw ParseError("too few values on vertex line", line_start);
                    }
                }
                cloud.points[i] = Vec3(values[slots.xyz[0]], values[slots.xyz[1]], values[slots.xyz[2]]);
                if (has_normals) {
                    normals[i] = Vec3(values[slots.normal[0]], values[slots.normal[1]], values[slots.normal[2]]);
                }
            }
            if (&e == vertex) {
                break;
            }
        }
    }

    for (std::size_t i = 0; i < cloud.points.size(); ++i) {
        const auto& p = cloud.points[i];
        if (!std::isfinite(p.x()) || !std::isfinite(p.y()) || !std::isfinite(p.z())) {
            throw ParseError("non-finite coordinate at vertex " + std::to_string(i), src.offset());
        }
    }
    if (has_normals) {
        bool usable = true;
        for (auto& n : normals) {
            const double len = n.norm();
            if (!(len > 0.0) || !std::isfinite(len)) {
                usable = false;
                break;
            }
            if (len != 1.0) {
                n /= len;
            }
        }
        if (usable) {
            cloud.normals = std::move(normals);
        }
    }
    return cloud;
}

PointCloud read_ply(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::IoError, "cannot open " + path.string());
    }
    return read_ply(in, path.stem().string());
}

void write_ply(const PointCloud& cloud, std::ostream& out, const PlyWriteOptions& options)
{
    const bool f64 = options.scalar == PlyScalar::Float64;
    const char* type = f64 ? "double" : "float";
    out << "ply\n";
    out << (options.format == PlyFormat::Ascii ? "format ascii 1.0\n" : "format binary_little_endian 1.0\n");
    out << "comment patch3d\n";
    out << "element vertex " << cloud.size() << "\n";
    out << "property " << type << " x\nproperty " << type << " y\nproperty " << type << " z\n";
    if (cloud.normals) {
        out << "property " << type << " nx\nproperty " << type << " ny\nproperty " << type << " nz\n";
    }
    out << "end_header\n";

    auto emit = [&](double v) {
        if (options.format == PlyFormat::Ascii) {
            char buf[40];
            if (f64) {
                std::snprintf(buf, sizeof buf, "%.17g", v);
            } else {
                std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(static_cast<float>(v)));
            }
            out << buf;
            return;
        }
        if (f64) {
            auto bytes = std::bit_cast<std::array<char, 8>>(v);
            if constexpr (std::endian::native == std::endian::big) {
                std::reverse(bytes.begin(), bytes.end());
            }
            out.write(bytes.data(), 8);
        } else {
            auto bytes = std::bit_cast<std::array<char, 4>>(static_cast<float>(v));
            if constexpr (std::endian::native == std::endian::big) {
                std::reverse(bytes.begin(), bytes.end());
            }
            out.write(bytes.data(), 4);
        }
    };

    for (std::size_t i = 0; i < cloud.size(); ++i) {
        std::array<double, 6> row{};
        std::size_t count = 3;
        for (int a = 0; a < 3; ++a) {
            row[a] = cloud.points[i][a];
        }
        if (cloud.normals) {
            for (int a = 0; a < 3; ++a) {
                row[3 + a] = (*cloud.normals)[i][a];
            }
            count = 6;
        }
        for (std::size_t j = 0; j < count; ++j) {
            if (options.format == PlyFormat::Ascii && j > 0) {
                out << ' ';
            }
            emit(row[j]);
        }
        if (options.format == PlyFormat::Ascii) {
            out << '\n';
        }
    }
}

void write_ply(const PointCloud& cloud, const std::filesystem::path& path, const PlyWriteOptions& options)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorKind::IoError, "cannot open " + path.string() + " for writing");
    }
    write_ply(cloud, out, options);
    if (!out) {
        throw Error(ErrorKind::IoError, "write failed for " + path.string());
    }
}

} // namespace patch3d
