#ifndef PATCH3D_PLY_HPP
#define PATCH3D_PLY_HPP

#include "patch3d/geometry.hpp"

#include <filesystem>
#include <istream>

namespace patch3d {

enum class PlyFormat { Ascii, BinaryLittleEndian };
enum class PlyScalar { Float32, Float64 };

struct PlyWriteOptions {
    PlyFormat format = PlyFormat::BinaryLittleEndian;
    PlyScalar scalar = PlyScalar::Float32;
};

// Reads the `vertex` element (x, y, z and optional nx, ny, nz). Other vertex
// properties and other elements are skipped. Normals are rescaled to unit
// length; a file with any zero-length normal yields a cloud without normals.
// Throws ParseError (with byte offset) on malformed input.
PointCloud read_ply(const std::filesystem::path& path);
PointCloud read_ply(std::istream& in, const std::string& name);

void write_ply(const PointCloud& cloud, const std::filesystem::path& path, const PlyWriteOptions& options = {});
void write_ply(const PointCloud& cloud, std::ostream& out, const PlyWriteOptions& options = {});

} // namespace patch3d

#endif // PATCH3D_PLY_HPP
