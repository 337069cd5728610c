#include "patch3d/error.hpp"
#include "patch3d/ply.hpp"
#include "support.hpp"

#include <doctest.h>

#include <bit>
#include <cstring>
#include <filesystem>
#include <sstream>

using namespace patch3d;

namespace {

PointCloud read_text(const std::string& text)
{
    std::istringstream in(text, std::ios::binary);
    return read_ply(in, "fixture");
}

std::string write_text(const PointCloud& c, const PlyWriteOptions& options)
{
    std::ostringstream out(std::ios::binary);
    write_ply(c, out, options);
    return out.str();
}

template <typename T>
void append(std::string& s, T v)
{
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    s.append(buf, sizeof(T));
}

} // namespace

TEST_CASE("ascii fixture with extra properties and elements")
{
    const std::string text = "ply\n"
                             "format ascii 1.0\n"
                             "comment made by hand\n"
                             "element vertex 3\n"
                             "property float x\n"
                             "property float y\n"
                             "property float z\n"
                             "property uchar red\n"
                             "property float nx\n"
                             "property float ny\n"
                             "property float nz\n"
                             "element face 1\n"
                             "property list uchar int vertex_indices\n"
                             "end_header\n"
                             "0 0 0 255 0 0 2\n"
                             "1 0 0 12 0 3 0\n"
                             "0 1 0.5 7 4 0 0\n"
                             "3 0 1 2\n";
    const auto c = read_text(text);
    REQUIRE(c.size() == 3);
    CHECK(c.points[2] == Vec3(0, 1, 0.5));
    REQUIRE(c.has_normals());
    CHECK(((*c.normals)[0] - Vec3(0, 0, 1)).norm() <= 1e-12);
    CHECK(((*c.normals)[1] - Vec3(0, 1, 0)).norm() <= 1e-12);
    CHECK(((*c.normals)[2] - Vec3(1, 0, 0)).norm() <= 1e-12);
}

TEST_CASE("binary fixture with a skipped double property")
{
    std::string s = "ply\nformat binary_little_endian 1.0\nelement vertex 2\n"
                    "property double x\nproperty double y\nproperty double z\nproperty int tag\nend_header\n";
    for (int i = 0; i < 2; ++i) {
        append<double>(s, 1.5 * i);
        append<double>(s, -2.0);
        append<double>(s, 0.25);
        append<std::int32_t>(s, 42);
    }
    const auto c = read_text(s);
    REQUIRE(c.size() == 2);
    CHECK(c.points[1] == Vec3(1.5, -2.0, 0.25));
    CHECK_FALSE(c.has_normals());
}

TEST_CASE("round trip in every format")
{
    std::mt19937_64 rng(1);
    auto cloud = test_support::random_cloud(257, rng);
    std::vector<Vec3> normals;
    for (const auto& p : cloud.points) {
        normals.push_back(p.normalized());
    }
    cloud.normals = normals;
    for (auto format : {PlyFormat::Ascii, PlyFormat::BinaryLittleEndian}) {
        for (auto scalar : {PlyScalar::Float32, PlyScalar::Float64}) {
            const auto back = read_text(write_text(cloud, PlyWriteOptions{format, scalar}));
            REQUIRE(back.size() == cloud.size());
            REQUIRE(back.has_normals());
            const double tol = scalar == PlyScalar::Float64 ? 0.0 : 1e-6;
            for (std::size_t i = 0; i < cloud.size(); ++i) {
                CHECK((back.points[i] - cloud.points[i]).cwiseAbs().maxCoeff() <= tol * 10.0);
                CHECK(((*back.normals)[i] - normals[i]).norm() <= 1e-6 + tol);
            }
        }
    }
    PointCloud bare;
    bare.points = cloud.points;
    CHECK_FALSE(read_text(write_text(bare, PlyWriteOptions{})).has_normals());
}

TEST_CASE("binary file size is header plus payload")
{
    std::mt19937_64 rng(2);
    const auto cloud = test_support::random_cloud(10000, rng);
    const auto text = write_text(cloud, PlyWriteOptions{PlyFormat::BinaryLittleEndian, PlyScalar::Float32});
    const auto header = text.find("end_header\n") + std::strlen("end_header\n");
    CHECK(text.size() == header + 10000 * 3 * 4);

    const auto dir = std::filesystem::temp_directory_path() / "patch3d_test_ply";
    std::filesystem::create_directories(dir);
    write_ply(cloud, dir / "c.ply");
    CHECK(std::filesystem::file_size(dir / "c.ply") == text.size());
    const auto back = read_ply(dir / "c.ply");
    CHECK(back.id == "c");
    CHECK(back.size() == 10000);
    std::filesystem::remove_all(dir);
}

TEST_CASE("malformed files raise parse errors")
{
    std::mt19937_64 rng(3);
    const auto good = write_text(test_support::random_cloud(20, rng), PlyWriteOptions{});

    CHECK_THROWS_AS(read_text(good.substr(0, good.size() - 3)), ParseError);
    CHECK_THROWS_AS(read_text("plx\n"), ParseError);
    CHECK_THROWS_AS(read_text("ply\nformat binary_big_endian 1.0\nelement vertex 0\nproperty float x\nend_header\n"),
                    ParseError);
    CHECK_THROWS_AS(read_text("ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\n"
                              "property float z\nend_header\n1 2\n"),
                    ParseError);
    CHECK_THROWS_AS(read_text("ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\n"
                              "end_header\n1 2\n"),
                    ParseError);
    CHECK_THROWS_AS(read_text("ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\n"
                              "property float z\nproperty float nx\nend_header\n1 2 3 4\n"),
                    ParseError);
    CHECK_THROWS_AS(read_text("ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\n"
                              "property float z\nend_header\n1 nan 3\n"),
                    ParseError);
    CHECK_THROWS_AS(read_ply("/nonexistent/none.ply"), Error);

    try {
        read_text(good.substr(0, good.size() - 3));
    } catch (const ParseError& e) {
        CHECK(e.byte_offset() > 0);
        CHECK(e.kind() == ErrorKind::ParseError);
    }
}

TEST_CASE("zero normals drop the normal channel")
{
    const auto c = read_text("ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\n"
                             "property float z\nproperty float nx\nproperty float ny\nproperty float nz\nend_header\n"
                             "0 0 0 0 0 1\n1 0 0 0 0 0\n");
    CHECK(c.size() == 2);
    CHECK_FALSE(c.has_normals());
}
