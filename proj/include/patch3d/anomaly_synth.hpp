#ifndef PATCH3D_ANOMALY_SYNTH_HPP
#define PATCH3D_ANOMALY_SYNTH_HPP

#include "patch3d/config.hpp"
#include "patch3d/geometry.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace patch3d {

enum class ShapeKind { Sphere, Cylinder, Torus, Superellipsoid };

const char* to_string(ShapeKind kind);
std::optional<ShapeKind> parse_shape(const std::string& name);

// Canonical dimensions. Every shape is centred at the origin and its farthest
// surface point lies at distance 1.
namespace shape_dims {
inline constexpr double cylinder_radius = 0.35;
inline constexpr double cylinder_half_height = 0.93674969975975964;
inline constexpr double torus_major = 0.6;
inline constexpr double torus_minor = 0.4;
inline constexpr double superellipsoid_exponent = 2.5;
inline constexpr std::array<double, 3> superellipsoid_axes = {1.0, 0.6, 0.35};
} // namespace shape_dims

struct SynthSpec {
    ShapeKind kind = ShapeKind::Sphere;
    std::size_t points = 4096;
    double sigma = 0.0;  // Gaussian noise, in units of the shape's unit radius
    std::uint64_t seed = 0;
};

struct AnomalySpec {
    double radius = 0.2;  // region radius around the seed point
    double amplitude_lo = 0.04;
    double amplitude_hi = 0.10;
    AnomalySign sign = AnomalySign::Bump;
    std::uint64_t seed = 0;
};

// Area-uniform surface samples plus noise, with analytic normals.
PointCloud make_shape(const SynthSpec& spec);

// Ground-truth part label of each point, derived from the canonical geometry:
// sphere octant, cylinder side/top/bottom, torus outer/inner, superellipsoid face.
std::vector<std::size_t> shape_parts(ShapeKind kind, const PointCloud& cloud);
std::size_t shape_part_count(ShapeKind kind);

// Signed distance-like residual of a point to the canonical surface.
double surface_residual(ShapeKind kind, const Vec3& p);

/// Pushes a disc of points along their normals: one amplitude drawn from
/// [lo, hi], scaled by a cosine taper that is 1 at the seed point and 0 at
/// the region boundary. The mask marks every point within `radius` of the seed.
PointCloud inject_anomaly(const PointCloud& cloud, const AnomalySpec& spec);

struct AnomalyRegion {
    std::size_t seed_point = 0;
    double amplitude = 0.0;  // signed
};

// Same as inject_anomaly but also reports where and how strongly it deformed.
PointCloud inject_anomaly(const PointCloud& cloud, const AnomalySpec& spec, AnomalyRegion& region);

struct ClassData {
    std::string name;
    ShapeKind kind = ShapeKind::Sphere;
    std::vector<PointCloud> train;
    std::vector<PointCloud> test;  // each carries an anomaly mask
    std::vector<std::vector<std::size_t>> test_parts;
};

struct Dataset {
    std::vector<ClassData> classes;
};

// Deterministic per (seed, class, split, index).
Dataset synthesize_dataset(const SynthConfig& config, std::uint64_t seed);

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b, std::uint64_t c);

} // namespace patch3d

#endif // PATCH3D_ANOMALY_SYNTH_HPP
