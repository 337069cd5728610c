#include "patch3d/anomaly_synth.hpp"

#include "patch3d/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace patch3d {

const char* to_string(ShapeKind kind)
{
    switch (kind) {
    case ShapeKind::Sphere: return "sphere";
    case ShapeKind::Cylinder: return "cylinder";
    case ShapeKind::Torus: return "torus";
    case ShapeKind::Superellipsoid: return "superellipsoid";
    }
    return "unknown";
}

std::optional<ShapeKind> parse_shape(const std::string& name)
{
    for (auto k : {ShapeKind::Sphere, ShapeKind::Cylinder, ShapeKind::Torus, ShapeKind::Superellipsoid}) {
        if (name == to_string(k)) {
            return k;
        }
    }
    return std::nullopt;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b, std::uint64_t c)
{
    // splitmix64 finaliser over a running combination.
    auto mix = [](std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    std::uint64_t h = mix(base);
    h = mix(h ^ a);
    h = mix(h ^ b);
    h = mix(h ^ c);
    return h;
}

namespace {

using std::numbers::pi;

// Fixed transforms on top of mt19937_64 so samples do not depend on the
// standard library's distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double normal()
    {
        if (cached_) {
            cached_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) {
            u1 = uniform();
        }
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        spare_ = radius * std::sin(2.0 * pi * u2);
        cached_ = true;
        return radius * std::cos(2.0 * pi * u2);
    }

    std::size_t index(std::size_t n) { return std::min(n - 1, static_cast<std::size_t>(uniform() * static_cast<double>(n))); }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool cached_ = false;
};

Vec3 random_direction(Rng& rng)
{
    while (true) {
        Vec3 d(rng.normal(), rng.normal(), rng.normal());
        const double len = d.norm();
        if (len > 1e-12) {
            return d / len;
        }
    }
}

struct Sample {
    Vec3 point;
    Vec3 normal;
};

Sample sample_sphere(Rng& rng)
{
    const Vec3 d = random_direction(rng);
    return {d, d};
}

Sample sample_cylinder(Rng& rng)
{
    using namespace shape_dims;
    const double side = 2.0 * pi * cylinder_radius * 2.0 * cylinder_half_height;
    const double cap = pi * cylinder_radius * cylinder_radius;
    const double pick = rng.uniform() * (side + 2.0 * cap);
    const double theta = 2.0 * pi * rng.uniform();
    if (pick < side) {
        const double z = cylinder_half_height * (2.0 * rng.uniform() - 1.0);
        return {Vec3(cylinder_radius * std::cos(theta), cylinder_radius * std::sin(theta), z),
                Vec3(std::cos(theta), std::sin(theta), 0.0)};
    }
    const double sign = pick < side + cap ? 1.0 : -1.0;
    const double rho = cylinder_radius * std::sqrt(rng.uniform());
    return {Vec3(rho * std::cos(theta), rho * std::sin(theta), sign * cylinder_half_height), Vec3(0.0, 0.0, sign)};
}

Sample sample_torus(Rng& rng)
{
    using namespace shape_dims;
    const double theta = 2.0 * pi * rng.uniform();
    double phi = 0.0;
    // Area element is proportional to (R + r cos phi).
    do {
        phi = 2.0 * pi * rng.uniform();
    } while (rng.uniform() * (torus_major + torus_minor) > torus_major + torus_minor * std::cos(phi));
    const double ring = torus_major + torus_minor * std::cos(phi);
    return {Vec3(ring * std::cos(theta), ring * std::sin(theta), torus_minor * std::sin(phi)),
            Vec3(std::cos(phi) * std::cos(theta), std::cos(phi) * std::sin(theta), std::sin(phi))};
}

// Radial distance of the unscaled superellipsoid along unit direction d.
double superellipsoid_radius(const Vec3& d)
{
    using namespace shape_dims;
    const double p = superellipsoid_exponent;
    double f = 0.0;
    for (int a = 0; a < 3; ++a) {
        f += std::pow(std::abs(d[a]) / superellipsoid_axes[a], p);
    }
    return std::pow(f, -1.0 / p);
}

Vec3 superellipsoid_normal(const Vec3& x)
{
    using namespace shape_dims;
    const double p = superellipsoid_exponent;
    Vec3 g;
    for (int a = 0; a < 3; ++a) {
        const double s = superellipsoid_axes[a];
        g[a] = std::copysign(std::pow(std::abs(x[a]) / s, p - 1.0) / s, x[a]);
    }
    return g.normalized();
}

// Radial projection with rejection: dA = r^2 / (n . d) dOmega.
double superellipsoid_area_weight(const Vec3& d)
{
    const double r = superellipsoid_radius(d);
    const Vec3 x = r * d;
    return r * r / superellipsoid_normal(x).dot(d);
}

template <typename F>
void fibonacci_scan(std::size_t count, F&& visit)
{
    const double golden = pi * (3.0 - std::sqrt(5.0));
    for (std::size_t i = 0; i < count; ++i) {
        const double z = 1.0 - 2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(count);
        const double rho = std::sqrt(1.0 - z * z);
        const double a = golden * static_cast<double>(i);
        visit(Vec3(rho * std::cos(a), rho * std::sin(a), z));
    }
}

double superellipsoid_weight_bound()
{
    static const double bound = [] {
        double best = 0.0;
        fibonacci_scan(20000, [&](const Vec3& d) { best = std::max(best, superellipsoid_area_weight(d)); });
        return best * 1.05;
    }();
    return bound;
}

// Maps the farthest surface point to distance 1. The maximum sits on an axis
// or along a corner diagonal; the scan picks up anything in between.
double superellipsoid_scale()
{
    static const double scale = [] {
        double far = 0.0;
        fibonacci_scan(20000, [&](const Vec3& d) { far = std::max(far, superellipsoid_radius(d)); });
        for (int a = 0; a < 3; ++a) {
            far = std::max(far, superellipsoid_radius(Vec3::Unit(a)));
        }
        far = std::max(far, superellipsoid_radius(Vec3(1.0, 1.0, 1.0).normalized()));
        return 1.0 / far;
    }();
    return scale;
}

Sample sample_superellipsoid(Rng& rng)
{
    const double bound = superellipsoid_weight_bound();
    while (true) {
        const Vec3 d = random_direction(rng);
        const double w = superellipsoid_area_weight(d);
        if (rng.uniform() * bound <= w) {
            const Vec3 x = superellipsoid_radius(d) * d;
            return {x * superellipsoid_scale(), superellipsoid_normal(x)};
        }
    }
}

} // namespace

PointCloud make_shape(const SynthSpec& spec)
{
    if (spec.points < 100) {
        throw Error(ErrorKind::InvalidArgument, "make_shape: need at least 100 points");
    }
    if (!(spec.sigma >= 0.0)) {
        throw Error(ErrorKind::InvalidArgument, "make_shape: sigma must be >= 0");
    }
    Rng rng(spec.seed);
    PointCloud cloud;
    cloud.id = to_string(spec.kind);
    cloud.points.reserve(spec.points);
    std::vector<Vec3> normals;
    normals.reserve(spec.points);
    for (std::size_t i = 0; i < spec.points; ++i) {
        Sample s;
        switch (spec.kind) {
        case ShapeKind::Sphere: s = sample_sphere(rng); break;
        case ShapeKind::Cylinder: s = sample_cylinder(rng); break;
        case ShapeKind::Torus: s = sample_torus(rng); break;
        case ShapeKind::Superellipsoid: s = sample_superellipsoid(rng); break;
        }
        cloud.points.push_back(s.point);
        normals.push_back(s.normal);
    }
    if (spec.sigma > 0.0) {
        for (auto& p : cloud.points) {
            p += spec.sigma * Vec3(rng.normal(), rng.normal(), rng.normal());
        }
    }
    cloud.normals = std::move(normals);
    return cloud;
}

double surface_residual(ShapeKind kind, const Vec3& p)
{
    using namespace shape_dims;
    switch (kind) {
    case ShapeKind::Sphere: return p.norm() - 1.0;
    case ShapeKind::Cylinder: {
        const double rho = std::hypot(p.x(), p.y());
        const double dr = rho - cylinder_radius;
        const double dz = std::abs(p.z()) - cylinder_half_height;
        if (dr <= 0.0 && dz <= 0.0) {
            return std::max(dr, dz);
        }
        return std::hypot(std::max(dr, 0.0), std::max(dz, 0.0));
    }
    case ShapeKind::Torus: {
        const double rho = std::hypot(p.x(), p.y());
        return std::hypot(rho - torus_major, p.z()) - torus_minor;
    }
    case ShapeKind::Superellipsoid: {
        const double len = p.norm();
        if (len == 0.0) {
            return -superellipsoid_scale() * superellipsoid_radius(Vec3(1.0, 0.0, 0.0));
        }
        // Radial gap projected on the surface normal: first-order distance.
        const Vec3 d = p / len;
        const double r = superellipsoid_radius(d);
        return (len - superellipsoid_scale() * r) * superellipsoid_normal(r * d).dot(d);
    }
    }
    return 0.0;
}

std::size_t shape_part_count(ShapeKind kind)
{
    switch (kind) {
    case ShapeKind::Sphere: return 8;
    case ShapeKind::Cylinder: return 3;
    case ShapeKind::Torus: return 2;
    case ShapeKind::Superellipsoid: return 6;
    }
    return 1;
}

std::vector<std::size_t> shape_parts(ShapeKind kind, const PointCloud& cloud)
{
    using namespace shape_dims;
    std::vector<std::size_t> parts;
    parts.reserve(cloud.size());
    for (const auto& p : cloud.points) {
        std::size_t label = 0;
        switch (kind) {
        case ShapeKind::Sphere:
            label = (p.x() >= 0.0 ? 1 : 0) + (p.y() >= 0.0 ? 2 : 0) + (p.z() >= 0.0 ? 4 : 0);
            break;
        case ShapeKind::Cylinder: {
            const double side_gap = std::abs(std::hypot(p.x(), p.y()) - cylinder_radius);
            const double cap_gap = std::abs(std::abs(p.z()) - cylinder_half_height);
            label = side_gap <= cap_gap ? 0 : (p.z() > 0.0 ? 1 : 2);
            break;
        }
        case ShapeKind::Torus: label = std::hypot(p.x(), p.y()) >= torus_major ? 0 : 1; break;
        case ShapeKind::Superellipsoid: {
            Eigen::Index axis = 0;
            p.cwiseAbs().cwiseQuotient(Vec3(superellipsoid_axes[0], superellipsoid_axes[1], superellipsoid_axes[2]))
                .maxCoeff(&axis);
            label = static_cast<std::size_t>(2 * axis + (p[axis] >= 0.0 ? 0 : 1));
            break;
        }
        }
        parts.push_back(label);
    }
    return parts;
}

PointCloud inject_anomaly(const PointCloud& cloud, const AnomalySpec& spec, AnomalyRegion& region)
{
    if (!cloud.has_normals()) {
        throw Error(ErrorKind::PreconditionFailed, "inject_anomaly: cloud has no normals");
    }
    if (!(spec.radius > 0.0 && spec.radius < 1.0)) {
        throw Error(ErrorKind::InvalidArgument, "inject_anomaly: radius must lie in (0, 1)");
    }
    if (!(spec.amplitude_lo >= 0.0 && spec.amplitude_lo <= spec.amplitude_hi)) {
        throw Error(ErrorKind::InvalidArgument, "inject_anomaly: need 0 <= lo <= hi");
    }
    if (cloud.empty()) {
        throw Error(ErrorKind::InvalidArgument, "inject_anomaly: anomaly region is empty");
    }
    Rng rng(spec.seed);
    region.seed_point = rng.index(cloud.size());
    double amplitude = spec.amplitude_lo + (spec.amplitude_hi - spec.amplitude_lo) * rng.uniform();
    bool dent = spec.sign == AnomalySign::Dent;
    if (spec.sign == AnomalySign::Random) {
        dent = rng.uniform() < 0.5;
    }
    region.amplitude = dent ? -amplitude : amplitude;

    PointCloud out = cloud;
    std::vector<bool> mask(cloud.size(), false);
    const Vec3 center = cloud.points[region.seed_point];
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const double d = (cloud.points[i] - center).norm();
        if (d > spec.radius) {
            continue;
        }
        mask[i] = true;
        const double taper = 0.5 * (1.0 + std::cos(pi * d / spec.radius));
        out.points[i] += region.amplitude * taper * (*cloud.normals)[i];
    }
    out.anomaly_mask = std::move(mask);
    return out;
}

PointCloud inject_anomaly(const PointCloud& cloud, const AnomalySpec& spec)
{
    AnomalyRegion region;
    return inject_anomaly(cloud, spec, region);
}

Dataset synthesize_dataset(const SynthConfig& config, std::uint64_t seed)
{
    Dataset data;
    for (std::size_t c = 0; c < config.shapes.size(); ++c) {
        const auto kind = parse_shape(config.shapes[c]);
        if (!kind) {
            throw Error(ErrorKind::InvalidArgument, "unknown shape '" + config.shapes[c] + "'");
        }
        ClassData cls;
        cls.name = config.shapes[c];
        cls.kind = *kind;
        for (std::size_t j = 0; j < config.train_per_class; ++j) {
            auto cloud = make_shape({*kind, config.points, config.sigma, derive_seed(seed, c, 0, j)});
            cloud.id = "train_" + std::to_string(j);
            cls.train.push_back(std::move(cloud));
        }
        const double lo = std::max(0.0, config.amplitude_mean - config.amplitude_halfwidth);
        const double hi = config.amplitude_mean + config.amplitude_halfwidth;
        for (std::size_t j = 0; j < config.test_per_class; ++j) {
            auto cloud = make_shape({*kind, config.points, config.sigma, derive_seed(seed, c, 1, j)});
            if (j < config.anomalous_per_class) {
                AnomalySpec spec{config.anomaly_radius, lo, hi, config.sign, derive_seed(seed, c, 2, j)};
                cloud = inject_anomaly(cloud, spec);
            } else {
                cloud.anomaly_mask = std::vector<bool>(cloud.size(), false);
            }
            cloud.id = "test_" + std::to_string(j);
            cls.test_parts.push_back(shape_parts(*kind, cloud));
            cls.test.push_back(std::move(cloud));
        }
        data.classes.push_back(std::move(cls));
    }
    return data;
}

} // namespace patch3d
