#ifndef PATCH3D_TESTS_SUPPORT_HPP
#define PATCH3D_TESTS_SUPPORT_HPP

#include "patch3d/geometry.hpp"

#include <Eigen/Geometry>

#include <cstdint>
#include <random>
#include <vector>

namespace test_support {

using patch3d::PointCloud;
using patch3d::Vec3;

inline std::vector<Vec3> random_points(std::size_t n, std::mt19937_64& rng, double lo = 0.0, double hi = 1.0)
{
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<Vec3> out(n);
    for (auto& p : out) {
        p = Vec3(u(rng), u(rng), u(rng));
    }
    return out;
}

inline PointCloud random_cloud(std::size_t n, std::mt19937_64& rng, double lo = 0.0, double hi = 1.0)
{
    PointCloud c;
    c.points = random_points(n, rng, lo, hi);
    return c;
}

// Uniform points on the unit sphere.
inline PointCloud sphere_cloud(std::size_t n, std::mt19937_64& rng)
{
    std::normal_distribution<double> g;
    PointCloud c;
    c.points.reserve(n);
    while (c.points.size() < n) {
        Vec3 d(g(rng), g(rng), g(rng));
        if (d.norm() > 1e-9) {
            c.points.push_back(d.normalized());
        }
    }
    return c;
}

inline Eigen::Matrix3d random_rotation(std::mt19937_64& rng)
{
    std::normal_distribution<double> g;
    Eigen::Quaterniond q(g(rng), g(rng), g(rng), g(rng));
    q.normalize();
    return q.toRotationMatrix();
}

inline PointCloud transformed(const PointCloud& c, const Eigen::Matrix3d& r, const Vec3& t)
{
    PointCloud out = c;
    for (auto& p : out.points) {
        p = r * p + t;
    }
    if (out.normals) {
        for (auto& n : *out.normals) {
            n = r * n;
        }
    }
    return out;
}

} // namespace test_support

#endif
