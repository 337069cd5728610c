#ifndef PATCH3D_PATCH_CUTTING_HPP
#define PATCH3D_PATCH_CUTTING_HPP

#include "patch3d/geometry.hpp"

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace patch3d {

struct CutParams {
    std::size_t k = 8;
    double delta = 1.5;  // largest cluster may hold at most delta times the smallest
    std::size_t max_iters = 50;
    std::uint64_t seed = 0;

    void validate() const;
    friend bool operator==(const CutParams&, const CutParams&) = default;
};

/// Assignment of every point of one cloud to one of k semantic spaces.
struct SemanticPartition {
    std::size_t k = 0;
    std::vector<std::size_t> labels;    // per point, in [0, k)
    std::vector<Vec3> centroids;        // per cluster
    std::vector<std::size_t> sizes;     // per cluster, all >= 1
    std::vector<std::size_t> rank;      // per cluster aligned semantic id; empty until ranked
    std::vector<double> objective_trace;  // within-cluster SSE after each Lloyd iteration

    bool ranked() const noexcept { return rank.size() == k && k > 0; }
    // Aligned semantic id of point i. Requires ranked().
    std::size_t semantic_of(std::size_t point) const { return rank[labels[point]]; }
};

// Smallest delta for which n points can be split into k non-empty clusters.
double minimal_feasible_delta(std::size_t n, std::size_t k);

/// Capacity-constrained nearest-centroid assignment. Points are visited in
/// ascending order of distance to their nearest centroid and take the nearest
/// centroid that still has room (cap = ceil(delta * n / k)); a repair pass
/// then moves points into undersized clusters until max <= delta * min.
/// delta = +inf reduces to plain nearest-centroid assignment.
std::vector<std::size_t> balanced_assign(std::span<const Vec3> points, std::span<const Vec3> centroids, double delta);

// Within-cluster sum of squared distances for given labels and centroids.
double assignment_objective(std::span<const Vec3> points, std::span<const Vec3> centroids,
                            std::span<const std::size_t> labels);

// FPS-seeded balanced K-means over the whole cloud.
SemanticPartition cut(const PointCloud& cloud, const CutParams& params);

} // namespace patch3d

#endif // PATCH3D_PATCH_CUTTING_HPP
