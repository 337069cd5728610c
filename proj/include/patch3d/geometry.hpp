#ifndef PATCH3D_GEOMETRY_HPP
#define PATCH3D_GEOMETRY_HPP

#include <Eigen/Core>

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace patch3d {

using Vec3 = Eigen::Vector3d;

/// One object sample. Normals and the anomaly mask are optional but, when
/// present, are parallel to `points`.
struct PointCloud {
    std::vector<Vec3> points;
    std::optional<std::vector<Vec3>> normals;
    std::optional<std::vector<bool>> anomaly_mask;
    std::string id;

    std::size_t size() const noexcept { return points.size(); }
    bool empty() const noexcept { return points.empty(); }
    bool has_normals() const noexcept { return normals.has_value(); }

    // Throws InvalidArgument on length mismatch, non-finite coordinates or
    // non-unit normals.
    void validate() const;
};

struct Neighbor {
    std::size_t index;
    double distance;

    friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Exact k-d tree over a fixed set of points. Immutable after construction and
/// safe to query from several threads.
class SpatialIndex {
public:
    explicit SpatialIndex(std::span<const Vec3> points);
    explicit SpatialIndex(const PointCloud& cloud) : SpatialIndex(std::span<const Vec3>(cloud.points)) {}

    std::size_t size() const noexcept { return points_.size(); }
    const std::vector<Vec3>& points() const noexcept { return points_; }

    // k nearest neighbours in ascending (distance, index) order.
    std::vector<Neighbor> knn(const Vec3& query, std::size_t k) const;

private:
    struct Heap;
    void build(std::size_t lo, std::size_t hi);
    void search(std::size_t lo, std::size_t hi, const Vec3& query, Heap& heap) const;

    std::vector<Vec3> points_;
    std::vector<std::size_t> order_;        // permuted point indices, tree laid out in place
    std::vector<unsigned char> split_dim_;  // split axis of the node stored at order_[mid]
};

std::vector<Neighbor> knn(const SpatialIndex& index, const Vec3& query, std::size_t k);

Vec3 centroid(std::span<const Vec3> points);
Vec3 centroid(const PointCloud& cloud);

// Index of the point farthest from the centroid; lowest index wins ties.
std::size_t choose_start_point(const PointCloud& cloud);

// Greedy max-min subsampling starting at `start`. Ties go to the lowest index.
std::vector<std::size_t> farthest_point_sample(std::span<const Vec3> points, std::size_t k, std::size_t start);
std::vector<std::size_t> farthest_point_sample(const PointCloud& cloud, std::size_t k, std::size_t start);

// Center at the centroid and scale so the farthest point sits at radius 1.
PointCloud normalize_cloud(const PointCloud& cloud);

// Per-axis zero mean, unit population variance.
PointCloud standardize_cloud(const PointCloud& cloud);

} // namespace patch3d

#endif // PATCH3D_GEOMETRY_HPP
