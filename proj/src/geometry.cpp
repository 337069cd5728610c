#include "patch3d/geometry.hpp"

#include "patch3d/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>

namespace patch3d {

namespace {

constexpr std::size_t kLeafSize = 8;

bool finite(const Vec3& p)
{
    return std::isfinite(p.x()) && std::isfinite(p.y()) && std::isfinite(p.z());
}

} // namespace

void PointCloud::validate() const
{
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (!finite(points[i])) {
            throw Error(ErrorKind::InvalidArgument, "non-finite coordinate at point " + std::to_string(i));
        }
    }
    if (normals) {
        if (normals->size() != points.size()) {
            throw Error(ErrorKind::InvalidArgument, "normals length does not match points");
        }
        for (std::size_t i = 0; i < normals->size(); ++i) {
            if (!finite((*normals)[i]) || std::abs((*normals)[i].norm() - 1.0) > 1e-6) {
                throw Error(ErrorKind::InvalidArgument, "normal " + std::to_string(i) + " is not unit length");
            }
        }
    }
    if (anomaly_mask && anomaly_mask->size() != points.size()) {
        throw Error(ErrorKind::InvalidArgument, "anomaly mask length does not match points");
    }
}

// ---------------------------------------------------------------------------
// SpatialIndex

struct SpatialIndex::Heap {
    std::size_t k;
    std::vector<std::pair<double, std::size_t>> items;  // max-heap on (d2, index)

    bool full() const { return items.size() == k; }
    double worst() const { return items.front().first; }

    void offer(double d2, std::size_t index)
    {
        std::pair<double, std::size_t> cand{d2, index};
        if (items.size() < k) {
            items.push_back(cand);
            std::push_heap(items.begin(), items.end());
        } else if (cand < items.front()) {
            std::pop_heap(items.begin(), items.end());
            items.back() = cand;
            std::push_heap(items.begin(), items.end());
        }
    }
};

SpatialIndex::SpatialIndex(std::span<const Vec3> points)
    : points_(points.begin(), points.end()), order_(points.size()), split_dim_(points.size(), 0)
{
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    build(0, order_.size());
}

void SpatialIndex::build(std::size_t lo, std::size_t hi)
{
    if (hi - lo <= kLeafSize) {
        return;
    }
    Vec3 lower = points_[order_[lo]];
    Vec3 upper = lower;
    for (std::size_t i = lo + 1; i < hi; ++i) {
        lower = lower.cwiseMin(points_[order_[i]]);
        upper = upper.cwiseMax(points_[order_[i]]);
    }
    Eigen::Index dim = 0;
    (upper - lower).maxCoeff(&dim);

    const std::size_t mid = lo + (hi - lo) / 2;
    auto less = [&](std::size_t a, std::size_t b) {
        const double ca = points_[a][dim];
        const double cb = points_[b][dim];
        return ca < cb || (ca == cb && a < b);
    };
    std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(lo),
                     order_.begin() + static_cast<std::ptrdiff_t>(mid),
                     order_.begin() + static_cast<std::ptrdiff_t>(hi), less);
    split_dim_[mid] = static_cast<unsigned char>(dim);
    build(lo, mid);
    build(mid + 1, hi);
}

void SpatialIndex::search(std::size_t lo, std::size_t hi, const Vec3& query, Heap& heap) const
{
    if (hi - lo <= kLeafSize) {
        for (std::size_t i = lo; i < hi; ++i) {
            heap.offer((points_[order_[i]] - query).squaredNorm(), order_[i]);
        }
        return;
    }
    const std::size_t mid = lo + (hi - lo) / 2;
    const std::size_t node = order_[mid];
    const int dim = split_dim_[mid];
    heap.offer((points_[node] - query).squaredNorm(), node);

    const double diff = query[dim] - points_[node][dim];
    const bool left_first = diff < 0.0;
    if (left_first) {
        search(lo, mid, query, heap);
    } else {
        search(mid + 1, hi, query, heap);
    }
    // <= keeps equal-distance candidates reachable for the lowest-index tie rule.
    if (!heap.full() || diff * diff <= heap.worst()) {
        if (left_first) {
            search(mid + 1, hi, query, heap);
        } else {
            search(lo, mid, query, heap);
        }
    }
}

std::vector<Neighbor> SpatialIndex::knn(const Vec3& query, std::size_t k) const
{
    if (k > points_.size()) {
        throw Error(ErrorKind::InvalidArgument, "knn: k exceeds point count");
    }
    std::vector<Neighbor> out;
    if (k == 0) {
        return out;
    }
    Heap heap{k, {}};
    heap.items.reserve(k + 1);
    search(0, order_.size(), query, heap);
    std::sort_heap(heap.items.begin(), heap.items.end());
    out.reserve(k);
    for (const auto& [d2, index] : heap.items) {
        out.push_back({index, std::sqrt(d2)});
    }
    return out;
}

std::vector<Neighbor> knn(const SpatialIndex& index, const Vec3& query, std::size_t k)
{
    return index.knn(query, k);
}

// ---------------------------------------------------------------------------

Vec3 centroid(std::span<const Vec3> points)
{
    if (points.empty()) {
        throw Error(ErrorKind::EmptyInput, "centroid of an empty cloud");
    }
    Vec3 sum = Vec3::Zero();
    for (const auto& p : points) {
        sum += p;
    }
    return sum / static_cast<double>(points.size());
}

Vec3 centroid(const PointCloud& cloud)
{
    return centroid(std::span<const Vec3>(cloud.points));
}

std::size_t choose_start_point(const PointCloud& cloud)
{
    const Vec3 c = centroid(cloud);
    std::size_t best = 0;
    double best_d2 = -1.0;
    for (std::size_t i = 0; i < cloud.points.size(); ++i) {
        const double d2 = (cloud.points[i] - c).squaredNorm();
        if (d2 > best_d2) {
            best_d2 = d2;
            best = i;
        }
    }
    return best;
}

std::vector<std::size_t> farthest_point_sample(std::span<const Vec3> points, std::size_t k, std::size_t start)
{
    const std::size_t n = points.size();
    if (k == 0 || k > n) {
        throw Error(ErrorKind::InvalidArgument, "farthest_point_sample: need 1 <= k <= n");
    }
    if (start >= n) {
        throw Error(ErrorKind::InvalidArgument, "farthest_point_sample: start index out of range");
    }
    std::vector<std::size_t> selected;
    selected.reserve(k);
    std::vector<double> min_d2(n, std::numeric_limits<double>::infinity());
    std::vector<bool> taken(n, false);

    std::size_t current = start;
    for (std::size_t round = 0; round < k; ++round) {
        selected.push_back(current);
        taken[current] = true;
        if (round + 1 == k) {
            break;
        }
        const Vec3 anchor = points[current];
        std::size_t best = n;
        double best_d2 = -1.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (taken[j]) {
                continue;
            }
            min_d2[j] = std::min(min_d2[j], (points[j] - anchor).squaredNorm());
            if (min_d2[j] > best_d2) {
                best_d2 = min_d2[j];
                best = j;
            }
        }
        current = best;
    }
    return selected;
}

std::vector<std::size_t> farthest_point_sample(const PointCloud& cloud, std::size_t k, std::size_t start)
{
    return farthest_point_sample(std::span<const Vec3>(cloud.points), k, start);
}

PointCloud normalize_cloud(const PointCloud& cloud)
{
    const Vec3 c = centroid(cloud);
    double max_r2 = 0.0;
    for (const auto& p : cloud.points) {
        max_r2 = std::max(max_r2, (p - c).squaredNorm());
    }
    if (max_r2 == 0.0) {
        throw Error(ErrorKind::DegenerateInput, "normalize_cloud: all points coincide");
    }
    const double scale = 1.0 / std::sqrt(max_r2);
    PointCloud out = cloud;
    for (auto& p : out.points) {
        p = (p - c) * scale;
    }
    return out;
}

PointCloud standardize_cloud(const PointCloud& cloud)
{
    const Vec3 mean = centroid(cloud);
    Vec3 var = Vec3::Zero();
    for (const auto& p : cloud.points) {
        var += (p - mean).cwiseAbs2();
    }
    var /= static_cast<double>(cloud.size());
    if ((var.array() <= 0.0).any()) {
        throw Error(ErrorKind::DegenerateInput, "standardize_cloud: zero-variance axis");
    }
    const Vec3 inv_sd = var.cwiseSqrt().cwiseInverse();
    PointCloud out = cloud;
    for (auto& p : out.points) {
        p = (p - mean).cwiseProduct(inv_sd);
    }
    if (out.normals) {
        // Normals transform with the inverse-transpose of the diagonal scaling.
        const Vec3 sd = var.cwiseSqrt();
        for (auto& nrm : *out.normals) {
            nrm = nrm.cwiseProduct(sd).normalized();
        }
    }
    return out;
}

} // namespace patch3d
