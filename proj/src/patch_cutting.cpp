#include "patch3d/patch_cutting.hpp"

#include "patch3d/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace patch3d {

void CutParams::validate() const
{
    if (k < 1) {
        throw Error(ErrorKind::InvalidArgument, "cut: k must be >= 1");
    }
    if (!(delta >= 1.0)) {
        throw Error(ErrorKind::InvalidArgument, "cut: delta must be >= 1");
    }
    if (max_iters < 1) {
        throw Error(ErrorKind::InvalidArgument, "cut: max_iters must be >= 1");
    }
}

double minimal_feasible_delta(std::size_t n, std::size_t k)
{
    if (k == 0 || n < k) {
        return std::numeric_limits<double>::infinity();
    }
    const std::size_t lo = n / k;
    const std::size_t hi = (n + k - 1) / k;
    return static_cast<double>(hi) / static_cast<double>(lo);
}

double assignment_objective(std::span<const Vec3> points, std::span<const Vec3> centroids,
                            std::span<const std::size_t> labels)
{
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        total += (points[i] - centroids[labels[i]]).squaredNorm();
    }
    return total;
}

namespace {

std::size_t argmin_size(const std::vector<std::size_t>& sizes)
{
    return static_cast<std::size_t>(std::min_element(sizes.begin(), sizes.end()) - sizes.begin());
}

std::size_t argmax_size(const std::vector<std::size_t>& sizes)
{
    return static_cast<std::size_t>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
}

} // namespace

std::vector<std::size_t> balanced_assign(std::span<const Vec3> points, std::span<const Vec3> centroids, double delta)
{
    const std::size_t n = points.size();
    const std::size_t k = centroids.size();
    if (k == 0) {
        throw Error(ErrorKind::InvalidArgument, "balanced_assign: no centroids");
    }
    if (n < k) {
        throw Error(ErrorKind::InvalidArgument, "balanced_assign: fewer points than clusters");
    }
    if (!(delta >= 1.0)) {
        throw Error(ErrorKind::InvalidArgument, "balanced_assign: delta must be >= 1");
    }
    const double needed = minimal_feasible_delta(n, k);
    if (delta < needed) {
        throw InfeasibleBalanceError(delta, needed);
    }
    const bool bounded = std::isfinite(delta);
    const std::size_t cap =
        bounded ? std::min(n, static_cast<std::size_t>(std::ceil(delta * static_cast<double>(n) / static_cast<double>(k))))
                : n;

    std::vector<double> d2(n * k);
    std::vector<double> best(n);
    for (std::size_t i = 0; i < n; ++i) {
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < k; ++c) {
            d2[i * k + c] = (points[i] - centroids[c]).squaredNorm();
            b = std::min(b, d2[i * k + c]);
        }
        best[i] = b;
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return best[a] < best[b] || (best[a] == best[b] && a < b);
    });

    std::vector<std::size_t> labels(n, 0);
    std::vector<std::size_t> sizes(k, 0);
    for (std::size_t i : order) {
        std::size_t choice = k;
        for (std::size_t c = 0; c < k; ++c) {
            if (sizes[c] < cap && (choice == k || d2[i * k + c] < d2[i * k + choice])) {
                choice = c;
            }
        }
        labels[i] = choice;
        ++sizes[choice];
    }

    // Empty clusters take the point farthest from its own centroid.
    for (std::size_t c = 0; c < k; ++c) {
        if (sizes[c] != 0) {
            continue;
        }
        std::size_t pick = n;
        for (std::size_t i = 0; i < n; ++i) {
            if (sizes[labels[i]] > 1 && (pick == n || d2[i * k + labels[i]] > d2[pick * k + labels[pick]])) {
                pick = i;
            }
        }
        --sizes[labels[pick]];
        labels[pick] = c;
        ++sizes[c];
    }

    if (!bounded) {
        return labels;
    }
    // Repair: feed the smallest cluster from the largest with the cheapest move.
    // Terminates because every move shrinks the sum of squared sizes, and a
    // size spread of at most one already satisfies any delta >= the minimum.
    while (static_cast<double>(sizes[argmax_size(sizes)]) > delta * static_cast<double>(sizes[argmin_size(sizes)])) {
        const std::size_t small = argmin_size(sizes);
        const std::size_t large = argmax_size(sizes);
        std::size_t pick = n;
        double pick_cost = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
            if (labels[i] != large) {
                continue;
            }
            const double cost = d2[i * k + small] - d2[i * k + large];
            if (cost < pick_cost) {
                pick_cost = cost;
                pick = i;
            }
        }
        labels[pick] = small;
        --sizes[large];
        ++sizes[small];
    }
    return labels;
}

namespace {

std::vector<Vec3> cluster_means(std::span<const Vec3> points, std::span<const std::size_t> labels, std::size_t k)
{
    std::vector<Vec3> sums(k, Vec3::Zero());
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
        sums[labels[i]] += points[i];
        ++counts[labels[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
        sums[c] /= static_cast<double>(counts[c]);
    }
    return sums;
}

} // namespace

SemanticPartition cut(const PointCloud& cloud, const CutParams& params)
{
    params.validate();
    const std::size_t n = cloud.size();
    if (n < params.k) {
        throw Error(ErrorKind::InvalidArgument, "cut: fewer points than requested clusters");
    }
    const std::span<const Vec3> points(cloud.points);

    const auto seeds = farthest_point_sample(points, params.k, choose_start_point(cloud));
    std::vector<Vec3> centroids;
    centroids.reserve(params.k);
    for (std::size_t s : seeds) {
        centroids.push_back(points[s]);
    }

    SemanticPartition part;
    part.k = params.k;
    std::vector<std::size_t> labels;
    for (std::size_t iter = 0; iter < params.max_iters; ++iter) {
        auto next = balanced_assign(points, centroids, params.delta);
        if (!labels.empty()) {
            if (next == labels) {
                break;
            }
            // The greedy step is not an exact minimiser; never accept a worse assignment.
            if (assignment_objective(points, centroids, next) > assignment_objective(points, centroids, labels)) {
                break;
            }
        }
        labels = std::move(next);
        centroids = cluster_means(points, labels, params.k);
        part.objective_trace.push_back(assignment_objective(points, centroids, labels));
    }

    part.sizes.assign(params.k, 0);
    for (std::size_t l : labels) {
        ++part.sizes[l];
    }
    part.labels = std::move(labels);
    part.centroids = std::move(centroids);
    return part;
}

} // namespace patch3d
