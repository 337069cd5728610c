#include "patch3d/fpfh.hpp"

#include "patch3d/error.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace patch3d {

void FpfhParams::validate() const
{
    if (normal_k < 3) {
        throw Error(ErrorKind::InvalidArgument, "normal_k must be >= 3");
    }
    if (feature_k < 1) {
        throw Error(ErrorKind::InvalidArgument, "feature_k must be >= 1");
    }
}

FeatureMatrix::FeatureMatrix(std::size_t rows) : data_(rows * kFeatureDim, 0.0), degenerate_(rows, 0) {}

std::span<const double, kFeatureDim> FeatureMatrix::row(std::size_t i) const
{
    return std::span<const double, kFeatureDim>(data_.data() + i * kFeatureDim, kFeatureDim);
}

std::span<double, kFeatureDim> FeatureMatrix::row(std::size_t i)
{
    return std::span<double, kFeatureDim>(data_.data() + i * kFeatureDim, kFeatureDim);
}

namespace {

// Sign rule used when the outward test is inconclusive: largest component positive.
Vec3 canonical_sign(const Vec3& n)
{
    Eigen::Index axis = 0;
    n.cwiseAbs().maxCoeff(&axis);
    return n[axis] < 0.0 ? Vec3(-n) : n;
}

} // namespace

NormalEstimate estimate_normals(const PointCloud& cloud, std::size_t normal_k)
{
    if (normal_k < 3) {
        throw Error(ErrorKind::InvalidArgument, "estimate_normals: normal_k must be >= 3");
    }
    const std::size_t n = cloud.size();
    if (n < normal_k) {
        throw Error(ErrorKind::InvalidArgument, "estimate_normals: fewer points than normal_k");
    }
    const SpatialIndex index(cloud);
    const Vec3 center = centroid(cloud);

    std::vector<Vec3> normals(n);
    std::vector<char> degenerate(n, 0);

#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < n; ++i) {
        const auto neighbors = index.knn(cloud.points[i], normal_k);
        Vec3 mean = Vec3::Zero();
        for (const auto& nb : neighbors) {
            mean += cloud.points[nb.index];
        }
        mean /= static_cast<double>(neighbors.size());
        Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
        for (const auto& nb : neighbors) {
            const Vec3 d = cloud.points[nb.index] - mean;
            cov += d * d.transpose();
        }
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
        const Vec3 lambda = solver.eigenvalues();  // ascending
        if (!(lambda[2] > 0.0) || lambda[1] <= 1e-12 * lambda[2]) {
            normals[i] = Vec3(0.0, 0.0, 1.0);
            degenerate[i] = 1;
            continue;
        }
        Vec3 normal = solver.eigenvectors().col(0).normalized();
        const Vec3 outward = cloud.points[i] - center;
        const double side = normal.dot(outward);
        if (std::abs(side) > 1e-12 * std::max(outward.norm(), 1e-300)) {
            normals[i] = side < 0.0 ? Vec3(-normal) : normal;
        } else {
            normals[i] = canonical_sign(normal);
        }
    }

    NormalEstimate out{cloud, std::vector<bool>(degenerate.begin(), degenerate.end())};
    out.cloud.normals = std::move(normals);
    return out;
}

PairFeature pair_feature(const Vec3& p1, const Vec3& n1, const Vec3& p2, const Vec3& n2)
{
    PairFeature f;
    Vec3 d = p2 - p1;
    const double dist = d.norm();
    if (dist == 0.0) {
        return f;
    }
    d /= dist;

    // Source is the endpoint whose normal is closer to the connecting line.
    // Near-ties (e.g. two points with the same neighbourhood and hence the
    // same normal) keep p1 so the choice does not hinge on rounding.
    constexpr double tie = 1e-12;
    const double a1 = n1.dot(d);
    const double a2 = n2.dot(d);
    const Vec3* source_n = &n1;
    const Vec3* target_n = &n2;
    if (std::abs(a2) - std::abs(a1) > tie) {
        source_n = &n2;
        target_n = &n1;
        d = -d;
    }
    const Vec3& u = *source_n;
    Vec3 v = u.cross(d);
    const double v_norm = v.norm();
    if (v_norm < 1e-12) {
        return f;
    }
    v /= v_norm;
    const Vec3 w = u.cross(v);

    f.alpha = v.dot(*target_n);
    f.phi = u.dot(d);
    double wy = w.dot(*target_n);
    if (std::abs(wy) < tie) {
        wy = 0.0;  // atan2(-0, x < 0) would land in the opposite edge bin
    }
    f.theta = std::atan2(wy, u.dot(*target_n));
    f.valid = true;
    return f;
}

std::array<std::size_t, 3> pair_feature_bins(const PairFeature& f)
{
    constexpr double bins = static_cast<double>(kBinsPerAngle);
    auto clamp_bin = [](double x) {
        const double b = std::floor(x);
        if (!(b > 0.0)) {
            return std::size_t{0};
        }
        return std::min(static_cast<std::size_t>(b), kBinsPerAngle - 1);
    };
    return {
        clamp_bin(bins * (f.alpha + 1.0) * 0.5),
        clamp_bin(bins * (f.phi + 1.0) * 0.5),
        clamp_bin(bins * (f.theta + std::numbers::pi) / (2.0 * std::numbers::pi)),
    };
}

namespace {

// Scale each 11-bin block to sum to 100. Returns false if any block is empty.
bool normalize_blocks(std::span<double, kFeatureDim> row)
{
    for (std::size_t block = 0; block < 3; ++block) {
        auto part = row.subspan(block * kBinsPerAngle, kBinsPerAngle);
        double sum = 0.0;
        for (double x : part) {
            sum += x;
        }
        if (!(sum > 0.0)) {
            return false;
        }
        const double scale = 100.0 / sum;
        for (double& x : part) {
            x *= scale;
        }
    }
    return true;
}

} // namespace

FeatureMatrix compute_fpfh(const PointCloud& cloud, const FpfhParams& params)
{
    params.validate();
    if (!cloud.has_normals()) {
        throw Error(ErrorKind::PreconditionFailed, "compute_fpfh: cloud has no normals");
    }
    const std::size_t n = cloud.size();
    const auto& pts = cloud.points;
    const auto& nrm = *cloud.normals;
    FeatureMatrix result(n);
    if (n == 0) {
        return result;
    }

    const std::size_t m = std::min(params.feature_k, n - 1);
    const SpatialIndex index(cloud);

    // Self-excluded neighbour lists, m entries per point.
    std::vector<std::size_t> nb_index(n * m);
    std::vector<double> nb_dist(n * m);
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < n; ++i) {
        if (m == 0) {
            continue;
        }
        auto found = index.knn(pts[i], m + 1);
        auto self = std::find_if(found.begin(), found.end(), [i](const Neighbor& nb) { return nb.index == i; });
        found.erase(self != found.end() ? self : found.end() - 1);
        for (std::size_t j = 0; j < m; ++j) {
            nb_index[i * m + j] = found[j].index;
            nb_dist[i * m + j] = found[j].distance;
        }
    }

    FeatureMatrix spfh(n);
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < n; ++i) {
        auto hist = spfh.row(i);
        std::size_t valid = 0;
        for (std::size_t j = 0; j < m; ++j) {
            const std::size_t q = nb_index[i * m + j];
            const PairFeature f = pair_feature(pts[i], nrm[i], pts[q], nrm[q]);
            if (!f.valid) {
                continue;
            }
            const auto bins = pair_feature_bins(f);
            for (std::size_t a = 0; a < 3; ++a) {
                hist[a * kBinsPerAngle + bins[a]] += 1.0;
            }
            ++valid;
        }
        if (valid > 0) {
            const double incr = 100.0 / static_cast<double>(valid);
            for (double& x : hist) {
                x *= incr;
            }
        }
    }

#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < n; ++i) {
        auto out = result.row(i);
        const auto own = spfh.row(i);
        std::copy(own.begin(), own.end(), out.begin());
        if (m > 0) {
            const double inv_k = 1.0 / static_cast<double>(m);
            for (std::size_t j = 0; j < m; ++j) {
                const double dist = nb_dist[i * m + j];
                if (!(dist > 0.0)) {
                    continue;
                }
                const double weight = inv_k / dist;
                const auto other = spfh.row(nb_index[i * m + j]);
                for (std::size_t b = 0; b < kFeatureDim; ++b) {
                    out[b] += weight * other[b];
                }
            }
        }
        if (!normalize_blocks(out)) {
            std::fill(out.begin(), out.end(), 0.0);
            result.set_degenerate(i, true);
        }
    }
    return result;
}

} // namespace patch3d
