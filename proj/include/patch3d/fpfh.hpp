#ifndef PATCH3D_FPFH_HPP
#define PATCH3D_FPFH_HPP

#include "patch3d/geometry.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace patch3d {

inline constexpr std::size_t kBinsPerAngle = 11;
inline constexpr std::size_t kFeatureDim = 3 * kBinsPerAngle;

struct FpfhParams {
    std::size_t normal_k = 16;
    std::size_t feature_k = 16;

    void validate() const;
    friend bool operator==(const FpfhParams&, const FpfhParams&) = default;
};

/// Row-major N x 33 descriptor matrix. Row layout is alpha bins 0-10, phi bins
/// 11-21, theta bins 22-32; each block sums to 100 unless the row is flagged
/// degenerate, in which case it is all zero.
class FeatureMatrix {
public:
    FeatureMatrix() = default;
    explicit FeatureMatrix(std::size_t rows);

    std::size_t rows() const noexcept { return degenerate_.size(); }
    std::span<const double, kFeatureDim> row(std::size_t i) const;
    std::span<double, kFeatureDim> row(std::size_t i);
    bool degenerate(std::size_t i) const { return degenerate_[i] != 0; }
    void set_degenerate(std::size_t i, bool flag) { degenerate_[i] = flag ? 1 : 0; }
    const std::vector<double>& data() const noexcept { return data_; }

    friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;

private:
    std::vector<double> data_;
    std::vector<std::uint8_t> degenerate_;
};

struct NormalEstimate {
    PointCloud cloud;                    // input cloud with normals filled in
    std::vector<bool> degenerate;        // neighbourhood rank < 2
};

// PCA normals over the normal_k nearest neighbours (the point included),
// oriented away from the cloud centroid.
NormalEstimate estimate_normals(const PointCloud& cloud, std::size_t normal_k);

/// Darboux-frame angles of an oriented point pair. `valid` is false when the
/// points coincide or the connecting line is parallel to the source normal.
struct PairFeature {
    double alpha = 0.0;  // v . n_t, in [-1, 1]
    double phi = 0.0;    // u . d / |d|, in [-1, 1]
    double theta = 0.0;  // atan2(w . n_t, u . n_t), in [-pi, pi]
    bool valid = false;
};

PairFeature pair_feature(const Vec3& p1, const Vec3& n1, const Vec3& p2, const Vec3& n2);

// Bin index of each angle on its natural range, clamped into [0, 10].
std::array<std::size_t, 3> pair_feature_bins(const PairFeature& f);

FeatureMatrix compute_fpfh(const PointCloud& cloud, const FpfhParams& params);

} // namespace patch3d

#endif // PATCH3D_FPFH_HPP
