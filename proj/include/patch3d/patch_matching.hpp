#ifndef PATCH3D_PATCH_MATCHING_HPP
#define PATCH3D_PATCH_MATCHING_HPP

#include "patch3d/patch_cutting.hpp"

#include <span>
#include <utility>
#include <vector>

namespace patch3d {

/// Cluster -> aligned semantic id, one bijection per cloud.
struct AlignedSemantics {
    std::size_t k = 0;
    std::vector<std::vector<std::size_t>> rank_of_cluster;
};

// Rank 0 is the cluster whose centroid lies nearest the cloud centroid;
// ties go to the lower cluster id.
SemanticPartition rank_partition(const PointCloud& cloud, SemanticPartition partition);

struct CloudPartition {
    const PointCloud* cloud;
    const SemanticPartition* partition;
};

AlignedSemantics match_across(std::span<const CloudPartition> items);

// Members of merged space `semantic` as (cloud index, point index) pairs.
std::vector<std::pair<std::size_t, std::size_t>> merged_space(const AlignedSemantics& aligned,
                                                              std::span<const CloudPartition> items,
                                                              std::size_t semantic);

} // namespace patch3d

#endif // PATCH3D_PATCH_MATCHING_HPP
