#include "patch3d/patch_matching.hpp"

#include "patch3d/error.hpp"

#include <algorithm>
#include <numeric>

namespace patch3d {

SemanticPartition rank_partition(const PointCloud& cloud, SemanticPartition partition)
{
    if (partition.labels.size() != cloud.size() || partition.k == 0) {
        throw Error(ErrorKind::PreconditionFailed, "rank_partition: partition does not belong to cloud");
    }
    const std::size_t k = partition.k;
    const Vec3 center = centroid(cloud);

    std::vector<Vec3> sums(k, Vec3::Zero());
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        sums[partition.labels[i]] += cloud.points[i];
        ++counts[partition.labels[i]];
    }
    std::vector<double> dist(k, 0.0);
    for (std::size_t c = 0; c < k; ++c) {
        if (counts[c] == 0) {
            throw Error(ErrorKind::PreconditionFailed, "rank_partition: empty cluster");
        }
        dist[c] = (sums[c] / static_cast<double>(counts[c]) - center).norm();
    }

    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });
    partition.rank.assign(k, 0);
    for (std::size_t r = 0; r < k; ++r) {
        partition.rank[order[r]] = r;
    }
    return partition;
}

AlignedSemantics match_across(std::span<const CloudPartition> items)
{
    AlignedSemantics aligned;
    if (items.empty()) {
        return aligned;
    }
    aligned.k = items.front().partition->k;
    for (const auto& item : items) {
        if (item.partition->k != aligned.k) {
            throw Error(ErrorKind::InvalidArgument, "match_across: partitions disagree on k");
        }
    }
    aligned.rank_of_cluster.reserve(items.size());
    for (const auto& item : items) {
        aligned.rank_of_cluster.push_back(rank_partition(*item.cloud, *item.partition).rank);
    }
    return aligned;
}

std::vector<std::pair<std::size_t, std::size_t>> merged_space(const AlignedSemantics& aligned,
                                                              std::span<const CloudPartition> items,
                                                              std::size_t semantic)
{
    std::vector<std::pair<std::size_t, std::size_t>> members;
    for (std::size_t c = 0; c < items.size(); ++c) {
        const auto& labels = items[c].partition->labels;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (aligned.rank_of_cluster[c][labels[i]] == semantic) {
                members.emplace_back(c, i);
            }
        }
    }
    return members;
}

} // namespace patch3d
