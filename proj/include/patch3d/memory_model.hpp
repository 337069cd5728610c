#ifndef PATCH3D_MEMORY_MODEL_HPP
#define PATCH3D_MEMORY_MODEL_HPP

#include "patch3d/fpfh.hpp"
#include "patch3d/patch_cutting.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace patch3d {

/// Everything that must agree between fitting and scoring.
struct PipelineParams {
    bool normalize = true;
    FpfhParams fpfh;
    CutParams cut;
    // 0 selects the max point score as object score; otherwise the mean of
    // the top fraction of point scores.
    double object_top_fraction = 0.0;

    void validate() const;
    friend bool operator==(const PipelineParams&, const PipelineParams&) = default;
};

/// K-independent stage: preprocessed cloud with estimated normals and FPFH rows.
struct FeaturedCloud {
    PointCloud cloud;
    FeatureMatrix features;
    std::vector<bool> normal_degenerate;
};

FeaturedCloud featurize(const PointCloud& cloud, const PipelineParams& params);

// Patch-Cutting followed by ranking against the cloud's own centroid.
SemanticPartition partition_cloud(const PointCloud& cloud, const CutParams& params);

/// Which bank(s) a single query touched. Filled in by MemoryBankSet::nearest.
struct BankProbe {
    std::int32_t bank = -1;             // last bank consulted
    std::uint32_t distinct_banks = 0;   // number of different banks consulted
    std::uint64_t comparisons = 0;

    void record(std::size_t bank_id, std::size_t rows);
};

struct NearestHit {
    double distance = 0.0;
    std::size_t row = 0;
};

/// One memory bank of normal FPFH rows per aligned semantic space.
class MemoryBankSet {
public:
    MemoryBankSet() = default;
    MemoryBankSet(std::vector<std::vector<double>> banks, PipelineParams params);

    std::size_t k() const noexcept { return banks_.size(); }
    std::size_t bank_size(std::size_t bank) const { return banks_.at(bank).size() / kFeatureDim; }
    std::vector<std::size_t> sizes() const;
    std::size_t total_rows() const;
    std::span<const double> bank_data(std::size_t bank) const { return banks_.at(bank); }
    std::span<const double, kFeatureDim> row(std::size_t bank, std::size_t r) const;
    const PipelineParams& params() const noexcept { return params_; }

    // Exact L2 nearest neighbour within `bank` only. Throws EmptyBankError.
    NearestHit nearest(std::size_t bank, std::span<const double, kFeatureDim> query, BankProbe* probe = nullptr) const;

    // Appends rows to a bank; used by tests of the monotonicity property.
    void add_rows(std::size_t bank, std::span<const double> rows);

    friend bool operator==(const MemoryBankSet&, const MemoryBankSet&) = default;

private:
    std::vector<std::vector<double>> banks_;
    PipelineParams params_;
};

// Bank i receives the non-degenerate FPFH rows of every training point whose
// aligned semantic id is i. Partitions must be ranked and share k.
MemoryBankSet build_banks(std::span<const FeaturedCloud> clouds, std::span<const SemanticPartition> partitions,
                          const PipelineParams& params);

// Variant over clouds that already carry normals; FPFH is computed here.
MemoryBankSet build_banks(std::span<const PointCloud> clouds, std::span<const SemanticPartition> partitions,
                          const FpfhParams& fpfh);

// featurize + partition + build_banks.
MemoryBankSet fit(std::span<const PointCloud> training, const PipelineParams& params);

struct ScoreReport {
    std::vector<double> point_scores;
    double object_score = 0.0;
    std::vector<std::size_t> semantic_of_point;
    std::uint64_t comparisons_made = 0;
    std::vector<bool> degenerate;
    // Instrumentation: bank consulted by each point (-1 if none) and how many
    // distinct banks the point touched.
    std::vector<std::int32_t> consulted_bank;
    std::vector<std::uint32_t> banks_consulted;
};

double score_point(std::span<const double, kFeatureDim> feature, std::size_t semantic, const MemoryBankSet& banks);

ScoreReport score_featured(const FeaturedCloud& cloud, const SemanticPartition& partition, const MemoryBankSet& banks);
ScoreReport score_cloud(const PointCloud& cloud, const MemoryBankSet& banks, const PipelineParams& params);

double object_score(std::span<const double> point_scores, double top_fraction);

// Binary container "P3DB" plus a `<path>.meta` text sidecar.
void save_banks(const MemoryBankSet& banks, const std::filesystem::path& path);
MemoryBankSet load_banks(const std::filesystem::path& path);

} // namespace patch3d

#endif // PATCH3D_MEMORY_MODEL_HPP
