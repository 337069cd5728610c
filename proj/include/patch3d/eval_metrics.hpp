#ifndef PATCH3D_EVAL_METRICS_HPP
#define PATCH3D_EVAL_METRICS_HPP

#include "patch3d/fpfh.hpp"
#include "patch3d/geometry.hpp"
#include "patch3d/memory_model.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace patch3d {

// Mann-Whitney AUROC; tied scores count one half. Throws UndefinedMetric when
// either class is absent.
double auroc(std::span<const double> scores, std::span<const bool> labels);
double auroc(std::span<const double> scores, const std::vector<bool>& labels);

// Step-wise (non-interpolated) area under the precision-recall curve, one
// step per distinct score threshold. Throws UndefinedMetric without positives.
double aupr(std::span<const double> scores, std::span<const bool> labels);
double aupr(std::span<const double> scores, const std::vector<bool>& labels);

struct PartitionAccuracy {
    double accuracy = 0.0;
    bool greedy = false;  // true when k > 64 and the optimal assignment was skipped
};

// Best fraction of agreeing points over all bijections between label sets.
PartitionAccuracy partition_accuracy_detail(std::span<const std::size_t> predicted, std::span<const std::size_t> truth);
double partition_accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> truth);

// Maximum-weight perfect matching on a square matrix; returns column per row.
std::vector<std::size_t> max_weight_assignment(const std::vector<std::vector<double>>& weight);

struct ShiftStats {
    double mean_diff = 0.0;  // per-dimension |mean_a - mean_b|, averaged over dimensions
    double var_diff = 0.0;   // same for population variances
    std::vector<double> mean_diff_per_dim;
    std::vector<double> var_diff_per_dim;
};

// Rows are pooled across all inputs; dim must be the same on both sides.
ShiftStats shift_stats(std::span<const double> a_rows, std::span<const double> b_rows, std::size_t dim);
ShiftStats shift_stats(std::span<const PointCloud> a, std::span<const PointCloud> b);
ShiftStats shift_stats(std::span<const FeatureMatrix> a, std::span<const FeatureMatrix> b);

struct BankPairDiagnostic {
    std::size_t bank_a = 0;
    std::size_t bank_b = 0;
    // tr(S_a S_b) / (|S_a|_F |S_b|_F) with S the scatter matrix of the
    // mean-centred bank rows; 0 for banks living on disjoint dimensions.
    double cross_trace = 0.0;
    double min_distance = 0.0;  // closest pair of rows across the two banks
};

// Reported, not asserted. `max_rows` > 0 subsamples each bank with a fixed
// stride for the distance scan.
std::vector<BankPairDiagnostic> orthogonality_diag(const MemoryBankSet& banks, std::size_t max_rows = 0);

struct ClassEval {
    std::string name;
    double o_auroc = 0.0;
    double o_aupr = 0.0;
    double p_auroc = 0.0;
    double p_aupr = 0.0;
    std::optional<double> partition_accuracy;
    std::size_t semantic_count = 0;  // Nub.
    double mean_shift = 0.0;
    double var_shift = 0.0;
    double comparisons_per_query = 0.0;
};

struct EvalReport {
    std::vector<ClassEval> classes;
    ClassEval mean;  // column-wise mean across classes, name "mean"
};

// Fills `mean` from `classes`.
void finalize_report(EvalReport& report);

inline constexpr const char* kEvalCsvHeader =
    "class,o_auroc,o_aupr,p_auroc,p_aupr,partition_accuracy,nub,mean_shift,var_shift,comparisons_per_query";

std::string eval_report_csv(const EvalReport& report);
EvalReport parse_eval_report_csv(const std::string& text);
std::string eval_report_text(const EvalReport& report);

} // namespace patch3d

#endif // PATCH3D_EVAL_METRICS_HPP
