#ifndef PATCH3D_PIPELINE_HPP
#define PATCH3D_PIPELINE_HPP

#include "patch3d/anomaly_synth.hpp"
#include "patch3d/eval_metrics.hpp"
#include "patch3d/memory_model.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace patch3d {

// Applies PATCH3D_THREADS (if set) as the worker cap. Returns the cap in use.
int configure_threads_from_env();

// ---------------------------------------------------------------------------
// Dataset tree: <root>/<class>/{train,test}/*.ply, gt/*.txt, optional parts/*.txt

void write_dataset(const Dataset& data, const std::filesystem::path& root);
Dataset load_dataset(const std::filesystem::path& root, bool with_test = true);

std::vector<bool> read_mask(const std::filesystem::path& path, std::size_t expected);
std::vector<std::size_t> read_labels(const std::filesystem::path& path, std::size_t expected);

// ---------------------------------------------------------------------------
// Per-point score CSV: header "point_index,score,semantic_id".

struct PointScores {
    std::vector<double> scores;
    std::vector<std::size_t> semantic;
};

std::string point_scores_csv(const ScoreReport& report);
PointScores parse_point_scores_csv(const std::string& text);

// ---------------------------------------------------------------------------
// Suite runs

struct FeaturedClass {
    std::vector<FeaturedCloud> train;
    std::vector<FeaturedCloud> test;
};

// The K-independent part of the pipeline, reusable across a K sweep.
std::vector<FeaturedClass> featurize_dataset(const Dataset& data, const PipelineParams& params);

struct ClassRun {
    std::string name;
    std::vector<ScoreReport> scores;  // one per test cloud
    std::vector<std::size_t> bank_sizes;
    std::size_t training_rows = 0;
    double fit_seconds = 0.0;
    double score_seconds = 0.0;
};

struct SuiteRun {
    std::vector<ClassRun> classes;
    EvalReport report;
    double fit_seconds = 0.0;
    double score_seconds = 0.0;
};

SuiteRun run_suite(const Dataset& data, const std::vector<FeaturedClass>& featured, const PipelineParams& params);
SuiteRun run_suite(const Dataset& data, const PipelineParams& params);

/// Inputs for one class's evaluation; shared by the in-memory suite and the
/// CSV-driven `eval` command so both produce identical numbers.
struct ClassEvalInput {
    std::string name;
    std::vector<std::vector<double>> point_scores;  // per test cloud
    std::vector<std::vector<bool>> masks;           // per test cloud
    std::vector<std::vector<std::size_t>> semantic; // per test cloud
    std::vector<std::vector<std::size_t>> parts;    // per test cloud, may be empty
    std::vector<double> object_scores;
    std::size_t k = 0;
    double comparisons_per_query = 0.0;
    std::optional<ShiftStats> shift;
};

ClassEval evaluate_class(const ClassEvalInput& input);

// Coordinate shift between preprocessed train and test clouds.
ShiftStats class_shift(const std::vector<FeaturedCloud>& train, const std::vector<FeaturedCloud>& test);

// ---------------------------------------------------------------------------
// K sweep

struct SweepRow {
    std::size_t k = 0;
    double p_auroc = 0.0;
    double p_aupr = 0.0;
    double o_auroc = 0.0;
    double o_aupr = 0.0;
    double comparisons_per_query = 0.0;
    double score_seconds = 0.0;  // wall time, excluded from determinism checks
    bool ok = true;
    std::string error;
};

struct SweepResult {
    std::vector<SweepRow> rows;  // ascending k
    std::vector<SuiteRun> runs;  // parallel to rows, empty entries for failed rows
};

SweepResult sweep_k(const Dataset& data, const PipelineParams& params, std::vector<std::size_t> k_list);

inline constexpr const char* kSweepCsvHeader =
    "k,p_auroc,p_aupr,o_auroc,o_aupr,comparisons_per_query,score_seconds,status";

std::string sweep_csv(const SweepResult& result, bool include_timing = true);
SweepResult parse_sweep_csv(const std::string& text);
std::string sweep_svg(const SweepResult& result);

} // namespace patch3d

#endif // PATCH3D_PIPELINE_HPP
