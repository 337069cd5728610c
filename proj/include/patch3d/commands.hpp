#ifndef PATCH3D_COMMANDS_HPP
#define PATCH3D_COMMANDS_HPP

#include "patch3d/config.hpp"
#include "patch3d/eval_metrics.hpp"
#include "patch3d/pipeline.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace patch3d {

// Output layout under out_dir:
//   <class>/banks.p3db (+ .meta)          fit
//   <class>/scores/<sample>.csv            score
//   <class>/object_scores.csv              score
//   eval.csv, eval.txt                     eval
//   sweep.csv, sweep.svg                   sweep-k
//   bench.csv                              bench

// Writes the synthetic tree to dataset_root (or out_dir when unset). Returns the root used.
std::filesystem::path cmd_synth(const RunConfig& config);

void cmd_fit(const RunConfig& config);
void cmd_score(const RunConfig& config);
EvalReport cmd_eval(const RunConfig& config);
SweepResult cmd_sweep_k(const RunConfig& config);

struct BenchRow {
    std::size_t k = 0;
    double fit_seconds = 0.0;
    double score_seconds = 0.0;
    double comparisons_per_query = 0.0;
    std::uint64_t queries = 0;
};

std::vector<BenchRow> cmd_bench(const RunConfig& config);

inline constexpr const char* kObjectScoresHeader = "sample,object_score,comparisons,queries";
inline constexpr const char* kBenchCsvHeader = "k,fit_seconds,score_seconds,comparisons_per_query,queries";

// Full command-line entry point; returns the process exit code
// (0 ok, 2 config error, 3 data error, 4 pipeline error).
int run_cli(int argc, char** argv);

} // namespace patch3d

#endif // PATCH3D_COMMANDS_HPP
