#include "patch3d/commands.hpp"

#include "patch3d/error.hpp"
#include "patch3d/geometry.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <map>
#include <fstream>
#include <iostream>
#include <sstream>

namespace patch3d {

namespace fs = std::filesystem;

namespace {

void write_file(const fs::path& path, const std::string& text)
{
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorKind::IoError, "cannot open " + path.string() + " for writing");
    }
    out << text;
    if (!out) {
        throw Error(ErrorKind::IoError, "write failed for " + path.string());
    }
}

std::string read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::IoError, "cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> split(const std::string& line, char sep)
{
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, sep)) {
        out.push_back(field);
    }
    if (!line.empty() && line.back() == sep) {
        out.emplace_back();
    }
    return out;
}

std::vector<SemanticPartition> partition_all(const std::vector<FeaturedCloud>& clouds, const CutParams& cut)
{
    std::vector<SemanticPartition> out;
    out.reserve(clouds.size());
    for (const auto& f : clouds) {
        out.push_back(partition_cloud(f.cloud, cut));
    }
    return out;
}

struct ObjectRow {
    double object_score = 0.0;
    std::uint64_t comparisons = 0;
    std::uint64_t queries = 0;
};

std::map<std::string, ObjectRow> read_object_scores(const fs::path& path)
{
    std::istringstream in(read_file(path));
    std::string line;
    if (!std::getline(in, line) || line != kObjectScoresHeader) {
        throw Error(ErrorKind::ParseError, path.string() + ": unexpected header");
    }
    std::map<std::string, ObjectRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        const auto f = split(line, ',');
        if (f.size() != 4) {
            throw Error(ErrorKind::ParseError, path.string() + ": malformed row '" + line + "'");
        }
        rows[f[0]] = ObjectRow{parse_double(f[1]), std::stoull(f[2]), std::stoull(f[3])};
    }
    return rows;
}

} // namespace

fs::path cmd_synth(const RunConfig& config)
{
    const fs::path root = config.dataset_root.empty() ? config.out_dir : config.dataset_root;
    write_dataset(synthesize_dataset(config.synth, config.seed), root);
    return root;
}

void cmd_fit(const RunConfig& config)
{
    const auto data = load_dataset(config.dataset_root, false);
    for (const auto& cls : data.classes) {
        std::vector<FeaturedCloud> featured;
        for (const auto& c : cls.train) {
            featured.push_back(featurize(c, config.pipeline));
        }
        const auto parts = partition_all(featured, config.pipeline.cut);
        fs::create_directories(config.out_dir / cls.name);
        save_banks(build_banks(featured, parts, config.pipeline), config.out_dir / cls.name / "banks.p3db");
    }
}

void cmd_score(const RunConfig& config)
{
    const auto data = load_dataset(config.dataset_root, true);
    for (const auto& cls : data.classes) {
        const fs::path dir = config.out_dir / cls.name;
        const auto banks = load_banks(dir / "banks.p3db");
        std::string objects = std::string(kObjectScoresHeader) + "\n";
        for (const auto& cloud : cls.test) {
            const auto report = score_cloud(cloud, banks, banks.params());
            write_file(dir / "scores" / (cloud.id + ".csv"), point_scores_csv(report));
            const auto queries = std::count(report.degenerate.begin(), report.degenerate.end(), false);
            objects += cloud.id + "," + format_double(report.object_score) + "," +
                       std::to_string(report.comparisons_made) + "," + std::to_string(queries) + "\n";
        }
        write_file(dir / "object_scores.csv", objects);
    }
}

EvalReport cmd_eval(const RunConfig& config)
{
    const auto data = load_dataset(config.dataset_root, true);
    EvalReport report;
    for (const auto& cls : data.classes) {
        const fs::path dir = config.out_dir / cls.name;
        const auto objects = read_object_scores(dir / "object_scores.csv");
        const auto banks = load_banks(dir / "banks.p3db");

        ClassEvalInput input;
        input.name = cls.name;
        input.k = banks.k();
        std::uint64_t comparisons = 0;
        std::uint64_t queries = 0;
        for (const auto& cloud : cls.test) {
            auto scores = parse_point_scores_csv(read_file(dir / "scores" / (cloud.id + ".csv")));
            if (scores.scores.size() != cloud.size()) {
                throw Error(ErrorKind::ParseError, "scores for " + cls.name + "/" + cloud.id + " do not match the cloud");
            }
            const auto it = objects.find(cloud.id);
            if (it == objects.end()) {
                throw Error(ErrorKind::ParseError, "no object score for " + cls.name + "/" + cloud.id);
            }
            input.point_scores.push_back(std::move(scores.scores));
            input.semantic.push_back(std::move(scores.semantic));
            input.masks.push_back(cloud.anomaly_mask.value_or(std::vector<bool>(cloud.size(), false)));
            input.object_scores.push_back(it->second.object_score);
            comparisons += it->second.comparisons;
            queries += it->second.queries;
        }
        input.parts = cls.test_parts;
        input.comparisons_per_query = queries ? static_cast<double>(comparisons) / static_cast<double>(queries) : 0.0;

        std::vector<PointCloud> train;
        std::vector<PointCloud> test;
        for (const auto& c : cls.train) {
            train.push_back(banks.params().normalize ? normalize_cloud(c) : c);
        }
        for (const auto& c : cls.test) {
            test.push_back(banks.params().normalize ? normalize_cloud(c) : c);
        }
        input.shift = shift_stats(train, test);
        report.classes.push_back(evaluate_class(input));

        if (config.diagnostics) {
            std::string csv = "bank_a,bank_b,cross_trace,min_distance\n";
            for (const auto& d : orthogonality_diag(banks, 2048)) {
                csv += std::to_string(d.bank_a) + "," + std::to_string(d.bank_b) + "," + format_double(d.cross_trace) +
                       "," + format_double(d.min_distance) + "\n";
            }
            write_file(dir / "orthogonality.csv", csv);
        }
    }
    finalize_report(report);
    write_file(config.out_dir / "eval.csv", eval_report_csv(report));
    write_file(config.out_dir / "eval.txt", eval_report_text(report));
    return report;
}

SweepResult cmd_sweep_k(const RunConfig& config)
{
    const auto data = load_dataset(config.dataset_root, true);
    auto result = sweep_k(data, config.pipeline, config.k_list);
    write_file(config.out_dir / "sweep.csv", sweep_csv(result));
    write_file(config.out_dir / "sweep.svg", sweep_svg(result));
    return result;
}

std::vector<BenchRow> cmd_bench(const RunConfig& config)
{
    const auto data = load_dataset(config.dataset_root, true);
    const auto featured = featurize_dataset(data, config.pipeline);
    auto k_list = config.k_list;
    std::sort(k_list.begin(), k_list.end());
    k_list.erase(std::unique(k_list.begin(), k_list.end()), k_list.end());

    std::vector<BenchRow> rows;
    std::string csv = std::string(kBenchCsvHeader) + "\n";
    for (auto k : k_list) {
        PipelineParams p = config.pipeline;
        p.cut.k = k;
        const auto run = run_suite(data, featured, p);
        BenchRow row;
        row.k = k;
        row.fit_seconds = run.fit_seconds;
        row.score_seconds = run.score_seconds;
        std::uint64_t comparisons = 0;
        for (const auto& cr : run.classes) {
            for (const auto& rep : cr.scores) {
                comparisons += rep.comparisons_made;
                row.queries += static_cast<std::uint64_t>(std::count(rep.degenerate.begin(), rep.degenerate.end(), false));
            }
        }
        row.comparisons_per_query = row.queries ? static_cast<double>(comparisons) / static_cast<double>(row.queries) : 0.0;
        csv += std::to_string(k) + "," + format_double(row.fit_seconds) + "," + format_double(row.score_seconds) + "," +
               format_double(row.comparisons_per_query) + "," + std::to_string(row.queries) + "\n";
        rows.push_back(row);
    }
    write_file(config.out_dir / "bench.csv", csv);
    return rows;
}

// ---------------------------------------------------------------------------
// CLI

namespace {

int exit_code(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::ConfigError: return 2;
    case ErrorKind::ParseError:
    case ErrorKind::IoError: return 3;
    default: return 4;
    }
}

void print_sweep(const SweepResult& result)
{
    std::printf("%4s %10s %10s %10s %10s %14s %10s\n", "K", "P-AUROC", "P-AUPR", "O-AUROC", "O-AUPR", "cmp/query",
                "score[s]");
    for (const auto& r : result.rows) {
        if (!r.ok) {
            std::printf("%4zu failed: %s\n", r.k, r.error.c_str());
            continue;
        }
        std::printf("%4zu %10.4f %10.4f %10.4f %10.4f %14.1f %10.2f\n", r.k, r.p_auroc, r.p_aupr, r.o_auroc, r.o_aupr,
                    r.comparisons_per_query, r.score_seconds);
    }
}

} // namespace

int run_cli(int argc, char** argv)
{
    CLI::App app{"Patch3D point-cloud anomaly detection"};
    app.require_subcommand(1);

    std::string config_path;
    Overrides overrides;
    std::size_t k = 0;
    double delta = 0.0;
    std::uint64_t seed = 0;
    std::string out;
    std::string dataset;
    std::string k_list;

    const std::vector<std::pair<Command, const char*>> commands = {
        {Command::Synth, "generate the synthetic dataset tree"},
        {Command::Fit, "build per-class memory banks"},
        {Command::Score, "score test clouds against fitted banks"},
        {Command::Eval, "evaluate written scores"},
        {Command::SweepK, "fit, score and evaluate for every K in k_list"},
        {Command::Bench, "time scoring and count comparisons per K"},
    };
    std::map<CLI::App*, Command> by_app;
    for (const auto& [command, help] : commands) {
        auto* sub = app.add_subcommand(to_string(command), help);
        sub->add_option("--config", config_path, "key = value configuration file")->check(CLI::ExistingFile);
        sub->add_option("--k", k, "number of semantic spaces");
        sub->add_option("--delta", delta, "balance factor");
        sub->add_option("--seed", seed, "base seed");
        sub->add_option("--out", out, "output directory");
        sub->add_option("--dataset", dataset, "dataset root");
        sub->add_option("--k-list", k_list, "comma separated K values");
        by_app[sub] = command;
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    CLI::App* chosen = app.get_subcommands().front();
    const Command command = by_app.at(chosen);
    if (chosen->count("--k")) overrides.k = k;
    if (chosen->count("--delta")) overrides.delta = delta;
    if (chosen->count("--seed")) overrides.seed = seed;
    if (chosen->count("--out")) overrides.out = out;
    if (chosen->count("--dataset")) overrides.dataset = dataset;
    if (chosen->count("--k-list")) overrides.k_list = k_list;

    try {
        configure_threads_from_env();
        const KeyValues kv = config_path.empty() ? KeyValues{} : read_key_values(config_path);
        const RunConfig cfg = make_run_config(kv, overrides, command);
        switch (command) {
        case Command::Synth:
            std::printf("wrote dataset to %s\n", cmd_synth(cfg).string().c_str());
            break;
        case Command::Fit:
            cmd_fit(cfg);
            std::printf("wrote banks under %s\n", cfg.out_dir.string().c_str());
            break;
        case Command::Score:
            cmd_score(cfg);
            std::printf("wrote scores under %s\n", cfg.out_dir.string().c_str());
            break;
        case Command::Eval:
            std::fputs(eval_report_text(cmd_eval(cfg)).c_str(), stdout);
            break;
        case Command::SweepK:
            print_sweep(cmd_sweep_k(cfg));
            break;
        case Command::Bench:
            for (const auto& r : cmd_bench(cfg)) {
                std::printf("K=%zu fit %.3fs score %.3fs comparisons/query %.1f\n", r.k, r.fit_seconds,
                            r.score_seconds, r.comparisons_per_query);
            }
            break;
        }
    } catch (const Error& e) {
        std::fprintf(stderr, "patch3d: %s\n", e.what());
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "patch3d: %s\n", e.what());
        return 4;
    }
    return 0;
}

} // namespace patch3d
