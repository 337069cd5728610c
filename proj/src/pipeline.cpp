#include "patch3d/pipeline.hpp"

#include "patch3d/config.hpp"
#include "patch3d/error.hpp"
#include "patch3d/ply.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace patch3d {

namespace fs = std::filesystem;

int configure_threads_from_env()
{
#ifdef _OPENMP
    if (const char* env = std::getenv("PATCH3D_THREADS")) {
        const int cap = std::atoi(env);
        if (cap > 0) {
            omp_set_num_threads(cap);
        }
    }
    return omp_get_max_threads();
#else
    return 1;
#endif
}

// ---------------------------------------------------------------------------
// Dataset IO

namespace {

std::string sample_name(std::size_t index)
{
    char buf[16];
    std::snprintf(buf, sizeof buf, "%03zu", index);
    return buf;
}

void write_text(const fs::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorKind::IoError, "cannot open " + path.string() + " for writing");
    }
    out << text;
    if (!out) {
        throw Error(ErrorKind::IoError, "write failed for " + path.string());
    }
}

std::string read_text(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::IoError, "cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<fs::path> sorted_files(const fs::path& dir, const std::string& extension)
{
    std::vector<fs::path> files;
    if (!fs::is_directory(dir)) {
        return files;
    }
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == extension) {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    return files;
}

} // namespace

void write_dataset(const Dataset& data, const fs::path& root)
{
    const PlyWriteOptions ply{PlyFormat::BinaryLittleEndian, PlyScalar::Float64};
    for (const auto& cls : data.classes) {
        const fs::path base = root / cls.name;
        for (const char* sub : {"train", "test", "gt", "parts"}) {
            fs::create_directories(base / sub);
        }
        for (std::size_t j = 0; j < cls.train.size(); ++j) {
            PointCloud c = cls.train[j];
            c.anomaly_mask.reset();
            write_ply(c, base / "train" / (sample_name(j) + ".ply"), ply);
        }
        for (std::size_t j = 0; j < cls.test.size(); ++j) {
            const auto& c = cls.test[j];
            write_ply(c, base / "test" / (sample_name(j) + ".ply"), ply);
            std::string gt;
            gt.reserve(c.size() * 2);
            for (std::size_t i = 0; i < c.size(); ++i) {
                gt += (c.anomaly_mask && (*c.anomaly_mask)[i]) ? "1\n" : "0\n";
            }
            write_text(base / "gt" / (sample_name(j) + ".txt"), gt);
            if (j < cls.test_parts.size()) {
                std::string parts;
                for (auto p : cls.test_parts[j]) {
                    parts += std::to_string(p) + "\n";
                }
                write_text(base / "parts" / (sample_name(j) + ".txt"), parts);
            }
        }
    }
}

std::vector<bool> read_mask(const fs::path& path, std::size_t expected)
{
    const auto labels = read_labels(path, expected);
    std::vector<bool> mask(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] > 1) {
            throw Error(ErrorKind::ParseError, path.string() + ": ground truth must be 0 or 1");
        }
        mask[i] = labels[i] == 1;
    }
    return mask;
}

std::vector<std::size_t> read_labels(const fs::path& path, std::size_t expected)
{
    std::istringstream in(read_text(path));
    std::vector<std::size_t> labels;
    labels.reserve(expected);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") {
            continue;
        }
        try {
            labels.push_back(static_cast<std::size_t>(std::stoull(line)));
        } catch (const std::exception&) {
            throw Error(ErrorKind::ParseError, path.string() + ": bad label '" + line + "'");
        }
    }
    if (labels.size() != expected) {
        throw Error(ErrorKind::ParseError, path.string() + ": expected " + std::to_string(expected) + " labels, found " +
                                                std::to_string(labels.size()));
    }
    return labels;
}

Dataset load_dataset(const fs::path& root, bool with_test)
{
    if (!fs::is_directory(root)) {
        throw Error(ErrorKind::IoError, "dataset root " + root.string() + " does not exist");
    }
    std::vector<fs::path> class_dirs;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (entry.is_directory() && fs::is_directory(entry.path() / "train")) {
            class_dirs.push_back(entry.path());
        }
    }
    std::sort(class_dirs.begin(), class_dirs.end());
    if (class_dirs.empty()) {
        throw Error(ErrorKind::IoError, "no <class>/train directories under " + root.string());
    }

    Dataset data;
    for (const auto& dir : class_dirs) {
        ClassData cls;
        cls.name = dir.filename().string();
        cls.kind = parse_shape(cls.name).value_or(ShapeKind::Sphere);
        for (const auto& file : sorted_files(dir / "train", ".ply")) {
            cls.train.push_back(read_ply(file));
        }
        if (cls.train.empty()) {
            throw Error(ErrorKind::IoError, "no training clouds in " + (dir / "train").string());
        }
        if (with_test) {
            const bool have_parts = fs::is_directory(dir / "parts");
            for (const auto& file : sorted_files(dir / "test", ".ply")) {
                auto cloud = read_ply(file);
                const auto gt = dir / "gt" / (file.stem().string() + ".txt");
                if (fs::exists(gt)) {
                    cloud.anomaly_mask = read_mask(gt, cloud.size());
                }
                if (have_parts) {
                    const auto parts = dir / "parts" / (file.stem().string() + ".txt");
                    if (fs::exists(parts)) {
                        cls.test_parts.push_back(read_labels(parts, cloud.size()));
                    }
                }
                cls.test.push_back(std::move(cloud));
            }
            if (cls.test_parts.size() != cls.test.size()) {
                cls.test_parts.clear();
            }
        }
        data.classes.push_back(std::move(cls));
    }
    return data;
}

// ---------------------------------------------------------------------------
// Score CSV

std::string point_scores_csv(const ScoreReport& report)
{
    std::string out = "point_index,score,semantic_id\n";
    out.reserve(report.point_scores.size() * 32);
    for (std::size_t i = 0; i < report.point_scores.size(); ++i) {
        out += std::to_string(i) + "," + format_double(report.point_scores[i]) + "," +
               std::to_string(report.semantic_of_point[i]) + "\n";
    }
    return out;
}

PointScores parse_point_scores_csv(const std::string& text)
{
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "point_index,score,semantic_id") {
        throw Error(ErrorKind::ParseError, "score CSV: unexpected header");
    }
    PointScores out;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        const auto c1 = line.find(',');
        const auto c2 = line.find(',', c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos) {
            throw Error(ErrorKind::ParseError, "score CSV: malformed row '" + line + "'");
        }
        const auto index = std::stoull(line.substr(0, c1));
        if (index != out.scores.size()) {
            throw Error(ErrorKind::ParseError, "score CSV: rows out of order");
        }
        out.scores.push_back(parse_double(line.substr(c1 + 1, c2 - c1 - 1)));
        out.semantic.push_back(static_cast<std::size_t>(std::stoull(line.substr(c2 + 1))));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Suite

std::vector<FeaturedClass> featurize_dataset(const Dataset& data, const PipelineParams& params)
{
    std::vector<FeaturedClass> out;
    out.reserve(data.classes.size());
    for (const auto& cls : data.classes) {
        FeaturedClass fc;
        for (const auto& c : cls.train) {
            fc.train.push_back(featurize(c, params));
        }
        for (const auto& c : cls.test) {
            fc.test.push_back(featurize(c, params));
        }
        out.push_back(std::move(fc));
    }
    return out;
}

ShiftStats class_shift(const std::vector<FeaturedCloud>& train, const std::vector<FeaturedCloud>& test)
{
    std::vector<PointCloud> a;
    std::vector<PointCloud> b;
    for (const auto& f : train) {
        a.push_back(f.cloud);
    }
    for (const auto& f : test) {
        b.push_back(f.cloud);
    }
    return shift_stats(a, b);
}

ClassEval evaluate_class(const ClassEvalInput& input)
{
    ClassEval out;
    out.name = input.name;
    out.semantic_count = input.k;
    out.comparisons_per_query = input.comparisons_per_query;

    std::vector<double> pooled;
    std::vector<bool> pooled_labels;
    std::vector<bool> object_labels;
    for (std::size_t s = 0; s < input.point_scores.size(); ++s) {
        const auto& scores = input.point_scores[s];
        const auto& mask = input.masks[s];
        if (mask.size() != scores.size()) {
            throw Error(ErrorKind::InvalidArgument, "evaluate: mask and scores differ in length");
        }
        pooled.insert(pooled.end(), scores.begin(), scores.end());
        pooled_labels.insert(pooled_labels.end(), mask.begin(), mask.end());
        object_labels.push_back(std::find(mask.begin(), mask.end(), true) != mask.end());
    }
    out.p_auroc = auroc(pooled, pooled_labels);
    out.p_aupr = aupr(pooled, pooled_labels);
    out.o_auroc = auroc(input.object_scores, object_labels);
    out.o_aupr = aupr(input.object_scores, object_labels);

    if (!input.parts.empty() && input.parts.size() == input.semantic.size()) {
        double sum = 0.0;
        for (std::size_t s = 0; s < input.parts.size(); ++s) {
            sum += partition_accuracy(input.semantic[s], input.parts[s]);
        }
        out.partition_accuracy = sum / static_cast<double>(input.parts.size());
    }
    if (input.shift) {
        out.mean_shift = input.shift->mean_diff;
        out.var_shift = input.shift->var_diff;
    }
    return out;
}

namespace {

double seconds_since(std::chrono::steady_clock::time_point start)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

} // namespace

SuiteRun run_suite(const Dataset& data, const std::vector<FeaturedClass>& featured, const PipelineParams& params)
{
    if (featured.size() != data.classes.size()) {
        throw Error(ErrorKind::InvalidArgument, "run_suite: featured data does not match dataset");
    }
    params.validate();
    SuiteRun run;
    for (std::size_t c = 0; c < data.classes.size(); ++c) {
        const auto& cls = data.classes[c];
        const auto& fc = featured[c];
        ClassRun cr;
        cr.name = cls.name;

        auto t0 = std::chrono::steady_clock::now();
        std::vector<SemanticPartition> train_parts;
        for (const auto& f : fc.train) {
            train_parts.push_back(partition_cloud(f.cloud, params.cut));
        }
        const auto banks = build_banks(fc.train, train_parts, params);
        cr.fit_seconds = seconds_since(t0);
        cr.bank_sizes = banks.sizes();
        cr.training_rows = banks.total_rows();

        t0 = std::chrono::steady_clock::now();
        for (const auto& f : fc.test) {
            const auto part = partition_cloud(f.cloud, params.cut);
            cr.scores.push_back(score_featured(f, part, banks));
        }
        cr.score_seconds = seconds_since(t0);

        ClassEvalInput input;
        input.name = cls.name;
        input.k = params.cut.k;
        std::uint64_t comparisons = 0;
        std::uint64_t queries = 0;
        for (std::size_t s = 0; s < cls.test.size(); ++s) {
            const auto& rep = cr.scores[s];
            input.point_scores.push_back(rep.point_scores);
            input.semantic.push_back(rep.semantic_of_point);
            input.object_scores.push_back(rep.object_score);
            input.masks.push_back(cls.test[s].anomaly_mask.value_or(std::vector<bool>(cls.test[s].size(), false)));
            comparisons += rep.comparisons_made;
            queries += static_cast<std::uint64_t>(std::count(rep.degenerate.begin(), rep.degenerate.end(), false));
        }
        input.parts = cls.test_parts;
        input.comparisons_per_query = queries ? static_cast<double>(comparisons) / static_cast<double>(queries) : 0.0;
        input.shift = class_shift(fc.train, fc.test);
        run.report.classes.push_back(evaluate_class(input));
        run.fit_seconds += cr.fit_seconds;
        run.score_seconds += cr.score_seconds;
        run.classes.push_back(std::move(cr));
    }
    finalize_report(run.report);
    return run;
}

SuiteRun run_suite(const Dataset& data, const PipelineParams& params)
{
    return run_suite(data, featurize_dataset(data, params), params);
}

// ---------------------------------------------------------------------------
// Sweep

SweepResult sweep_k(const Dataset& data, const PipelineParams& params, std::vector<std::size_t> k_list)
{
    std::sort(k_list.begin(), k_list.end());
    k_list.erase(std::unique(k_list.begin(), k_list.end()), k_list.end());
    const auto featured = featurize_dataset(data, params);
    SweepResult result;
    for (std::size_t k : k_list) {
        PipelineParams p = params;
        p.cut.k = k;
        SweepRow row;
        row.k = k;
        try {
            auto run = run_suite(data, featured, p);
            row.p_auroc = run.report.mean.p_auroc;
            row.p_aupr = run.report.mean.p_aupr;
            row.o_auroc = run.report.mean.o_auroc;
            row.o_aupr = run.report.mean.o_aupr;
            row.comparisons_per_query = run.report.mean.comparisons_per_query;
            row.score_seconds = run.score_seconds;
            result.runs.push_back(std::move(run));
        } catch (const Error& e) {
            row.ok = false;
            row.error = e.what();
            result.runs.emplace_back();
        }
        result.rows.push_back(row);
    }
    return result;
}

std::string sweep_csv(const SweepResult& result, bool include_timing)
{
    std::ostringstream os;
    os << kSweepCsvHeader << '\n';
    for (const auto& r : result.rows) {
        std::string status = r.ok ? "ok" : "failed: " + r.error;
        std::replace(status.begin(), status.end(), ',', ';');
        std::replace(status.begin(), status.end(), '\n', ' ');
        os << r.k << ',' << format_double(r.p_auroc) << ',' << format_double(r.p_aupr) << ','
           << format_double(r.o_auroc) << ',' << format_double(r.o_aupr) << ','
           << format_double(r.comparisons_per_query) << ',' << (include_timing ? format_double(r.score_seconds) : "")
           << ',' << status << '\n';
    }
    return os.str();
}

SweepResult parse_sweep_csv(const std::string& text)
{
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != kSweepCsvHeader) {
        throw Error(ErrorKind::ParseError, "sweep CSV: unexpected header");
    }
    SweepResult result;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        std::vector<std::string> f;
        std::size_t start = 0;
        for (int col = 0; col < 7; ++col) {
            const auto comma = line.find(',', start);
            if (comma == std::string::npos) {
                throw Error(ErrorKind::ParseError, "sweep CSV: malformed row '" + line + "'");
            }
            f.push_back(line.substr(start, comma - start));
            start = comma + 1;
        }
        f.push_back(line.substr(start));
        SweepRow r;
        r.k = static_cast<std::size_t>(std::stoull(f[0]));
        r.p_auroc = parse_double(f[1]);
        r.p_aupr = parse_double(f[2]);
        r.o_auroc = parse_double(f[3]);
        r.o_aupr = parse_double(f[4]);
        r.comparisons_per_query = parse_double(f[5]);
        r.score_seconds = f[6].empty() ? 0.0 : parse_double(f[6]);
        r.ok = f[7] == "ok";
        if (!r.ok) {
            r.error = f[7].rfind("failed: ", 0) == 0 ? f[7].substr(8) : f[7];
        }
        result.rows.push_back(r);
    }
    return result;
}

namespace {

struct Panel {
    std::string title;
    std::string y_label;
    std::vector<std::pair<double, double>> points;  // (k, value)
};

void draw_panel(std::ostringstream& os, const Panel& panel, double left, double top, double width, double height)
{
    char buf[256];
    os << "<g>\n";
    std::snprintf(buf, sizeof buf,
                  "<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\" fill=\"none\" stroke=\"#444\"/>\n", left,
                  top, width, height);
    os << buf;
    std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\" font-size=\"14\">%s</text>\n",
                  left + width / 2, top - 10, panel.title.c_str());
    os << buf;
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\" font-size=\"12\">number of semantic spaces K</text>\n",
                  left + width / 2, top + height + 36);
    os << buf;
    if (panel.points.empty()) {
        os << "</g>\n";
        return;
    }
    double xmin = panel.points.front().first;
    double xmax = xmin;
    double ymin = panel.points.front().second;
    double ymax = ymin;
    for (const auto& [x, y] : panel.points) {
        xmin = std::min(xmin, x);
        xmax = std::max(xmax, x);
        ymin = std::min(ymin, y);
        ymax = std::max(ymax, y);
    }
    if (xmax == xmin) {
        xmax = xmin + 1;
    }
    const double pad = ymax > ymin ? 0.08 * (ymax - ymin) : std::max(1e-3, 0.05 * std::abs(ymax));
    ymin -= pad;
    ymax += pad;
    auto sx = [&](double x) { return left + (x - xmin) / (xmax - xmin) * width; };
    auto sy = [&](double y) { return top + height - (y - ymin) / (ymax - ymin) * height; };

    for (int t = 0; t <= 4; ++t) {
        const double y = ymin + (ymax - ymin) * t / 4.0;
        std::snprintf(buf, sizeof buf,
                      "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"end\" font-size=\"10\">%.4g</text>\n", left - 6,
                      sy(y) + 3, y);
        os << buf;
    }
    os << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"";
    for (const auto& [x, y] : panel.points) {
        std::snprintf(buf, sizeof buf, "%.2f,%.2f ", sx(x), sy(y));
        os << buf;
    }
    os << "\"/>\n";
    for (const auto& [x, y] : panel.points) {
        std::snprintf(buf, sizeof buf, "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"3.5\" fill=\"#1f77b4\"/>\n", sx(x), sy(y));
        os << buf;
        std::snprintf(buf, sizeof buf, "<text x=\"%.2f\" y=\"%.1f\" text-anchor=\"middle\" font-size=\"10\">%g</text>\n",
                      sx(x), top + height + 16, x);
        os << buf;
    }
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%.1f\" y=\"%.1f\" font-size=\"12\" transform=\"rotate(-90 %.1f %.1f)\" "
                  "text-anchor=\"middle\">%s</text>\n",
                  left - 48, top + height / 2, left - 48, top + height / 2, panel.y_label.c_str());
    os << buf;
    os << "</g>\n";
}

} // namespace

std::string sweep_svg(const SweepResult& result)
{
    Panel auroc_panel{"P-AUROC vs K", "mean P-AUROC", {}};
    Panel cmp_panel{"comparisons per query vs K", "comparisons / query", {}};
    for (const auto& r : result.rows) {
        if (!r.ok) {
            continue;
        }
        auroc_panel.points.emplace_back(static_cast<double>(r.k), r.p_auroc);
        cmp_panel.points.emplace_back(static_cast<double>(r.k), r.comparisons_per_query);
    }
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"900\" height=\"380\" viewBox=\"0 0 900 380\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    draw_panel(os, auroc_panel, 80, 40, 330, 270);
    draw_panel(os, cmp_panel, 540, 40, 330, 270);
    os << "</svg>\n";
    return os.str();
}

} // namespace patch3d
