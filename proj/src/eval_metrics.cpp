#include "patch3d/eval_metrics.hpp"

#include "patch3d/config.hpp"
#include "patch3d/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

namespace patch3d {

namespace {

std::vector<bool> to_bools(std::span<const bool> labels)
{
    return std::vector<bool>(labels.begin(), labels.end());
}

void check_lengths(std::size_t scores, std::size_t labels)
{
    if (scores != labels) {
        throw Error(ErrorKind::InvalidArgument, "scores and labels differ in length");
    }
}

} // namespace

double auroc(std::span<const double> scores, const std::vector<bool>& labels)
{
    check_lengths(scores.size(), labels.size());
    const std::size_t n = scores.size();
    const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), true));
    const std::size_t negatives = n - positives;
    if (positives == 0 || negatives == 0) {
        throw Error(ErrorKind::UndefinedMetric, "AUROC needs both positive and negative labels");
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Sum of (1-based, tie-averaged) ranks of the positives, kept doubled so
    // it stays an exact integer.
    double doubled_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) {
            ++j;
        }
        const double doubled_rank = static_cast<double>(i + 1 + j);  // 2 * mean of ranks i+1..j
        for (std::size_t t = i; t < j; ++t) {
            if (labels[order[t]]) {
                doubled_rank_sum += doubled_rank;
            }
        }
        i = j;
    }
    const double p = static_cast<double>(positives);
    const double u = 0.5 * (doubled_rank_sum - p * (p + 1.0));
    return u / (p * static_cast<double>(negatives));
}

double auroc(std::span<const double> scores, std::span<const bool> labels)
{
    return auroc(scores, to_bools(labels));
}

double aupr(std::span<const double> scores, const std::vector<bool>& labels)
{
    check_lengths(scores.size(), labels.size());
    const std::size_t n = scores.size();
    const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), true));
    if (positives == 0) {
        throw Error(ErrorKind::UndefinedMetric, "AUPR needs at least one positive label");
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    double area = 0.0;
    double prev_recall = 0.0;
    std::size_t tp = 0;
    std::size_t seen = 0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) {
            tp += labels[order[j]] ? 1 : 0;
            ++j;
        }
        seen = j;
        const double recall = static_cast<double>(tp) / static_cast<double>(positives);
        const double precision = static_cast<double>(tp) / static_cast<double>(seen);
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j;
    }
    return area;
}

double aupr(std::span<const double> scores, std::span<const bool> labels)
{
    return aupr(scores, to_bools(labels));
}

std::vector<std::size_t> max_weight_assignment(const std::vector<std::vector<double>>& weight)
{
    // Hungarian algorithm (potentials form) on cost = -weight, 1-based internally.
    const std::size_t m = weight.size();
    if (m == 0) {
        return {};
    }
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(m + 1, 0.0);
    std::vector<double> v(m + 1, 0.0);
    std::vector<std::size_t> match(m + 1, 0);  // column -> row
    std::vector<std::size_t> way(m + 1, 0);
    for (std::size_t row = 1; row <= m; ++row) {
        match[0] = row;
        std::size_t col0 = 0;
        std::vector<double> minv(m + 1, inf);
        std::vector<bool> used(m + 1, false);
        do {
            used[col0] = true;
            const std::size_t r0 = match[col0];
            double delta = inf;
            std::size_t col1 = 0;
            for (std::size_t col = 1; col <= m; ++col) {
                if (used[col]) {
                    continue;
                }
                const double cur = -weight[r0 - 1][col - 1] - u[r0] - v[col];
                if (cur < minv[col]) {
                    minv[col] = cur;
                    way[col] = col0;
                }
                if (minv[col] < delta) {
                    delta = minv[col];
                    col1 = col;
                }
            }
            for (std::size_t col = 0; col <= m; ++col) {
                if (used[col]) {
                    u[match[col]] += delta;
                    v[col] -= delta;
                } else {
                    minv[col] -= delta;
                }
            }
            col0 = col1;
        } while (match[col0] != 0);
        do {
            const std::size_t col1 = way[col0];
            match[col0] = match[col1];
            col0 = col1;
        } while (col0 != 0);
    }
    std::vector<std::size_t> assignment(m, 0);
    for (std::size_t col = 1; col <= m; ++col) {
        assignment[match[col] - 1] = col - 1;
    }
    return assignment;
}

PartitionAccuracy partition_accuracy_detail(std::span<const std::size_t> predicted, std::span<const std::size_t> truth)
{
    check_lengths(predicted.size(), truth.size());
    PartitionAccuracy result;
    if (predicted.empty()) {
        result.accuracy = 1.0;
        return result;
    }
    auto compact = [](std::span<const std::size_t> labels) {
        std::map<std::size_t, std::size_t> ids;
        for (auto l : labels) {
            ids.emplace(l, 0);
        }
        std::size_t next = 0;
        for (auto& [label, id] : ids) {
            id = next++;
        }
        return ids;
    };
    const auto pred_ids = compact(predicted);
    const auto true_ids = compact(truth);
    const std::size_t m = std::max(pred_ids.size(), true_ids.size());
    std::vector<std::vector<double>> confusion(m, std::vector<double>(m, 0.0));
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        confusion[pred_ids.at(predicted[i])][true_ids.at(truth[i])] += 1.0;
    }

    double agree = 0.0;
    if (m <= 64) {
        const auto assign = max_weight_assignment(confusion);
        for (std::size_t r = 0; r < m; ++r) {
            agree += confusion[r][assign[r]];
        }
    } else {
        result.greedy = true;
        std::vector<bool> row_used(m, false);
        std::vector<bool> col_used(m, false);
        for (std::size_t step = 0; step < m; ++step) {
            double best = -1.0;
            std::size_t br = 0;
            std::size_t bc = 0;
            for (std::size_t r = 0; r < m; ++r) {
                if (row_used[r]) {
                    continue;
                }
                for (std::size_t c = 0; c < m; ++c) {
                    if (!col_used[c] && confusion[r][c] > best) {
                        best = confusion[r][c];
                        br = r;
                        bc = c;
                    }
                }
            }
            row_used[br] = true;
            col_used[bc] = true;
            agree += best;
        }
    }
    result.accuracy = agree / static_cast<double>(predicted.size());
    return result;
}

double partition_accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> truth)
{
    return partition_accuracy_detail(predicted, truth).accuracy;
}

ShiftStats shift_stats(std::span<const double> a_rows, std::span<const double> b_rows, std::size_t dim)
{
    if (dim == 0 || a_rows.size() % dim != 0 || b_rows.size() % dim != 0) {
        throw Error(ErrorKind::InvalidArgument, "shift_stats: row storage does not match dimension");
    }
    if (a_rows.empty() || b_rows.empty()) {
        throw Error(ErrorKind::EmptyInput, "shift_stats: empty set");
    }
    auto moments = [dim](std::span<const double> rows) {
        const std::size_t n = rows.size() / dim;
        std::vector<double> mean(dim, 0.0);
        std::vector<double> var(dim, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t d = 0; d < dim; ++d) {
                mean[d] += rows[i * dim + d];
            }
        }
        for (auto& m : mean) {
            m /= static_cast<double>(n);
        }
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t d = 0; d < dim; ++d) {
                const double x = rows[i * dim + d] - mean[d];
                var[d] += x * x;
            }
        }
        for (auto& v : var) {
            v /= static_cast<double>(n);
        }
        return std::pair{mean, var};
    };
    const auto [mean_a, var_a] = moments(a_rows);
    const auto [mean_b, var_b] = moments(b_rows);
    ShiftStats s;
    s.mean_diff_per_dim.resize(dim);
    s.var_diff_per_dim.resize(dim);
    for (std::size_t d = 0; d < dim; ++d) {
        s.mean_diff_per_dim[d] = std::abs(mean_a[d] - mean_b[d]);
        s.var_diff_per_dim[d] = std::abs(var_a[d] - var_b[d]);
        s.mean_diff += s.mean_diff_per_dim[d];
        s.var_diff += s.var_diff_per_dim[d];
    }
    s.mean_diff /= static_cast<double>(dim);
    s.var_diff /= static_cast<double>(dim);
    return s;
}

ShiftStats shift_stats(std::span<const PointCloud> a, std::span<const PointCloud> b)
{
    auto flatten = [](std::span<const PointCloud> clouds) {
        std::vector<double> rows;
        for (const auto& c : clouds) {
            for (const auto& p : c.points) {
                rows.insert(rows.end(), {p.x(), p.y(), p.z()});
            }
        }
        return rows;
    };
    return shift_stats(flatten(a), flatten(b), 3);
}

ShiftStats shift_stats(std::span<const FeatureMatrix> a, std::span<const FeatureMatrix> b)
{
    auto flatten = [](std::span<const FeatureMatrix> mats) {
        std::vector<double> rows;
        for (const auto& m : mats) {
            rows.insert(rows.end(), m.data().begin(), m.data().end());
        }
        return rows;
    };
    return shift_stats(flatten(a), flatten(b), kFeatureDim);
}

std::vector<BankPairDiagnostic> orthogonality_diag(const MemoryBankSet& banks, std::size_t max_rows)
{
    const std::size_t k = banks.k();
    if (k < 2) {
        throw Error(ErrorKind::InvalidArgument, "orthogonality_diag needs at least two banks");
    }
    using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    std::vector<Eigen::MatrixXd> scatter(k);
    std::vector<Mat> sampled(k);
    for (std::size_t b = 0; b < k; ++b) {
        const auto data = banks.bank_data(b);
        const std::size_t rows = banks.bank_size(b);
        Eigen::Map<const Mat> m(data.data(), static_cast<Eigen::Index>(rows), kFeatureDim);
        const Mat centred = m.rowwise() - m.colwise().mean();
        scatter[b] = centred.transpose() * centred;

        const std::size_t stride = (max_rows > 0 && rows > max_rows) ? (rows + max_rows - 1) / max_rows : 1;
        const std::size_t kept = (rows + stride - 1) / stride;
        sampled[b].resize(static_cast<Eigen::Index>(kept), kFeatureDim);
        for (std::size_t r = 0; r < kept; ++r) {
            sampled[b].row(static_cast<Eigen::Index>(r)) = m.row(static_cast<Eigen::Index>(r * stride));
        }
    }

    std::vector<BankPairDiagnostic> out;
    for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = a + 1; b < k; ++b) {
            BankPairDiagnostic d;
            d.bank_a = a;
            d.bank_b = b;
            const double denom = scatter[a].norm() * scatter[b].norm();
            d.cross_trace = denom > 0.0 ? (scatter[a] * scatter[b]).trace() / denom : 0.0;
            double best = std::numeric_limits<double>::infinity();
            for (Eigen::Index i = 0; i < sampled[a].rows(); ++i) {
                for (Eigen::Index j = 0; j < sampled[b].rows(); ++j) {
                    best = std::min(best, (sampled[a].row(i) - sampled[b].row(j)).squaredNorm());
                }
            }
            d.min_distance = std::sqrt(best);
            out.push_back(d);
        }
    }
    return out;
}

void finalize_report(EvalReport& report)
{
    ClassEval mean;
    mean.name = "mean";
    const double n = static_cast<double>(report.classes.size());
    if (report.classes.empty()) {
        report.mean = mean;
        return;
    }
    double accuracy_sum = 0.0;
    std::size_t accuracy_count = 0;
    for (const auto& c : report.classes) {
        mean.o_auroc += c.o_auroc / n;
        mean.o_aupr += c.o_aupr / n;
        mean.p_auroc += c.p_auroc / n;
        mean.p_aupr += c.p_aupr / n;
        mean.mean_shift += c.mean_shift / n;
        mean.var_shift += c.var_shift / n;
        mean.comparisons_per_query += c.comparisons_per_query / n;
        mean.semantic_count = c.semantic_count;
        if (c.partition_accuracy) {
            accuracy_sum += *c.partition_accuracy;
            ++accuracy_count;
        }
    }
    if (accuracy_count > 0) {
        mean.partition_accuracy = accuracy_sum / static_cast<double>(accuracy_count);
    }
    report.mean = mean;
}

namespace {

void csv_row(std::ostringstream& os, const ClassEval& c)
{
    os << c.name << ',' << format_double(c.o_auroc) << ',' << format_double(c.o_aupr) << ','
       << format_double(c.p_auroc) << ',' << format_double(c.p_aupr) << ','
       << (c.partition_accuracy ? format_double(*c.partition_accuracy) : std::string()) << ',' << c.semantic_count
       << ',' << format_double(c.mean_shift) << ',' << format_double(c.var_shift) << ','
       << format_double(c.comparisons_per_query) << '\n';
}

std::vector<std::string> split_csv(const std::string& line)
{
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) {
        out.push_back(field);
    }
    if (!line.empty() && line.back() == ',') {
        out.emplace_back();
    }
    return out;
}

} // namespace

std::string eval_report_csv(const EvalReport& report)
{
    std::ostringstream os;
    os << kEvalCsvHeader << '\n';
    for (const auto& c : report.classes) {
        csv_row(os, c);
    }
    csv_row(os, report.mean);
    return os.str();
}

EvalReport parse_eval_report_csv(const std::string& text)
{
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != kEvalCsvHeader) {
        throw Error(ErrorKind::ParseError, "eval CSV: unexpected header");
    }
    EvalReport report;
    bool have_mean = false;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        const auto f = split_csv(line);
        if (f.size() != 10) {
            throw Error(ErrorKind::ParseError, "eval CSV: expected 10 columns in '" + line + "'");
        }
        ClassEval c;
        c.name = f[0];
        c.o_auroc = parse_double(f[1]);
        c.o_aupr = parse_double(f[2]);
        c.p_auroc = parse_double(f[3]);
        c.p_aupr = parse_double(f[4]);
        if (!f[5].empty()) {
            c.partition_accuracy = parse_double(f[5]);
        }
        c.semantic_count = static_cast<std::size_t>(std::stoull(f[6]));
        c.mean_shift = parse_double(f[7]);
        c.var_shift = parse_double(f[8]);
        c.comparisons_per_query = parse_double(f[9]);
        if (c.name == "mean") {
            report.mean = c;
            have_mean = true;
        } else {
            report.classes.push_back(c);
        }
    }
    if (!have_mean) {
        throw Error(ErrorKind::ParseError, "eval CSV: missing mean row");
    }
    return report;
}

std::string eval_report_text(const EvalReport& report)
{
    std::ostringstream os;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-16s %8s %8s %8s %8s %8s %4s %12s\n", "class", "O-AUROC", "O-AUPR", "P-AUROC",
                  "P-AUPR", "Ac.", "Nub.", "cmp/query");
    os << buf;
    auto line = [&](const ClassEval& c) {
        char acc[16] = "-";
        if (c.partition_accuracy) {
            std::snprintf(acc, sizeof acc, "%.4f", *c.partition_accuracy);
        }
        std::snprintf(buf, sizeof buf, "%-16s %8.4f %8.4f %8.4f %8.4f %8s %4zu %12.1f\n", c.name.c_str(), c.o_auroc,
                      c.o_aupr, c.p_auroc, c.p_aupr, acc, c.semantic_count, c.comparisons_per_query);
        os << buf;
    };
    for (const auto& c : report.classes) {
        line(c);
    }
    line(report.mean);
    return os.str();
}

} // namespace patch3d
