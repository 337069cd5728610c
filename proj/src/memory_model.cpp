#include "patch3d/memory_model.hpp"

#include "patch3d/config.hpp"
#include "patch3d/error.hpp"
#include "patch3d/patch_matching.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <type_traits>

namespace patch3d {

void PipelineParams::validate() const
{
    fpfh.validate();
    cut.validate();
    if (!(object_top_fraction >= 0.0 && object_top_fraction <= 1.0)) {
        throw Error(ErrorKind::InvalidArgument, "object_top_fraction must lie in [0, 1]");
    }
}

FeaturedCloud featurize(const PointCloud& cloud, const PipelineParams& params)
{
    params.validate();
    PointCloud prepared = params.normalize ? normalize_cloud(cloud) : cloud;
    auto normals = estimate_normals(prepared, params.fpfh.normal_k);
    FeaturedCloud out;
    out.features = compute_fpfh(normals.cloud, params.fpfh);
    out.cloud = std::move(normals.cloud);
    out.normal_degenerate = std::move(normals.degenerate);
    return out;
}

SemanticPartition partition_cloud(const PointCloud& cloud, const CutParams& params)
{
    return rank_partition(cloud, cut(cloud, params));
}

void BankProbe::record(std::size_t bank_id, std::size_t rows)
{
    if (bank != static_cast<std::int32_t>(bank_id)) {
        ++distinct_banks;
        bank = static_cast<std::int32_t>(bank_id);
    }
    comparisons += rows;
}

MemoryBankSet::MemoryBankSet(std::vector<std::vector<double>> banks, PipelineParams params)
    : banks_(std::move(banks)), params_(params)
{
    for (const auto& b : banks_) {
        if (b.size() % kFeatureDim != 0) {
            throw Error(ErrorKind::InvalidArgument, "bank storage is not a whole number of rows");
        }
    }
}

std::vector<std::size_t> MemoryBankSet::sizes() const
{
    std::vector<std::size_t> out;
    out.reserve(banks_.size());
    for (std::size_t i = 0; i < banks_.size(); ++i) {
        out.push_back(bank_size(i));
    }
    return out;
}

std::size_t MemoryBankSet::total_rows() const
{
    std::size_t total = 0;
    for (std::size_t i = 0; i < banks_.size(); ++i) {
        total += bank_size(i);
    }
    return total;
}

std::span<const double, kFeatureDim> MemoryBankSet::row(std::size_t bank, std::size_t r) const
{
    return std::span<const double, kFeatureDim>(banks_.at(bank).data() + r * kFeatureDim, kFeatureDim);
}

namespace {

// Squared distance with early exit once `bound` is exceeded. Accumulation
// order is fixed, so results do not depend on the bound.
inline double squared_distance_bounded(const double* a, const double* b, double bound)
{
    double acc[4] = {0.0, 0.0, 0.0, 0.0};
    for (std::size_t d = 0; d < 16; d += 4) {
        for (std::size_t j = 0; j < 4; ++j) {
            const double diff = a[d + j] - b[d + j];
            acc[j] += diff * diff;
        }
    }
    if ((acc[0] + acc[1]) + (acc[2] + acc[3]) > bound) {
        return std::numeric_limits<double>::infinity();
    }
    for (std::size_t d = 16; d < 32; d += 4) {
        for (std::size_t j = 0; j < 4; ++j) {
            const double diff = a[d + j] - b[d + j];
            acc[j] += diff * diff;
        }
    }
    const double diff = a[32] - b[32];
    return (acc[0] + acc[1]) + (acc[2] + acc[3]) + diff * diff;
}

} // namespace

NearestHit MemoryBankSet::nearest(std::size_t bank, std::span<const double, kFeatureDim> query, BankProbe* probe) const
{
    if (bank >= banks_.size()) {
        throw Error(ErrorKind::InvalidArgument, "semantic id " + std::to_string(bank) + " has no bank");
    }
    const auto& rows = banks_[bank];
    const std::size_t count = rows.size() / kFeatureDim;
    if (count == 0) {
        throw EmptyBankError(bank);
    }
    if (probe != nullptr) {
        probe->record(bank, count);
    }
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_row = 0;
    const double* q = query.data();
    const double* base = rows.data();
    for (std::size_t r = 0; r < count; ++r) {
        const double d2 = squared_distance_bounded(q, base + r * kFeatureDim, best);
        if (d2 < best) {
            best = d2;
            best_row = r;
        }
    }
    return {std::sqrt(best), best_row};
}

void MemoryBankSet::add_rows(std::size_t bank, std::span<const double> rows)
{
    if (rows.size() % kFeatureDim != 0) {
        throw Error(ErrorKind::InvalidArgument, "add_rows: partial row");
    }
    auto& target = banks_.at(bank);
    target.insert(target.end(), rows.begin(), rows.end());
}

MemoryBankSet build_banks(std::span<const FeaturedCloud> clouds, std::span<const SemanticPartition> partitions,
                          const PipelineParams& params)
{
    if (clouds.size() != partitions.size()) {
        throw Error(ErrorKind::InvalidArgument, "build_banks: one partition per cloud required");
    }
    if (clouds.empty()) {
        throw Error(ErrorKind::EmptyInput, "build_banks: no training clouds");
    }
    const std::size_t k = partitions.front().k;
    for (std::size_t c = 0; c < clouds.size(); ++c) {
        const auto& part = partitions[c];
        if (part.k != k) {
            throw Error(ErrorKind::InvalidArgument, "build_banks: partitions disagree on k");
        }
        if (!part.ranked()) {
            throw Error(ErrorKind::PreconditionFailed, "build_banks: partition is not ranked");
        }
        if (part.labels.size() != clouds[c].features.rows()) {
            throw Error(ErrorKind::PreconditionFailed, "build_banks: partition does not match features");
        }
    }
    std::vector<std::vector<double>> banks(k);
    for (std::size_t c = 0; c < clouds.size(); ++c) {
        const auto& feats = clouds[c].features;
        for (std::size_t i = 0; i < feats.rows(); ++i) {
            if (feats.degenerate(i)) {
                continue;
            }
            const auto r = feats.row(i);
            auto& bank = banks[partitions[c].semantic_of(i)];
            bank.insert(bank.end(), r.begin(), r.end());
        }
    }
    for (std::size_t b = 0; b < k; ++b) {
        if (banks[b].empty()) {
            throw EmptyBankError(b);
        }
    }
    PipelineParams stored = params;
    stored.cut.k = k;
    return MemoryBankSet(std::move(banks), stored);
}

MemoryBankSet build_banks(std::span<const PointCloud> clouds, std::span<const SemanticPartition> partitions,
                          const FpfhParams& fpfh)
{
    std::vector<FeaturedCloud> featured;
    featured.reserve(clouds.size());
    for (const auto& cloud : clouds) {
        FeaturedCloud f;
        f.features = compute_fpfh(cloud, fpfh);
        f.cloud = cloud;
        featured.push_back(std::move(f));
    }
    PipelineParams params;
    params.fpfh = fpfh;
    return build_banks(featured, partitions, params);
}

MemoryBankSet fit(std::span<const PointCloud> training, const PipelineParams& params)
{
    std::vector<FeaturedCloud> featured;
    std::vector<SemanticPartition> partitions;
    featured.reserve(training.size());
    partitions.reserve(training.size());
    for (const auto& cloud : training) {
        featured.push_back(featurize(cloud, params));
        partitions.push_back(partition_cloud(featured.back().cloud, params.cut));
    }
    return build_banks(featured, partitions, params);
}

double score_point(std::span<const double, kFeatureDim> feature, std::size_t semantic, const MemoryBankSet& banks)
{
    return banks.nearest(semantic, feature).distance;
}

double object_score(std::span<const double> point_scores, double top_fraction)
{
    if (point_scores.empty()) {
        return 0.0;
    }
    if (top_fraction <= 0.0) {
        return *std::max_element(point_scores.begin(), point_scores.end());
    }
    std::vector<double> sorted(point_scores.begin(), point_scores.end());
    const auto take = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(top_fraction * static_cast<double>(sorted.size()))));
    std::partial_sort(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(take), sorted.end(),
                      std::greater<>());
    double sum = 0.0;
    for (std::size_t i = 0; i < take; ++i) {
        sum += sorted[i];
    }
    return sum / static_cast<double>(take);
}

ScoreReport score_featured(const FeaturedCloud& cloud, const SemanticPartition& partition, const MemoryBankSet& banks)
{
    if (partition.k != banks.k()) {
        throw Error(ErrorKind::PreconditionFailed, "score: partition k differs from bank count");
    }
    if (!partition.ranked()) {
        throw Error(ErrorKind::PreconditionFailed, "score: partition is not ranked");
    }
    const std::size_t n = cloud.features.rows();
    ScoreReport report;
    report.point_scores.assign(n, 0.0);
    report.semantic_of_point.assign(n, 0);
    report.degenerate.assign(n, false);
    report.consulted_bank.assign(n, -1);
    report.banks_consulted.assign(n, 0);
    std::vector<std::uint64_t> comparisons(n, 0);
    std::vector<char> degenerate(n, 0);

    for (std::size_t b = 0; b < banks.k(); ++b) {
        if (banks.bank_size(b) == 0) {
            throw EmptyBankError(b);
        }
    }

#pragma omp parallel for schedule(dynamic, 64)
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t semantic = partition.semantic_of(i);
        report.semantic_of_point[i] = semantic;
        if (cloud.features.degenerate(i)) {
            degenerate[i] = 1;
            continue;
        }
        BankProbe probe;
        report.point_scores[i] = banks.nearest(semantic, cloud.features.row(i), &probe).distance;
        report.consulted_bank[i] = probe.bank;
        report.banks_consulted[i] = probe.distinct_banks;
        comparisons[i] = probe.comparisons;
    }
    for (std::size_t i = 0; i < n; ++i) {
        report.degenerate[i] = degenerate[i] != 0;
        report.comparisons_made += comparisons[i];
    }
    report.object_score = object_score(report.point_scores, banks.params().object_top_fraction);
    return report;
}

ScoreReport score_cloud(const PointCloud& cloud, const MemoryBankSet& banks, const PipelineParams& params)
{
    if (params.cut.k != banks.k()) {
        throw Error(ErrorKind::PreconditionFailed, "score: k differs from the fitted banks");
    }
    if (!(params.fpfh == banks.params().fpfh) || params.normalize != banks.params().normalize) {
        throw Error(ErrorKind::PreconditionFailed, "score: feature parameters differ from the fitted banks");
    }
    const auto featured = featurize(cloud, params);
    const auto partition = partition_cloud(featured.cloud, params.cut);
    return score_featured(featured, partition, banks);
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

constexpr char kMagic[4] = {'P', '3', 'D', 'B'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put_le(std::ostream& os, T value)
{
    static_assert(std::is_trivially_copyable_v<T>);
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(value);
    if constexpr (std::endian::native == std::endian::big) {
        std::reverse(bytes.begin(), bytes.end());
    }
    os.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <class T>
T get_le(std::istream& is, const std::filesystem::path& path)
{
    std::array<unsigned char, sizeof(T)> bytes{};
    const auto offset = static_cast<std::uint64_t>(is.tellg());
    if (!is.read(reinterpret_cast<char*>(bytes.data()), sizeof(T))) {
        throw ParseError("truncated bank file " + path.string(), offset);
    }
    if constexpr (std::endian::native == std::endian::big) {
        std::reverse(bytes.begin(), bytes.end());
    }
    return std::bit_cast<T>(bytes);
}

std::filesystem::path meta_path(const std::filesystem::path& path)
{
    return path.string() + ".meta";
}

} // namespace

void save_banks(const MemoryBankSet& banks, const std::filesystem::path& path)
{
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) {
        throw Error(ErrorKind::IoError, "cannot open " + path.string() + " for writing");
    }
    os.write(kMagic, 4);
    put_le<std::uint32_t>(os, kVersion);
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(banks.k()));
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(kFeatureDim));
    for (std::size_t b = 0; b < banks.k(); ++b) {
        put_le<std::uint64_t>(os, banks.bank_size(b));
    }
    for (std::size_t b = 0; b < banks.k(); ++b) {
        for (double x : banks.bank_data(b)) {
            put_le<double>(os, x);
        }
    }
    if (!os) {
        throw Error(ErrorKind::IoError, "write failed for " + path.string());
    }

    const auto& p = banks.params();
    KeyValues meta;
    meta.set("format", "P3DB");
    meta.set("version", std::to_string(kVersion));
    meta.set("k", std::to_string(banks.k()));
    meta.set("dim", std::to_string(kFeatureDim));
    meta.set("normalize", p.normalize ? "true" : "false");
    meta.set("normal_k", std::to_string(p.fpfh.normal_k));
    meta.set("feature_k", std::to_string(p.fpfh.feature_k));
    meta.set("delta", format_double(p.cut.delta));
    meta.set("max_iters", std::to_string(p.cut.max_iters));
    meta.set("seed", std::to_string(p.cut.seed));
    meta.set("object_top_fraction", format_double(p.object_top_fraction));
    std::string counts;
    for (std::size_t b = 0; b < banks.k(); ++b) {
        counts += (b ? "," : "") + std::to_string(banks.bank_size(b));
    }
    meta.set("bank_sizes", counts);
    write_key_values(meta, meta_path(path));
}

MemoryBankSet load_banks(const std::filesystem::path& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw Error(ErrorKind::IoError, "cannot open " + path.string());
    }
    char magic[4] = {};
    if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
        throw ParseError("bad magic in " + path.string(), 0);
    }
    const auto version = get_le<std::uint32_t>(is, path);
    if (version != kVersion) {
        throw ParseError("unsupported bank version " + std::to_string(version), 4);
    }
    const auto k = get_le<std::uint32_t>(is, path);
    const auto dim = get_le<std::uint32_t>(is, path);
    if (dim != kFeatureDim) {
        throw ParseError("bank dimension must be 33", 12);
    }
    std::vector<std::uint64_t> counts(k);
    for (auto& c : counts) {
        c = get_le<std::uint64_t>(is, path);
    }
    // Check the payload size before allocating anything.
    const auto payload_start = static_cast<std::uint64_t>(is.tellg());
    const auto file_size = static_cast<std::uint64_t>(std::filesystem::file_size(path));
    std::uint64_t expected = 0;
    for (auto c : counts) {
        expected += c * kFeatureDim * sizeof(double);
    }
    if (file_size - payload_start < expected) {
        throw ParseError("truncated bank file " + path.string(), file_size);
    }
    if (file_size - payload_start > expected) {
        throw ParseError("trailing bytes in " + path.string(), payload_start + expected);
    }
    std::vector<std::vector<double>> banks(k);
    for (std::uint32_t b = 0; b < k; ++b) {
        banks[b].resize(counts[b] * kFeatureDim);
        for (auto& x : banks[b]) {
            x = get_le<double>(is, path);
        }
    }

    PipelineParams params;
    const auto meta_file = meta_path(path);
    if (std::filesystem::exists(meta_file)) {
        const auto meta = read_key_values(meta_file);
        params.normalize = meta.get_bool("normalize", params.normalize);
        params.fpfh.normal_k = meta.get_size("normal_k", params.fpfh.normal_k);
        params.fpfh.feature_k = meta.get_size("feature_k", params.fpfh.feature_k);
        params.cut.delta = meta.get_double("delta", params.cut.delta);
        params.cut.max_iters = meta.get_size("max_iters", params.cut.max_iters);
        params.cut.seed = meta.get_size("seed", params.cut.seed);
        params.object_top_fraction = meta.get_double("object_top_fraction", params.object_top_fraction);
    }
    params.cut.k = k;
    return MemoryBankSet(std::move(banks), params);
}

} // namespace patch3d
