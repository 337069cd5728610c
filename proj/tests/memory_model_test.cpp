#include "patch3d/anomaly_synth.hpp"
#include "patch3d/error.hpp"
#include "patch3d/memory_model.hpp"
#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>

using namespace patch3d;

namespace {

PointCloud synth(ShapeKind kind, std::uint64_t seed, std::size_t n = 1500)
{
    return make_shape(SynthSpec{kind, n, 0.002, seed});
}

std::vector<double> random_rows(std::size_t rows, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> u(0.0, 20.0);
    std::vector<double> out(rows * kFeatureDim);
    for (auto& x : out) {
        x = u(rng);
    }
    return out;
}

double brute_nearest(const std::vector<double>& bank, std::span<const double, kFeatureDim> q)
{
    double best = 1e300;
    for (std::size_t r = 0; r < bank.size() / kFeatureDim; ++r) {
        double s = 0.0;
        for (std::size_t d = 0; d < kFeatureDim; ++d) {
            s += (bank[r * kFeatureDim + d] - q[d]) * (bank[r * kFeatureDim + d] - q[d]);
        }
        best = std::min(best, std::sqrt(s));
    }
    return best;
}

std::filesystem::path temp_dir(const std::string& name)
{
    auto dir = std::filesystem::temp_directory_path() / ("patch3d_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace

TEST_CASE("nearest matches a linear scan")
{
    std::mt19937_64 rng(1);
    auto bank = random_rows(200, rng);
    MemoryBankSet set({bank}, PipelineParams{});
    for (int t = 0; t < 100; ++t) {
        const auto q = random_rows(1, rng);
        const std::span<const double, kFeatureDim> query(q.data(), kFeatureDim);
        CHECK(std::abs(set.nearest(0, query).distance - brute_nearest(bank, query)) <= 1e-12);
    }
    const std::span<const double, kFeatureDim> stored(bank.data() + 7 * kFeatureDim, kFeatureDim);
    const auto hit = set.nearest(0, stored);
    CHECK(hit.distance == 0.0);
    CHECK(hit.row == 7);
}

TEST_CASE("two-row bank arithmetic")
{
    std::vector<double> bank(2 * kFeatureDim, 0.0);
    bank[kFeatureDim] = 100.0;
    MemoryBankSet set({bank}, PipelineParams{});
    std::array<double, kFeatureDim> q{};
    q[0] = 40.0;
    CHECK(set.nearest(0, q).distance == doctest::Approx(40.0));
    CHECK(set.nearest(0, q).row == 0);
    q[0] = 70.0;
    CHECK(set.nearest(0, q).distance == doctest::Approx(30.0));
    CHECK(set.nearest(0, q).row == 1);
    CHECK(score_point(q, 0, set) == doctest::Approx(30.0));
    CHECK_THROWS_AS(score_point(q, 1, set), Error);

    MemoryBankSet with_empty({bank, {}}, PipelineParams{});
    CHECK_THROWS_AS(with_empty.nearest(1, q), EmptyBankError);
}

TEST_CASE("bank counts")
{
    PipelineParams params;
    const auto a = featurize(synth(ShapeKind::Sphere, 1), params);
    const auto degenerate_a = [&] {
        std::size_t d = 0;
        for (std::size_t i = 0; i < a.features.rows(); ++i) {
            d += a.features.degenerate(i);
        }
        return d;
    }();

    params.cut.k = 1;
    std::vector<FeaturedCloud> one{a};
    std::vector<SemanticPartition> one_part{partition_cloud(a.cloud, params.cut)};
    const auto single = build_banks(one, one_part, params);
    CHECK(single.k() == 1);
    CHECK(single.bank_size(0) == a.cloud.size() - degenerate_a);

    params.cut.k = 4;
    std::vector<SemanticPartition> p1{partition_cloud(a.cloud, params.cut)};
    std::vector<FeaturedCloud> twice{a, a};
    std::vector<SemanticPartition> p2{p1[0], p1[0]};
    const auto b1 = build_banks(one, p1, params);
    const auto b2 = build_banks(twice, p2, params);
    for (std::size_t b = 0; b < 4; ++b) {
        CHECK(b2.bank_size(b) == 2 * b1.bank_size(b));
    }

    params.cut.k = 8;
    std::vector<FeaturedCloud> four;
    std::vector<SemanticPartition> parts;
    std::size_t expected = 0;
    for (std::uint64_t s = 0; s < 4; ++s) {
        four.push_back(featurize(synth(ShapeKind::Torus, 10 + s), params));
        parts.push_back(partition_cloud(four.back().cloud, params.cut));
        for (std::size_t i = 0; i < four.back().features.rows(); ++i) {
            expected += four.back().features.degenerate(i) ? 0 : 1;
        }
    }
    const auto banks = build_banks(four, parts, params);
    CHECK(banks.total_rows() == expected);
    const auto sizes = banks.sizes();
    CHECK(std::accumulate(sizes.begin(), sizes.end(), std::size_t{0}) == expected);
    for (std::size_t b = 0; b < banks.k(); ++b) {
        for (std::size_t r = 0; r < banks.bank_size(b); ++r) {
            const auto row = banks.row(b, r);
            for (int block = 0; block < 3; ++block) {
                double s = 0.0;
                for (int j = 0; j < 11; ++j) {
                    CHECK(row[block * 11 + j] >= 0.0);
                    s += row[block * 11 + j];
                }
                CHECK(std::abs(s - 100.0) <= 1e-6);
            }
        }
    }
}

TEST_CASE("build_banks preconditions")
{
    PipelineParams params;
    params.cut.k = 2;
    const auto a = featurize(synth(ShapeKind::Sphere, 2, 300), params);
    std::vector<FeaturedCloud> clouds{a};
    std::vector<SemanticPartition> none;
    CHECK_THROWS_AS(build_banks(clouds, none, params), Error);
    std::vector<SemanticPartition> unranked{cut(a.cloud, params.cut)};
    CHECK_THROWS_AS(build_banks(clouds, unranked, params), Error);
    std::vector<FeaturedCloud> empty;
    CHECK_THROWS_AS(build_banks(empty, none, params), Error);
}

TEST_CASE("self-retrieval scores are zero")
{
    PipelineParams params;
    params.cut.k = 4;
    std::vector<PointCloud> train;
    for (std::uint64_t s = 0; s < 3; ++s) {
        train.push_back(synth(ShapeKind::Cylinder, 20 + s));
    }
    const auto banks = fit(train, params);
    for (const auto& cloud : train) {
        const auto report = score_cloud(cloud, banks, params);
        for (std::size_t i = 0; i < cloud.size(); ++i) {
            if (!report.degenerate[i]) {
                CHECK(report.point_scores[i] == 0.0);
            }
        }
        CHECK(report.object_score == 0.0);
    }
}

TEST_CASE("a planted bump stands out")
{
    PipelineParams params;
    params.cut.k = 4;
    std::vector<PointCloud> train;
    for (std::uint64_t s = 0; s < 4; ++s) {
        train.push_back(synth(ShapeKind::Sphere, 30 + s, 3000));
    }
    const auto banks = fit(train, params);
    const auto clean = synth(ShapeKind::Sphere, 99, 3000);
    const auto bumped = inject_anomaly(clean, AnomalySpec{0.2, 0.09, 0.09, AnomalySign::Bump, 5});
    const auto report = score_cloud(bumped, banks, params);

    std::vector<double> anomalous, normal;
    for (std::size_t i = 0; i < bumped.size(); ++i) {
        ((*bumped.anomaly_mask)[i] ? anomalous : normal).push_back(report.point_scores[i]);
    }
    REQUIRE(anomalous.size() > 10);
    std::sort(anomalous.begin(), anomalous.end());
    std::sort(normal.begin(), normal.end());
    CHECK(anomalous[anomalous.size() / 2] > normal[normal.size() * 95 / 100]);
}

TEST_CASE("scoring consults exactly one bank and counts comparisons")
{
    PipelineParams params;
    std::vector<PointCloud> train;
    for (std::uint64_t s = 0; s < 3; ++s) {
        train.push_back(synth(ShapeKind::Superellipsoid, 40 + s));
    }
    const auto test = synth(ShapeKind::Superellipsoid, 77);

    params.cut.k = 1;
    const auto flat = fit(train, params);
    const auto flat_report = score_cloud(test, flat, params);
    for (std::size_t i = 0; i < test.size(); ++i) {
        if (!flat_report.degenerate[i]) {
            CHECK(flat_report.banks_consulted[i] == 1);
        }
    }
    const auto queries = static_cast<std::uint64_t>(
        std::count(flat_report.degenerate.begin(), flat_report.degenerate.end(), false));
    CHECK(flat_report.comparisons_made == queries * flat.total_rows());

    params.cut.k = 8;
    const auto banks = fit(train, params);
    const double per_bank = static_cast<double>(banks.total_rows()) / 8.0;
    for (auto size : banks.sizes()) {
        CHECK(static_cast<double>(size) >= per_bank / 1.5);
        CHECK(static_cast<double>(size) <= per_bank * 1.5);
    }
    const auto report = score_cloud(test, banks, params);
    std::uint64_t expected = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
        if (report.degenerate[i]) {
            continue;
        }
        CHECK(report.banks_consulted[i] == 1);
        CHECK(report.consulted_bank[i] == static_cast<std::int32_t>(report.semantic_of_point[i]));
        expected += banks.bank_size(report.semantic_of_point[i]);
    }
    CHECK(report.comparisons_made == expected);

    PipelineParams wrong = params;
    wrong.cut.k = 4;
    CHECK_THROWS_AS(score_cloud(test, banks, wrong), Error);
    wrong = params;
    wrong.fpfh.feature_k = 10;
    CHECK_THROWS_AS(score_cloud(test, banks, wrong), Error);
}

TEST_CASE("object score")
{
    const std::vector<double> s{0.1, 0.9, 0.3, 0.5};
    CHECK(object_score(s, 0.0) == 0.9);
    CHECK(object_score(s, 0.5) == doctest::Approx(0.7));
    CHECK(object_score(s, 1.0) == doctest::Approx(0.45));
}

TEST_CASE("bank files round-trip")
{
    std::mt19937_64 rng(5);
    PipelineParams params;
    params.cut.k = 3;
    params.fpfh.feature_k = 12;
    params.object_top_fraction = 0.01;
    MemoryBankSet set({random_rows(10, rng), random_rows(4, rng), random_rows(7, rng)}, params);
    const auto dir = temp_dir("banks");
    save_banks(set, dir / "b.p3db");
    const auto back = load_banks(dir / "b.p3db");
    CHECK(back == set);
    CHECK(std::filesystem::file_size(dir / "b.p3db") == 4 + 4 + 4 + 4 + 3 * 8 + 21 * kFeatureDim * 8);

    // Truncation and bad magic are parse errors.
    {
        std::ifstream in(dir / "b.p3db", std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        std::ofstream cut_file(dir / "cut.p3db", std::ios::binary);
        cut_file.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 5));
        std::ofstream bad(dir / "bad.p3db", std::ios::binary);
        bytes[0] = 'X';
        bad.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    CHECK_THROWS_AS(load_banks(dir / "cut.p3db"), ParseError);
    CHECK_THROWS_AS(load_banks(dir / "bad.p3db"), ParseError);
    CHECK_THROWS_AS(load_banks(dir / "missing.p3db"), Error);
    std::filesystem::remove_all(dir);
}
