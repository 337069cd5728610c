#include "patch3d/error.hpp"
#include "patch3d/eval_metrics.hpp"
#include "oracles.hpp"
#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <numeric>

using namespace patch3d;

using test_support::pairwise_auroc;
using test_support::threshold_aupr;

TEST_CASE("AUROC trivial cases")
{
    const std::vector<double> s{0.1, 0.2, 0.8, 0.9};
    CHECK(auroc(s, std::vector<bool>{false, false, true, true}) == 1.0);
    CHECK(auroc(s, std::vector<bool>{true, true, false, false}) == 0.0);
    CHECK(auroc(std::vector<double>{1, 1, 1, 1}, std::vector<bool>{true, false, true, false}) == 0.5);
    CHECK_THROWS_AS(auroc(s, std::vector<bool>{true, true, true, true}), Error);
    CHECK_THROWS_AS(auroc(s, std::vector<bool>{true}), Error);
}

TEST_CASE("AUPR trivial cases")
{
    const std::vector<double> s{0.1, 0.2, 0.8, 0.9};
    CHECK(aupr(s, std::vector<bool>{false, false, true, true}) == 1.0);
    CHECK(aupr(s, std::vector<bool>{true, false, false, false}) == doctest::Approx(0.25));
    CHECK(aupr(std::vector<double>{1, 1, 1, 1}, std::vector<bool>{true, false, false, false}) == doctest::Approx(0.25));
    CHECK_THROWS_AS(aupr(s, std::vector<bool>{false, false, false, false}), Error);
}

TEST_CASE("AUROC and AUPR match brute-force oracles")
{
    std::mt19937_64 rng(1);
    for (int t = 0; t < 1000; ++t) {
        const std::size_t n = 2 + rng() % 199;
        std::vector<double> s(n);
        std::vector<bool> y(n);
        const bool coarse = t % 3 == 0;  // coarse scores force ties
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = coarse ? static_cast<double>(rng() % 5) : std::uniform_real_distribution<double>(0, 1)(rng);
            y[i] = rng() % 3 == 0;
        }
        y[0] = true;
        y[1] = false;
        CHECK(std::abs(auroc(s, y) - pairwise_auroc(s, y)) <= 1e-9);
        CHECK(std::abs(aupr(s, y) - threshold_aupr(s, y)) <= 1e-9);
    }
}

TEST_CASE("AUPR of random scores approaches the prevalence")
{
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<double> s(20000);
    std::vector<bool> y(20000);
    for (std::size_t i = 0; i < s.size(); ++i) {
        s[i] = u(rng);
        y[i] = u(rng) < 0.2;
    }
    CHECK(aupr(s, y) == doctest::Approx(0.2).epsilon(0.1));
    CHECK(auroc(s, y) == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("partition accuracy against enumeration of label maps")
{
    std::mt19937_64 rng(3);
    for (int t = 0; t < 100; ++t) {
        std::vector<std::size_t> pred(50), truth(50);
        for (std::size_t i = 0; i < 50; ++i) {
            truth[i] = rng() % 3;
            pred[i] = rng() % 4 == 0 ? rng() % 3 : (truth[i] + 1) % 3;
        }
        std::array<std::size_t, 3> perm{0, 1, 2};
        double best = 0.0;
        do {
            double hits = 0.0;
            for (std::size_t i = 0; i < 50; ++i) {
                hits += perm[pred[i]] == truth[i] ? 1.0 : 0.0;
            }
            best = std::max(best, hits / 50.0);
        } while (std::next_permutation(perm.begin(), perm.end()));
        CHECK(partition_accuracy(pred, truth) == doctest::Approx(best).epsilon(1e-12));
    }
    const std::vector<std::size_t> a{0, 0, 1, 1}, b{5, 5, 2, 2};
    CHECK(partition_accuracy(a, b) == 1.0);
}

TEST_CASE("max weight assignment")
{
    const std::vector<std::vector<double>> w{{1, 9, 2}, {8, 1, 1}, {1, 1, 7}};
    CHECK(max_weight_assignment(w) == std::vector<std::size_t>{1, 0, 2});
}

TEST_CASE("shift statistics")
{
    std::mt19937_64 rng(4);
    const auto a = test_support::random_cloud(500, rng);
    const auto b = test_support::transformed(a, Eigen::Matrix3d::Identity(), Vec3(0.3, -0.6, 0.0));
    const std::vector<PointCloud> aa{a}, bb{b};
    const auto s = shift_stats(std::span<const PointCloud>(aa), std::span<const PointCloud>(bb));
    CHECK(s.mean_diff == doctest::Approx(0.3).epsilon(1e-9));
    CHECK(s.mean_diff_per_dim[0] == doctest::Approx(0.3).epsilon(1e-9));
    CHECK(s.mean_diff_per_dim[1] == doctest::Approx(0.6).epsilon(1e-9));
    CHECK(s.var_diff <= 1e-12);

    // Scaling by 2 quadruples the variance.
    std::vector<double> rows_a, rows_b;
    for (const auto& p : a.points) {
        for (int d = 0; d < 3; ++d) {
            rows_a.push_back(p[d]);
            rows_b.push_back(2.0 * p[d]);
        }
    }
    const auto scaled = shift_stats(rows_a, rows_b, 3);
    for (int d = 0; d < 3; ++d) {
        double mean = 0.0, var = 0.0;
        for (const auto& p : a.points) {
            mean += p[d] / 500.0;
        }
        for (const auto& p : a.points) {
            var += (p[d] - mean) * (p[d] - mean) / 500.0;
        }
        CHECK(scaled.mean_diff_per_dim[d] == doctest::Approx(std::abs(mean)).epsilon(1e-9));
        CHECK(scaled.var_diff_per_dim[d] == doctest::Approx(3.0 * var).epsilon(1e-9));
    }
    CHECK_THROWS_AS(shift_stats(rows_a, std::vector<double>{1.0, 2.0}, 3), Error);
}

TEST_CASE("orthogonality diagnostic")
{
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    std::vector<double> a(40 * kFeatureDim, 0.0), b(30 * kFeatureDim, 0.0);
    for (std::size_t r = 0; r < 40; ++r) {
        for (std::size_t d = 0; d < 11; ++d) {
            a[r * kFeatureDim + d] = u(rng);
        }
    }
    for (std::size_t r = 0; r < 30; ++r) {
        for (std::size_t d = 11; d < 22; ++d) {
            b[r * kFeatureDim + d] = u(rng);
        }
    }
    const MemoryBankSet set({a, b, a}, PipelineParams{});
    const auto diag = orthogonality_diag(set);
    REQUIRE(diag.size() == 3);
    CHECK(diag[0].bank_a == 0);
    CHECK(diag[0].bank_b == 1);
    CHECK(std::abs(diag[0].cross_trace) <= 1e-12);
    CHECK(diag[1].bank_b == 2);
    CHECK(diag[1].cross_trace == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(diag[1].min_distance == 0.0);

    double best = 1e300;
    for (std::size_t i = 0; i < 40; ++i) {
        for (std::size_t j = 0; j < 30; ++j) {
            double s = 0.0;
            for (std::size_t d = 0; d < kFeatureDim; ++d) {
                const double x = a[i * kFeatureDim + d] - b[j * kFeatureDim + d];
                s += x * x;
            }
            best = std::min(best, std::sqrt(s));
        }
    }
    CHECK(diag[0].min_distance == doctest::Approx(best).epsilon(1e-12));

    const MemoryBankSet one({a}, PipelineParams{});
    CHECK_THROWS_AS(orthogonality_diag(one), Error);
}

TEST_CASE("eval report CSV round trip")
{
    EvalReport r;
    ClassEval c;
    c.name = "sphere";
    c.o_auroc = 0.75;
    c.o_aupr = 1.0 / 3.0;
    c.p_auroc = 0.912345678901234;
    c.p_aupr = 0.1;
    c.partition_accuracy = 0.875;
    c.semantic_count = 8;
    c.mean_shift = 1e-17;
    c.var_shift = 0.25;
    c.comparisons_per_query = 1234.5;
    r.classes.push_back(c);
    c.name = "torus";
    c.partition_accuracy.reset();
    c.p_auroc = 0.5;
    r.classes.push_back(c);
    finalize_report(r);
    CHECK(r.mean.name == "mean");
    CHECK(r.mean.p_auroc == doctest::Approx((0.912345678901234 + 0.5) / 2.0));
    REQUIRE(r.mean.partition_accuracy.has_value());
    CHECK(*r.mean.partition_accuracy == 0.875);

    const auto text = eval_report_csv(r);
    const auto back = parse_eval_report_csv(text);
    REQUIRE(back.classes.size() == 2);
    CHECK(eval_report_csv(back) == text);
    CHECK(back.classes[0].p_auroc == r.classes[0].p_auroc);
    CHECK(back.classes[0].o_aupr == r.classes[0].o_aupr);
    CHECK_FALSE(back.classes[1].partition_accuracy.has_value());
    CHECK_FALSE(eval_report_text(r).empty());
    CHECK_THROWS_AS(parse_eval_report_csv("bogus\n"), Error);
}
