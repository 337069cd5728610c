#include "patch3d/anomaly_synth.hpp"
#include "patch3d/error.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

using namespace patch3d;

namespace {

const ShapeKind kAllShapes[] = {ShapeKind::Sphere, ShapeKind::Cylinder, ShapeKind::Torus, ShapeKind::Superellipsoid};

} // namespace

TEST_CASE("shape names")
{
    for (auto kind : kAllShapes) {
        CHECK(parse_shape(to_string(kind)) == kind);
    }
    CHECK_FALSE(parse_shape("cube").has_value());
}

TEST_CASE("noise-free sphere lies on the unit sphere")
{
    const auto c = make_shape(SynthSpec{ShapeKind::Sphere, 3000, 0.0, 4});
    REQUIRE(c.size() == 3000);
    for (const auto& p : c.points) {
        CHECK(std::abs(p.norm() - 1.0) <= 1e-9);
    }
}

TEST_CASE("noise-free shapes fit inside the unit ball and touch it")
{
    for (auto kind : kAllShapes) {
        const auto c = make_shape(SynthSpec{kind, 5000, 0.0, 8});
        double far = 0.0;
        for (const auto& p : c.points) {
            far = std::max(far, p.norm());
            CHECK(std::abs(surface_residual(kind, p)) <= 1e-9);
        }
        CHECK(far <= 1.0 + 1e-6);
        CHECK(far >= 0.97);
        REQUIRE(c.has_normals());
        for (const auto& n : *c.normals) {
            CHECK(std::abs(n.norm() - 1.0) <= 1e-12);
        }
    }
}

TEST_CASE("noisy surfaces stay within three sigma")
{
    const double sigma = 0.004;
    for (auto kind : kAllShapes) {
        const auto c = make_shape(SynthSpec{kind, 5000, sigma, 12});
        std::size_t inside = 0;
        for (const auto& p : c.points) {
            inside += std::abs(surface_residual(kind, p)) <= 3.0 * sigma ? 1 : 0;
        }
        CHECK(static_cast<double>(inside) >= 0.99 * 5000.0);
    }
}

TEST_CASE("torus residual matches the implicit equation")
{
    using namespace shape_dims;
    const auto c = make_shape(SynthSpec{ShapeKind::Torus, 5000, 0.0, 3});
    for (const auto& p : c.points) {
        // (x^2 + y^2 + z^2 + R^2 - r^2)^2 = 4 R^2 (x^2 + y^2)
        const double s = p.squaredNorm() + torus_major * torus_major - torus_minor * torus_minor;
        const double rhs = 4.0 * torus_major * torus_major * (p.x() * p.x() + p.y() * p.y());
        CHECK(std::abs(s * s - rhs) <= 1e-9);
    }
}

TEST_CASE("make_shape is deterministic per seed")
{
    for (auto kind : kAllShapes) {
        const auto a = make_shape(SynthSpec{kind, 500, 0.01, 21});
        const auto b = make_shape(SynthSpec{kind, 500, 0.01, 21});
        const auto c = make_shape(SynthSpec{kind, 500, 0.01, 22});
        CHECK(a.points == b.points);
        CHECK(*a.normals == *b.normals);
        CHECK(a.points != c.points);
    }
    CHECK_THROWS_AS(make_shape(SynthSpec{ShapeKind::Sphere, 99, 0.0, 1}), Error);
    CHECK_THROWS_AS(make_shape(SynthSpec{ShapeKind::Sphere, 100, -1.0, 1}), Error);
}

TEST_CASE("zero amplitude leaves the cloud unchanged")
{
    const auto c = make_shape(SynthSpec{ShapeKind::Cylinder, 2000, 0.0, 5});
    const auto out = inject_anomaly(c, AnomalySpec{0.2, 0.0, 0.0, AnomalySign::Bump, 9});
    CHECK(out.points == c.points);
    REQUIRE(out.anomaly_mask.has_value());
    CHECK(std::count(out.anomaly_mask->begin(), out.anomaly_mask->end(), true) > 0);
}

TEST_CASE("mask marks exactly the points within the radius")
{
    for (auto kind : kAllShapes) {
        const auto c = make_shape(SynthSpec{kind, 2000, 0.002, 6});
        AnomalyRegion region;
        const auto out = inject_anomaly(c, AnomalySpec{0.25, 0.04, 0.1, AnomalySign::Random, 17}, region);
        const Vec3 seed = c.points[region.seed_point];
        for (std::size_t i = 0; i < c.size(); ++i) {
            const bool inside = (c.points[i] - seed).norm() <= 0.25;
            CHECK((*out.anomaly_mask)[i] == inside);
            if (!inside) {
                CHECK(out.points[i] == c.points[i]);
            }
        }
        CHECK(std::abs(region.amplitude) >= 0.04);
        CHECK(std::abs(region.amplitude) <= 0.1);
    }
}

TEST_CASE("sphere bump raises radii by the tapered amplitude")
{
    const auto c = make_shape(SynthSpec{ShapeKind::Sphere, 4000, 0.0, 7});
    AnomalyRegion region;
    const double r = 0.3;
    const auto out = inject_anomaly(c, AnomalySpec{r, 0.06, 0.12, AnomalySign::Bump, 3}, region);
    CHECK(region.amplitude >= 0.06);
    const Vec3 seed = c.points[region.seed_point];
    CHECK(out.points[region.seed_point].norm() - 1.0 >= 0.06 * (1.0 - 1e-9));
    for (std::size_t i = 0; i < c.size(); ++i) {
        if (!(*out.anomaly_mask)[i]) {
            continue;
        }
        const double d = (c.points[i] - seed).norm();
        const double falloff = 0.5 * (1.0 + std::cos(std::numbers::pi * d / r));
        CHECK(out.points[i].norm() - 1.0 >= 0.06 * falloff * (1.0 - 1e-9));
        CHECK(out.points[i].norm() - 1.0 == doctest::Approx(region.amplitude * falloff).epsilon(1e-9));
    }

    const auto dent = inject_anomaly(c, AnomalySpec{r, 0.06, 0.12, AnomalySign::Dent, 3}, region);
    CHECK(region.amplitude <= -0.06);
    CHECK(dent.points[region.seed_point].norm() < 1.0);
}

TEST_CASE("inject_anomaly preconditions")
{
    PointCloud bare;
    bare.points = {{0, 0, 0}};
    CHECK_THROWS_AS(inject_anomaly(bare, AnomalySpec{}), Error);
    auto c = make_shape(SynthSpec{ShapeKind::Sphere, 200, 0.0, 1});
    CHECK_THROWS_AS(inject_anomaly(c, AnomalySpec{1.5, 0.0, 0.1, AnomalySign::Bump, 1}), Error);
    CHECK_THROWS_AS(inject_anomaly(c, AnomalySpec{0.2, 0.2, 0.1, AnomalySign::Bump, 1}), Error);
    PointCloud empty;
    empty.normals = std::vector<Vec3>{};
    CHECK_THROWS_AS(inject_anomaly(empty, AnomalySpec{}), Error);
}

TEST_CASE("part labels")
{
    for (auto kind : kAllShapes) {
        const auto c = make_shape(SynthSpec{kind, 3000, 0.0, 2});
        const auto parts = shape_parts(kind, c);
        REQUIRE(parts.size() == c.size());
        std::set<std::size_t> seen(parts.begin(), parts.end());
        CHECK(seen.size() == shape_part_count(kind));
        CHECK(*seen.rbegin() < shape_part_count(kind));
    }
}

TEST_CASE("synthesized dataset layout and determinism")
{
    SynthConfig cfg;
    cfg.shapes = {"sphere", "torus"};
    cfg.points = 300;
    cfg.train_per_class = 2;
    cfg.test_per_class = 5;
    cfg.anomalous_per_class = 3;
    const auto a = synthesize_dataset(cfg, 11);
    const auto b = synthesize_dataset(cfg, 11);
    REQUIRE(a.classes.size() == 2);
    for (std::size_t c = 0; c < 2; ++c) {
        const auto& cls = a.classes[c];
        CHECK(cls.train.size() == 2);
        CHECK(cls.test.size() == 5);
        CHECK(cls.test_parts.size() == 5);
        for (std::size_t j = 0; j < cls.test.size(); ++j) {
            const auto& mask = *cls.test[j].anomaly_mask;
            const bool any = std::find(mask.begin(), mask.end(), true) != mask.end();
            CHECK(any == (j < 3));
            CHECK(cls.test[j].points == b.classes[c].test[j].points);
        }
        for (const auto& t : cls.train) {
            CHECK_FALSE(t.anomaly_mask.has_value());
        }
    }
    CHECK(a.classes[0].train[0].points != a.classes[0].train[1].points);
    CHECK(derive_seed(1, 2, 3, 4) != derive_seed(1, 2, 3, 5));
    CHECK(derive_seed(1, 2, 3, 4) == derive_seed(1, 2, 3, 4));

    cfg.shapes = {"cube"};
    CHECK_THROWS_AS(synthesize_dataset(cfg, 1), Error);
}
