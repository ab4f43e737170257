#include "doctest.h"
#include "test_helpers.hpp"

#include "nrreval/cps_warp.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace nrreval;

namespace
{

const Dims kGrid = Dims::make2(141, 141);

// 13-point finite-difference biharmonic operator.
double biharmonic(const Eigen::Vector2d& p, const Eigen::Vector2d& v, double h)
{
    const auto g = [&](double dx, double dy) { return cps_green(p + Eigen::Vector2d(dx, dy), v); };
    const double s = 20.0 * g(0, 0) - 8.0 * (g(h, 0) + g(-h, 0) + g(0, h) + g(0, -h)) +
                     2.0 * (g(h, h) + g(h, -h) + g(-h, h) + g(-h, -h)) + g(2 * h, 0) + g(-2 * h, 0) + g(0, 2 * h) +
                     g(0, -2 * h);
    return s / (h * h * h * h);
}

double smooth(double x, double y) { return 50.0 + 20.0 * std::sin(x / 9.0) * std::cos(y / 11.0); }

} // namespace

TEST_CASE("clamped-plate Green's function closed form")
{
    CHECK(cps_green({0, 0}, {0, 0}) == 1.0);
    CHECK(cps_green({0.5, 0.0}, {0.5, 0.0}) == doctest::Approx(0.5625).epsilon(1e-15)); // (1 - 0.25)^2
    // A = sqrt(1)/0.5 = 2, so G = 0.25 (4 - 1 - 2 ln 2).
    CHECK(std::abs(cps_green({0, 0}, {0.5, 0}) - 0.25 * (3.0 - 2.0 * std::log(2.0))) <= 1e-12);
    CHECK(cps_green({0, 0}, {0.5, 0}) == doctest::Approx(0.40343).epsilon(1e-5));

    for (int k = 0; k < 16; ++k) {
        const double t = 2.0 * std::numbers::pi * k / 16.0;
        const Eigen::Vector2d edge(std::cos(t), std::sin(t));
        CHECK(cps_green(edge, {0.2, -0.1}) == 0.0);
        CHECK(cps_green({0.3, 0.6}, edge) == 0.0);
    }
    CHECK(cps_green({1, 0}, {0, 0}) == 0.0);
    CHECK_THROWS_AS(cps_green({1.1, 0}, {0, 0}), std::invalid_argument);

    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-0.7, 0.7);
    for (int i = 0; i < 20; ++i) {
        const Eigen::Vector2d a(u(rng), u(rng)), b(u(rng), u(rng));
        CHECK(cps_green(a, b) == doctest::Approx(cps_green(b, a)).epsilon(1e-13));
        // Continuity at the coincident limit.
        CHECK(cps_green(a, a + Eigen::Vector2d(1e-7, 0)) == doctest::Approx(cps_green(a, a)).epsilon(1e-6));
    }
}

TEST_CASE("Green's function solves the clamped biharmonic problem numerically")
{
    const Eigen::Vector2d source(0.3, -0.2);
    // Biharmonic away from the source.
    for (const Eigen::Vector2d& p : {Eigen::Vector2d(-0.4, 0.3), Eigen::Vector2d(0.1, 0.5), Eigen::Vector2d(-0.2, -0.6)}) {
        const double coarse = biharmonic(p, source, 0.01);
        const double fine = biharmonic(p, source, 0.005);
        CHECK(std::abs(fine) < 5e-3);
        CHECK(coarse / fine == doctest::Approx(4.0).epsilon(0.05)); // O(h^2) truncation only
    }
    // Value and normal derivative vanish on the circle: G((1-h) e, v) = O(h^2).
    for (int k = 0; k < 8; ++k) {
        const double t = 2.0 * std::numbers::pi * k / 8.0 + 0.1;
        const Eigen::Vector2d e(std::cos(t), std::sin(t));
        const double g1 = cps_green((1.0 - 1e-3) * e, source);
        const double g2 = cps_green((1.0 - 2e-3) * e, source);
        CHECK(std::abs(g1) < 1e-5);
        CHECK(g2 / g1 == doctest::Approx(4.0).epsilon(0.01));
    }
}

TEST_CASE("displacement field")
{
    const Circle circle = Circle::inscribed(kGrid);
    CHECK(circle.cx == 70.0);
    CHECK(circle.radius == 70.5);

    SUBCASE("zero knot displacements give a zero field")
    {
        const CpsWarp w(circle, knot_layout(25), Eigen::Matrix2Xd::Zero(2, knot_layout(25).cols()));
        const auto f = displacement_field(w, kGrid);
        CHECK(f.dx.cwiseAbs().maxCoeff() == 0.0);
        CHECK(f.dy.cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("single knot at the origin interpolates its displacement")
    {
        Eigen::Matrix2Xd knots = Eigen::Matrix2Xd::Zero(2, 1), moves(2, 1);
        moves << 1.0, 0.0;
        const CpsWarp w(circle, knots, moves);
        CHECK(w.coefficients()(0, 0) == doctest::Approx(1.0 / cps_green({0, 0}, {0, 0})));
        const Eigen::Vector2d at = w.displacement_unit({0, 0});
        CHECK(std::abs(at.x() - 1.0) <= 1e-9);
        CHECK(std::abs(at.y()) <= 1e-9);
    }
    SUBCASE("random warps vanish outside the circle and interpolate at every knot")
    {
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            const CpsWarp w = make_random_warp(kGrid, 2.0, 25, seed);
            const auto f = displacement_field(w, kGrid);
            for (int y = 0; y < 141; ++y)
                for (int x = 0; x < 141; ++x)
                    if (circle.to_unit(x, y).norm() >= 1.0) {
                        const auto i = static_cast<Eigen::Index>(x + 141 * y);
                        CHECK(f.dx[i] == 0.0);
                        CHECK(f.dy[i] == 0.0);
                    }
            for (Eigen::Index k = 0; k < w.knots().cols(); ++k) {
                const Eigen::Vector2d got = w.displacement_unit(w.knots().col(k));
                const Eigen::Vector2d want = w.scale_factor() * w.knot_displacements().col(k);
                CHECK((got - want).cwiseAbs().maxCoeff() <= 1e-9);
            }
        }
    }
    SUBCASE("field is linear in knot displacements and scale")
    {
        const CpsWarp a = make_random_warp(kGrid, 1.0, 25, 3);
        const CpsWarp b = make_random_warp(kGrid, 1.0, 25, 4);
        const CpsWarp sum(circle, a.knots(), a.knot_displacements() + b.knot_displacements());
        const Eigen::Vector2d p(0.21, -0.37);
        const Eigen::Vector2d expected =
            a.with_scale(1.0).displacement_unit(p) + b.with_scale(1.0).displacement_unit(p);
        CHECK((sum.displacement_unit(p) - expected).norm() <= 1e-12);
        CHECK((a.with_scale(2.0 * a.scale_factor()).displacement_unit(p) - 2.0 * a.displacement_unit(p)).norm() <=
              1e-15);
    }
    SUBCASE("duplicate knots are singular; knots must be inside the disk")
    {
        Eigen::Matrix2Xd knots(2, 2);
        knots << 0.1, 0.1, 0.2, 0.2;
        CHECK_THROWS_WITH_AS(CpsWarp(circle, knots, Eigen::Matrix2Xd::Zero(2, 2)), doctest::Contains("singular"),
                             std::invalid_argument);
        knots << 0.1, 1.0, 0.2, 0.0;
        CHECK_THROWS_AS(CpsWarp(circle, knots, Eigen::Matrix2Xd::Zero(2, 2)), std::invalid_argument);
    }
    SUBCASE("3D grids are rejected")
    {
        CHECK_THROWS_AS(displacement_field(make_random_warp(kGrid, 1.0, 25, 1), Dims::make3(4, 4, 4)),
                        std::invalid_argument);
    }
}

TEST_CASE("knot layout")
{
    CHECK(knot_layout(1).cols() == 1);
    const auto k = knot_layout(25);
    CHECK(k.cols() == 13); // 5x5 grid clipped to radius 0.8
    for (Eigen::Index i = 0; i < k.cols(); ++i)
        CHECK(k.col(i).norm() <= 0.8 + 1e-12);
}

TEST_CASE("random warps hit the requested mean displacement")
{
    const CpsWarp zero = make_random_warp(kGrid, 0.0, 25, 9);
    CHECK(mean_displacement(zero, kGrid) == 0.0);

    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const CpsWarp w = make_random_warp(kGrid, 3.0, 25, seed);
        CHECK(std::abs(mean_displacement(w, kGrid) - 3.0) <= 1e-9 * 3.0);
        const CpsWarp doubled = w.with_scale(2.0 * w.scale_factor());
        CHECK(mean_displacement(doubled, kGrid) == doctest::Approx(6.0).epsilon(1e-12));
    }

    const CpsWarp a = make_random_warp(kGrid, 1.5, 25, 42);
    const CpsWarp b = make_random_warp(kGrid, 1.5, 25, 42);
    CHECK(a.knot_displacements() == b.knot_displacements());
    CHECK(a.scale_factor() == b.scale_factor());
    CHECK(make_random_warp(kGrid, 1.5, 25, 43).knot_displacements() != a.knot_displacements());
    CHECK_THROWS_AS(make_random_warp(kGrid, -1.0, 25, 1), std::invalid_argument);
}

TEST_CASE("mean displacement matches a dense re-evaluation")
{
    const Dims grid = Dims::make2(61, 47);
    const CpsWarp w = make_random_warp(grid, 1.25, 16, 5);
    // Independent route: evaluate the interpolant pixel by pixel from the raw coefficients.
    const Circle c = Circle::inscribed(grid);
    double sum = 0.0;
    for (int y = 0; y < grid.height; ++y)
        for (int x = 0; x < grid.width; ++x) {
            const Eigen::Vector2d u((x - c.cx) / c.radius, (y - c.cy) / c.radius);
            if (u.squaredNorm() >= 1.0)
                continue;
            Eigen::Vector2d d = Eigen::Vector2d::Zero();
            for (Eigen::Index k = 0; k < w.knots().cols(); ++k)
                d += w.coefficients().col(k) * cps_green(u, w.knots().col(k));
            sum += (c.radius * w.scale_factor() * d).norm();
        }
    CHECK(std::abs(mean_displacement(w, grid) - sum / static_cast<double>(grid.count())) <= 1e-12);
}

TEST_CASE("applying warps to images")
{
    RasterImage img(kGrid);
    for (int y = 0; y < 141; ++y)
        for (int x = 0; x < 141; ++x)
            img(x, y) = smooth(x, y);

    SUBCASE("identity warp is bit-identical")
    {
        CHECK(apply_warp(img, make_random_warp(kGrid, 0.0, 25, 1)) == img);
    }
    SUBCASE("constant image stays constant")
    {
        RasterImage flat(kGrid);
        flat.values().setConstant(7.25);
        const RasterImage out = apply_warp(flat, make_random_warp(kGrid, 3.0, 25, 2));
        CHECK((out.values().array() - 7.25).abs().maxCoeff() <= 1e-12);
    }
    SUBCASE("backward mapping samples the displaced analytic function")
    {
        const CpsWarp w = make_random_warp(kGrid, 2.0, 25, 8);
        const auto f = displacement_field(w, kGrid);
        const RasterImage out = apply_warp(img, f);
        double worst = 0.0;
        for (int y = 0; y < 141; ++y)
            for (int x = 0; x < 141; ++x) {
                const auto i = img.index(x, y);
                worst = std::max(worst, std::abs(out(x, y) - smooth(x - f.dx[i], y - f.dy[i])));
            }
        // Bilinear error bound: h^2/8 * |f''| with |f''| <= 20 / 81.
        CHECK(worst < 0.25 * 20.0 / 81.0);
    }
    SUBCASE("warp then unwarp recovers a smooth image, better when smoother")
    {
        const auto roundtrip_error = [&](double period) {
            RasterImage s(kGrid);
            for (int y = 0; y < 141; ++y)
                for (int x = 0; x < 141; ++x)
                    s(x, y) = std::sin(x / period) * std::cos(y / period);
            const CpsWarp w = make_random_warp(kGrid, 1.0, 25, 6);
            const RasterImage there = apply_warp(s, w);
            const RasterImage back = apply_warp(there, w.with_scale(-w.scale_factor()));
            return (back.values() - s.values()).cwiseAbs().mean();
        };
        const double rough = roundtrip_error(3.0);
        const double mild = roundtrip_error(10.0);
        CHECK(mild < 0.02);
        CHECK(mild < rough);
    }
    SUBCASE("grid mismatch and 3D images are errors")
    {
        const CpsWarp w = make_random_warp(kGrid, 1.0, 25, 1);
        CHECK_THROWS_AS(apply_warp(RasterImage(Dims::make2(140, 141)), displacement_field(w, kGrid)),
                        std::invalid_argument);
        CHECK_THROWS_AS(apply_warp(RasterImage(Dims::make3(4, 4, 2)), w), std::invalid_argument);
    }
}

TEST_CASE("applying warps to label maps")
{
    RasterImage disc(kGrid), empty(kGrid);
    for (int y = 0; y < 141; ++y)
        for (int x = 0; x < 141; ++x)
            disc(x, y) = std::hypot(x - 70.0, y - 70.0) < 55.0 ? 1.0 : 0.0;
    const LabelMapD labels{{"disc", "empty"}, {disc, empty}};

    CHECK(apply_warp_labels(labels, make_random_warp(kGrid, 0.0, 25, 1)).channels[0] == disc);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const LabelMapD out = apply_warp_labels(labels, make_random_warp(kGrid, 3.0, 25, seed));
        const auto& v = out.channels[0].values();
        CHECK(v.minCoeff() >= 0.0);
        CHECK(v.maxCoeff() <= 1.0);
        CHECK(std::abs(v.sum() - disc.values().sum()) / disc.values().sum() <= 0.05);
        CHECK(out.channels[1].values().cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("warp files replay exactly")
{
    const auto dir = testing::scratch_dir("warp");
    const CpsWarp w = make_random_warp(kGrid, 2.5, 25, 77);
    save_warp(dir / "w.cps", w);
    const CpsWarp r = load_warp(dir / "w.cps");
    CHECK(r.circle() == w.circle());
    CHECK(r.scale_factor() == w.scale_factor());
    CHECK(r.knots() == w.knots());
    CHECK(r.knot_displacements() == w.knot_displacements());
    const auto a = displacement_field(w, kGrid);
    const auto b = displacement_field(r, kGrid);
    CHECK(a.dx == b.dx);
    CHECK(a.dy == b.dy);
}
