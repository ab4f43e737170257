#include "nrreval/cps_warp.hpp"

#include "nrreval/io.hpp"
#include "nrreval/parallel.hpp"
#include "nrreval/random.hpp"

#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <string>

namespace nrreval
{

namespace
{

// |u|^2 at or above this is on the clamped boundary.
constexpr double kOnCircle = 1.0 - 4.0 * std::numeric_limits<double>::epsilon();

} // namespace

double cps_green(const Eigen::Vector2d& u, const Eigen::Vector2d& v)
{
    const double uu = u.squaredNorm();
    const double vv = v.squaredNorm();
    if (uu > 1.0 + 1e-12 || vv > 1.0 + 1e-12)
        throw std::invalid_argument("CPS Green's function arguments must lie in the closed unit disk");
    if (uu >= kOnCircle || vv >= kOnCircle)
        return 0.0;
    // |u-v|^2 A^2 is evaluated directly, so the coincident limit needs no special case
    // beyond r2 == 0 where r2 ln r2 -> 0.
    const double numerator = uu * vv - 2.0 * u.dot(v) + 1.0;
    const double r2 = (u - v).squaredNorm();
    if (r2 == 0.0)
        return numerator;
    return numerator - r2 * (1.0 + std::log(numerator / r2));
}

CpsWarp::CpsWarp(Circle circle, Eigen::Matrix2Xd knots, Eigen::Matrix2Xd knot_displacements, double scale_factor)
    : circle_(circle), knots_(std::move(knots)), knot_displacements_(std::move(knot_displacements)),
      scale_factor_(scale_factor)
{
    if (!(circle_.radius > 0.0))
        throw std::invalid_argument("CPS circle radius must be positive");
    if (knots_.cols() != knot_displacements_.cols())
        throw std::invalid_argument("knot and knot displacement counts differ");
    if (!std::isfinite(scale_factor_))
        throw std::invalid_argument("CPS scale factor must be finite");
    const Eigen::Index k = knots_.cols();
    for (Eigen::Index i = 0; i < k; ++i)
        if (!(knots_.col(i).squaredNorm() < kOnCircle))
            throw std::invalid_argument("CPS knot " + std::to_string(i) + " is not strictly inside the unit disk");
    for (Eigen::Index i = 0; i < k; ++i)
        for (Eigen::Index j = i + 1; j < k; ++j)
            if (knots_.col(i) == knots_.col(j))
                throw std::invalid_argument("singular CPS system: knots " + std::to_string(i) + " and " +
                                            std::to_string(j) + " coincide");
    Eigen::MatrixXd gram(k, k);
    for (Eigen::Index i = 0; i < k; ++i)
        for (Eigen::Index j = 0; j < k; ++j)
            gram(i, j) = cps_green(knots_.col(i), knots_.col(j));
    Eigen::FullPivLU<Eigen::MatrixXd> lu(gram);
    if (k > 0 && !lu.isInvertible())
        throw std::invalid_argument("singular CPS interpolation system");
    coefficients_.resize(2, k);
    if (k > 0)
        coefficients_ = lu.solve(knot_displacements_.transpose()).transpose();
}

Eigen::Vector2d CpsWarp::displacement_unit(const Eigen::Vector2d& u) const
{
    if (u.squaredNorm() >= kOnCircle)
        return Eigen::Vector2d::Zero();
    Eigen::Vector2d sum = Eigen::Vector2d::Zero();
    for (Eigen::Index k = 0; k < knots_.cols(); ++k)
        sum += coefficients_.col(k) * cps_green(u, knots_.col(k));
    return scale_factor_ * sum;
}

DisplacementField displacement_field(const CpsWarp& warp, const Dims& grid)
{
    if (grid.ndim != 2)
        throw std::invalid_argument("CPS displacement fields are 2D only");
    DisplacementField field{grid, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid.count())),
                            Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid.count()))};
    parallel_for(grid.height, [&](std::int64_t y) {
        for (int x = 0; x < grid.width; ++x) {
            const auto i = static_cast<Eigen::Index>(x + grid.width * y);
            const Eigen::Vector2d d = warp.displacement_pixel(x, static_cast<double>(y));
            field.dx[i] = d.x();
            field.dy[i] = d.y();
        }
    });
    return field;
}

double mean_displacement(const CpsWarp& warp, const Dims& grid)
{
    const DisplacementField field = displacement_field(warp, grid);
    CompensatedSum sum;
    for (Eigen::Index i = 0; i < field.dx.size(); ++i)
        sum.add(std::hypot(field.dx[i], field.dy[i]));
    return sum.value() / static_cast<double>(field.dx.size());
}

Eigen::Matrix2Xd knot_layout(int n_knots)
{
    if (n_knots < 1)
        throw std::invalid_argument("need at least one CPS knot");
    constexpr double extent = 0.8;
    const int side = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n_knots))));
    if (side == 1)
        return Eigen::Matrix2Xd::Zero(2, 1);
    std::vector<Eigen::Vector2d> pts;
    for (int j = 0; j < side; ++j)
        for (int i = 0; i < side; ++i) {
            const Eigen::Vector2d p(-extent + 2.0 * extent * i / (side - 1), -extent + 2.0 * extent * j / (side - 1));
            if (p.norm() <= extent + 1e-12)
                pts.push_back(p);
        }
    Eigen::Matrix2Xd knots(2, static_cast<Eigen::Index>(pts.size()));
    for (std::size_t k = 0; k < pts.size(); ++k)
        knots.col(static_cast<Eigen::Index>(k)) = pts[k];
    return knots;
}

CpsWarp make_random_warp(const Dims& grid, double d, int n_knots, std::uint64_t seed)
{
    if (!(d >= 0.0) || !std::isfinite(d))
        throw std::invalid_argument("target mean displacement must be finite and >= 0");
    if (grid.ndim != 2)
        throw std::invalid_argument("CPS warps are 2D only");
    Eigen::Matrix2Xd knots = knot_layout(n_knots);
    Eigen::Matrix2Xd moves(2, knots.cols());
    Rng rng(derive_seed(seed, 0xc95));
    for (Eigen::Index k = 0; k < knots.cols(); ++k) {
        const double r = kKnotDisplacementRadius * std::sqrt(rng.uniform());
        const double theta = 2.0 * std::numbers::pi * rng.uniform();
        moves.col(k) << r * std::cos(theta), r * std::sin(theta);
    }
    CpsWarp unit(Circle::inscribed(grid), std::move(knots), std::move(moves), 1.0);
    if (d == 0.0)
        return unit.with_scale(0.0);
    const double d_hat = mean_displacement(unit, grid);
    if (!(d_hat > 0.0))
        throw std::runtime_error("random CPS warp has zero mean displacement; cannot scale to d > 0");
    return unit.with_scale(d / d_hat);
}

void save_warp(const std::filesystem::path& path, const CpsWarp& warp)
{
    std::FILE* f = std::fopen(path.string().c_str(), "wb");
    if (!f)
        throw IoError("cannot write '" + path.string() + "'");
    const auto& c = warp.circle();
    std::fprintf(f, "nrreval-cps-warp 1\ncircle %.17g %.17g %.17g\nscale %.17g\nknots %ld\n", c.cx, c.cy, c.radius,
                 warp.scale_factor(), static_cast<long>(warp.knots().cols()));
    for (Eigen::Index k = 0; k < warp.knots().cols(); ++k)
        std::fprintf(f, "%.17g %.17g %.17g %.17g\n", warp.knots()(0, k), warp.knots()(1, k),
                     warp.knot_displacements()(0, k), warp.knot_displacements()(1, k));
    std::fclose(f);
}

CpsWarp load_warp(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open '" + path.string() + "'");
    std::string magic, key;
    int version = 0;
    Circle c;
    double scale = 0.0;
    long count = -1;
    in >> magic >> version;
    if (magic != "nrreval-cps-warp" || version != 1)
        throw IoError("'" + path.string() + "' is not a CPS warp file");
    if (!(in >> key >> c.cx >> c.cy >> c.radius) || key != "circle")
        throw IoError("'" + path.string() + "': bad 'circle' line");
    if (!(in >> key >> scale) || key != "scale")
        throw IoError("'" + path.string() + "': bad 'scale' line");
    if (!(in >> key >> count) || key != "knots" || count < 0)
        throw IoError("'" + path.string() + "': bad 'knots' line");
    Eigen::Matrix2Xd knots(2, count), moves(2, count);
    for (long k = 0; k < count; ++k)
        if (!(in >> knots(0, k) >> knots(1, k) >> moves(0, k) >> moves(1, k)))
            throw IoError("'" + path.string() + "': truncated knot list");
    try {
        return CpsWarp(c, std::move(knots), std::move(moves), scale);
    } catch (const std::invalid_argument& e) {
        throw IoError("'" + path.string() + "': " + e.what());
    }
}

} // namespace nrreval
