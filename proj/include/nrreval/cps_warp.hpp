#ifndef NRREVAL_CPS_WARP_HPP
#define NRREVAL_CPS_WARP_HPP

#include "nrreval/raster.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <stdexcept>

namespace nrreval
{

/// Biharmonic clamped-plate Green's function on the unit disk,
///
///     G(u,v) = |u-v|^2 (A^2 - 1 - ln A^2),   A^2 = (|u|^2 |v|^2 - 2 u.v + 1) / |u-v|^2,
///
/// with G(u,u) = (1 - |u|^2)^2. Zero whenever either argument is on the circle (points
/// within a few ulps of |u| = 1 are treated as on it). Throws outside the closed disk.
double cps_green(const Eigen::Vector2d& u, const Eigen::Vector2d& v);

/// Disk in pixel coordinates mapped onto the unit disk.
struct Circle
{
    double cx = 0.0;
    double cy = 0.0;
    double radius = 1.0;

    /// Circle inscribed in the image square: centre at the middle pixel, radius half the
    /// smaller extent.
    static Circle inscribed(const Dims& grid)
    {
        return {(grid.width - 1) / 2.0, (grid.height - 1) / 2.0, std::min(grid.width, grid.height) / 2.0};
    }

    Eigen::Vector2d to_unit(double x, double y) const { return {(x - cx) / radius, (y - cy) / radius}; }

    bool operator==(const Circle&) const = default;
};

/// Clamped-plate spline warp. Knots and knot displacements are in unit-disk coordinates;
/// the field is scale_factor times the spline interpolant, converted to pixels by the radius.
class CpsWarp
{
public:
    /// Solves the knot interpolation system. Throws if a knot is not strictly inside the
    /// unit disk or the system is singular (e.g. duplicate knots).
    CpsWarp(Circle circle, Eigen::Matrix2Xd knots, Eigen::Matrix2Xd knot_displacements,
            double scale_factor = 1.0);

    const Circle& circle() const { return circle_; }
    const Eigen::Matrix2Xd& knots() const { return knots_; }
    const Eigen::Matrix2Xd& knot_displacements() const { return knot_displacements_; }
    const Eigen::Matrix2Xd& coefficients() const { return coefficients_; }
    double scale_factor() const { return scale_factor_; }

    CpsWarp with_scale(double scale_factor) const
    {
        CpsWarp w = *this;
        w.scale_factor_ = scale_factor;
        return w;
    }

    /// Scaled displacement at a unit-disk point, in unit-disk units. Exactly zero for |u| >= 1.
    Eigen::Vector2d displacement_unit(const Eigen::Vector2d& u) const;

    /// Scaled displacement at pixel (x, y), in pixels.
    Eigen::Vector2d displacement_pixel(double x, double y) const
    {
        return circle_.radius * displacement_unit(circle_.to_unit(x, y));
    }

private:
    Circle circle_;
    Eigen::Matrix2Xd knots_;
    Eigen::Matrix2Xd knot_displacements_;
    Eigen::Matrix2Xd coefficients_;
    double scale_factor_ = 1.0;
};

/// Per-pixel displacement in pixels.
struct DisplacementField
{
    Dims dims{};
    Eigen::VectorXd dx;
    Eigen::VectorXd dy;
};

DisplacementField displacement_field(const CpsWarp& warp, const Dims& grid);

/// Mean over all grid pixels (including those outside the circle) of |displacement|.
double mean_displacement(const CpsWarp& warp, const Dims& grid);

/// Regular side x side grid over [-0.8, 0.8]^2 with side = ceil(sqrt(n_knots)), keeping the
/// points within radius 0.8. A single knot sits at the origin.
Eigen::Matrix2Xd knot_layout(int n_knots);

inline constexpr int kDefaultKnotCount = 25;
inline constexpr double kKnotDisplacementRadius = 0.1;

/// Random warp with mean pixel displacement exactly `d`: each knot moves uniformly within a
/// disk of radius 0.1 (unit-disk units), then the whole field is scaled by d / d_hat.
CpsWarp make_random_warp(const Dims& grid, double d, int n_knots, std::uint64_t seed);

/// Bilinear sample at (x, y) in pixel coordinates, clamping to the nearest edge.
template <typename Scalar>
Scalar bilinear_sample(const Raster<Scalar>& image, double x, double y, int z = 0)
{
    const auto& d = image.dims();
    x = std::clamp(x, 0.0, static_cast<double>(d.width - 1));
    y = std::clamp(y, 0.0, static_cast<double>(d.height - 1));
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const int x1 = std::min(x0 + 1, d.width - 1);
    const int y1 = std::min(y0 + 1, d.height - 1);
    const double fx = x - x0;
    const double fy = y - y0;
    const double top = (1.0 - fx) * image(x0, y0, z) + fx * image(x1, y0, z);
    const double bottom = (1.0 - fx) * image(x0, y1, z) + fx * image(x1, y1, z);
    return static_cast<Scalar>((1.0 - fy) * top + fy * bottom);
}

/// Backward mapping: out(p) = image(p - displacement(p)), bilinear, edge-clamped.
template <typename Scalar>
Raster<Scalar> apply_warp(const Raster<Scalar>& image, const DisplacementField& field)
{
    if (image.dims().ndim != 2)
        throw std::invalid_argument("CPS warps apply to 2D images only");
    if (image.dims() != field.dims)
        throw std::invalid_argument("grid mismatch: image " + to_string(image.dims()) + " vs warp field " +
                                    to_string(field.dims));
    Raster<Scalar> out(image.dims(), image.spacing());
    for (int y = 0; y < image.dims().height; ++y)
        for (int x = 0; x < image.dims().width; ++x) {
            const auto i = image.index(x, y);
            if (field.dx[i] == 0.0 && field.dy[i] == 0.0)
                out.values()[i] = image.values()[i];
            else
                out.values()[i] = bilinear_sample(image, x - field.dx[i], y - field.dy[i]);
        }
    return out;
}

template <typename Scalar>
Raster<Scalar> apply_warp(const Raster<Scalar>& image, const CpsWarp& warp)
{
    return apply_warp(image, displacement_field(warp, image.dims()));
}

/// Warps every channel like apply_warp and clamps memberships to [0,1].
template <typename Scalar>
LabelMap<Scalar> apply_warp_labels(const LabelMap<Scalar>& labels, const DisplacementField& field)
{
    LabelMap<Scalar> out;
    out.names = labels.names;
    out.channels.reserve(labels.channels.size());
    for (const auto& ch : labels.channels) {
        auto warped = apply_warp(ch, field);
        warped.values() = warped.values().cwiseMax(Scalar(0)).cwiseMin(Scalar(1));
        out.channels.push_back(std::move(warped));
    }
    return out;
}

template <typename Scalar>
LabelMap<Scalar> apply_warp_labels(const LabelMap<Scalar>& labels, const CpsWarp& warp)
{
    if (labels.channels.empty())
        return labels;
    return apply_warp_labels(labels, displacement_field(warp, labels.channels.front().dims()));
}

// Text format for exact replay:
//   nrreval-cps-warp 1
//   circle <cx> <cy> <radius>
//   scale <scale_factor>
//   knots <K>
//   <x> <y> <dx> <dy>      (K lines, unit-disk units)
void save_warp(const std::filesystem::path& path, const CpsWarp& warp);
CpsWarp load_warp(const std::filesystem::path& path);

} // namespace nrreval

#endif // NRREVAL_CPS_WARP_HPP
