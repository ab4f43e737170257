#ifndef NRREVAL_RASTER_HPP
#define NRREVAL_RASTER_HPP

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace nrreval
{

/// Grid extents. A 2D grid has depth 1 and ndim 2.
struct Dims
{
    int width = 0;
    int height = 0;
    int depth = 1;
    int ndim = 2;

    static Dims make2(int w, int h) { return {w, h, 1, 2}; }
    static Dims make3(int w, int h, int d) { return {w, h, d, 3}; }

    std::size_t count() const
    {
        return static_cast<std::size_t>(width) * static_cast<std::size_t>(height) *
               static_cast<std::size_t>(depth);
    }

    bool operator==(const Dims&) const = default;
};

std::string to_string(const Dims& dims);

using Spacing = std::array<double, 3>;

/// Scalar intensity grid; voxel (x, y, z) lives at x + width * (y + height * z).
template <typename Scalar>
class Raster
{
public:
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    Raster() = default;

    explicit Raster(Dims dims, Spacing spacing = {1.0, 1.0, 1.0})
        : dims_(dims), spacing_(spacing), values_(Vector::Zero(static_cast<Eigen::Index>(dims.count())))
    {
        validate_dims(dims);
    }

    Raster(Dims dims, Vector values, Spacing spacing = {1.0, 1.0, 1.0})
        : dims_(dims), spacing_(spacing), values_(std::move(values))
    {
        validate_dims(dims);
        if (static_cast<std::size_t>(values_.size()) != dims_.count())
            throw std::invalid_argument("raster value count " + std::to_string(values_.size()) +
                                        " does not match dims " + to_string(dims_));
    }

    const Dims& dims() const { return dims_; }
    const Spacing& spacing() const { return spacing_; }
    const Vector& values() const { return values_; }
    Vector& values() { return values_; }
    Eigen::Index size() const { return values_.size(); }

    Eigen::Index index(int x, int y, int z = 0) const
    {
        return static_cast<Eigen::Index>(x) +
               static_cast<Eigen::Index>(dims_.width) *
                   (static_cast<Eigen::Index>(y) + static_cast<Eigen::Index>(dims_.height) * z);
    }

    Scalar operator()(int x, int y, int z = 0) const { return values_[index(x, y, z)]; }
    Scalar& operator()(int x, int y, int z = 0) { return values_[index(x, y, z)]; }

    bool same_grid(const Raster& other) const
    {
        return dims_ == other.dims_ && spacing_ == other.spacing_;
    }

    bool all_finite() const { return values_.allFinite(); }

    bool operator==(const Raster& other) const
    {
        return same_grid(other) && values_ == other.values_;
    }

private:
    static void validate_dims(const Dims& d)
    {
        if (d.width <= 0 || d.height <= 0 || d.depth <= 0 || (d.ndim != 2 && d.ndim != 3) ||
            (d.ndim == 2 && d.depth != 1))
            throw std::invalid_argument("invalid raster dims " + to_string(d));
    }

    Dims dims_{};
    Spacing spacing_{1.0, 1.0, 1.0};
    Vector values_;
};

using RasterImage = Raster<double>;

/// Row-major (x fastest) intensity vector in R^n.
template <typename Scalar>
const typename Raster<Scalar>::Vector& flatten(const Raster<Scalar>& image)
{
    return image.values();
}

template <typename Derived>
Raster<typename Derived::Scalar> unflatten(const Eigen::MatrixBase<Derived>& values, Dims dims,
                                           Spacing spacing = {1.0, 1.0, 1.0})
{
    return Raster<typename Derived::Scalar>(dims, values.eval(), spacing);
}

/// Fuzzy per-label membership channels sharing one grid.
template <typename Scalar>
struct LabelMap
{
    std::vector<std::string> names;
    std::vector<Raster<Scalar>> channels;

    std::size_t label_count() const { return names.size(); }
};

using LabelMapD = LabelMap<double>;

/// Throws std::invalid_argument unless channels line up with names, share one grid,
/// and every membership lies in [0,1].
template <typename Scalar>
void validate_label_map(const LabelMap<Scalar>& map)
{
    if (map.names.size() != map.channels.size())
        throw std::invalid_argument("label map has " + std::to_string(map.names.size()) + " names but " +
                                    std::to_string(map.channels.size()) + " channels");
    for (std::size_t l = 0; l < map.channels.size(); ++l) {
        const auto& ch = map.channels[l];
        if (!ch.same_grid(map.channels.front()))
            throw std::invalid_argument("label '" + map.names[l] + "' is on a different grid");
        const auto& v = ch.values();
        if (!v.allFinite() || (v.size() > 0 && (v.minCoeff() < Scalar(0) || v.maxCoeff() > Scalar(1))))
            throw std::invalid_argument("label '" + map.names[l] + "' has membership outside [0,1]");
    }
}

/// N >= 2 images on one common grid, with optional label maps.
template <typename Scalar>
struct RegisteredSet
{
    std::vector<Raster<Scalar>> images;
    std::optional<std::vector<LabelMap<Scalar>>> label_maps;
    std::vector<std::string> names;

    std::size_t size() const { return images.size(); }
    const Dims& dims() const { return images.front().dims(); }
    bool has_labels() const { return label_maps.has_value(); }
};

using RegisteredSetD = RegisteredSet<double>;

template <typename Scalar>
void validate_set(const RegisteredSet<Scalar>& set)
{
    if (set.images.size() < 2)
        throw std::invalid_argument("a registered set needs at least 2 images, got " +
                                    std::to_string(set.images.size()));
    if (!set.names.empty() && set.names.size() != set.images.size())
        throw std::invalid_argument("name count does not match image count");
    const auto& ref = set.images.front();
    for (std::size_t i = 0; i < set.images.size(); ++i) {
        const auto& img = set.images[i];
        if (img.dims() != ref.dims())
            throw std::invalid_argument("dimension mismatch: image " + std::to_string(i) + " has dims " +
                                        to_string(img.dims()) + ", expected " + to_string(ref.dims()));
        if (img.spacing() != ref.spacing())
            throw std::invalid_argument("spacing mismatch at image " + std::to_string(i));
        if (!img.all_finite())
            throw std::invalid_argument("image " + std::to_string(i) + " has non-finite values");
    }
    if (!set.label_maps)
        return;
    const auto& maps = *set.label_maps;
    if (maps.size() != set.images.size())
        throw std::invalid_argument("expected " + std::to_string(set.images.size()) + " label maps, got " +
                                    std::to_string(maps.size()));
    for (std::size_t i = 0; i < maps.size(); ++i) {
        validate_label_map(maps[i]);
        if (maps[i].names != maps.front().names)
            throw std::invalid_argument("label map " + std::to_string(i) + " has a different label list");
        for (const auto& ch : maps[i].channels)
            if (ch.dims() != ref.dims())
                throw std::invalid_argument("label map " + std::to_string(i) + " is not on the image grid");
    }
}

} // namespace nrreval

#endif // NRREVAL_RASTER_HPP
