#include "nrreval/phantom.hpp"

#include "nrreval/random.hpp"

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace nrreval
{

namespace
{

struct Ellipse
{
    double cx, cy, a, b, angle;

    bool contains(double x, double y) const
    {
        const double c = std::cos(angle), s = std::sin(angle);
        const double dx = x - cx, dy = y - cy;
        const double u = (c * dx + s * dy) / a;
        const double v = (-s * dx + c * dy) / b;
        return u * u + v * v <= 1.0;
    }
};

enum Region : int
{
    background,
    skull,
    cortex,
    white_matter,
    ventricle,
    thalamus,
    caudate,
    putamen,
    thalamus_proper,
    region_count
};

constexpr std::array<double, region_count> kBaseIntensity{5, 170, 90, 135, 25, 100, 110, 115, 75};

// Label order as written to disk; each entry names the region it marks.
constexpr std::array<Region, 7> kLabelRegions{white_matter, cortex, ventricle, thalamus,
                                              caudate,      putamen, thalamus_proper};
const std::array<std::string, 7> kLabelNames{"white_matter", "cortex",  "ventricle",      "thalamus",
                                             "caudate",      "putamen", "thalamus_proper"};

struct Anatomy
{
    Ellipse skull_outer, skull_inner, brain, inner;
    std::vector<std::pair<Region, Ellipse>> nuclei;

    Region classify(double x, double y) const
    {
        for (const auto& [region, e] : nuclei)
            if (e.contains(x, y))
                return region;
        if (inner.contains(x, y))
            return white_matter;
        if (brain.contains(x, y))
            return cortex;
        if (skull_outer.contains(x, y) && !skull_inner.contains(x, y))
            return skull;
        return background;
    }
};

Anatomy jittered_anatomy(Rng& rng, double jitter)
{
    const auto scale = [&](double s) { return s * (1.0 + 3.0 * jitter * rng.gaussian()); };
    const auto shift = [&](double c) { return c + jitter * rng.gaussian(); };
    const double brain_scale = 1.0 + jitter * rng.gaussian();

    Anatomy a;
    a.skull_outer = {0.0, 0.0, 0.97, 0.97, 0.0};
    a.skull_inner = {0.0, 0.0, 0.90, 0.90, 0.0};
    a.brain = {0.0, 0.0, 0.80 * brain_scale, 0.86 * brain_scale, 0.0};
    a.inner = {0.0, 0.0, 0.66 * brain_scale, 0.72 * brain_scale, 0.0};
    for (const double side : {-1.0, 1.0}) {
        a.nuclei.push_back({ventricle, {shift(side * 0.12), shift(-0.10), scale(0.07), scale(0.22), side * 0.25}});
        a.nuclei.push_back({thalamus, {shift(side * 0.14), shift(0.22), scale(0.09), scale(0.08), 0.0}});
        a.nuclei.push_back({caudate, {shift(side * 0.26), shift(-0.22), scale(0.06), scale(0.12), side * 0.3}});
        a.nuclei.push_back({putamen, {shift(side * 0.40), shift(0.05), scale(0.07), scale(0.16), -side * 0.2}});
        a.nuclei.push_back(
            {thalamus_proper, {shift(side * 0.06), shift(0.40), scale(0.05), scale(0.05), 0.0}});
    }
    return a;
}

} // namespace

RegisteredSetD make_phantom_set(const PhantomConfig& config)
{
    if (config.count < 2)
        throw std::invalid_argument("phantom set needs at least 2 images");
    if (config.size < 8)
        throw std::invalid_argument("phantom size must be at least 8 pixels");
    if (config.labels < 1 || config.labels > 7)
        throw std::invalid_argument("phantom label count must be in 1..7");

    const Dims dims = Dims::make2(config.size, config.size);
    const double centre = (config.size - 1) / 2.0;
    const double radius = config.size / 2.0;

    RegisteredSetD set;
    std::vector<LabelMapD> maps;
    for (int i = 0; i < config.count; ++i) {
        Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(i)));
        const Anatomy anatomy = jittered_anatomy(rng, config.shape_jitter);
        std::array<double, region_count> intensity{};
        const double gain = 1.0 + 0.02 * rng.gaussian();
        for (int r = 0; r < region_count; ++r)
            intensity[r] = gain * (kBaseIntensity[r] + config.intensity_jitter * rng.gaussian());
        const double bias_x = 3.0 * rng.gaussian();
        const double bias_y = 3.0 * rng.gaussian();

        RasterImage image(dims);
        LabelMapD labels;
        for (int l = 0; l < config.labels; ++l) {
            labels.names.push_back(kLabelNames[l]);
            labels.channels.emplace_back(dims);
        }
        for (int y = 0; y < config.size; ++y)
            for (int x = 0; x < config.size; ++x) {
                const double ux = (x - centre) / radius;
                const double uy = (y - centre) / radius;
                // 3x3 supersampling gives partial-volume edges.
                double value = 0.0;
                for (int sy = -1; sy <= 1; ++sy)
                    for (int sx = -1; sx <= 1; ++sx)
                        value += intensity[anatomy.classify(ux + sx / (3.0 * radius), uy + sy / (3.0 * radius))];
                value = value / 9.0 + bias_x * ux + bias_y * uy + config.noise_sd * rng.gaussian();
                image(x, y) = value;
                const Region here = anatomy.classify(ux, uy);
                for (int l = 0; l < config.labels; ++l)
                    if (kLabelRegions[l] == here)
                        labels.channels[l](x, y) = 1.0;
            }
        char name[32];
        std::snprintf(name, sizeof name, "phantom_%03d", i);
        set.names.emplace_back(name);
        set.images.push_back(std::move(image));
        maps.push_back(std::move(labels));
    }
    set.label_maps = std::move(maps);
    validate_set(set);
    return set;
}

} // namespace nrreval
