#ifndef NRREVAL_OVERLAP_HPP
#define NRREVAL_OVERLAP_HPP

#include "nrreval/parallel.hpp"
#include "nrreval/raster.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace nrreval
{

enum class WeightKind { volume_implicit, inverse_volume, complexity, inverse_volume_complexity };

inline const char* to_string(WeightKind k)
{
    switch (k) {
    case WeightKind::volume_implicit: return "volume";
    case WeightKind::inverse_volume: return "inverse";
    case WeightKind::complexity: return "complexity";
    case WeightKind::inverse_volume_complexity: return "inverse-complexity";
    }
    return "?";
}

inline WeightKind parse_weight_kind(const std::string& s)
{
    if (s == "volume")
        return WeightKind::volume_implicit;
    if (s == "inverse")
        return WeightKind::inverse_volume;
    if (s == "complexity")
        return WeightKind::complexity;
    if (s == "inverse-complexity")
        return WeightKind::inverse_volume_complexity;
    throw std::invalid_argument("unknown weighting '" + s +
                                "' (expected volume, inverse, complexity or inverse-complexity)");
}

struct WeightScheme
{
    WeightKind kind = WeightKind::volume_implicit;
    std::vector<std::string> labels;
    std::vector<double> weights;
};

struct OverlapResult
{
    double value = 0.0;
    std::vector<double> per_label;
    std::vector<bool> per_label_empty; // label empty in every map; its per_label value is 1 by convention
    WeightScheme scheme;
};

/// Fuzzy Jaccard/Tanimoto: sum min(a,b) / sum max(a,b); 1 when both channels are all zero.
template <typename Scalar>
double tanimoto_pair(const Raster<Scalar>& a, const Raster<Scalar>& b)
{
    if (a.dims() != b.dims())
        throw std::invalid_argument("grid mismatch: " + to_string(a.dims()) + " vs " + to_string(b.dims()));
    CompensatedSum num, den;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        const double va = a.values()[i];
        const double vb = b.values()[i];
        num.add(std::min(va, vb));
        den.add(std::max(va, vb));
    }
    return den.value() == 0.0 ? 1.0 : num.value() / den.value();
}

/// Voxels with non-zero membership having at least one face neighbour (4 in 2D, 6 in 3D) of
/// different membership. Neighbours off the grid count as membership 0.
template <typename Scalar>
std::int64_t boundary_count(const Raster<Scalar>& channel)
{
    const auto& d = channel.dims();
    std::int64_t count = 0;
    const auto at = [&](int x, int y, int z) -> Scalar {
        if (x < 0 || y < 0 || z < 0 || x >= d.width || y >= d.height || z >= d.depth)
            return Scalar(0);
        return channel(x, y, z);
    };
    for (int z = 0; z < d.depth; ++z)
        for (int y = 0; y < d.height; ++y)
            for (int x = 0; x < d.width; ++x) {
                const Scalar v = channel(x, y, z);
                if (v == Scalar(0))
                    continue;
                bool edge = at(x - 1, y, z) != v || at(x + 1, y, z) != v || at(x, y - 1, z) != v ||
                            at(x, y + 1, z) != v;
                if (d.ndim == 3)
                    edge = edge || at(x, y, z - 1) != v || at(x, y, z + 1) != v;
                if (edge)
                    ++count;
            }
    return count;
}

/// Per-label weights over a list of label maps sharing one label list.
///   volume_implicit            1
///   inverse_volume             1 / (mean over maps of the label's total membership)
///   complexity                 mean over maps (where the label is present) of boundary / volume
///   inverse_volume_complexity  product of the two
template <typename Scalar>
WeightScheme label_weights(const std::vector<LabelMap<Scalar>>& maps, WeightKind kind)
{
    if (maps.empty())
        throw std::invalid_argument("label weights need at least one label map");
    const auto& names = maps.front().names;
    WeightScheme scheme{kind, names, std::vector<double>(names.size(), 1.0)};
    for (std::size_t l = 0; l < names.size(); ++l) {
        double volume_sum = 0.0;
        double ratio_sum = 0.0;
        int present = 0;
        for (const auto& map : maps) {
            if (map.names != names)
                throw std::invalid_argument("label maps have different label lists");
            const double vol = map.channels[l].values().template cast<double>().sum();
            volume_sum += vol;
            if (vol > 0.0) {
                ratio_sum += static_cast<double>(boundary_count(map.channels[l])) / vol;
                ++present;
            }
        }
        if (!(volume_sum > 0.0))
            throw std::invalid_argument("label '" + names[l] + "' has zero volume in every image");
        const double inverse = static_cast<double>(maps.size()) / volume_sum;
        const double complexity = ratio_sum / present;
        switch (kind) {
        case WeightKind::volume_implicit: break;
        case WeightKind::inverse_volume: scheme.weights[l] = inverse; break;
        case WeightKind::complexity: scheme.weights[l] = complexity; break;
        case WeightKind::inverse_volume_complexity: scheme.weights[l] = inverse * complexity; break;
        }
    }
    return scheme;
}

template <typename Scalar>
WeightScheme label_weights(const RegisteredSet<Scalar>& set, WeightKind kind)
{
    if (!set.label_maps)
        throw std::invalid_argument("the registered set has no label maps");
    return label_weights(*set.label_maps, kind);
}

/// Generalized overlap over all unordered map pairs with equal pair weights:
///   sum_pairs sum_labels w_l sum_voxels min / sum_pairs sum_labels w_l sum_voxels max.
template <typename Scalar>
OverlapResult generalized_overlap(const std::vector<LabelMap<Scalar>>& maps, const WeightScheme& weights)
{
    if (maps.size() < 2)
        throw std::invalid_argument("generalized overlap needs at least 2 label maps");
    const auto& names = maps.front().names;
    if (weights.weights.size() != names.size())
        throw std::invalid_argument("weight count does not match label count");
    for (const auto& map : maps) {
        validate_label_map(map);
        if (map.names != names)
            throw std::invalid_argument("label maps have different label lists");
        for (const auto& ch : map.channels)
            if (ch.dims() != maps.front().channels.front().dims())
                throw std::invalid_argument("grid mismatch between label maps");
    }

    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t k = 0; k < maps.size(); ++k)
        for (std::size_t l = k + 1; l < maps.size(); ++l)
            pairs.emplace_back(k, l);

    const std::size_t n_labels = names.size();
    // Per (pair, label) sums, filled in parallel and reduced serially in index order.
    std::vector<double> mins(pairs.size() * n_labels), maxs(pairs.size() * n_labels);
    parallel_for(static_cast<std::int64_t>(pairs.size() * n_labels), [&](std::int64_t cell) {
        const auto p = static_cast<std::size_t>(cell) / n_labels;
        const auto lab = static_cast<std::size_t>(cell) % n_labels;
        const auto& a = maps[pairs[p].first].channels[lab].values();
        const auto& b = maps[pairs[p].second].channels[lab].values();
        CompensatedSum lo, hi;
        for (Eigen::Index i = 0; i < a.size(); ++i) {
            lo.add(std::min<double>(a[i], b[i]));
            hi.add(std::max<double>(a[i], b[i]));
        }
        mins[static_cast<std::size_t>(cell)] = lo.value();
        maxs[static_cast<std::size_t>(cell)] = hi.value();
    });

    OverlapResult result;
    result.scheme = weights;
    result.per_label.assign(n_labels, 1.0);
    result.per_label_empty.assign(n_labels, false);
    CompensatedSum num, den;
    for (std::size_t lab = 0; lab < n_labels; ++lab) {
        CompensatedSum lo, hi;
        for (std::size_t p = 0; p < pairs.size(); ++p) {
            lo.add(mins[p * n_labels + lab]);
            hi.add(maxs[p * n_labels + lab]);
        }
        if (hi.value() > 0.0)
            result.per_label[lab] = lo.value() / hi.value();
        else
            result.per_label_empty[lab] = true;
        num.add(weights.weights[lab] * lo.value());
        den.add(weights.weights[lab] * hi.value());
    }
    if (!(den.value() > 0.0))
        throw std::invalid_argument("generalized overlap is undefined: every label is empty in every map");
    result.value = num.value() / den.value();
    return result;
}

} // namespace nrreval

#endif // NRREVAL_OVERLAP_HPP
