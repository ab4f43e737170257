#ifndef NRREVAL_SPECIFICITY_HPP
#define NRREVAL_SPECIFICITY_HPP

#include "nrreval/parallel.hpp"
#include "nrreval/texture_model.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace nrreval
{

enum class Metric { l1, l2 };

inline const char* to_string(Metric m) { return m == Metric::l1 ? "L1" : "L2"; }

inline Metric parse_metric(const std::string& s)
{
    if (s == "l1" || s == "L1")
        return Metric::l1;
    if (s == "l2" || s == "L2")
        return Metric::l2;
    throw std::invalid_argument("unknown metric '" + s + "' (expected l1 or l2)");
}

template <typename Scalar>
struct Neighbor
{
    Scalar distance;
    Eigen::Index index;
};

namespace detail
{

// L1 distance, or squared L2 distance; the caller takes the root after the min.
template <typename A, typename B>
typename A::Scalar raw_distance(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b, Metric metric)
{
    if (metric == Metric::l1)
        return (a - b).cwiseAbs().sum();
    return (a - b).squaredNorm();
}

template <typename Scalar>
Scalar finish_distance(Scalar raw, Metric metric)
{
    return metric == Metric::l1 ? raw : std::sqrt(raw);
}

template <typename Scalar>
Scalar power(Scalar d, double lambda)
{
    if (lambda == 1.0)
        return d;
    if (lambda == 2.0)
        return d * d;
    return std::pow(d, static_cast<Scalar>(lambda));
}

template <typename R, typename Q>
void check_clouds(const Eigen::MatrixBase<R>& reference, const Eigen::MatrixBase<Q>& queries)
{
    if (reference.cols() == 0 || queries.cols() == 0)
        throw std::invalid_argument("parameter clouds must be non-empty");
    if (reference.rows() != queries.rows())
        throw std::invalid_argument("dimension mismatch: clouds have " + std::to_string(reference.rows()) +
                                    " and " + std::to_string(queries.rows()) + " coordinates");
}

} // namespace detail

/// Nearest column of `training` to `point`; ties go to the lowest index.
template <typename P, typename T>
Neighbor<typename T::Scalar> nn_distance(const Eigen::MatrixBase<P>& point, const Eigen::MatrixBase<T>& training,
                                         Metric metric)
{
    using Scalar = typename T::Scalar;
    if (training.cols() == 0)
        throw std::invalid_argument("nearest neighbour against an empty training cloud");
    if (point.size() != training.rows())
        throw std::invalid_argument("dimension mismatch between point and training cloud");
    Scalar best = std::numeric_limits<Scalar>::infinity();
    Eigen::Index best_index = 0;
    for (Eigen::Index i = 0; i < training.cols(); ++i) {
        const Scalar d = detail::raw_distance(training.col(i), point, metric);
        if (d < best) {
            best = d;
            best_index = i;
        }
    }
    return {detail::finish_distance(best, metric), best_index};
}

/// Nearest-neighbour distance and index in `reference` for every column of `queries`.
template <typename Scalar>
struct NeighborTable
{
    std::vector<Scalar> distances;
    std::vector<Eigen::Index> indices;
};

template <typename R, typename Q>
NeighborTable<typename R::Scalar> nearest_neighbors(const Eigen::MatrixBase<R>& reference,
                                                    const Eigen::MatrixBase<Q>& queries, Metric metric)
{
    detail::check_clouds(reference, queries);
    const Eigen::Index count = queries.cols();
    NeighborTable<typename R::Scalar> table;
    table.distances.resize(static_cast<std::size_t>(count));
    table.indices.resize(static_cast<std::size_t>(count));
    const auto& ref = reference.derived();
    const auto& qs = queries.derived();
    parallel_for(count, [&](std::int64_t mu) {
        const auto nb = nn_distance(qs.col(mu), ref, metric);
        table.distances[static_cast<std::size_t>(mu)] = nb.distance;
        table.indices[static_cast<std::size_t>(mu)] = nb.index;
    });
    return table;
}

/// Measured specificity S_lambda with its Monte-Carlo standard error.
template <typename Scalar>
struct SpecificityResult
{
    Scalar value = 0;
    Scalar std_error = 0;
    double lambda = 1.0;
    Metric metric = Metric::l2;
    Eigen::Index count = 0;           // number of averaged terms (M, or N for generalization)
    bool std_error_defined = true;    // false when count == 1
    std::vector<Scalar> per_sample_min; // nearest-neighbour distances (not raised to lambda)
};

/// Keep per-sample distances by default up to this many samples.
inline constexpr Eigen::Index kPerSampleRetentionLimit = 1'000'000;

namespace detail
{

template <typename Scalar>
SpecificityResult<Scalar> summarize(std::vector<Scalar> distances, double lambda, Metric metric, bool keep)
{
    SpecificityResult<Scalar> r;
    r.lambda = lambda;
    r.metric = metric;
    r.count = static_cast<Eigen::Index>(distances.size());

    std::vector<double> terms(distances.size());
    CompensatedSum sum;
    for (std::size_t mu = 0; mu < distances.size(); ++mu) {
        terms[mu] = static_cast<double>(power(distances[mu], lambda));
        sum.add(terms[mu]);
    }
    const double mean = sum.value() / static_cast<double>(terms.size());
    r.value = static_cast<Scalar>(mean);
    if (terms.size() < 2) {
        r.std_error = 0;
        r.std_error_defined = false;
    } else {
        CompensatedSum sq;
        for (double t : terms)
            sq.add((t - mean) * (t - mean));
        const double m1 = static_cast<double>(terms.size() - 1);
        const double sd = std::sqrt(sq.value() / m1);
        r.std_error = static_cast<Scalar>(sd / std::sqrt(m1));
    }
    if (keep)
        r.per_sample_min = std::move(distances);
    return r;
}

} // namespace detail

/// S_lambda = (1/M) sum_mu min_i |x_i - y_mu|^lambda over sample columns y_mu; the standard
/// error is STD (divisor M-1) of the same terms divided by sqrt(M-1).
template <typename T, typename S>
SpecificityResult<typename T::Scalar> specificity(const Eigen::MatrixBase<T>& training, const Eigen::MatrixBase<S>& samples,
                                                  double lambda, Metric metric,
                                                  bool keep_per_sample = true)
{
    if (!(lambda > 0.0))
        throw std::invalid_argument("lambda must be positive");
    auto table = nearest_neighbors(training, samples, metric);
    const bool keep = keep_per_sample && samples.cols() <= kPerSampleRetentionLimit;
    return detail::summarize(std::move(table.distances), lambda, metric, keep);
}

/// Role-swapped specificity: mean over training points of their nearest-sample distance^lambda.
template <typename T, typename S>
SpecificityResult<typename T::Scalar> generalization(const Eigen::MatrixBase<T>& training,
                                                     const Eigen::MatrixBase<S>& samples, double lambda,
                                                     Metric metric, bool keep_per_sample = true)
{
    return specificity(samples, training, lambda, metric, keep_per_sample);
}

/// Sample population of each training point's Voronoi cell.
struct VoronoiHistogram
{
    std::vector<std::int64_t> counts;

    std::int64_t total() const
    {
        std::int64_t t = 0;
        for (auto c : counts)
            t += c;
        return t;
    }
};

template <typename T, typename S>
VoronoiHistogram voronoi_histogram(const Eigen::MatrixBase<T>& training, const Eigen::MatrixBase<S>& samples,
                                   Metric metric)
{
    const auto table = nearest_neighbors(training, samples, metric);
    VoronoiHistogram h;
    h.counts.assign(static_cast<std::size_t>(training.cols()), 0);
    for (auto idx : table.indices)
        ++h.counts[static_cast<std::size_t>(idx)];
    return h;
}

} // namespace nrreval

#endif // NRREVAL_SPECIFICITY_HPP
