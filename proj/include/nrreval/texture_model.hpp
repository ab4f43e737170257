#ifndef NRREVAL_TEXTURE_MODEL_HPP
#define NRREVAL_TEXTURE_MODEL_HPP

#include "nrreval/parallel.hpp"
#include "nrreval/random.hpp"
#include "nrreval/raster.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <stdexcept>

namespace nrreval
{

/// Relative eigenvalue floor below which a Gram eigenpair counts as numerically zero.
inline constexpr double kRankEpsilon = 1e-12;

/// Points in parameter space, one per column (K rows).
template <typename Scalar>
using ParameterCloud = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Which PCA modes survive. All policies also drop modes under the rank floor.
struct ModePolicy
{
    enum class Kind { all, top_k, variance_floor };
    Kind kind = Kind::all;
    Eigen::Index k = 0;
    double floor = 0.0; // per-mode variance, intensity^2

    static ModePolicy all() { return {}; }
    static ModePolicy top_k(Eigen::Index k) { return {Kind::top_k, k, 0.0}; }
    static ModePolicy variance_floor(double floor) { return {Kind::variance_floor, 0, floor}; }
};

/// Linear texture model g = mean + modes * b.
template <typename Scalar>
struct TextureModel
{
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

    Dims dims{};
    Spacing spacing{1.0, 1.0, 1.0};
    Vector mean;      // n
    Matrix modes;     // n x K, orthonormal columns
    Vector variances; // K, non-increasing

    Eigen::Index mode_count() const { return modes.cols(); }
    Eigen::Index voxel_count() const { return mean.size(); }
};

using TextureModelD = TextureModel<double>;

/// PCA of the registered set through the N x N Gram matrix of centred images. Covariance
/// uses divisor N-1; modes are sign-normalised so their largest-magnitude entry is positive.
template <typename Scalar>
TextureModel<Scalar> build_model(const RegisteredSet<Scalar>& set, ModePolicy policy = ModePolicy::all())
{
    using Matrix = typename TextureModel<Scalar>::Matrix;
    using Vector = typename TextureModel<Scalar>::Vector;

    validate_set(set);
    const auto n_images = static_cast<Eigen::Index>(set.size());
    const Eigen::Index n = set.images.front().size();

    Matrix centred(n, n_images);
    for (Eigen::Index i = 0; i < n_images; ++i)
        centred.col(i) = set.images[static_cast<std::size_t>(i)].values();

    TextureModel<Scalar> model;
    model.dims = set.dims();
    model.spacing = set.images.front().spacing();
    model.mean = centred.rowwise().sum() / static_cast<Scalar>(n_images);
    centred.colwise() -= model.mean;

    const Matrix gram = centred.transpose() * centred;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
    if (eig.info() != Eigen::Success)
        throw std::runtime_error("Gram eigendecomposition failed");

    // Eigen returns ascending eigenvalues; walk from the top.
    const Vector& lambda = eig.eigenvalues();
    const Scalar lambda_max = std::max(lambda[n_images - 1], Scalar(0));
    Eigen::Index keep = 0;
    for (Eigen::Index j = n_images - 1; j >= 0; --j) {
        if (!(lambda[j] > Scalar(kRankEpsilon) * lambda_max) || keep == n_images - 1)
            break;
        const Scalar variance = lambda[j] / static_cast<Scalar>(n_images - 1);
        if (policy.kind == ModePolicy::Kind::top_k && keep >= policy.k)
            break;
        if (policy.kind == ModePolicy::Kind::variance_floor && variance < Scalar(policy.floor))
            break;
        ++keep;
    }

    model.modes.resize(n, keep);
    model.variances.resize(keep);
    for (Eigen::Index k = 0; k < keep; ++k) {
        const Eigen::Index j = n_images - 1 - k;
        model.modes.col(k) = centred * eig.eigenvectors().col(j) / std::sqrt(lambda[j]);
        model.variances[k] = lambda[j] / static_cast<Scalar>(n_images - 1);
    }
    // One modified Gram-Schmidt pass removes rounding drift; the span is unchanged.
    for (Eigen::Index k = 0; k < keep; ++k) {
        for (Eigen::Index m = 0; m < k; ++m)
            model.modes.col(k) -= model.modes.col(m).dot(model.modes.col(k)) * model.modes.col(m);
        model.modes.col(k).normalize();
        Eigen::Index arg = 0;
        model.modes.col(k).cwiseAbs().maxCoeff(&arg);
        if (model.modes(arg, k) < Scalar(0))
            model.modes.col(k) = -model.modes.col(k);
    }
    return model;
}

template <typename Scalar>
void check_on_grid(const TextureModel<Scalar>& model, const Raster<Scalar>& image)
{
    if (image.dims() != model.dims)
        throw std::invalid_argument("grid mismatch: image dims " + to_string(image.dims()) +
                                    " vs model dims " + to_string(model.dims));
}

/// b = modes^T (image - mean).
template <typename Scalar>
typename TextureModel<Scalar>::Vector project(const TextureModel<Scalar>& model, const Raster<Scalar>& image)
{
    check_on_grid(model, image);
    return model.modes.transpose() * (image.values() - model.mean);
}

/// Parameter cloud of the whole set (the training points X).
template <typename Scalar>
ParameterCloud<Scalar> project_set(const TextureModel<Scalar>& model, const RegisteredSet<Scalar>& set)
{
    ParameterCloud<Scalar> cloud(model.mode_count(), static_cast<Eigen::Index>(set.size()));
    for (std::size_t i = 0; i < set.size(); ++i)
        cloud.col(static_cast<Eigen::Index>(i)) = project(model, set.images[i]);
    return cloud;
}

template <typename Scalar, typename Derived>
Raster<Scalar> reconstruct(const TextureModel<Scalar>& model, const Eigen::MatrixBase<Derived>& params)
{
    if (params.size() != model.mode_count())
        throw std::invalid_argument("parameter vector has dimension " + std::to_string(params.size()) +
                                    ", model has " + std::to_string(model.mode_count()) + " modes");
    if (model.mode_count() == 0)
        return Raster<Scalar>(model.dims, model.mean, model.spacing);
    return Raster<Scalar>(model.dims, model.mean + model.modes * params, model.spacing);
}

/// Samples per deterministic RNG block; block b draws from derive_seed(seed, b).
inline constexpr Eigen::Index kSampleBlock = 4096;

/// M independent draws, coordinate k ~ N(0, variances[k]). Block seeding makes the cloud
/// independent of the thread count.
template <typename Scalar>
ParameterCloud<Scalar> sample_model(const TextureModel<Scalar>& model, Eigen::Index count, std::uint64_t seed)
{
    if (count < 1)
        throw std::invalid_argument("sample count must be >= 1");
    const Eigen::Index dim = model.mode_count();
    ParameterCloud<Scalar> cloud(dim, count);
    const typename TextureModel<Scalar>::Vector sd = model.variances.cwiseMax(Scalar(0)).cwiseSqrt();
    const Eigen::Index blocks = (count + kSampleBlock - 1) / kSampleBlock;
    parallel_for(blocks, [&](std::int64_t b) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(b)));
        const Eigen::Index first = b * kSampleBlock;
        const Eigen::Index last = std::min(count, first + kSampleBlock);
        for (Eigen::Index s = first; s < last; ++s)
            for (Eigen::Index k = 0; k < dim; ++k)
                cloud(k, s) = sd[k] * static_cast<Scalar>(rng.gaussian());
    });
    return cloud;
}

} // namespace nrreval

#endif // NRREVAL_TEXTURE_MODEL_HPP
