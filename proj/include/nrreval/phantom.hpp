#ifndef NRREVAL_PHANTOM_HPP
#define NRREVAL_PHANTOM_HPP

#include "nrreval/raster.hpp"

#include <cstdint>

namespace nrreval
{

/// Synthetic "registered" brain-slice set: a skull ring, cortex, white matter and bilateral
/// subcortical structures, each image with small shape jitter, intensity variation, a smooth
/// bias field and pixel noise. Label maps are binary and mutually disjoint.
struct PhantomConfig
{
    int count = 10;
    int size = 141;
    int labels = 7; // 1..7: white_matter, cortex, ventricle, thalamus, caudate, putamen, thalamus_proper
    double shape_jitter = 0.01;    // unit-disk sd of structure centres; 0 gives identical labels
    double intensity_jitter = 4.0; // sd of per-structure intensity offsets
    double noise_sd = 1.0;
    std::uint64_t seed = 1;
};

RegisteredSetD make_phantom_set(const PhantomConfig& config);

} // namespace nrreval

#endif // NRREVAL_PHANTOM_HPP
