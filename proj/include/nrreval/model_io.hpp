#ifndef NRREVAL_MODEL_IO_HPP
#define NRREVAL_MODEL_IO_HPP

#include "nrreval/texture_model.hpp"

#include <filesystem>

namespace nrreval
{

// A model directory holds `model.txt` (grid, mode count and the variances as text),
// `mean.hdr` and one `mode_<k>.hdr` per mode, all float64 header+raw rasters.
void save_model(const std::filesystem::path& dir, const TextureModelD& model);
TextureModelD load_model(const std::filesystem::path& dir);

} // namespace nrreval

#endif // NRREVAL_MODEL_IO_HPP
