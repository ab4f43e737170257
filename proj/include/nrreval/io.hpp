#ifndef NRREVAL_IO_HPP
#define NRREVAL_IO_HPP

#include "nrreval/raster.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>

namespace nrreval
{

/// Raised for unreadable, missing or malformed input files.
class IoError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

enum class RawType { float32, float64 };

// Plain PGM (P2 ascii / P5 binary, maxval <= 65535). 16-bit P5 samples are big-endian
// per the netpbm convention. Values are promoted to double unscaled.
RasterImage read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const RasterImage& image, int maxval = 255);

// Header + raw: a text header with `dims`, `spacing`, `dtype` (float32|float64) and an
// optional `data` key naming the payload file (defaults to the header stem + ".raw" in the
// same directory). Payloads are little-endian.
RasterImage read_raw(const std::filesystem::path& header_path);
void write_raw(const std::filesystem::path& header_path, const RasterImage& image,
               RawType dtype = RawType::float64);

/// Dispatches on extension: ".pgm" or ".hdr".
RasterImage read_raster(const std::filesystem::path& path);

/// Loads one raster per label from a directory (".hdr" or ".pgm" files); label names are the
/// file stems in lexicographic order. PGM label channels are divided by their maxval.
LabelMapD read_label_dir(const std::filesystem::path& dir);
void write_label_dir(const std::filesystem::path& dir, const LabelMapD& labels);

/// Manifest format:
///
///     # comment
///     dims <w> <h> [<d>] [spacing <sx> <sy> [<sz>]]
///     <image path> [<label directory>]
///     ...
///
/// Paths are relative to the manifest's directory. Either every example lists a label
/// directory or none does.
RegisteredSetD load_set(const std::filesystem::path& manifest_path);

/// Writes images as float64 header+raw files (and label directories when present) under `dir`,
/// plus `dir/manifest.txt`. Returns the manifest path.
std::filesystem::path save_set(const std::filesystem::path& dir, const RegisteredSetD& set);

} // namespace nrreval

#endif // NRREVAL_IO_HPP
