#include "nrreval/model_io.hpp"

#include "nrreval/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace nrreval
{

namespace
{

std::string mode_file(Eigen::Index k)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "mode_%03ld.hdr", static_cast<long>(k));
    return buf;
}

} // namespace

void save_model(const fs::path& dir, const TextureModelD& model)
{
    fs::create_directories(dir);
    std::ofstream out(dir / "model.txt");
    if (!out)
        throw IoError("cannot write '" + (dir / "model.txt").string() + "'");
    out << "nrreval-texture-model 1\n";
    out << "modes " << model.mode_count() << "\nvariances";
    char buf[32];
    for (Eigen::Index k = 0; k < model.mode_count(); ++k) {
        std::snprintf(buf, sizeof buf, " %.17g", model.variances[k]);
        out << buf;
    }
    out << '\n';
    write_raw(dir / "mean.hdr", RasterImage(model.dims, model.mean, model.spacing));
    for (Eigen::Index k = 0; k < model.mode_count(); ++k)
        write_raw(dir / mode_file(k), RasterImage(model.dims, model.modes.col(k), model.spacing));
}

TextureModelD load_model(const fs::path& dir)
{
    std::ifstream in(dir / "model.txt");
    if (!in)
        throw IoError("cannot open '" + (dir / "model.txt").string() + "'");
    std::string magic;
    int version = 0;
    in >> magic >> version;
    if (magic != "nrreval-texture-model" || version != 1)
        throw IoError("'" + dir.string() + "' is not a texture model directory");

    std::string key;
    long k_modes = -1;
    in >> key >> k_modes;
    if (key != "modes" || k_modes < 0)
        throw IoError("'" + dir.string() + "/model.txt': bad 'modes' line");
    in >> key;
    if (key != "variances")
        throw IoError("'" + dir.string() + "/model.txt': missing 'variances' line");

    TextureModelD model;
    model.variances.resize(k_modes);
    for (long k = 0; k < k_modes; ++k)
        if (!(in >> model.variances[k]))
            throw IoError("'" + dir.string() + "/model.txt': too few variances");

    const RasterImage mean = read_raw(dir / "mean.hdr");
    model.dims = mean.dims();
    model.spacing = mean.spacing();
    model.mean = mean.values();
    model.modes.resize(model.mean.size(), k_modes);
    for (long k = 0; k < k_modes; ++k) {
        const RasterImage mode = read_raw(dir / mode_file(k));
        if (mode.dims() != model.dims)
            throw IoError("'" + dir.string() + "': mode " + std::to_string(k) + " is on a different grid");
        model.modes.col(k) = mode.values();
    }
    return model;
}

} // namespace nrreval
