#include "nrreval/io.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <optional>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace fs = std::filesystem;

namespace nrreval
{

std::string to_string(const Dims& dims)
{
    std::string s = "(" + std::to_string(dims.width) + "," + std::to_string(dims.height);
    if (dims.ndim == 3)
        s += "," + std::to_string(dims.depth);
    return s + ")";
}

namespace
{

std::ifstream open_in(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open '" + path.string() + "'");
    return in;
}

std::ofstream open_out(const fs::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot write '" + path.string() + "'");
    return out;
}

// Next whitespace-delimited PGM header token, skipping '#' comments.
std::string pgm_token(std::istream& in)
{
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {
            }
            continue;
        }
        if (std::isspace(c)) {
            if (!tok.empty())
                break;
            continue;
        }
        tok.push_back(static_cast<char>(c));
    }
    return tok;
}

int parse_int(const std::string& s, const std::string& what)
{
    try {
        std::size_t pos = 0;
        int v = std::stoi(s, &pos);
        if (pos != s.size())
            throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw IoError("bad " + what + " '" + s + "'");
    }
}

double parse_double(const std::string& s, const std::string& what)
{
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size())
            throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw IoError("bad " + what + " '" + s + "'");
    }
}

template <typename T>
T from_little_endian(const unsigned char* p)
{
    using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
    U bits = 0;
    for (std::size_t b = 0; b < sizeof(T); ++b)
        bits |= static_cast<U>(p[b]) << (8 * b);
    return std::bit_cast<T>(bits);
}

template <typename T>
void to_little_endian(T value, unsigned char* p)
{
    using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
    auto bits = std::bit_cast<U>(value);
    for (std::size_t b = 0; b < sizeof(T); ++b)
        p[b] = static_cast<unsigned char>((bits >> (8 * b)) & 0xffu);
}

std::vector<std::string> split_ws(const std::string& line)
{
    std::istringstream ss(line);
    std::vector<std::string> out;
    std::string tok;
    while (ss >> tok)
        out.push_back(tok);
    return out;
}

std::string fmt_double(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

RasterImage read_pgm(const fs::path& path)
{
    auto in = open_in(path);
    const std::string magic = pgm_token(in);
    if (magic != "P2" && magic != "P5")
        throw IoError("'" + path.string() + "' is not a P2/P5 PGM");
    const int w = parse_int(pgm_token(in), "PGM width");
    const int h = parse_int(pgm_token(in), "PGM height");
    const int maxval = parse_int(pgm_token(in), "PGM maxval");
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535)
        throw IoError("'" + path.string() + "' has an invalid PGM header");

    RasterImage img(Dims::make2(w, h));
    auto& v = img.values();
    if (magic == "P2") {
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            const std::string tok = pgm_token(in);
            if (tok.empty())
                throw IoError("'" + path.string() + "' is truncated");
            const int s = parse_int(tok, "PGM sample");
            if (s < 0 || s > maxval)
                throw IoError("'" + path.string() + "' has a sample above maxval");
            v[i] = s;
        }
        return img;
    }
    // pgm_token consumed exactly one whitespace byte after maxval.
    const std::size_t bytes = maxval > 255 ? 2 : 1;
    std::vector<unsigned char> raw(img.dims().count() * bytes);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(in.gcount()) != raw.size())
        throw IoError("'" + path.string() + "' is truncated");
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        const int s = bytes == 2 ? (raw[2 * i] << 8) | raw[2 * i + 1] : raw[i];
        if (s > maxval)
            throw IoError("'" + path.string() + "' has a sample above maxval");
        v[i] = s;
    }
    return img;
}

void write_pgm(const fs::path& path, const RasterImage& image, int maxval)
{
    if (image.dims().ndim != 2)
        throw IoError("PGM output needs a 2D raster");
    if (maxval <= 0 || maxval > 65535)
        throw IoError("PGM maxval must be in 1..65535");
    auto out = open_out(path);
    out << "P5\n" << image.dims().width << ' ' << image.dims().height << '\n' << maxval << '\n';
    for (Eigen::Index i = 0; i < image.size(); ++i) {
        const double clamped = std::clamp(std::round(image.values()[i]), 0.0, static_cast<double>(maxval));
        const auto s = static_cast<unsigned>(clamped);
        if (maxval > 255)
            out.put(static_cast<char>(s >> 8));
        out.put(static_cast<char>(s & 0xffu));
    }
}

RasterImage read_raw(const fs::path& header_path)
{
    auto in = open_in(header_path);
    std::vector<int> dims;
    std::vector<double> spacing;
    std::string dtype;
    fs::path data = header_path;
    data.replace_extension(".raw");

    std::string line;
    while (std::getline(in, line)) {
        const auto toks = split_ws(line);
        if (toks.empty() || toks[0][0] == '#')
            continue;
        const std::string& key = toks[0];
        if (key == "dims") {
            for (std::size_t i = 1; i < toks.size(); ++i)
                dims.push_back(parse_int(toks[i], "dims"));
        } else if (key == "spacing") {
            for (std::size_t i = 1; i < toks.size(); ++i)
                spacing.push_back(parse_double(toks[i], "spacing"));
        } else if (key == "dtype" && toks.size() == 2) {
            dtype = toks[1];
        } else if (key == "data" && toks.size() == 2) {
            data = header_path.parent_path() / toks[1];
        } else if (key == "byte_order" && toks.size() == 2) {
            if (toks[1] != "little")
                throw IoError("'" + header_path.string() + "': only little-endian payloads are supported");
        } else {
            throw IoError("'" + header_path.string() + "': unknown header line '" + line + "'");
        }
    }
    if (dims.size() != 2 && dims.size() != 3)
        throw IoError("'" + header_path.string() + "': dims needs 2 or 3 extents");
    if (!spacing.empty() && spacing.size() != dims.size())
        throw IoError("'" + header_path.string() + "': spacing arity does not match dims");
    if (dtype != "float32" && dtype != "float64")
        throw IoError("'" + header_path.string() + "': dtype must be float32 or float64");

    Dims d = dims.size() == 2 ? Dims::make2(dims[0], dims[1]) : Dims::make3(dims[0], dims[1], dims[2]);
    if (d.width <= 0 || d.height <= 0 || d.depth <= 0)
        throw IoError("'" + header_path.string() + "': non-positive dims");
    Spacing sp{1.0, 1.0, 1.0};
    for (std::size_t i = 0; i < spacing.size(); ++i)
        sp[i] = spacing[i];

    const std::size_t width = dtype == "float32" ? 4 : 8;
    auto raw_in = open_in(data);
    std::vector<unsigned char> raw(d.count() * width);
    raw_in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(raw_in.gcount()) != raw.size())
        throw IoError("'" + data.string() + "' is shorter than its header declares");
    if (raw_in.peek() != EOF)
        throw IoError("'" + data.string() + "' is longer than its header declares");

    RasterImage img(d, sp);
    auto& v = img.values();
    for (Eigen::Index i = 0; i < v.size(); ++i)
        v[i] = width == 4 ? static_cast<double>(from_little_endian<float>(&raw[4 * i]))
                          : from_little_endian<double>(&raw[8 * i]);
    if (!img.all_finite())
        throw IoError("'" + data.string() + "' contains non-finite values");
    return img;
}

void write_raw(const fs::path& header_path, const RasterImage& image, RawType dtype)
{
    fs::path data = header_path;
    data.replace_extension(".raw");
    {
        auto out = open_out(header_path);
        const auto& d = image.dims();
        const auto& sp = image.spacing();
        out << "dims " << d.width << ' ' << d.height;
        if (d.ndim == 3)
            out << ' ' << d.depth;
        out << "\nspacing " << fmt_double(sp[0]) << ' ' << fmt_double(sp[1]);
        if (d.ndim == 3)
            out << ' ' << fmt_double(sp[2]);
        out << "\ndtype " << (dtype == RawType::float32 ? "float32" : "float64") << "\ndata "
            << data.filename().string() << '\n';
    }
    const std::size_t width = dtype == RawType::float32 ? 4 : 8;
    std::vector<unsigned char> raw(static_cast<std::size_t>(image.size()) * width);
    for (Eigen::Index i = 0; i < image.size(); ++i) {
        if (width == 4)
            to_little_endian(static_cast<float>(image.values()[i]), &raw[4 * i]);
        else
            to_little_endian(image.values()[i], &raw[8 * i]);
    }
    auto out = open_out(data);
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
}

RasterImage read_raster(const fs::path& path)
{
    const auto ext = path.extension().string();
    if (ext == ".pgm")
        return read_pgm(path);
    if (ext == ".hdr")
        return read_raw(path);
    throw IoError("unsupported raster extension for '" + path.string() + "'");
}

LabelMapD read_label_dir(const fs::path& dir)
{
    if (!fs::is_directory(dir))
        throw IoError("label directory '" + dir.string() + "' does not exist");
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const auto ext = entry.path().extension().string();
        if (entry.is_regular_file() && (ext == ".hdr" || ext == ".pgm"))
            files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end(),
              [](const fs::path& a, const fs::path& b) { return a.stem().string() < b.stem().string(); });
    if (files.empty())
        throw IoError("label directory '" + dir.string() + "' holds no rasters");

    LabelMapD map;
    for (const auto& f : files) {
        RasterImage ch = read_raster(f);
        if (f.extension() == ".pgm") {
            // Scale by the declared maxval so 0/1 and 0/255 masks both load as {0,1}.
            auto in = open_in(f);
            pgm_token(in);
            pgm_token(in);
            pgm_token(in);
            ch.values() /= parse_int(pgm_token(in), "PGM maxval");
        }
        map.names.push_back(f.stem().string());
        map.channels.push_back(std::move(ch));
    }
    try {
        validate_label_map(map);
    } catch (const std::invalid_argument& e) {
        throw IoError("'" + dir.string() + "': " + e.what());
    }
    return map;
}

void write_label_dir(const fs::path& dir, const LabelMapD& labels)
{
    fs::create_directories(dir);
    for (std::size_t l = 0; l < labels.label_count(); ++l)
        write_raw(dir / (labels.names[l] + ".hdr"), labels.channels[l]);
}

RegisteredSetD load_set(const fs::path& manifest_path)
{
    auto in = open_in(manifest_path);
    const fs::path base = manifest_path.parent_path();

    std::optional<Dims> dims;
    Spacing spacing{1.0, 1.0, 1.0};
    RegisteredSetD set;
    std::vector<LabelMapD> maps;
    std::size_t with_labels = 0;

    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto toks = split_ws(line);
        if (toks.empty() || toks[0][0] == '#')
            continue;
        const std::string where = manifest_path.string() + ":" + std::to_string(lineno);
        if (!dims) {
            if (toks[0] != "dims")
                throw IoError(where + ": expected a 'dims' header line");
            std::vector<int> ext;
            std::vector<double> sp;
            std::size_t i = 1;
            for (; i < toks.size() && toks[i] != "spacing"; ++i)
                ext.push_back(parse_int(toks[i], "dims"));
            if (i < toks.size())
                for (++i; i < toks.size(); ++i)
                    sp.push_back(parse_double(toks[i], "spacing"));
            if (ext.size() != 2 && ext.size() != 3)
                throw IoError(where + ": dims needs 2 or 3 extents");
            if (!sp.empty() && sp.size() != ext.size())
                throw IoError(where + ": spacing arity does not match dims");
            dims = ext.size() == 2 ? Dims::make2(ext[0], ext[1]) : Dims::make3(ext[0], ext[1], ext[2]);
            for (std::size_t k = 0; k < sp.size(); ++k)
                spacing[k] = sp[k];
            continue;
        }
        if (toks.size() > 2)
            throw IoError(where + ": expected '<image> [<label dir>]'");
        const fs::path image_path = base / toks[0];
        RasterImage img = read_raster(image_path);
        if (img.dims() != *dims)
            throw IoError(where + ": dimension mismatch: '" + toks[0] + "' has dims " + to_string(img.dims()) +
                          ", manifest declares " + to_string(*dims));
        // PGM carries no spacing; the manifest's spacing is authoritative.
        img = RasterImage(img.dims(), std::move(img.values()), spacing);
        set.names.push_back(fs::path(toks[0]).stem().string());
        set.images.push_back(std::move(img));
        if (toks.size() == 2) {
            ++with_labels;
            LabelMapD map = read_label_dir(base / toks[1]);
            for (auto& ch : map.channels) {
                if (ch.dims() != *dims)
                    throw IoError(where + ": dimension mismatch in label directory '" + toks[1] + "'");
                ch = RasterImage(ch.dims(), std::move(ch.values()), spacing);
            }
            maps.push_back(std::move(map));
        }
    }
    if (!dims)
        throw IoError("'" + manifest_path.string() + "' has no 'dims' header");
    if (with_labels != 0 && with_labels != set.images.size())
        throw IoError("'" + manifest_path.string() + "': either every example or none must list labels");
    if (with_labels != 0)
        set.label_maps = std::move(maps);
    try {
        validate_set(set);
    } catch (const std::invalid_argument& e) {
        throw IoError("'" + manifest_path.string() + "': " + e.what());
    }
    return set;
}

fs::path save_set(const fs::path& dir, const RegisteredSetD& set)
{
    validate_set(set);
    fs::create_directories(dir / "images");
    const fs::path manifest = dir / "manifest.txt";
    auto out = open_out(manifest);
    const auto& d = set.dims();
    const auto& sp = set.images.front().spacing();
    out << "dims " << d.width << ' ' << d.height;
    if (d.ndim == 3)
        out << ' ' << d.depth;
    out << " spacing " << fmt_double(sp[0]) << ' ' << fmt_double(sp[1]);
    if (d.ndim == 3)
        out << ' ' << fmt_double(sp[2]);
    out << '\n';
    for (std::size_t i = 0; i < set.size(); ++i) {
        const std::string name = set.names.empty() ? "image_" + std::to_string(i) : set.names[i];
        const std::string rel = "images/" + name + ".hdr";
        write_raw(dir / rel, set.images[i]);
        out << rel;
        if (set.label_maps) {
            const std::string lrel = "labels/" + name;
            write_label_dir(dir / lrel, (*set.label_maps)[i]);
            out << ' ' << lrel;
        }
        out << '\n';
    }
    return manifest;
}

} // namespace nrreval
