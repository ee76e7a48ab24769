#include "obcomp/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace obc {

namespace {

unsigned char to_byte(double v) {
    const double c = std::clamp(v, 0.0, 1.0);
    return static_cast<unsigned char>(std::lround(c * 255.0));
}

}  // namespace

std::vector<unsigned char> encode_pgm(const Grid2D& img) {
    img.validate();
    std::ostringstream header;
    header << "P5\n" << img.w << " " << img.h << "\n255\n";
    const std::string h = header.str();
    std::vector<unsigned char> out(h.begin(), h.end());
    out.reserve(out.size() + img.size());
    for (double v : img.values) {
        out.push_back(to_byte(v));
    }
    return out;
}

void write_pgm(const Grid2D& img, const std::string& path) {
    const auto bytes = encode_pgm(img);
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw std::runtime_error("write_pgm: cannot open " + path);
    }
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) {
        throw std::runtime_error("write_pgm: short write to " + path);
    }
}

Grid2D read_pgm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw std::runtime_error("read_pgm: cannot open " + path);
    }
    std::string magic;
    int w = 0, h = 0, maxval = 0;
    f >> magic >> w >> h >> maxval;
    if (magic != "P5" || w < 1 || h < 1 || maxval != 255) {
        throw std::runtime_error("read_pgm: unsupported PGM header in " + path);
    }
    f.get();  // single whitespace after maxval
    Grid2D img(h, w);
    std::vector<unsigned char> raw(static_cast<size_t>(w) * h);
    f.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!f) {
        throw std::runtime_error("read_pgm: truncated payload in " + path);
    }
    for (size_t i = 0; i < raw.size(); ++i) {
        img.values[i] = raw[i] / 255.0;
    }
    return img;
}

void write_png(const Grid2D& img, const std::string& path) {
    img.validate();
    FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) {
        throw std::runtime_error("write_png: cannot open " + path);
    }
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info || setjmp(png_jmpbuf(png))) {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
        std::fclose(fp);
        throw std::runtime_error("write_png: libpng failure for " + path);
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.w), static_cast<png_uint_32>(img.h), 8,
                 PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    std::vector<unsigned char> row(static_cast<size_t>(img.w));
    for (int y = 0; y < img.h; ++y) {
        for (int x = 0; x < img.w; ++x) {
            row[static_cast<size_t>(x)] = to_byte(img.at(y, x));
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

}  // namespace obc
