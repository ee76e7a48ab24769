#pragma once

#include <string>
#include <vector>

#include "obcomp/numerics.hpp"

namespace obc {

// Grayscale image writers. Grids are expected in [0,1]; values are clamped
// and quantized to 8-bit.

// Binary PGM (P5).
void write_pgm(const Grid2D& img, const std::string& path);
std::vector<unsigned char> encode_pgm(const Grid2D& img);

// 8-bit grayscale PNG via libpng.
void write_png(const Grid2D& img, const std::string& path);

Grid2D read_pgm(const std::string& path);

}  // namespace obc
