#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace obc {

// Minimal binary tensor container used for latent dumps and fixture
// backbones. Layout, all little-endian:
//   bytes 0..3   magic "OBCT"
//   bytes 4..7   uint32 ndim
//   then         uint32 dims[ndim]
//   then         float32 payload, row-major
struct TensorFile {
    std::vector<uint32_t> shape;
    std::vector<double> data;  // converted from/to float32 on disk

    size_t element_count() const;
};

void write_tensor(const TensorFile& t, const std::string& path);
TensorFile read_tensor(const std::string& path);

}  // namespace obc
