#include "obcomp/tensor_io.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace obc {

namespace {

constexpr char kMagic[4] = {'O', 'B', 'C', 'T'};

void put_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

void put_f32(std::ostream& os, float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(os, bits);
}

float get_f32(std::istream& is) {
    const uint32_t bits = get_u32(is);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

}  // namespace

size_t TensorFile::element_count() const {
    size_t n = 1;
    for (uint32_t d : shape) n *= d;
    return shape.empty() ? 0 : n;
}

void write_tensor(const TensorFile& t, const std::string& path) {
    if (t.shape.empty()) {
        throw std::invalid_argument("write_tensor: empty shape");
    }
    if (t.data.size() != t.element_count()) {
        throw std::invalid_argument("write_tensor: data size does not match shape");
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw std::runtime_error("write_tensor: cannot open " + path);
    }
    f.write(kMagic, 4);
    put_u32(f, static_cast<uint32_t>(t.shape.size()));
    for (uint32_t d : t.shape) put_u32(f, d);
    for (double v : t.data) put_f32(f, static_cast<float>(v));
    if (!f) {
        throw std::runtime_error("write_tensor: short write to " + path);
    }
}

TensorFile read_tensor(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw std::runtime_error("read_tensor: cannot open " + path);
    }
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, kMagic, 4) != 0) {
        throw std::runtime_error("read_tensor: bad magic in " + path);
    }
    const uint32_t ndim = get_u32(f);
    if (ndim == 0 || ndim > 8) {
        throw std::runtime_error("read_tensor: implausible rank in " + path);
    }
    TensorFile t;
    t.shape.resize(ndim);
    for (auto& d : t.shape) d = get_u32(f);
    t.data.resize(t.element_count());
    for (auto& v : t.data) v = get_f32(f);
    if (!f) {
        throw std::runtime_error("read_tensor: truncated payload in " + path);
    }
    return t;
}

}  // namespace obc
