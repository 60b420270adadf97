#include "mrisim/tensor_io.hpp"

#include <cstring>
#include <fstream>

namespace mrisim {

namespace {

constexpr char kMagic[4] = {'T', 'N', 'S', 'R'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint8_t kDtypeReal64 = 1;
constexpr std::uint8_t kDtypeComplex128 = 2;

template <typename T>
void write_le(std::ofstream& out, T v) {
    // Host is little-endian; raw write is the wire format.
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_le(std::ifstream& in, const std::string& path, const char* what) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw TruncatedError(path + ": truncated while reading " + what);
    return v;
}

void write_header(std::ofstream& out, std::uint8_t dtype, std::uint64_t rows, std::uint64_t cols) {
    out.write(kMagic, 4);
    write_le(out, kVersion);
    write_le(out, dtype);
    write_le(out, std::uint8_t{2});
    write_le(out, rows);
    write_le(out, cols);
}

struct Header {
    std::uint8_t dtype;
    std::uint64_t rows, cols;
};

Header read_header(std::ifstream& in, const std::string& path) {
    if (!in) throw TensorIoError(path + ": cannot open for reading");
    char magic[4];
    in.read(magic, 4);
    if (!in) throw TruncatedError(path + ": truncated while reading magic");
    if (std::memcmp(magic, kMagic, 4) != 0) throw BadMagicError(path + ": bad magic bytes");
    const auto version = read_le<std::uint32_t>(in, path, "version");
    if (version != kVersion)
        throw VersionError(path + ": unsupported version " + std::to_string(version));
    Header h;
    h.dtype = read_le<std::uint8_t>(in, path, "dtype");
    const auto ndim = read_le<std::uint8_t>(in, path, "ndim");
    if (ndim != 2) throw TensorIoError(path + ": expected ndim 2, got " + std::to_string(ndim));
    h.rows = read_le<std::uint64_t>(in, path, "rows");
    h.cols = read_le<std::uint64_t>(in, path, "cols");
    return h;
}

void read_payload(std::ifstream& in, const std::string& path, char* dst, std::size_t bytes) {
    in.read(dst, static_cast<std::streamsize>(bytes));
    if (static_cast<std::size_t>(in.gcount()) != bytes)
        throw TruncatedError(path + ": truncated payload");
}

}  // namespace

void save_tensor(const std::string& path, const RealTensor2& t) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw TensorIoError(path + ": cannot open for writing");
    write_header(out, kDtypeReal64, t.rows, t.cols);
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    if (!out) throw TensorIoError(path + ": write failed");
}

void save_tensor(const std::string& path, const ComplexTensor2& t) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw TensorIoError(path + ": cannot open for writing");
    write_header(out, kDtypeComplex128, t.rows, t.cols);
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * sizeof(cplx)));
    if (!out) throw TensorIoError(path + ": write failed");
}

RealTensor2 load_real_tensor(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    const Header h = read_header(in, path);
    if (h.dtype != kDtypeReal64)
        throw TensorIoError(path + ": expected real64 tensor, dtype " + std::to_string(h.dtype));
    RealTensor2 t(h.rows, h.cols);
    read_payload(in, path, reinterpret_cast<char*>(t.data.data()), t.data.size() * sizeof(double));
    return t;
}

ComplexTensor2 load_complex_tensor(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    const Header h = read_header(in, path);
    if (h.dtype != kDtypeComplex128)
        throw TensorIoError(path + ": expected complex128 tensor, dtype " + std::to_string(h.dtype));
    ComplexTensor2 t(h.rows, h.cols);
    read_payload(in, path, reinterpret_cast<char*>(t.data.data()), t.data.size() * sizeof(cplx));
    return t;
}

}  // namespace mrisim
