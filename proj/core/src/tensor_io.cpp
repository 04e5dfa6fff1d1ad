// Copyright 2026 The ttcnet Authors
// SPDX-License-Identifier: Apache-2.0

#include "ttcnet/tensor_io.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <ostream>
#include <vector>

#include "ttcnet/errors.hpp"

namespace ttcnet {

static_assert(std::endian::native == std::endian::little,
              "tensor files are little-endian; big-endian hosts need byte swaps");
static_assert(sizeof(float) == 4 && std::numeric_limits<float>::is_iec559,
              "payload format requires IEEE-754 binary32");

namespace {

constexpr char kMagic[4] = {'C', 'N', 'T', '1'};

void write_u32(std::ostream& os, std::uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::istream& is) {
    std::uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!is) throw LoadError("tensor file truncated");
    return v;
}

}  // namespace

void save_tensor(std::ostream& os, const Tensor& t) {
    if (!t.defined()) throw UsageError("save_tensor: undefined tensor");
    os.write(kMagic, 4);
    write_u32(os, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t i = 0; i < t.rank(); ++i) {
        write_u32(os, static_cast<std::uint32_t>(t.dim(i)));
    }
    const double* src = t.data();
    std::vector<float> buf(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
        const float f = static_cast<float>(src[i]);
        if (!std::isfinite(f)) {
            throw NumericError("save_tensor: value " + std::to_string(src[i]) +
                               " is not representable as finite float32");
        }
        buf[i] = f;
    }
    os.write(reinterpret_cast<const char*>(buf.data()),
             static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!os) throw IoError("save_tensor: stream write failed");
}

void save_tensor(const std::string& path, const Tensor& t) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("save_tensor: cannot open '" + path + "' for writing");
    save_tensor(f, t);
    f.close();
    if (!f) throw IoError("save_tensor: failed writing '" + path + "'");
}

Tensor load_tensor(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0) {
        throw LoadError("tensor file has bad magic");
    }
    const std::uint32_t rank = read_u32(is);
    if (rank > 8) throw LoadError("tensor file rank " + std::to_string(rank) + " is implausible");
    Shape shape(rank);
    std::size_t numel = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
        shape[i] = read_u32(is);
        if (shape[i] == 0) throw LoadError("tensor file has zero extent");
        if (numel > (std::size_t{1} << 32) / std::max<std::size_t>(shape[i], 1)) {
            throw LoadError("tensor file extents overflow");
        }
        numel *= shape[i];
    }
    std::vector<float> buf(numel);
    is.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(numel * sizeof(float)));
    if (static_cast<std::size_t>(is.gcount()) != numel * sizeof(float)) {
        throw LoadError("tensor file payload truncated");
    }
    Tensor out(shape);
    double* dst = out.data();
    for (std::size_t i = 0; i < numel; ++i) {
        if (!std::isfinite(buf[i])) throw LoadError("tensor file contains non-finite value");
        dst[i] = static_cast<double>(buf[i]);
    }
    return out;
}

Tensor load_tensor(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("load_tensor: cannot open '" + path + "'");
    return load_tensor(f);
}

}  // namespace ttcnet
