// Copyright 2026 The ttcnet Authors
// SPDX-License-Identifier: Apache-2.0

#include "ttcnet/checkpoint.hpp"

#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>

#include "ttcnet/errors.hpp"
#include "ttcnet/tensor_io.hpp"

namespace ttcnet {

namespace {

constexpr char kMagic[4] = {'C', 'N', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& os, std::uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_u64(std::ostream& os, std::uint64_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::istream& is) {
    std::uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!is) throw LoadError("checkpoint truncated");
    return v;
}

std::uint64_t read_u64(std::istream& is) {
    std::uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!is) throw LoadError("checkpoint truncated");
    return v;
}

}  // namespace

const Tensor* Checkpoint::find(const std::string& name) const {
    for (const auto& [n, t] : tensors) {
        if (n == name) return &t;
    }
    return nullptr;
}

void save_checkpoint(std::ostream& os, const RunConfig& cfg, const ParamRegistry& reg) {
    os.write(kMagic, 4);
    write_u32(os, kVersion);
    const std::string text = canonical_config_text(cfg);
    write_u64(os, text.size());
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    write_u32(os, static_cast<std::uint32_t>(reg.tensor_count()));
    for (const auto& [name, t] : reg.entries()) {
        write_u32(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        save_tensor(os, t);
    }
    if (!os) throw IoError("checkpoint write failed");
}

void save_checkpoint(const std::string& path, const RunConfig& cfg, const ParamRegistry& reg) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open checkpoint for writing: " + path);
    save_checkpoint(out, cfg, reg);
}

Checkpoint load_checkpoint(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::string(magic, 4) != std::string(kMagic, 4)) {
        throw LoadError("not a checkpoint file (bad magic)");
    }
    const std::uint32_t version = read_u32(is);
    if (version != kVersion) {
        throw LoadError("unsupported checkpoint version " + std::to_string(version));
    }
    const std::uint64_t text_len = read_u64(is);
    std::string text(text_len, '\0');
    is.read(text.data(), static_cast<std::streamsize>(text_len));
    if (!is) throw LoadError("checkpoint truncated");

    Checkpoint ck;
    ck.config = parse_config_text(text);
    const std::uint32_t count = read_u32(is);
    ck.tensors.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t name_len = read_u32(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        if (!is) throw LoadError("checkpoint truncated");
        ck.tensors.emplace_back(std::move(name), load_tensor(is));
    }
    return ck;
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    return load_checkpoint(in);
}

void apply_checkpoint(const Checkpoint& ck, ParamRegistry& reg) {
    if (ck.tensors.size() != reg.tensor_count()) {
        throw LoadError("checkpoint holds " + std::to_string(ck.tensors.size()) +
                        " tensors, model has " + std::to_string(reg.tensor_count()));
    }
    for (auto& [name, param] : reg.entries()) {
        const Tensor* stored = ck.find(name);
        if (!stored) throw LoadError("checkpoint is missing parameter '" + name + "'");
        if (stored->shape() != param.shape()) {
            throw LoadError("checkpoint parameter '" + name + "' has shape " +
                            shape_str(stored->shape()) + ", model expects " +
                            shape_str(param.shape()));
        }
        double* dst = param.data();
        const double* src = stored->data();
        for (std::size_t i = 0; i < param.size(); ++i) dst[i] = src[i];
    }
}

}  // namespace ttcnet
