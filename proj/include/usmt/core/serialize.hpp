#ifndef USMT_CORE_SERIALIZE_HPP
#define USMT_CORE_SERIALIZE_HPP

#include <cstdint>
#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "usmt/core/tensor.hpp"

namespace usmt {

// Weight container: a flat map from canonical parameter names to float32
// arrays. On disk: magic, entry count, then per entry a length-prefixed name,
// the shape and raw little-endian float32 data.
struct NamedTensors {
    std::vector<std::pair<std::string, Tensor>> entries;

    const Tensor* find(const std::string& name) const {
        for (const auto& [n, t] : entries)
            if (n == name) return &t;
        return nullptr;
    }

    void add(std::string name, Tensor t) { entries.emplace_back(std::move(name), std::move(t)); }
};

inline constexpr char kWeightsMagic[8] = {'U', 'S', 'M', 'T', 'W', 'B', '0', '1'};

inline void write_weights(const std::string& path, const NamedTensors& w) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path + " for writing");
    f.write(kWeightsMagic, 8);
    auto put_u32 = [&](uint32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); };
    put_u32(static_cast<uint32_t>(w.entries.size()));
    for (const auto& [name, t] : w.entries) {
        put_u32(static_cast<uint32_t>(name.size()));
        f.write(name.data(), static_cast<std::streamsize>(name.size()));
        put_u32(static_cast<uint32_t>(t.shape.size()));
        for (int d : t.shape) put_u32(static_cast<uint32_t>(d));
        f.write(reinterpret_cast<const char*>(t.data.data()),
                static_cast<std::streamsize>(t.data.size() * sizeof(float)));
    }
    if (!f) throw IoError("short write to " + path);
}

inline NamedTensors read_weights(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path);
    char magic[8];
    f.read(magic, 8);
    if (!f || std::string(magic, 8) != std::string(kWeightsMagic, 8))
        throw IoError(path + " is not a weights file");
    auto get_u32 = [&]() {
        uint32_t v = 0;
        f.read(reinterpret_cast<char*>(&v), 4);
        return v;
    };
    NamedTensors w;
    uint32_t count = get_u32();
    for (uint32_t i = 0; i < count && f; ++i) {
        uint32_t name_len = get_u32();
        std::string name(name_len, '\0');
        f.read(name.data(), name_len);
        uint32_t ndim = get_u32();
        std::vector<int> shape(ndim);
        for (auto& d : shape) d = static_cast<int>(get_u32());
        Tensor t(shape);
        f.read(reinterpret_cast<char*>(t.data.data()),
               static_cast<std::streamsize>(t.data.size() * sizeof(float)));
        w.add(std::move(name), std::move(t));
    }
    if (!f) throw IoError("truncated weights file " + path);
    return w;
}

}  // namespace usmt

#endif
