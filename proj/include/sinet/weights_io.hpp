#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "sinet/common.hpp"
#include "sinet/model.hpp"
#include "sinet/tensor.hpp"

namespace sinet {

// Flat named-parameter container, always little-endian on disk:
//   "SNWT" | version u8 | scalar width u8 (4|8) | entry count u32
//   entries: name len u16 | name | n,c,h,w u32 each | payload (numel scalars)
inline constexpr char kWeightMagic[4] = {'S', 'N', 'W', 'T'};
inline constexpr std::uint8_t kWeightVersion = 1;

namespace detail {

inline void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class WeightReader {
public:
    WeightReader(const std::byte* data, std::size_t size, std::string path)
        : data_(data), size_(size), path_(std::move(path)) {}

    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(data_[pos_++]);
    }
    std::uint16_t u16() {
        need(2);
        std::uint16_t v = 0;
        for (int i = 0; i < 2; ++i)
            v |= static_cast<std::uint16_t>(static_cast<std::uint8_t>(data_[pos_++])) << (8 * i);
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(data_[pos_++])) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(data_[pos_++])) << (8 * i);
        return v;
    }
    std::string bytes(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(data_ + pos_), n);
        pos_ += n;
        return s;
    }
    bool at_end() const { return pos_ == size_; }

private:
    void need(std::size_t n) {
        require(pos_ + n <= size_, ErrorKind::Validation, "truncated weight file " + path_);
    }
    const std::byte* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
    std::string path_;
};

} // namespace detail

// Writes every parameter, trainable weights and running statistics alike.
inline void save_weights(const std::string& path, const SinetParams& params) {
    std::string buf;
    buf.append(kWeightMagic, 4);
    buf.push_back(static_cast<char>(kWeightVersion));
    buf.push_back(static_cast<char>(sizeof(Real)));
    std::uint32_t count = 0;
    params.visit([&count](const std::string&, const Tensor&, ParamKind) { ++count; });
    detail::put_u32(buf, count);
    params.visit([&buf](const std::string& name, const Tensor& t, ParamKind) {
        require(name.size() <= 0xffff, ErrorKind::Validation, "parameter name too long");
        detail::put_u16(buf, static_cast<std::uint16_t>(name.size()));
        buf.append(name);
        const Shape s = t.shape();
        detail::put_u32(buf, static_cast<std::uint32_t>(s.n));
        detail::put_u32(buf, static_cast<std::uint32_t>(s.c));
        detail::put_u32(buf, static_cast<std::uint32_t>(s.h));
        detail::put_u32(buf, static_cast<std::uint32_t>(s.w));
        for (Real v : t.values()) {
            if constexpr (sizeof(Real) == 8)
                detail::put_u64(buf, std::bit_cast<std::uint64_t>(static_cast<double>(v)));
            else
                detail::put_u32(buf, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
        }
    });
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(out.good(), ErrorKind::Io, "cannot open weight file for writing: " + path);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    out.flush();
    require(out.good(), ErrorKind::Io, "failed writing weight file: " + path);
}

// Reads a container written at either scalar width, converting to Real.
inline std::map<std::string, Tensor> load_weights(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), ErrorKind::Io, "cannot open weight file: " + path);
    std::vector<std::byte> raw;
    in.seekg(0, std::ios::end);
    raw.resize(static_cast<std::size_t>(in.tellg()));
    in.seekg(0, std::ios::beg);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    require(in.good() || in.eof(), ErrorKind::Io, "failed reading weight file: " + path);

    detail::WeightReader r(raw.data(), raw.size(), path);
    const std::string magic = r.bytes(4);
    require(magic == std::string(kWeightMagic, 4), ErrorKind::Validation,
            "not a weight file (bad magic): " + path);
    const std::uint8_t version = r.u8();
    require(version == kWeightVersion, ErrorKind::Validation,
            "unsupported weight file version " + std::to_string(version) + " (expected " +
                std::to_string(kWeightVersion) + "): " + path);
    const std::uint8_t width = r.u8();
    require(width == 4 || width == 8, ErrorKind::Validation,
            "weight file has invalid scalar width " + std::to_string(width) + ": " + path);

    std::map<std::string, Tensor> out;
    const std::uint32_t count = r.u32();
    for (std::uint32_t e = 0; e < count; ++e) {
        const std::uint16_t name_len = r.u16();
        const std::string name = r.bytes(name_len);
        require(!name.empty(), ErrorKind::Validation, "weight file entry with empty name");
        require(!out.count(name), ErrorKind::Validation,
                "duplicate parameter '" + name + "' in weight file");
        Shape s;
        s.n = static_cast<int>(r.u32());
        s.c = static_cast<int>(r.u32());
        s.h = static_cast<int>(r.u32());
        s.w = static_cast<int>(r.u32());
        require(s.n > 0 && s.c > 0 && s.h > 0 && s.w > 0, ErrorKind::Validation,
                "parameter '" + name + "' has a non-positive dimension");
        std::vector<Real> values(s.numel());
        for (Real& v : values) {
            if (width == 8)
                v = static_cast<Real>(std::bit_cast<double>(r.u64()));
            else
                v = static_cast<Real>(std::bit_cast<float>(r.u32()));
            require(is_finite(v), ErrorKind::Validation,
                    "parameter '" + name + "' contains a non-finite value");
        }
        out.emplace(name, Tensor::from_data(s, std::move(values)));
    }
    require(r.at_end(), ErrorKind::Validation, "trailing bytes after last entry: " + path);
    return out;
}

// Strict application: names and shapes must match the model exactly. The
// model is only written once the whole file has validated, so a failed load
// leaves it untouched.
inline void load_weights_into(const std::string& path, SinetParams& params) {
    const std::map<std::string, Tensor> loaded = load_weights(path);
    const SinetParams& view = params;
    std::string missing;
    std::size_t matched = 0;
    view.visit([&](const std::string& name, const Tensor& t, ParamKind) {
        auto it = loaded.find(name);
        if (it == loaded.end()) {
            missing += missing.empty() ? name : ", " + name;
            return;
        }
        require(it->second.shape() == t.shape(), ErrorKind::Validation,
                "parameter '" + name + "' shape mismatch between weight file and model");
        ++matched;
    });
    require(missing.empty(), ErrorKind::Validation,
            "weight file is missing parameters: " + missing);
    if (matched != loaded.size()) {
        std::map<std::string, Tensor> extras = loaded;
        view.visit(
            [&](const std::string& name, const Tensor&, ParamKind) { extras.erase(name); });
        std::string extra;
        for (const auto& [name, value] : extras)
            extra += extra.empty() ? name : ", " + name;
        fail(ErrorKind::Validation, "weight file has unknown parameters: " + extra);
    }
    params.visit(ParamVisitor(
        [&](const std::string& name, Tensor& t, ParamKind) { t = loaded.at(name); }));
}

} // namespace sinet
