#pragma once

#include <array>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "grounder/error.hpp"

namespace grounder::io {

static_assert(std::endian::native == std::endian::little,
              "binary formats are little-endian; big-endian hosts need byte swapping");

// Append-only little-endian encoder for the model/index file formats.
class Writer {
public:
    void magic(std::string_view four_cc) {
        if (four_cc.size() != 4) throw ArgumentError("magic must be 4 bytes");
        raw(four_cc.data(), 4);
    }
    void u8(std::uint8_t v) { raw(&v, 1); }
    void u32(std::uint32_t v) { raw(&v, sizeof v); }
    void u64(std::uint64_t v) { raw(&v, sizeof v); }
    void f32(float v) { raw(&v, sizeof v); }
    void f64(double v) { raw(&v, sizeof v); }
    void str(std::string_view s) {
        u32(static_cast<std::uint32_t>(s.size()));
        raw(s.data(), s.size());
    }
    void f32_array(std::span<const float> values) { raw(values.data(), values.size_bytes()); }

    // Section = u64 byte length followed by the payload of a nested writer.
    void section(const Writer& inner) {
        u64(inner.bytes_.size());
        bytes_.insert(bytes_.end(), inner.bytes_.begin(), inner.bytes_.end());
    }

    std::span<const std::byte> bytes() const { return bytes_; }

    void save(const std::filesystem::path& path) const;

private:
    void raw(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::byte*>(p);
        bytes_.insert(bytes_.end(), b, b + n);
    }

    std::vector<std::byte> bytes_;
};

// Bounds-checked decoder; every overrun is reported as a corrupt file.
class Reader {
public:
    explicit Reader(std::span<const std::byte> bytes, std::string what = "file")
        : bytes_(bytes), what_(std::move(what)) {}

    void expect_magic(std::string_view four_cc) {
        std::array<char, 4> got{};
        raw(got.data(), 4);
        if (std::string_view(got.data(), 4) != four_cc) {
            throw VersionError(what_ + ": bad magic, expected '" + std::string(four_cc) + "'");
        }
    }
    void expect_version(std::uint8_t version) {
        if (const auto v = u8(); v != version) {
            throw VersionError(what_ + ": unsupported version " + std::to_string(v) +
                               " (expected " + std::to_string(version) + ")");
        }
    }
    std::uint8_t u8() { return pod<std::uint8_t>(); }
    std::uint32_t u32() { return pod<std::uint32_t>(); }
    std::uint64_t u64() { return pod<std::uint64_t>(); }
    float f32() { return pod<float>(); }
    double f64() { return pod<double>(); }
    std::string str() {
        const auto n = u32();
        need(n);
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    void f32_array(std::span<float> out) { raw(out.data(), out.size_bytes()); }

    Reader section() {
        const auto n = u64();
        need(n);
        Reader inner(bytes_.subspan(pos_, n), what_);
        pos_ += n;
        return inner;
    }

    bool at_end() const { return pos_ == bytes_.size(); }
    void expect_end() const {
        if (!at_end()) throw DataError(what_ + ": trailing bytes");
    }

private:
    template <class T>
    T pod() {
        T v;
        raw(&v, sizeof v);
        return v;
    }
    void need(std::uint64_t n) const {
        if (n > bytes_.size() - pos_) throw DataError(what_ + ": corrupt or truncated");
    }
    void raw(void* p, std::size_t n) {
        need(n);
        std::memcpy(p, bytes_.data() + pos_, n);
        pos_ += n;
    }

    std::span<const std::byte> bytes_;
    std::size_t pos_ = 0;
    std::string what_;
};

std::vector<std::byte> read_file(const std::filesystem::path& path);

}  // namespace grounder::io
