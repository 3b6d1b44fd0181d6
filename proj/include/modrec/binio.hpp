#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "modrec/errors.hpp"

namespace modrec {

// Little-endian byte buffer writer/reader for the dataset and model files.
// Reads fail with FormatError carrying the byte offset.

class ByteWriter {
  public:
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void i8(std::int8_t v) { buf_.push_back(static_cast<std::uint8_t>(v)); }
    void u16(std::uint16_t v) { append_le(v); }
    void u32(std::uint32_t v) { append_le(v); }
    void u64(std::uint64_t v) { append_le(v); }
    void f32(float v) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, 4);
        append_le(bits);
    }
    void bytes(const void* p, std::size_t n) {
        const auto* c = static_cast<const std::uint8_t*>(p);
        buf_.insert(buf_.end(), c, c + n);
    }
    void ascii(const std::string& s) { bytes(s.data(), s.size()); }

    const std::vector<std::uint8_t>& buffer() const { return buf_; }

    void save(const std::filesystem::path& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
        out.write(reinterpret_cast<const char*>(buf_.data()),
                  static_cast<std::streamsize>(buf_.size()));
        if (!out) throw IoError("short write to '" + path.string() + "'");
    }

  private:
    template <typename T>
    void append_le(T v) {
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
        }
    }

    std::vector<std::uint8_t> buf_;
};

class ByteReader {
  public:
    explicit ByteReader(std::vector<std::uint8_t> bytes) : buf_(std::move(bytes)) {}

    static ByteReader load(const std::filesystem::path& path) {
        std::ifstream in(path, std::ios::binary | std::ios::ate);
        if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
        const auto size = static_cast<std::size_t>(in.tellg());
        in.seekg(0);
        std::vector<std::uint8_t> bytes(size);
        in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size));
        if (!in) throw IoError("short read from '" + path.string() + "'");
        return ByteReader(std::move(bytes));
    }

    std::size_t offset() const { return pos_; }
    std::size_t remaining() const { return buf_.size() - pos_; }

    void need(std::size_t n, const char* what) const {
        if (remaining() < n) {
            throw FormatError(std::string("truncated ") + what + " at offset " +
                              std::to_string(pos_) + ": expected " + std::to_string(n) +
                              " bytes, " + std::to_string(remaining()) + " remain");
        }
    }

    std::uint8_t u8(const char* what = "u8") {
        need(1, what);
        return buf_[pos_++];
    }
    std::int8_t i8(const char* what = "i8") { return static_cast<std::int8_t>(u8(what)); }
    std::uint16_t u16(const char* what = "u16") { return read_le<std::uint16_t>(what); }
    std::uint32_t u32(const char* what = "u32") { return read_le<std::uint32_t>(what); }
    std::uint64_t u64(const char* what = "u64") { return read_le<std::uint64_t>(what); }
    float f32(const char* what = "f32") {
        const std::uint32_t bits = read_le<std::uint32_t>(what);
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
    std::string ascii(std::size_t n, const char* what = "string") {
        need(n, what);
        std::string s(reinterpret_cast<const char*>(buf_.data() + pos_), n);
        pos_ += n;
        return s;
    }

  private:
    template <typename T>
    T read_le(const char* what) {
        need(sizeof(T), what);
        T v{0};
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            v = static_cast<T>(v | (static_cast<T>(buf_[pos_ + i]) << (8 * i)));
        }
        pos_ += sizeof(T);
        return v;
    }

    std::vector<std::uint8_t> buf_;
    std::size_t pos_ = 0;
};

}  // namespace modrec
