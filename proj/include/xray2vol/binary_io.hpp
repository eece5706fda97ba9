#pragma once

// Little-endian helpers shared by the XVOL / XIMG / XNNW readers and writers.

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>

#include "xray2vol/error.hpp"

namespace xray2vol::io {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
T byteswap_if_big(T v) {
    if constexpr (std::endian::native == std::endian::big) {
        auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
        std::reverse(bytes.begin(), bytes.end());
        return std::bit_cast<T>(bytes);
    } else {
        return v;
    }
}

class Writer {
public:
    explicit Writer(std::ostream& os) : os_(os) {}

    void magic(std::string_view m) { os_.write(m.data(), static_cast<std::streamsize>(m.size())); }

    template <typename T>
    void put(T v) {
        v = byteswap_if_big(v);
        os_.write(reinterpret_cast<const char*>(&v), sizeof(T));
    }

    void floats(std::span<const float> values) {
        if constexpr (std::endian::native == std::endian::little) {
            os_.write(reinterpret_cast<const char*>(values.data()),
                      static_cast<std::streamsize>(values.size_bytes()));
        } else {
            for (float f : values) put(f);
        }
    }

    void bytes(std::string_view s) { os_.write(s.data(), static_cast<std::streamsize>(s.size())); }

    bool ok() const { return static_cast<bool>(os_); }

private:
    std::ostream& os_;
};

/// Reader that tracks its byte offset so format errors can point at the bad field.
class Reader {
public:
    explicit Reader(std::istream& is) : is_(is) {}

    std::uint64_t offset() const noexcept { return offset_; }

    void expect_magic(std::string_view m) {
        std::string got(m.size(), '\0');
        read_raw(got.data(), got.size(), "magic");
        if (got != m) throw FormatError("bad magic: expected \"" + std::string(m) + "\"", offset_ - m.size());
    }

    template <typename T>
    T get(const char* field) {
        T v{};
        read_raw(reinterpret_cast<char*>(&v), sizeof(T), field);
        return byteswap_if_big(v);
    }

    void floats(std::span<float> out, const char* field) {
        read_raw(reinterpret_cast<char*>(out.data()), out.size_bytes(), field);
        if constexpr (std::endian::native == std::endian::big) {
            for (float& f : out) f = byteswap_if_big(f);
        }
    }

    std::string string(std::size_t n, const char* field) {
        std::string s(n, '\0');
        read_raw(s.data(), n, field);
        return s;
    }

    /// Bytes left in the stream, or -1 if the stream is not seekable.
    std::int64_t remaining() {
        auto here = is_.tellg();
        if (here < 0) return -1;
        is_.seekg(0, std::ios::end);
        auto end = is_.tellg();
        is_.seekg(here);
        return static_cast<std::int64_t>(end - here);
    }

    bool at_end() { return is_.peek() == std::char_traits<char>::eof(); }

private:
    void read_raw(char* dst, std::size_t n, const char* field) {
        is_.read(dst, static_cast<std::streamsize>(n));
        auto got = static_cast<std::size_t>(is_.gcount());
        if (got != n) {
            throw FormatError(std::string("truncated ") + field + " (wanted " + std::to_string(n) +
                                  " bytes, got " + std::to_string(got) + ")",
                              offset_ + got);
        }
        offset_ += n;
    }

    std::istream& is_;
    std::uint64_t offset_ = 0;
};

}  // namespace xray2vol::io
