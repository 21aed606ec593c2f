#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fsse {

using Bytes = std::vector<uint8_t>;
using Block16 = std::array<uint8_t, 16>;
using Block32 = std::array<uint8_t, 32>;

using DocId = uint64_t;

enum class Scheme : uint8_t { Fast = 0, FastIo = 1 };

inline const char* scheme_name(Scheme s) {
    return s == Scheme::Fast ? "fast" : "fastio";
}

// Update operation flag, one byte on the wire: 0x00 = add, 0x01 = del.
enum class Op : uint8_t { Add = 0x00, Del = 0x01 };

inline uint8_t op_byte(Op op) { return static_cast<uint8_t>(op); }

inline Op op_from_byte(uint8_t b) {
    if (b > 0x01) throw std::invalid_argument("invalid op byte");
    return static_cast<Op>(b);
}

inline const char* op_name(Op op) { return op == Op::Add ? "add" : "del"; }

// ---- error taxonomy ----------------------------------------------------

// Entropy source failure; unrecoverable.
struct EntropyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A store table refused a write (duplicate key with differing payload).
struct IntegrityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Client and server state have diverged (missing index entry, garbage
// decrypts, malformed token semantics).
struct CorruptionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Wire frame could not be parsed; offset is the byte position within the
// input at which the violation was detected.
struct DecodeError : std::runtime_error {
    size_t offset;
    DecodeError(const std::string& what, size_t off)
        : std::runtime_error(what + " (offset " + std::to_string(off) + ")"), offset(off) {}
};

// Transport-level failure; the operation may be retried.
struct TransportError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Persisted file (store or client state) failed to load.
struct FileFormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// The server answered with an ERROR frame.
struct RemoteError : std::runtime_error {
    uint8_t code;
    RemoteError(uint8_t c, const std::string& msg)
        : std::runtime_error("server error 0x0" + std::to_string(c) + ": " + msg), code(c) {}
};

// ---- big-endian helpers --------------------------------------------------

inline void put_be16(uint8_t* p, uint16_t v) {
    p[0] = uint8_t(v >> 8);
    p[1] = uint8_t(v);
}

inline void put_be32(uint8_t* p, uint32_t v) {
    p[0] = uint8_t(v >> 24);
    p[1] = uint8_t(v >> 16);
    p[2] = uint8_t(v >> 8);
    p[3] = uint8_t(v);
}

inline void put_be64(uint8_t* p, uint64_t v) {
    put_be32(p, uint32_t(v >> 32));
    put_be32(p + 4, uint32_t(v));
}

inline uint16_t get_be16(const uint8_t* p) {
    return uint16_t(uint16_t(p[0]) << 8 | p[1]);
}

inline uint32_t get_be32(const uint8_t* p) {
    return uint32_t(p[0]) << 24 | uint32_t(p[1]) << 16 | uint32_t(p[2]) << 8 | uint32_t(p[3]);
}

inline uint64_t get_be64(const uint8_t* p) {
    return uint64_t(get_be32(p)) << 32 | get_be32(p + 4);
}

inline std::array<uint8_t, 8> be64(uint64_t v) {
    std::array<uint8_t, 8> out;
    put_be64(out.data(), v);
    return out;
}

inline void append(Bytes& buf, std::span<const uint8_t> data) {
    buf.insert(buf.end(), data.begin(), data.end());
}

inline std::span<const uint8_t> as_span(std::string_view s) {
    return {reinterpret_cast<const uint8_t*>(s.data()), s.size()};
}

inline std::string to_hex(std::span<const uint8_t> data) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    out.reserve(data.size() * 2);
    for (uint8_t b : data) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 0xf]);
    }
    return out;
}

inline Bytes from_hex(std::string_view hex) {
    auto nibble = [](char c) -> uint8_t {
        if (c >= '0' && c <= '9') return uint8_t(c - '0');
        if (c >= 'a' && c <= 'f') return uint8_t(c - 'a' + 10);
        if (c >= 'A' && c <= 'F') return uint8_t(c - 'A' + 10);
        throw std::invalid_argument("invalid hex digit");
    };
    if (hex.size() % 2 != 0) throw std::invalid_argument("odd hex length");
    Bytes out(hex.size() / 2);
    for (size_t i = 0; i < out.size(); ++i)
        out[i] = uint8_t(nibble(hex[2 * i]) << 4 | nibble(hex[2 * i + 1]));
    return out;
}

template <size_t N>
std::array<uint8_t, N> block_from_hex(std::string_view hex) {
    Bytes raw = from_hex(hex);
    if (raw.size() != N) throw std::invalid_argument("hex length mismatch");
    std::array<uint8_t, N> out;
    std::memcpy(out.data(), raw.data(), N);
    return out;
}

}  // namespace fsse
