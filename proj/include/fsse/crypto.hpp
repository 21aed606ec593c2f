#pragma once

// Symmetric primitives: one SHA-256 core behind three domain-separated hash
// roles (prefix 0x00 for the keyword hash, 0x01 for the index-address hash,
// 0x02 for the payload mask), and single-block AES-128 for the PRF and the
// state permutation. All widths are fixed: 16-byte keys/states/tokens,
// 32-byte addresses.

#include "fsse/common.hpp"

#include <openssl/evp.h>
#include <openssl/rand.h>

#include <atomic>
#include <memory>
#include <optional>

namespace fsse {

using SecretKey = Block16;
using StateValue = Block16;
using EphemeralKey = Block16;
using Token = Block16;
using Address = Block32;

// Per-keyword client state: the current state value and an update counter.
struct KeywordState {
    StateValue st{};
    uint64_t c = 0;
    bool operator==(const KeywordState&) const = default;
};

constexpr size_t kBlockLen = 16;      // lambda = 128 bits
constexpr size_t kAddressLen = 32;    // full SHA-256 width
constexpr size_t kDocIdLen = 8;       // 64-bit identifiers
constexpr uint8_t kPrefixKeywordHash = 0x00;
constexpr uint8_t kPrefixH1 = 0x01;
constexpr uint8_t kPrefixH2 = 0x02;
constexpr size_t kMaxKeywordLen = 0xffff;

namespace detail {

struct EvpCtxFree {
    void operator()(EVP_CIPHER_CTX* c) const { EVP_CIPHER_CTX_free(c); }
};

inline Block16 aes128_block(const Block16& key, const Block16& in, bool encrypt) {
    thread_local std::unique_ptr<EVP_CIPHER_CTX, EvpCtxFree> ctx{EVP_CIPHER_CTX_new()};
    if (!ctx) throw std::runtime_error("EVP_CIPHER_CTX_new failed");
    if (EVP_CipherInit_ex(ctx.get(), EVP_aes_128_ecb(), nullptr, key.data(), nullptr,
                          encrypt ? 1 : 0) != 1)
        throw std::runtime_error("AES-128 init failed");
    EVP_CIPHER_CTX_set_padding(ctx.get(), 0);
    Block16 out;
    int len = 0;
    if (EVP_CipherUpdate(ctx.get(), out.data(), &len, in.data(), int(in.size())) != 1 ||
        len != int(out.size()))
        throw std::runtime_error("AES-128 block failed");
    int tail = 0;
    uint8_t sink[16];
    if (EVP_CipherFinal_ex(ctx.get(), sink, &tail) != 1 || tail != 0)
        throw std::runtime_error("AES-128 finalize failed");
    return out;
}

}  // namespace detail

inline Block32 sha256(std::span<const uint8_t> in) {
    Block32 out;
    unsigned n = 0;
    static const uint8_t empty = 0;
    const uint8_t* p = in.empty() ? &empty : in.data();
    if (EVP_Digest(p, in.size(), out.data(), &n, EVP_sha256(), nullptr) != 1 || n != 32)
        throw std::runtime_error("SHA-256 failed");
    return out;
}

namespace detail {

inline Block32 sha256_prefixed(uint8_t prefix, std::span<const uint8_t> in) {
    if (in.size() < 128) {
        std::array<uint8_t, 129> buf;
        buf[0] = prefix;
        if (!in.empty()) std::memcpy(buf.data() + 1, in.data(), in.size());
        return sha256({buf.data(), in.size() + 1});
    }
    Bytes buf;
    buf.reserve(in.size() + 1);
    buf.push_back(prefix);
    append(buf, in);
    return sha256(buf);
}

}  // namespace detail

/// h: keyword to PRF input block. First 16 bytes of SHA-256(0x00 || keyword).
inline Block16 keyword_hash(std::string_view keyword) {
    if (keyword.empty()) throw std::invalid_argument("empty keyword");
    if (keyword.size() > kMaxKeywordLen) throw std::invalid_argument("keyword too long");
    Block32 full = detail::sha256_prefixed(kPrefixKeywordHash, as_span(keyword));
    Block16 out;
    std::memcpy(out.data(), full.data(), out.size());
    return out;
}

/// F: single-block AES-128 encryption under the long-term key.
inline Token prf(const SecretKey& key, const Block16& in) {
    return detail::aes128_block(key, in, true);
}

/// P: state permutation, AES-128 encryption under an ephemeral key.
inline StateValue prp_forward(const EphemeralKey& key, const StateValue& st) {
    return detail::aes128_block(key, st, true);
}

/// P^-1: AES-128 decryption, inverse of prp_forward.
inline StateValue prp_inverse(const EphemeralKey& key, const StateValue& st) {
    return detail::aes128_block(key, st, false);
}

/// H1: index address, SHA-256(0x01 || in), full 32 bytes.
inline Address h1(std::span<const uint8_t> in) {
    if (in.empty()) throw std::invalid_argument("empty h1 input");
    return detail::sha256_prefixed(kPrefixH1, in);
}

/// H2: payload mask, first out_len bytes of SHA-256(0x02 || in).
inline Bytes h2(std::span<const uint8_t> in, size_t out_len) {
    if (in.empty()) throw std::invalid_argument("empty h2 input");
    if (out_len < 1 || out_len > 32) throw std::invalid_argument("h2 output length out of range");
    Block32 full = detail::sha256_prefixed(kPrefixH2, in);
    return Bytes(full.begin(), full.begin() + ptrdiff_t(out_len));
}

// ---- randomness -----------------------------------------------------------

class RandomSource {
public:
    virtual ~RandomSource() = default;
    virtual Block16 block() = 0;
};

class SystemRandom final : public RandomSource {
public:
    Block16 block() override {
        Block16 out;
        if (RAND_bytes(out.data(), int(out.size())) != 1)
            throw EntropyError("system entropy source failed");
        return out;
    }
};

// Deterministic stream for tests and reproducible benchmarks: AES-128 in
// counter mode under a key derived from the seed. Never used by default.
class SeededRandom final : public RandomSource {
public:
    explicit SeededRandom(uint64_t seed) {
        Bytes material;
        static constexpr std::string_view label = "fsse.seeded.rng";
        append(material, as_span(label));
        append(material, be64(seed));
        Block32 digest = sha256(material);
        std::memcpy(key_.data(), digest.data(), key_.size());
    }

    Block16 block() override {
        Block16 in{};
        put_be64(in.data() + 8, counter_++);
        return detail::aes128_block(key_, in, true);
    }

private:
    Block16 key_{};
    uint64_t counter_ = 0;
};

// Snapshot of primitive invocation counts. rand counts 16-byte draws.
struct CryptoCounters {
    uint64_t prf = 0;
    uint64_t prp = 0;
    uint64_t prp_inv = 0;
    uint64_t h1 = 0;
    uint64_t h2 = 0;
    uint64_t rand = 0;

    CryptoCounters operator-(const CryptoCounters& o) const {
        return {prf - o.prf, prp - o.prp, prp_inv - o.prp_inv, h1 - o.h1, h2 - o.h2,
                rand - o.rand};
    }
    bool operator==(const CryptoCounters&) const = default;
};

// Counting facade over the primitives plus the randomness source. Schemes
// and simulators route every invocation through one provider so per-query
// operation budgets can be measured. Counters are relaxed atomics; the
// request/response discipline keeps updates ordered.
class CryptoProvider {
public:
    explicit CryptoProvider(std::unique_ptr<RandomSource> rng, bool seeded)
        : rng_(std::move(rng)), seeded_(seeded) {}

    static CryptoProvider with_system_rng() {
        return CryptoProvider(std::make_unique<SystemRandom>(), false);
    }
    static CryptoProvider with_seed(uint64_t seed) {
        return CryptoProvider(std::make_unique<SeededRandom>(seed), true);
    }

    bool seeded() const { return seeded_; }

    Token prf(const SecretKey& key, const Block16& in) {
        c_prf_.fetch_add(1, std::memory_order_relaxed);
        return fsse::prf(key, in);
    }
    StateValue prp_forward(const EphemeralKey& key, const StateValue& st) {
        c_prp_.fetch_add(1, std::memory_order_relaxed);
        return fsse::prp_forward(key, st);
    }
    StateValue prp_inverse(const EphemeralKey& key, const StateValue& st) {
        c_prp_inv_.fetch_add(1, std::memory_order_relaxed);
        return fsse::prp_inverse(key, st);
    }
    Address h1(std::span<const uint8_t> in) {
        c_h1_.fetch_add(1, std::memory_order_relaxed);
        return fsse::h1(in);
    }
    Bytes h2(std::span<const uint8_t> in, size_t out_len) {
        c_h2_.fetch_add(1, std::memory_order_relaxed);
        return fsse::h2(in, out_len);
    }
    Block16 random_block() {
        c_rand_.fetch_add(1, std::memory_order_relaxed);
        return rng_->block();
    }
    // Arbitrary-length randomness; draws whole blocks and truncates.
    Bytes random_bytes(size_t n) {
        Bytes out;
        out.reserve(((n + 15) / 16) * 16);
        while (out.size() < n) {
            Block16 b = random_block();
            append(out, b);
        }
        out.resize(n);
        return out;
    }

    CryptoCounters counters() const {
        return {c_prf_.load(std::memory_order_relaxed),
                c_prp_.load(std::memory_order_relaxed),
                c_prp_inv_.load(std::memory_order_relaxed),
                c_h1_.load(std::memory_order_relaxed),
                c_h2_.load(std::memory_order_relaxed),
                c_rand_.load(std::memory_order_relaxed)};
    }
    void reset_counters() {
        c_prf_ = c_prp_ = c_prp_inv_ = c_h1_ = c_h2_ = c_rand_ = 0;
    }

private:
    std::unique_ptr<RandomSource> rng_;
    bool seeded_;
    std::atomic<uint64_t> c_prf_{0}, c_prp_{0}, c_prp_inv_{0}, c_h1_{0}, c_h2_{0}, c_rand_{0};
};

}  // namespace fsse
