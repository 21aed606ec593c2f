#pragma once

// Server-side storage: named key-value tables with fixed key widths, value
// schema enforcement, read instrumentation (non-contiguous lookup and byte
// counters) and a checksummed file format for persistence.
//
// Interval accounting: every keyed lookup that hits counts as one
// non-contiguous read; a result-cache hit counts as one read regardless of
// how many identifiers the entry holds, because the cached list is stored
// contiguously. Misses count nothing. bytes_stored covers payload values
// only, never keys or structural overhead.

#include "fsse/common.hpp"
#include "fsse/crypto.hpp"

#include <zlib.h>

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace fsse {

constexpr size_t kFastPayloadLen = 25;  // ind(8) + op(1) + ephemeral key(16)
constexpr size_t kIoPayloadLen = 9;     // ind(8) + op(1)

struct IoMetrics {
    uint64_t non_contiguous_reads = 0;
    uint64_t cache_reads = 0;
    uint64_t bytes_read = 0;
    uint64_t bytes_stored = 0;
    CryptoCounters ops{};
};

class EdbStore {
public:
    static constexpr char kMagic[4] = {'E', 'D', 'B', '1'};
    static constexpr uint8_t kVersion = 1;

    explicit EdbStore(Scheme scheme, CryptoProvider* crypto = nullptr)
        : scheme_(scheme), crypto_(crypto) {
        if (scheme == Scheme::Fast) {
            tables_.push_back(Table{"T", kAddressLen, int(kFastPayloadLen), true, {}});
        } else {
            tables_.push_back(Table{"T_e", kAddressLen, int(kIoPayloadLen), true, {}});
            tables_.push_back(Table{"T_c", kBlockLen, -1, false, {}});
        }
    }

    EdbStore(EdbStore&& o) noexcept
        : scheme_(o.scheme_), crypto_(o.crypto_), tables_(std::move(o.tables_)) {
        reads_ = o.reads_.load();
        cache_reads_ = o.cache_reads_.load();
        bytes_read_ = o.bytes_read_.load();
        bytes_stored_ = o.bytes_stored_.load();
    }
    EdbStore(const EdbStore&) = delete;
    EdbStore& operator=(const EdbStore&) = delete;

    Scheme scheme() const { return scheme_; }
    void set_crypto(CryptoProvider* crypto) { crypto_ = crypto; }

    std::optional<Bytes> kv_get(std::string_view table, std::span<const uint8_t> key) {
        Table& t = find(table);
        check_key(t, key);
        auto it = t.entries.find(key_str(key));
        if (it == t.entries.end()) return std::nullopt;
        reads_.fetch_add(1, std::memory_order_relaxed);
        bytes_read_.fetch_add(it->second.size(), std::memory_order_relaxed);
        return it->second;
    }

    void kv_put(std::string_view table, std::span<const uint8_t> key,
                std::span<const uint8_t> value) {
        Table& t = find(table);
        check_key(t, key);
        check_value(t, value);
        auto [it, inserted] = t.entries.try_emplace(key_str(key), value.begin(), value.end());
        if (inserted) {
            bytes_stored_.fetch_add(value.size(), std::memory_order_relaxed);
            return;
        }
        if (t.unique_keys) {
            // A byte-identical re-put is an idempotent retry; anything else
            // means the address space collided or the client replayed junk.
            if (it->second.size() == value.size() &&
                std::equal(value.begin(), value.end(), it->second.begin()))
                return;
            throw IntegrityError("duplicate key in table " + t.name);
        }
        bytes_stored_.fetch_add(value.size(), std::memory_order_relaxed);
        bytes_stored_.fetch_sub(it->second.size(), std::memory_order_relaxed);
        it->second.assign(value.begin(), value.end());
    }

    bool kv_delete(std::string_view table, std::span<const uint8_t> key) {
        Table& t = find(table);
        check_key(t, key);
        auto it = t.entries.find(key_str(key));
        if (it == t.entries.end()) return false;
        bytes_stored_.fetch_sub(it->second.size(), std::memory_order_relaxed);
        t.entries.erase(it);
        return true;
    }

    // Result-cache access ("T_c"): one interval per hit, ids stored sorted.
    std::optional<std::vector<DocId>> cache_read(const Token& token) {
        Table& t = find("T_c");
        auto it = t.entries.find(key_str(token));
        if (it == t.entries.end()) return std::nullopt;
        reads_.fetch_add(1, std::memory_order_relaxed);
        cache_reads_.fetch_add(1, std::memory_order_relaxed);
        bytes_read_.fetch_add(it->second.size(), std::memory_order_relaxed);
        const Bytes& raw = it->second;
        std::vector<DocId> ids(raw.size() / kDocIdLen);
        for (size_t i = 0; i < ids.size(); ++i) ids[i] = get_be64(raw.data() + i * kDocIdLen);
        return ids;
    }

    void cache_write(const Token& token, const std::set<DocId>& ids) {
        Bytes raw(ids.size() * kDocIdLen);
        size_t i = 0;
        for (DocId id : ids) put_be64(raw.data() + (i++) * kDocIdLen, id);
        kv_put("T_c", token, raw);
    }

    size_t size(std::string_view table) const { return find(table).entries.size(); }

    IoMetrics metrics_snapshot() const {
        IoMetrics m;
        m.non_contiguous_reads = reads_.load(std::memory_order_relaxed);
        m.cache_reads = cache_reads_.load(std::memory_order_relaxed);
        m.bytes_read = bytes_read_.load(std::memory_order_relaxed);
        m.bytes_stored = bytes_stored_.load(std::memory_order_relaxed);
        if (crypto_) m.ops = crypto_->counters();
        return m;
    }

    void metrics_reset() {
        reads_ = cache_reads_ = bytes_read_ = 0;
        // bytes_stored reflects resident payload, not a window; keep it.
        if (crypto_) crypto_->reset_counters();
    }

    // ---- persistence -------------------------------------------------------
    //
    //   "EDB1" | version | scheme | per table: name_len(1) name key_len(2 BE)
    //   entry_count(4 BE) { key value_len(4 BE) value }* | crc32(4 BE)
    //
    // Entries are written in ascending key order; the checksum covers every
    // byte before it. Loading recomputes bytes_stored and zeroes the read
    // counters.

    Bytes serialize() const {
        Bytes out;
        append(out, std::span<const uint8_t>{reinterpret_cast<const uint8_t*>(kMagic), 4});
        out.push_back(kVersion);
        out.push_back(uint8_t(scheme_));
        for (const Table& t : tables_) {
            out.push_back(uint8_t(t.name.size()));
            append(out, as_span(t.name));
            uint8_t kl[2];
            put_be16(kl, uint16_t(t.key_len));
            append(out, kl);
            uint8_t cnt[4];
            put_be32(cnt, uint32_t(t.entries.size()));
            append(out, cnt);
            for (const auto& [key, value] : t.entries) {  // std::map: ascending keys
                append(out, as_span(key));
                uint8_t vl[4];
                put_be32(vl, uint32_t(value.size()));
                append(out, vl);
                append(out, value);
            }
        }
        uint8_t crc[4];
        put_be32(crc, uint32_t(crc32(0, out.data(), uInt(out.size()))));
        append(out, crc);
        return out;
    }

    void persist(const std::filesystem::path& path) const {
        Bytes raw = serialize();
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        if (!f) throw FileFormatError("cannot open store file for writing: " + path.string());
        f.write(reinterpret_cast<const char*>(raw.data()), std::streamsize(raw.size()));
        if (!f.flush()) throw FileFormatError("store write failed: " + path.string());
    }

    static EdbStore deserialize(std::span<const uint8_t> raw, CryptoProvider* crypto = nullptr) {
        if (raw.size() < 4 + 1 + 1 + 4) throw FileFormatError("store file truncated");
        uint32_t want = get_be32(raw.data() + raw.size() - 4);
        uint32_t got = uint32_t(crc32(0, raw.data(), uInt(raw.size() - 4)));
        if (want != got) throw FileFormatError("store checksum mismatch");
        if (std::memcmp(raw.data(), kMagic, 4) != 0) throw FileFormatError("bad store magic");
        size_t pos = 4;
        if (raw[pos++] != kVersion) throw FileFormatError("unsupported store version");
        uint8_t sb = raw[pos++];
        if (sb > 1) throw FileFormatError("bad scheme byte");
        EdbStore store(Scheme(sb), crypto);
        const size_t end = raw.size() - 4;
        auto need = [&](size_t n) {
            if (pos + n > end) throw FileFormatError("store file truncated");
        };
        for (Table& t : store.tables_) {
            need(1);
            uint8_t name_len = raw[pos++];
            need(name_len);
            std::string name(reinterpret_cast<const char*>(raw.data() + pos), name_len);
            pos += name_len;
            if (name != t.name) throw FileFormatError("unexpected table " + name);
            need(2);
            uint16_t key_len = get_be16(raw.data() + pos);
            pos += 2;
            if (key_len != t.key_len) throw FileFormatError("key length mismatch in " + name);
            need(4);
            uint32_t count = get_be32(raw.data() + pos);
            pos += 4;
            for (uint32_t i = 0; i < count; ++i) {
                need(t.key_len + 4);
                std::string key(reinterpret_cast<const char*>(raw.data() + pos), t.key_len);
                pos += t.key_len;
                uint32_t vlen = get_be32(raw.data() + pos);
                pos += 4;
                need(vlen);
                Bytes value(raw.data() + pos, raw.data() + pos + vlen);
                pos += vlen;
                store.check_value(t, value);
                if (!t.entries.emplace(std::move(key), std::move(value)).second)
                    throw FileFormatError("duplicate key in " + name);
                store.bytes_stored_.fetch_add(vlen, std::memory_order_relaxed);
            }
        }
        if (pos != end) throw FileFormatError("trailing bytes in store file");
        return store;
    }

    static EdbStore load(const std::filesystem::path& path, CryptoProvider* crypto = nullptr) {
        std::ifstream f(path, std::ios::binary);
        if (!f) throw FileFormatError("cannot open store file: " + path.string());
        Bytes raw((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
        return deserialize(raw, crypto);
    }

private:
    struct Table {
        std::string name;
        size_t key_len;
        int fixed_value_len;  // -1: any multiple of 8 (cache entries)
        bool unique_keys;
        std::map<std::string, Bytes> entries;
    };

    static std::string key_str(std::span<const uint8_t> key) {
        return std::string(reinterpret_cast<const char*>(key.data()), key.size());
    }

    Table& find(std::string_view name) {
        for (Table& t : tables_)
            if (t.name == name) return t;
        throw std::invalid_argument("unknown table " + std::string(name));
    }
    const Table& find(std::string_view name) const {
        return const_cast<EdbStore*>(this)->find(name);
    }

    static void check_key(const Table& t, std::span<const uint8_t> key) {
        if (key.size() != t.key_len)
            throw std::invalid_argument("key length mismatch for table " + t.name);
    }
    static void check_value(const Table& t, std::span<const uint8_t> value) {
        if (t.fixed_value_len >= 0) {
            if (value.size() != size_t(t.fixed_value_len))
                throw std::invalid_argument("value length mismatch for table " + t.name);
        } else if (value.size() % kDocIdLen != 0) {
            throw std::invalid_argument("cache value must be a multiple of 8 bytes");
        }
    }

    Scheme scheme_;
    CryptoProvider* crypto_;
    std::vector<Table> tables_;
    std::atomic<uint64_t> reads_{0}, cache_reads_{0}, bytes_read_{0}, bytes_stored_{0};
};

}  // namespace fsse
