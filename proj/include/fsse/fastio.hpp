#pragma once

// FASTIO: the client state st stays fixed between searches and updates are
// distinguished by a counter, so an update needs two hashes and nothing
// else. A search releases the old state (k_w) when the counter is non-zero
// and rotates to a fresh one; the server merges the counter-addressed suffix
// from T_e into the cached previous result in T_c, consuming the T_e entries
// it read.

#include "fsse/common.hpp"
#include "fsse/crypto.hpp"
#include "fsse/fast.hpp"  // SearchOutcome
#include "fsse/store.hpp"

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace fsse {

struct IoUpdateMessage {
    Address u{};
    std::array<uint8_t, kIoPayloadLen> e{};
    bool operator==(const IoUpdateMessage&) const = default;
};

// k_w is absent exactly when c = 0 (nothing new since the last search).
struct IoSearchToken {
    Token t_w{};
    std::optional<StateValue> k_w;
    uint64_t c = 0;
    bool operator==(const IoSearchToken&) const = default;
};

namespace detail {

// st || counter, the sub-state hashed for update i.
inline Bytes substate(const StateValue& st, uint64_t counter) {
    Bytes buf(kBlockLen + 8);
    std::memcpy(buf.data(), st.data(), kBlockLen);
    put_be64(buf.data() + kBlockLen, counter);
    return buf;
}

}  // namespace detail

class IoClient {
public:
    static IoClient setup(CryptoProvider& crypto) {
        return IoClient(crypto.random_block(), crypto);
    }
    IoClient(const SecretKey& key, CryptoProvider& crypto) : key_(key), crypto_(&crypto) {}

    struct PendingUpdate {
        std::string keyword;
        KeywordState next;
        IoUpdateMessage msg;
    };

    PendingUpdate prepare_update(std::string_view keyword, DocId ind, Op op) {
        if (keyword.empty()) throw std::invalid_argument("empty keyword");
        if (keyword.size() > kMaxKeywordLen) throw std::invalid_argument("keyword too long");
        StateValue st;
        uint64_t c = 0;
        auto it = sigma_.find(std::string(keyword));
        if (it == sigma_.end()) {
            st = crypto_->random_block();
        } else {
            if (it->second.c == UINT64_MAX) throw std::overflow_error("update counter exhausted");
            st = it->second.st;
            c = it->second.c;
        }
        Bytes sub = detail::substate(st, c + 1);
        PendingUpdate p;
        p.keyword = std::string(keyword);
        p.next = KeywordState{st, c + 1};
        p.msg.u = crypto_->h1(sub);
        put_be64(p.msg.e.data(), ind);
        p.msg.e[kDocIdLen] = op_byte(op);
        Bytes mask = crypto_->h2(sub, kIoPayloadLen);
        for (size_t i = 0; i < kIoPayloadLen; ++i) p.msg.e[i] ^= mask[i];
        return p;
    }

    void commit_update(const PendingUpdate& p) { sigma_[p.keyword] = p.next; }

    IoUpdateMessage update(std::string_view keyword, DocId ind, Op op) {
        PendingUpdate p = prepare_update(keyword, ind, op);
        commit_update(p);
        return p.msg;
    }

    struct PendingSearch {
        std::string keyword;
        bool rotate = false;
    };

    // Token plus the rotation to perform once the search went through. The
    // fresh state is drawn at commit time so a failed transport attempt can
    // be retried with identical token bytes.
    std::optional<std::pair<IoSearchToken, PendingSearch>> prepare_search(
        std::string_view keyword) {
        auto it = sigma_.find(std::string(keyword));
        if (it == sigma_.end()) return std::nullopt;
        Token t_w = crypto_->prf(key_, keyword_hash(keyword));
        IoSearchToken token;
        token.t_w = t_w;
        token.c = it->second.c;
        PendingSearch pending{std::string(keyword), false};
        if (it->second.c != 0) {
            token.k_w = it->second.st;
            pending.rotate = true;
        }
        return std::make_pair(token, pending);
    }

    void commit_search(const PendingSearch& p) {
        if (p.rotate) sigma_[p.keyword] = KeywordState{crypto_->random_block(), 0};
    }

    std::optional<IoSearchToken> search_token(std::string_view keyword) {
        auto prep = prepare_search(keyword);
        if (!prep) return std::nullopt;
        commit_search(prep->second);
        return prep->first;
    }

    const SecretKey& key() const { return key_; }
    const std::map<std::string, KeywordState>& sigma() const { return sigma_; }
    void restore_entry(const std::string& keyword, const KeywordState& st) {
        sigma_[keyword] = st;
    }

private:
    SecretKey key_;
    std::map<std::string, KeywordState> sigma_;
    CryptoProvider* crypto_;
};

class IoServer {
public:
    IoServer(EdbStore& store, CryptoProvider& crypto) : store_(&store), crypto_(&crypto) {}

    void apply(const IoUpdateMessage& msg) { store_->kv_put("T_e", msg.u, msg.e); }

    // Cached result first, then the suffix of new updates; consumed T_e
    // entries are deleted and the merged result replaces the cache entry.
    // With k_w absent the cached result is returned as-is.
    SearchOutcome search(const IoSearchToken& token) const {
        if (!token.k_w && token.c != 0)
            throw CorruptionError("search token missing key with nonzero counter");
        SearchOutcome out;
        if (auto cached = store_->cache_read(token.t_w))
            out.ids.insert(cached->begin(), cached->end());
        if (!token.k_w) return out;
        for (uint64_t i = 1; i <= token.c; ++i) {
            Bytes sub = detail::substate(*token.k_w, i);
            Address u = crypto_->h1(sub);
            out.addresses.push_back(u);
            auto entry = store_->kv_get("T_e", u);
            if (!entry) throw CorruptionError("missing index entry during search");
            Bytes mask = crypto_->h2(sub, kIoPayloadLen);
            std::array<uint8_t, kIoPayloadLen> plain;
            for (size_t j = 0; j < kIoPayloadLen; ++j) plain[j] = (*entry)[j] ^ mask[j];
            DocId ind = get_be64(plain.data());
            Op op;
            try {
                op = op_from_byte(plain[kDocIdLen]);
            } catch (const std::invalid_argument&) {
                throw CorruptionError("undecodable index entry (bad op byte)");
            }
            if (op == Op::Del)
                out.ids.erase(ind);
            else
                out.ids.insert(ind);
            store_->kv_delete("T_e", u);
        }
        store_->cache_write(token.t_w, out.ids);
        return out;
    }

private:
    EdbStore* store_;
    CryptoProvider* crypto_;
};

}  // namespace fsse
