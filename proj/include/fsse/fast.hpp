#pragma once

// FAST: the client keeps (st, c) per keyword and evolves st through a fresh
// ephemeral key on every update, like prepending to a singly linked list.
// The update entry carries the ephemeral key under a hash mask, so a search
// token (t_w, st_c, c) lets the server walk the whole chain backward,
// cancelling deletes against later adds on the way. Search never mutates
// client state and never removes index entries.

#include "fsse/common.hpp"
#include "fsse/crypto.hpp"
#include "fsse/store.hpp"

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace fsse {

struct FastUpdateMessage {
    Address u{};
    std::array<uint8_t, kFastPayloadLen> e{};
    bool operator==(const FastUpdateMessage&) const = default;
};

// Constant 40 bytes (16 + 16 + 8) regardless of history.
struct FastSearchToken {
    Token t_w{};
    StateValue st{};
    uint64_t c = 0;
    bool operator==(const FastSearchToken&) const = default;
};

class FastClient {
public:
    static FastClient setup(CryptoProvider& crypto) {
        return FastClient(crypto.random_block(), crypto);
    }
    FastClient(const SecretKey& key, CryptoProvider& crypto) : key_(key), crypto_(&crypto) {}

    struct PendingUpdate {
        std::string keyword;
        KeywordState next;
        FastUpdateMessage msg;
    };

    // Computes the update message and the advanced keyword state without
    // committing it; commit after the server acknowledged.
    PendingUpdate prepare_update(std::string_view keyword, DocId ind, Op op) {
        Token t_w = crypto_->prf(key_, keyword_hash(keyword));
        StateValue st_old;
        uint64_t c = 0;
        auto it = sigma_.find(std::string(keyword));
        if (it == sigma_.end()) {
            st_old = crypto_->random_block();
        } else {
            if (it->second.c == UINT64_MAX) throw std::overflow_error("update counter exhausted");
            st_old = it->second.st;
            c = it->second.c;
        }
        EphemeralKey k_new = crypto_->random_block();
        StateValue st_new = crypto_->prp_forward(k_new, st_old);

        Bytes hash_in(kBlockLen * 2);
        std::memcpy(hash_in.data(), t_w.data(), kBlockLen);
        std::memcpy(hash_in.data() + kBlockLen, st_new.data(), kBlockLen);

        PendingUpdate p;
        p.keyword = std::string(keyword);
        p.next = KeywordState{st_new, c + 1};
        put_be64(p.msg.e.data(), ind);
        p.msg.e[kDocIdLen] = op_byte(op);
        std::memcpy(p.msg.e.data() + kDocIdLen + 1, k_new.data(), kBlockLen);
        Bytes mask = crypto_->h2(hash_in, kFastPayloadLen);
        for (size_t i = 0; i < kFastPayloadLen; ++i) p.msg.e[i] ^= mask[i];
        p.msg.u = crypto_->h1(hash_in);
        return p;
    }

    void commit_update(const PendingUpdate& p) { sigma_[p.keyword] = p.next; }

    FastUpdateMessage update(std::string_view keyword, DocId ind, Op op) {
        PendingUpdate p = prepare_update(keyword, ind, op);
        commit_update(p);
        return p.msg;
    }

    // Absent when the keyword was never updated; otherwise (t_w, st_c, c).
    // Does not mutate sigma.
    std::optional<FastSearchToken> search_token(std::string_view keyword) const {
        auto it = sigma_.find(std::string(keyword));
        if (it == sigma_.end()) return std::nullopt;
        Token t_w = crypto_->prf(key_, keyword_hash(keyword));
        return FastSearchToken{t_w, it->second.st, it->second.c};
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

struct SearchOutcome {
    std::set<DocId> ids;
    std::vector<Address> addresses;  // index entries touched, in read order
};

class FastServer {
public:
    FastServer(EdbStore& store, CryptoProvider& crypto) : store_(&store), crypto_(&crypto) {}

    void apply(const FastUpdateMessage& msg) { store_->kv_put("T", msg.u, msg.e); }

    // Backward chain walk with delete cancellation. Touches exactly token.c
    // index entries; the recovered st_0 is discarded.
    SearchOutcome search(const FastSearchToken& token) const {
        SearchOutcome out;
        std::set<DocId> deleted;
        StateValue st = token.st;
        Bytes hash_in(kBlockLen * 2);
        std::memcpy(hash_in.data(), token.t_w.data(), kBlockLen);
        for (uint64_t i = token.c; i >= 1; --i) {
            std::memcpy(hash_in.data() + kBlockLen, st.data(), kBlockLen);
            Address u = crypto_->h1(hash_in);
            out.addresses.push_back(u);
            auto entry = store_->kv_get("T", u);
            if (!entry) throw CorruptionError("missing index entry during search");
            Bytes mask = crypto_->h2(hash_in, kFastPayloadLen);
            std::array<uint8_t, kFastPayloadLen> plain;
            for (size_t j = 0; j < kFastPayloadLen; ++j) plain[j] = (*entry)[j] ^ mask[j];
            DocId ind = get_be64(plain.data());
            Op op;
            try {
                op = op_from_byte(plain[kDocIdLen]);
            } catch (const std::invalid_argument&) {
                throw CorruptionError("undecodable index entry (bad op byte)");
            }
            EphemeralKey k;
            std::memcpy(k.data(), plain.data() + kDocIdLen + 1, kBlockLen);
            if (op == Op::Del) {
                deleted.insert(ind);
            } else if (deleted.erase(ind) == 0) {
                out.ids.insert(ind);
            }
            st = crypto_->prp_inverse(k, st);
        }
        return out;
    }

private:
    EdbStore* store_;
    CryptoProvider* crypto_;
};

}  // namespace fsse
