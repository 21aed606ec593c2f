#pragma once

// Executable leakage profiles and ideal-world simulators. A trace is reduced
// to the patterns the server is allowed to learn (access, query, search and
// update-history projections, with keywords replaced by opaque labels); the
// simulators rebuild a full message transcript from those patterns alone.
// compare_profiles then checks that a real transcript and a simulated one are
// indistinguishable under a fixed battery: message structure, token
// repetition, address linkage, and address uniqueness.

#include "fsse/common.hpp"
#include "fsse/crypto.hpp"
#include "fsse/fast.hpp"
#include "fsse/fastio.hpp"
#include "fsse/oracle.hpp"
#include "fsse/store.hpp"
#include "fsse/trace.hpp"

#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

namespace fsse {

struct PatternProfile {
    struct Entry {
        Query::Kind kind = Query::Kind::Update;
        uint32_t kw_label = 0;
        Op op = Op::Add;            // updates
        DocId ind = 0;              // updates
        std::set<DocId> result;     // searches: matched ids at that moment
    };
    struct UpdateRec {
        uint32_t index = 0;  // 1-based query index
        Op op = Op::Add;
        DocId ind = 0;
    };

    std::vector<Entry> entries;  // one per query, in order
    std::map<uint32_t, std::vector<uint32_t>> query_pattern;
    std::map<uint32_t, std::vector<uint32_t>> search_pattern;
    std::map<uint32_t, std::vector<UpdateRec>> update_history;
    std::map<uint32_t, uint64_t> updates_after_last_search;
};

// Keywords are replaced by labels in order of first appearance; result sets
// come from an oracle replay of the same trace.
inline PatternProfile extract_leakage(const Trace& trace) {
    PatternProfile profile;
    PlaintextOracle oracle;
    std::unordered_map<uint32_t, uint32_t> labels;
    auto label_of = [&](uint32_t kw) {
        return labels.try_emplace(kw, uint32_t(labels.size())).first->second;
    };
    uint32_t index = 0;
    for (const Query& q : trace.queries) {
        ++index;
        PatternProfile::Entry entry;
        entry.kind = q.kind;
        entry.kw_label = label_of(q.kw);
        profile.query_pattern[entry.kw_label].push_back(index);
        if (q.kind == Query::Kind::Search) {
            entry.result = oracle.search(keyword_name(q.kw));
            profile.search_pattern[entry.kw_label].push_back(index);
            profile.updates_after_last_search[entry.kw_label] = 0;
        } else {
            entry.op = q.op;
            entry.ind = q.ind;
            oracle.update(keyword_name(q.kw), q.ind, q.op);
            profile.update_history[entry.kw_label].push_back({index, q.op, q.ind});
            ++profile.updates_after_last_search[entry.kw_label];
        }
        profile.entries.push_back(std::move(entry));
    }
    return profile;
}

// ---- transcripts -----------------------------------------------------------

struct TranscriptRecord {
    enum class Kind : uint8_t { Update, Search, SearchSkipped };
    Kind kind = Kind::Update;
    Bytes u, e;                   // update messages
    Bytes t_w;                    // search token fields
    std::optional<Bytes> state;   // st_c (chain head) or k_w (released state)
    uint64_t c = 0;
    std::vector<Bytes> addresses;  // index entries read, in read order
};

using Transcript = std::vector<TranscriptRecord>;

namespace detail {

template <size_t N>
Bytes bytes_of(const std::array<uint8_t, N>& a) {
    return Bytes(a.begin(), a.end());
}

}  // namespace detail

// Replays a trace through the real scheme and captures the server's view.
// A search for a keyword with no history produces no message in either
// scheme; such queries appear as SearchSkipped records to keep one record
// per query.
inline Transcript run_real_fast(const Trace& trace, CryptoProvider& crypto) {
    Transcript out;
    EdbStore store(Scheme::Fast, &crypto);
    FastClient client = FastClient::setup(crypto);
    FastServer server(store, crypto);
    for (const Query& q : trace.queries) {
        TranscriptRecord rec;
        if (q.kind == Query::Kind::Update) {
            FastUpdateMessage msg = client.update(keyword_name(q.kw), q.ind, q.op);
            server.apply(msg);
            rec.kind = TranscriptRecord::Kind::Update;
            rec.u = detail::bytes_of(msg.u);
            rec.e = detail::bytes_of(msg.e);
        } else if (auto token = client.search_token(keyword_name(q.kw))) {
            SearchOutcome outcome = server.search(*token);
            rec.kind = TranscriptRecord::Kind::Search;
            rec.t_w = detail::bytes_of(token->t_w);
            rec.state = detail::bytes_of(token->st);
            rec.c = token->c;
            for (const Address& a : outcome.addresses) rec.addresses.push_back(detail::bytes_of(a));
        } else {
            rec.kind = TranscriptRecord::Kind::SearchSkipped;
        }
        out.push_back(std::move(rec));
    }
    return out;
}

inline Transcript run_real_fastio(const Trace& trace, CryptoProvider& crypto) {
    Transcript out;
    EdbStore store(Scheme::FastIo, &crypto);
    IoClient client = IoClient::setup(crypto);
    IoServer server(store, crypto);
    for (const Query& q : trace.queries) {
        TranscriptRecord rec;
        if (q.kind == Query::Kind::Update) {
            IoUpdateMessage msg = client.update(keyword_name(q.kw), q.ind, q.op);
            server.apply(msg);
            rec.kind = TranscriptRecord::Kind::Update;
            rec.u = detail::bytes_of(msg.u);
            rec.e = detail::bytes_of(msg.e);
        } else if (auto token = client.search_token(keyword_name(q.kw))) {
            SearchOutcome outcome = server.search(*token);
            rec.kind = TranscriptRecord::Kind::Search;
            rec.t_w = detail::bytes_of(token->t_w);
            if (token->k_w) rec.state = detail::bytes_of(*token->k_w);
            rec.c = token->c;
            for (const Address& a : outcome.addresses) rec.addresses.push_back(detail::bytes_of(a));
        } else {
            rec.kind = TranscriptRecord::Kind::SearchSkipped;
        }
        out.push_back(std::move(rec));
    }
    return out;
}

// ---- simulators ------------------------------------------------------------

// Ideal-world simulator for the chain scheme. Updates emit fresh random
// (address, payload) pairs of the real shapes; a search identifies its
// keyword class by the first search position, lazily samples the token,
// st_0 and the per-update ephemeral keys, and re-evolves the chain so the
// addresses chosen at update time line up with the token it releases.
inline Transcript simulate_fast(const PatternProfile& profile, CryptoProvider& crypto) {
    Transcript out;
    std::map<uint32_t, Bytes> addr_of_update;   // query index -> L[v]
    std::map<uint32_t, Token> token_by_class;   // keyed by min search position
    std::map<uint32_t, StateValue> st0_by_class;
    std::map<uint32_t, std::vector<EphemeralKey>> keys_by_class;

    uint32_t index = 0;
    for (const auto& entry : profile.entries) {
        ++index;
        TranscriptRecord rec;
        if (entry.kind == Query::Kind::Update) {
            rec.kind = TranscriptRecord::Kind::Update;
            rec.u = crypto.random_bytes(kAddressLen);
            rec.e = crypto.random_bytes(kFastPayloadLen);
            addr_of_update[index] = rec.u;
            out.push_back(std::move(rec));
            continue;
        }
        const auto& sp = profile.search_pattern.at(entry.kw_label);
        uint32_t first_search = sp.front();
        auto tok_it = token_by_class.find(first_search);
        if (tok_it == token_by_class.end())
            tok_it = token_by_class.emplace(first_search, crypto.random_block()).first;
        auto st_it = st0_by_class.find(first_search);
        if (st_it == st0_by_class.end())
            st_it = st0_by_class.emplace(first_search, crypto.random_block()).first;

        std::vector<PatternProfile::UpdateRec> history;
        if (auto uh = profile.update_history.find(entry.kw_label);
            uh != profile.update_history.end())
            for (const auto& u : uh->second)
                if (u.index < index) history.push_back(u);
        if (history.empty()) {
            rec.kind = TranscriptRecord::Kind::SearchSkipped;
            out.push_back(std::move(rec));
            continue;
        }

        std::vector<EphemeralKey>& keys = keys_by_class[first_search];
        while (keys.size() < history.size()) keys.push_back(crypto.random_block());
        StateValue st = st_it->second;
        std::vector<Bytes> forward_addresses;
        for (size_t i = 0; i < history.size(); ++i) {
            st = crypto.prp_forward(keys[i], st);
            forward_addresses.push_back(addr_of_update.at(history[i].index));
        }
        rec.kind = TranscriptRecord::Kind::Search;
        rec.t_w = detail::bytes_of(tok_it->second);
        rec.state = detail::bytes_of(st);
        rec.c = history.size();
        rec.addresses.assign(forward_addresses.rbegin(), forward_addresses.rend());
        out.push_back(std::move(rec));
    }
    return out;
}

// Ideal-world simulator for the cached scheme. A search looks at the update
// history strictly after the previous search of the same class: empty means
// the token carries no key and a zero counter, otherwise a fresh random key
// stands in for the released state and the suffix addresses are replayed in
// forward order.
inline Transcript simulate_fastio(const PatternProfile& profile, CryptoProvider& crypto) {
    Transcript out;
    std::map<uint32_t, Bytes> addr_of_update;
    std::map<uint32_t, Token> token_by_class;

    uint32_t index = 0;
    for (const auto& entry : profile.entries) {
        ++index;
        TranscriptRecord rec;
        if (entry.kind == Query::Kind::Update) {
            rec.kind = TranscriptRecord::Kind::Update;
            rec.u = crypto.random_bytes(kAddressLen);
            rec.e = crypto.random_bytes(kIoPayloadLen);
            addr_of_update[index] = rec.u;
            out.push_back(std::move(rec));
            continue;
        }
        const auto& sp = profile.search_pattern.at(entry.kw_label);
        uint32_t first_search = sp.front();
        uint32_t prev_search = 0;
        for (uint32_t pos : sp) {
            if (pos >= index) break;
            prev_search = pos;
        }

        std::vector<PatternProfile::UpdateRec> full, suffix;
        if (auto uh = profile.update_history.find(entry.kw_label);
            uh != profile.update_history.end()) {
            for (const auto& u : uh->second) {
                if (u.index >= index) break;
                full.push_back(u);
                if (u.index > prev_search) suffix.push_back(u);
            }
        }
        if (full.empty()) {
            rec.kind = TranscriptRecord::Kind::SearchSkipped;
            out.push_back(std::move(rec));
            continue;
        }

        auto tok_it = token_by_class.find(first_search);
        if (tok_it == token_by_class.end())
            tok_it = token_by_class.emplace(first_search, crypto.random_block()).first;
        rec.kind = TranscriptRecord::Kind::Search;
        rec.t_w = detail::bytes_of(tok_it->second);
        if (!suffix.empty()) {
            rec.state = detail::bytes_of(Block16(crypto.random_block()));
            rec.c = suffix.size();
            for (const auto& u : suffix) rec.addresses.push_back(addr_of_update.at(u.index));
        }
        out.push_back(std::move(rec));
    }
    return out;
}

// ---- transcript comparison ---------------------------------------------

struct AuditCheck {
    std::string name;
    bool pass = false;
    long long divergence = -1;  // 1-based query index of first divergence
    std::string detail;
};

struct AuditReport {
    std::vector<AuditCheck> checks;

    bool pass() const {
        for (const auto& c : checks)
            if (!c.pass) return false;
        return true;
    }

    // criterion,result,first_divergence[,detail]
    std::string to_csv() const {
        std::ostringstream out;
        out << "criterion,result,first_divergence,detail\n";
        for (const auto& c : checks) {
            out << c.name << ',' << (c.pass ? "PASS" : "FAIL") << ','
                << (c.divergence < 0 ? std::string("-") : std::to_string(c.divergence)) << ','
                << c.detail << '\n';
        }
        return out.str();
    }
};

namespace detail {

inline std::vector<long long> address_links(const Transcript& t, long long& bad_at) {
    std::map<Bytes, long long> update_pos;
    long long index = 0;
    for (const auto& rec : t) {
        ++index;
        if (rec.kind == TranscriptRecord::Kind::Update) update_pos[rec.u] = index;
    }
    std::vector<long long> links;
    index = 0;
    for (const auto& rec : t) {
        ++index;
        if (rec.kind != TranscriptRecord::Kind::Search) continue;
        for (const Bytes& a : rec.addresses) {
            auto it = update_pos.find(a);
            if (it == update_pos.end()) {
                if (bad_at < 0) bad_at = index;
                links.push_back(-1);
            } else {
                links.push_back(it->second);
            }
        }
        links.push_back(0);  // per-search separator
    }
    return links;
}

}  // namespace detail

// The fixed distinguisher battery. PASS means the two transcripts agree on
// (a) per-message kind/shape sequences including counters, (b) where search
// tokens repeat, (c) which update message each search reads, as position
// references, and (d) that update addresses never collide within either
// transcript.
inline AuditReport compare_profiles(const Transcript& real, const Transcript& ideal) {
    AuditReport report;

    {  // (a) structure
        AuditCheck check{"structure", true, -1, ""};
        if (real.size() != ideal.size()) {
            check.pass = false;
            check.divergence = static_cast<long long>(std::min(real.size(), ideal.size())) + 1;
            check.detail = "transcript lengths differ";
        }
        for (size_t i = 0; check.pass && i < real.size(); ++i) {
            const auto &r = real[i], &s = ideal[i];
            const char* why = nullptr;
            if (r.kind != s.kind)
                why = "record kind differs";
            else if (r.u.size() != s.u.size() || r.e.size() != s.e.size())
                why = "update message lengths differ";
            else if (r.t_w.size() != s.t_w.size())
                why = "token lengths differ";
            else if (r.state.has_value() != s.state.has_value())
                why = "state presence differs";
            else if (r.state && r.state->size() != s.state->size())
                why = "state lengths differ";
            else if (r.c != s.c)
                why = "counter differs";
            if (why) {
                check.pass = false;
                check.divergence = static_cast<long long>(i) + 1;
                check.detail = why;
            }
        }
        report.checks.push_back(std::move(check));
    }

    {  // (b) token repetition pattern
        AuditCheck check{"token-repetition", true, -1, ""};
        auto pattern = [](const Transcript& t) {
            std::vector<std::pair<long long, long long>> out;
            std::map<Bytes, long long> first;
            long long index = 0;
            for (const auto& rec : t) {
                ++index;
                if (rec.kind != TranscriptRecord::Kind::Search) continue;
                auto [it, inserted] = first.try_emplace(rec.t_w, index);
                out.emplace_back(index, it->second);
            }
            return out;
        };
        auto pr = pattern(real), ps = pattern(ideal);
        if (pr != ps) {
            check.pass = false;
            check.detail = "token repetition patterns differ";
            size_t n = std::min(pr.size(), ps.size());
            for (size_t i = 0; i < n; ++i)
                if (pr[i] != ps[i]) {
                    check.divergence = pr[i].first;
                    break;
                }
            if (check.divergence < 0 && pr.size() != ps.size())
                check.divergence = n < pr.size() ? pr[n].first : ps[n].first;
        }
        report.checks.push_back(std::move(check));
    }

    {  // (c) address linkage
        AuditCheck check{"address-linkage", true, -1, ""};
        long long bad_real = -1, bad_ideal = -1;
        auto lr = detail::address_links(real, bad_real);
        auto ls = detail::address_links(ideal, bad_ideal);
        if (bad_real >= 0 || bad_ideal >= 0) {
            check.pass = false;
            check.divergence = bad_real >= 0 ? bad_real : bad_ideal;
            check.detail = "search read an address no update emitted";
        } else if (lr != ls) {
            check.pass = false;
            check.detail = "address consumption patterns differ";
        }
        report.checks.push_back(std::move(check));
    }

    {  // (d) update address uniqueness
        AuditCheck check{"update-address-uniqueness", true, -1, ""};
        auto dup_at = [](const Transcript& t) -> long long {
            std::set<Bytes> seen;
            long long index = 0;
            for (const auto& rec : t) {
                ++index;
                if (rec.kind != TranscriptRecord::Kind::Update) continue;
                if (!seen.insert(rec.u).second) return index;
            }
            return -1;
        };
        long long dr = dup_at(real), ds = dup_at(ideal);
        if (dr >= 0 || ds >= 0) {
            check.pass = false;
            check.divergence = dr >= 0 ? dr : ds;
            check.detail = dr >= 0 ? "duplicate update address in real transcript"
                                   : "duplicate update address in simulated transcript";
        }
        report.checks.push_back(std::move(check));
    }

    return report;
}

// End-to-end audit: real pipeline, leakage extraction, matching simulator,
// transcript comparison.
inline AuditReport audit_trace(Scheme scheme, const Trace& trace, CryptoProvider& crypto) {
    PatternProfile profile = extract_leakage(trace);
    Transcript real = scheme == Scheme::Fast ? run_real_fast(trace, crypto)
                                             : run_real_fastio(trace, crypto);
    Transcript ideal = scheme == Scheme::Fast ? simulate_fast(profile, crypto)
                                              : simulate_fastio(profile, crypto);
    return compare_profiles(real, ideal);
}

}  // namespace fsse
