#include "fsse/fast.hpp"

#include "fsse/oracle.hpp"
#include "fsse/trace.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <set>

using namespace fsse;

namespace {

struct Rig {
    CryptoProvider crypto;
    EdbStore store;
    FastClient client;
    FastServer server;

    explicit Rig(uint64_t seed)
        : crypto(CryptoProvider::with_seed(seed)),
          store(Scheme::Fast, &crypto),
          client(FastClient::setup(crypto)),
          server(store, crypto) {}

    void update(const std::string& kw, DocId ind, Op op) {
        server.apply(client.update(kw, ind, op));
    }
    std::set<DocId> search(const std::string& kw) {
        auto token = client.search_token(kw);
        if (!token) return {};
        return server.search(*token).ids;
    }
};

}  // namespace

TEST_CASE("setup starts empty") {
    Rig rig(1);
    CHECK(rig.client.sigma().empty());
    CHECK(rig.store.size("T") == 0);
    CHECK_FALSE(rig.client.search_token("anything"));
}

TEST_CASE("repeated setups draw distinct keys") {
    CryptoProvider crypto = CryptoProvider::with_system_rng();
    std::set<std::string> keys;
    for (int i = 0; i < 100; ++i) keys.insert(to_hex(FastClient::setup(crypto).key()));
    CHECK(keys.size() == 100);
}

TEST_CASE("update evolves client state") {
    Rig rig(2);
    SECTION("first update creates the entry with c = 1") {
        rig.update("w", 5, Op::Add);
        REQUIRE(rig.client.sigma().count("w") == 1);
        CHECK(rig.client.sigma().at("w").c == 1);
    }
    SECTION("successive identical updates still get distinct addresses") {
        FastUpdateMessage m1 = rig.client.update("w", 5, Op::Add);
        FastUpdateMessage m2 = rig.client.update("w", 5, Op::Add);
        CHECK(m1.u != m2.u);
        CHECK(m1.e != m2.e);
    }
    SECTION("counter overflow refused") {
        rig.client.restore_entry("w", KeywordState{{}, UINT64_MAX});
        CHECK_THROWS_AS(rig.client.update("w", 1, Op::Add), std::overflow_error);
    }
    SECTION("empty keyword rejected") {
        CHECK_THROWS_AS(rig.client.update("", 1, Op::Add), std::invalid_argument);
    }
}

TEST_CASE("update message decodes under the client secrets") {
    // Replay the client computation with the bare primitives.
    Rig rig(3);
    rig.update("w", 7, Op::Add);
    StateValue st_before = rig.client.sigma().at("w").st;
    FastUpdateMessage msg = rig.client.update("w", 42, Op::Del);
    StateValue st_after = rig.client.sigma().at("w").st;

    Token t_w = prf(rig.client.key(), keyword_hash("w"));
    Bytes hash_in(32);
    std::memcpy(hash_in.data(), t_w.data(), 16);
    std::memcpy(hash_in.data() + 16, st_after.data(), 16);
    CHECK(msg.u == h1(hash_in));

    Bytes mask = h2(hash_in, kFastPayloadLen);
    std::array<uint8_t, kFastPayloadLen> plain;
    for (size_t i = 0; i < plain.size(); ++i) plain[i] = msg.e[i] ^ mask[i];
    CHECK(get_be64(plain.data()) == 42);
    CHECK(plain[8] == op_byte(Op::Del));
    EphemeralKey k;
    std::memcpy(k.data(), plain.data() + 9, 16);
    CHECK(prp_inverse(k, st_after) == st_before);
}

TEST_CASE("server apply") {
    Rig rig(4);
    SECTION("apply then lookup") {
        FastUpdateMessage msg = rig.client.update("w", 1, Op::Add);
        rig.server.apply(msg);
        auto got = rig.store.kv_get("T", msg.u);
        REQUIRE(got);
        CHECK(std::equal(got->begin(), got->end(), msg.e.begin()));
        CHECK(rig.store.size("T") == 1);
    }
    SECTION("N randomized updates grow the index to N") {
        Trace t = gen_trace({200, 0.0, 10, 50, 0.3, 44});
        for (const Query& q : t.queries) rig.update(keyword_name(q.kw), q.ind, q.op);
        CHECK(rig.store.size("T") == 200);
        CHECK(rig.store.metrics_snapshot().bytes_stored == 200 * kFastPayloadLen);
    }
    SECTION("duplicate address with differing payload is fatal") {
        FastUpdateMessage msg = rig.client.update("w", 1, Op::Add);
        rig.server.apply(msg);
        CHECK_NOTHROW(rig.server.apply(msg));  // idempotent retry
        msg.e[0] ^= 1;
        CHECK_THROWS_AS(rig.server.apply(msg), IntegrityError);
    }
}

TEST_CASE("search token") {
    Rig rig(5);
    SECTION("unknown keyword is absent") { CHECK_FALSE(rig.client.search_token("w")); }
    SECTION("carries the lifetime update count") {
        rig.update("w", 1, Op::Add);
        rig.update("w", 2, Op::Add);
        rig.update("w", 1, Op::Del);
        auto token = rig.client.search_token("w");
        REQUIRE(token);
        CHECK(token->c == 3);
    }
    SECTION("search does not mutate client state") {
        rig.update("w", 1, Op::Add);
        auto t1 = rig.client.search_token("w");
        auto t2 = rig.client.search_token("w");
        REQUIRE(t1);
        REQUIRE(t2);
        CHECK(*t1 == *t2);
    }
}

TEST_CASE("server search semantics") {
    Rig rig(6);
    SECTION("delete cancels an earlier add") {
        rig.update("w", 5, Op::Add);
        rig.update("w", 7, Op::Add);
        rig.update("w", 5, Op::Del);
        CHECK(rig.search("w") == std::set<DocId>{7});
    }
    SECTION("re-add after delete survives the backward scan") {
        rig.update("w", 5, Op::Add);
        rig.update("w", 5, Op::Del);
        rig.update("w", 5, Op::Add);
        CHECK(rig.search("w") == std::set<DocId>{5});
    }
    SECTION("delete of a never-added id leaves a harmless residue") {
        rig.update("w", 3, Op::Add);
        rig.update("w", 9, Op::Del);
        CHECK(rig.search("w") == std::set<DocId>{3});
    }
    SECTION("random trace agrees with the oracle for every keyword") {
        Trace t = gen_trace({100, 0.0, 10, 50, 0.3, 77});
        PlaintextOracle oracle;
        for (const Query& q : t.queries) {
            rig.update(keyword_name(q.kw), q.ind, q.op);
            oracle.update(keyword_name(q.kw), q.ind, q.op);
        }
        for (uint32_t kw = 0; kw < 10; ++kw)
            CHECK(rig.search(keyword_name(kw)) == oracle.search(keyword_name(kw)));
    }
    SECTION("missing index entry is protocol corruption") {
        rig.update("w", 1, Op::Add);
        auto token = rig.client.search_token("w");
        REQUIRE(token);
        EdbStore empty(Scheme::Fast, &rig.crypto);
        FastServer other(empty, rig.crypto);
        CHECK_THROWS_AS(other.search(*token), CorruptionError);
    }
    SECTION("search mutates neither the index nor the metrics baseline") {
        rig.update("w", 1, Op::Add);
        rig.update("w", 2, Op::Add);
        uint64_t stored = rig.store.metrics_snapshot().bytes_stored;
        rig.search("w");
        CHECK(rig.store.size("T") == 2);
        CHECK(rig.store.metrics_snapshot().bytes_stored == stored);
    }
}

TEST_CASE("search touches exactly c index entries") {
    Rig rig(7);
    for (DocId i = 0; i < 50; ++i) rig.update("w", i, Op::Add);
    rig.update("other", 1, Op::Add);
    IoMetrics before = rig.store.metrics_snapshot();
    rig.search("w");
    IoMetrics after = rig.store.metrics_snapshot();
    CHECK(after.non_contiguous_reads - before.non_contiguous_reads == 50);
    CHECK(after.bytes_read - before.bytes_read == 50 * kFastPayloadLen);
}

TEST_CASE("client update budget is one of each primitive") {
    Rig rig(8);
    rig.update("w", 0, Op::Add);  // first touch also draws st_0
    for (int i = 1; i <= 20; ++i) {
        CryptoCounters before = rig.crypto.counters();
        (void)rig.client.update("w", DocId(i), Op::Add);
        CryptoCounters d = rig.crypto.counters() - before;
        CHECK(d.prf == 1);
        CHECK(d.prp == 1);
        CHECK(d.rand == 1);
        CHECK(d.h1 == 1);
        CHECK(d.h2 == 1);
        CHECK(d.prp_inv == 0);
    }
    // first touch of a fresh keyword draws the initial state too
    CryptoCounters before = rig.crypto.counters();
    (void)rig.client.update("fresh", 1, Op::Add);
    CryptoCounters d = rig.crypto.counters() - before;
    CHECK(d.rand == 2);
    CHECK(d.prf == 1);
    CHECK(d.prp == 1);
}

TEST_CASE("stale token replay returns the old result set") {
    // A token captured before further updates never sees them.
    Rig rig(9);
    rig.update("w", 1, Op::Add);
    rig.update("w", 2, Op::Add);
    auto stale = rig.client.search_token("w");
    REQUIRE(stale);
    std::set<DocId> want = {1, 2};
    for (DocId i = 10; i < 20; ++i) rig.update("w", i, Op::Add);
    rig.update("w", 1, Op::Del);
    CHECK(rig.server.search(*stale).ids == want);
    // fresh token still sees the full picture
    CHECK(rig.search("w") == std::set<DocId>{2, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19});
}

TEST_CASE("state chain survives persistence of the secret key") {
    // prf(k_s, h(w)) is stable across client reconstruction from the key.
    CryptoProvider crypto = CryptoProvider::with_seed(10);
    FastClient a = FastClient::setup(crypto);
    FastClient b(a.key(), crypto);
    Token ta = prf(a.key(), keyword_hash("kw"));
    Token tb = prf(b.key(), keyword_hash("kw"));
    CHECK(ta == tb);
}
