#include "fsse/leakage.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace fsse;

namespace {

Trace make_trace(std::vector<Query> qs) {
    Trace t;
    t.spec.length = qs.size();
    t.queries = std::move(qs);
    return t;
}

Query upd(uint32_t kw, Op op, DocId ind) { return {Query::Kind::Update, kw, op, ind}; }
Query srch(uint32_t kw) { return {Query::Kind::Search, kw, Op::Add, 0}; }

}  // namespace

TEST_CASE("extract_leakage basics") {
    SECTION("update-only trace: singleton classes, (i, op, ind) entries") {
        Trace t = make_trace({upd(3, Op::Add, 10), upd(8, Op::Del, 11), upd(5, Op::Add, 12)});
        PatternProfile p = extract_leakage(t);
        CHECK(p.query_pattern.size() == 3);
        for (const auto& [label, indices] : p.query_pattern) CHECK(indices.size() == 1);
        CHECK(p.entries[0].op == Op::Add);
        CHECK(p.entries[0].ind == 10);
        CHECK(p.entries[1].op == Op::Del);
        CHECK(p.entries[1].ind == 11);
        // labels are first-appearance ordinals, not raw keywords
        CHECK(p.entries[0].kw_label == 0);
        CHECK(p.entries[1].kw_label == 1);
        CHECK(p.entries[2].kw_label == 2);
    }
    SECTION("two searches of one keyword share a class") {
        Trace t = make_trace({srch(4), srch(4)});
        PatternProfile p = extract_leakage(t);
        REQUIRE(p.query_pattern.count(0) == 1);
        CHECK(p.query_pattern.at(0) == std::vector<uint32_t>{1, 2});
        CHECK(p.search_pattern.at(0) == std::vector<uint32_t>{1, 2});
    }
    SECTION("access pattern carries the result sets") {
        Trace t = make_trace({upd(1, Op::Add, 5), upd(1, Op::Add, 7), srch(1),
                              upd(1, Op::Del, 5), srch(1)});
        PatternProfile p = extract_leakage(t);
        CHECK(p.entries[2].result == std::set<DocId>{5, 7});
        CHECK(p.entries[4].result == std::set<DocId>{7});
    }
}

TEST_CASE("extractor agrees with brute-force filters") {
    Trace t = gen_trace({200, 0.3, 7, 20, 0.3, 2024});
    PatternProfile p = extract_leakage(t);

    // independent recomputation straight from the trace
    std::map<uint32_t, uint32_t> label;
    for (const Query& q : t.queries)
        label.try_emplace(q.kw, uint32_t(label.size()));

    std::map<uint32_t, std::vector<uint32_t>> qp, sp;
    std::map<uint32_t, std::vector<PatternProfile::UpdateRec>> uh;
    std::map<uint32_t, uint64_t> suffix;
    uint32_t i = 0;
    for (const Query& q : t.queries) {
        ++i;
        uint32_t l = label.at(q.kw);
        qp[l].push_back(i);
        if (q.kind == Query::Kind::Search) {
            sp[l].push_back(i);
            suffix[l] = 0;
        } else {
            uh[l].push_back({i, q.op, q.ind});
            ++suffix[l];
        }
    }
    CHECK(p.query_pattern == qp);
    CHECK(p.search_pattern == sp);
    CHECK(p.updates_after_last_search == suffix);
    REQUIRE(p.update_history.size() == uh.size());
    for (const auto& [l, recs] : uh) {
        const auto& got = p.update_history.at(l);
        REQUIRE(got.size() == recs.size());
        for (size_t j = 0; j < recs.size(); ++j) {
            CHECK(got[j].index == recs[j].index);
            CHECK(got[j].op == recs[j].op);
            CHECK(got[j].ind == recs[j].ind);
        }
    }

    // sp(w) is a subset of qp(w); up(w) and sp(w) partition qp(w)
    for (const auto& [l, qs] : p.query_pattern) {
        std::set<uint32_t> all(qs.begin(), qs.end());
        std::set<uint32_t> searches;
        if (p.search_pattern.count(l))
            searches.insert(p.search_pattern.at(l).begin(), p.search_pattern.at(l).end());
        std::set<uint32_t> updates;
        if (p.update_history.count(l))
            for (const auto& r : p.update_history.at(l)) updates.insert(r.index);
        std::set<uint32_t> merged = searches;
        merged.insert(updates.begin(), updates.end());
        CHECK(merged == all);
        CHECK(searches.size() + updates.size() == all.size());
    }
}

TEST_CASE("simulated message shapes") {
    CryptoProvider crypto = CryptoProvider::with_seed(1);
    Trace t = make_trace({upd(0, Op::Add, 1), upd(1, Op::Del, 2), srch(0), srch(0)});
    PatternProfile p = extract_leakage(t);
    SECTION("fast: updates are (32, 25); token reuse across searches") {
        Transcript sim = simulate_fast(p, crypto);
        REQUIRE(sim.size() == 4);
        CHECK(sim[0].u.size() == 32);
        CHECK(sim[0].e.size() == 25);
        CHECK(sim[1].u.size() == 32);
        CHECK(sim[1].e.size() == 25);
        REQUIRE(sim[2].kind == TranscriptRecord::Kind::Search);
        REQUIRE(sim[3].kind == TranscriptRecord::Kind::Search);
        CHECK(sim[2].t_w == sim[3].t_w);
        // repeated search without new updates leads to the same chain head
        CHECK(sim[2].state == sim[3].state);
        CHECK(sim[2].c == 1);
        CHECK(sim[3].c == 1);
        // the consumed address is the one emitted at update time
        REQUIRE(sim[2].addresses.size() == 1);
        CHECK(sim[2].addresses[0] == sim[0].u);
    }
    SECTION("fastio: updates are (32, 9); repeat search has no key") {
        Transcript sim = simulate_fastio(p, crypto);
        REQUIRE(sim.size() == 4);
        CHECK(sim[0].u.size() == 32);
        CHECK(sim[0].e.size() == 9);
        REQUIRE(sim[2].kind == TranscriptRecord::Kind::Search);
        CHECK(sim[2].state.has_value());
        CHECK(sim[2].c == 1);
        REQUIRE(sim[2].addresses.size() == 1);
        CHECK(sim[2].addresses[0] == sim[0].u);
        // second search: nothing new since the first
        CHECK_FALSE(sim[3].state.has_value());
        CHECK(sim[3].c == 0);
        CHECK(sim[3].addresses.empty());
    }
    SECTION("fastio: suffix of 3 programs exactly 3 address pairs") {
        Trace t2 = make_trace({upd(0, Op::Add, 1), srch(0), upd(0, Op::Add, 2),
                               upd(0, Op::Del, 1), upd(0, Op::Add, 3), srch(0)});
        PatternProfile p2 = extract_leakage(t2);
        Transcript sim = simulate_fastio(p2, crypto);
        REQUIRE(sim[5].kind == TranscriptRecord::Kind::Search);
        CHECK(sim[5].c == 3);
        REQUIRE(sim[5].addresses.size() == 3);
        CHECK(sim[5].addresses[0] == sim[2].u);
        CHECK(sim[5].addresses[1] == sim[3].u);
        CHECK(sim[5].addresses[2] == sim[4].u);
    }
}

TEST_CASE("simulator soundness on random traces") {
    for (uint64_t seed = 1; seed <= 25; ++seed) {
        Trace t = gen_trace({120, 0.25, 6, 25, 0.3, seed});
        CryptoProvider crypto = CryptoProvider::with_seed(seed * 31);
        AuditReport fast_report = audit_trace(Scheme::Fast, t, crypto);
        INFO("fast seed " << seed << "\n" << fast_report.to_csv());
        CHECK(fast_report.pass());
        AuditReport io_report = audit_trace(Scheme::FastIo, t, crypto);
        INFO("fastio seed " << seed << "\n" << io_report.to_csv());
        CHECK(io_report.pass());
    }
}

TEST_CASE("tampering is detected") {
    Trace t = gen_trace({60, 0.3, 4, 20, 0.3, 8});
    CryptoProvider crypto = CryptoProvider::with_seed(9);
    PatternProfile p = extract_leakage(t);
    Transcript real = run_real_fast(t, crypto);
    Transcript sim = simulate_fast(p, crypto);
    REQUIRE(compare_profiles(real, sim).pass());
    SECTION("extra byte in an update message fails the structure check") {
        Transcript broken = real;
        for (auto& rec : broken)
            if (rec.kind == TranscriptRecord::Kind::Update) {
                rec.e.push_back(0xAA);
                break;
            }
        AuditReport r = compare_profiles(broken, sim);
        CHECK_FALSE(r.pass());
        CHECK_FALSE(r.checks[0].pass);  // structure
        CHECK(r.checks[0].divergence >= 1);
    }
    SECTION("duplicated update address fails the uniqueness check") {
        Transcript broken = real;
        const Bytes* first = nullptr;
        for (auto& rec : broken) {
            if (rec.kind != TranscriptRecord::Kind::Update) continue;
            if (!first) {
                first = &rec.u;
            } else {
                rec.u = *first;
                break;
            }
        }
        AuditReport r = compare_profiles(broken, sim);
        CHECK_FALSE(r.pass());
    }
    SECTION("swapped counter fails the structure check") {
        Transcript broken = real;
        for (auto& rec : broken)
            if (rec.kind == TranscriptRecord::Kind::Search && rec.c > 0) {
                ++rec.c;
                break;
            }
        CHECK_FALSE(compare_profiles(broken, sim).pass());
    }
}

TEST_CASE("keyword renaming is invisible") {
    // The same trace with keywords permuted yields transcripts that the
    // battery cannot tell apart, for either scheme.
    Trace t = gen_trace({150, 0.25, 5, 20, 0.3, 77});
    Trace renamed = t;
    for (Query& q : renamed.queries) q.kw = (q.kw + 2) % 5;
    CryptoProvider crypto = CryptoProvider::with_seed(5);
    SECTION("fast") {
        Transcript a = run_real_fast(t, crypto);
        Transcript b = run_real_fast(renamed, crypto);
        AuditReport r = compare_profiles(a, b);
        INFO(r.to_csv());
        CHECK(r.pass());
    }
    SECTION("fastio") {
        Transcript a = run_real_fastio(t, crypto);
        Transcript b = run_real_fastio(renamed, crypto);
        AuditReport r = compare_profiles(a, b);
        INFO(r.to_csv());
        CHECK(r.pass());
    }
}

TEST_CASE("report text lists one line per criterion") {
    Trace t = gen_trace({40, 0.3, 3, 10, 0.2, 3});
    CryptoProvider crypto = CryptoProvider::with_seed(3);
    AuditReport r = audit_trace(Scheme::Fast, t, crypto);
    std::string csv = r.to_csv();
    CHECK(csv.find("structure,PASS") != std::string::npos);
    CHECK(csv.find("token-repetition,PASS") != std::string::npos);
    CHECK(csv.find("address-linkage,PASS") != std::string::npos);
    CHECK(csv.find("update-address-uniqueness,PASS") != std::string::npos);
}
