#include "fsse/trace.hpp"

#include "fsse/oracle.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <sstream>

using namespace fsse;

TEST_CASE("trace generation edges") {
    SECTION("alpha 0 is update-only") {
        Trace t = gen_trace({500, 0.0, 4, 20, 0.3, 1});
        for (const Query& q : t.queries) CHECK(q.kind == Query::Kind::Update);
    }
    SECTION("alpha 1 is search-only") {
        Trace t = gen_trace({500, 1.0, 4, 20, 0.3, 1});
        for (const Query& q : t.queries) CHECK(q.kind == Query::Kind::Search);
    }
    SECTION("invalid specs rejected") {
        CHECK_THROWS_AS(gen_trace({10, -0.1, 4, 20, 0.0, 1}), std::invalid_argument);
        CHECK_THROWS_AS(gen_trace({10, 0.5, 4, 20, 1.5, 1}), std::invalid_argument);
        CHECK_THROWS_AS(gen_trace({10, 0.5, 0, 20, 0.0, 1}), std::invalid_argument);
        CHECK_THROWS_AS(gen_trace({10, 0.5, 4, 0, 0.0, 1}), std::invalid_argument);
    }
}

TEST_CASE("deletes target present ids, adds target absent ids") {
    Trace t = gen_trace({2000, 0.1, 6, 30, 0.5, 99});
    PlaintextOracle oracle;
    bool saw_del = false;
    for (const Query& q : t.queries) {
        if (q.kind != Query::Kind::Update) continue;
        std::string kw = keyword_name(q.kw);
        auto present = oracle.search(kw);
        if (q.op == Op::Del) {
            saw_del = true;
            CHECK(present.count(q.ind) == 1);
        } else {
            CHECK(present.count(q.ind) == 0);
            CHECK(q.ind < 30);
        }
        oracle.update(kw, q.ind, q.op);
    }
    CHECK(saw_del);
}

TEST_CASE("saturated id space falls back to deletes") {
    // id universe of 1 with no delete fraction still alternates add/del
    Trace t = gen_trace({50, 0.0, 1, 1, 0.0, 5});
    PlaintextOracle oracle;
    for (const Query& q : t.queries) {
        auto present = oracle.search(keyword_name(q.kw));
        if (q.op == Op::Add)
            CHECK(present.empty());
        else
            CHECK(present.count(q.ind) == 1);
        oracle.update(keyword_name(q.kw), q.ind, q.op);
    }
}

TEST_CASE("seed determinism, byte for byte") {
    TraceSpec spec{100000, 0.01, 10, 50, 0.3, 7};
    Trace a = gen_trace(spec);
    Trace b = gen_trace(spec);
    CHECK(a == b);
    std::ostringstream sa, sb;
    write_trace(a, sa);
    write_trace(b, sb);
    CHECK(sa.str() == sb.str());
    Trace c = gen_trace({100000, 0.01, 10, 50, 0.3, 8});
    CHECK_FALSE(a == c);
}

TEST_CASE("trace file round trip") {
    Trace t = gen_trace({300, 0.25, 5, 10, 0.4, 31337});
    std::ostringstream out;
    write_trace(t, out);
    std::istringstream in(out.str());
    Trace back = read_trace(in);
    CHECK(back == t);
}

TEST_CASE("trace file rejects damage") {
    Trace t = gen_trace({10, 0.5, 2, 4, 0.0, 3});
    std::ostringstream out;
    write_trace(t, out);
    std::string text = out.str();
    SECTION("bad header") {
        std::istringstream in("# nonsense\nS 0\n");
        CHECK_THROWS_AS(read_trace(in), FileFormatError);
    }
    SECTION("length mismatch") {
        std::istringstream in(text + "S 0\n");
        CHECK_THROWS_AS(read_trace(in), FileFormatError);
    }
    SECTION("bad op") {
        std::string broken = text;
        size_t pos = broken.find(" add ");
        if (pos != std::string::npos) {
            broken.replace(pos, 5, " mul ");
            std::istringstream in(broken);
            CHECK_THROWS_AS(read_trace(in), FileFormatError);
        }
    }
}
