#pragma once

// Workload traces: each query is independently a search with probability
// alpha, otherwise an update. Deletes are only emitted for identifiers
// currently present for the keyword (the delete fraction applies among those
// eligible updates); adds only for identifiers currently absent, as in a
// store where document/keyword pairs are created and destroyed. When a
// keyword's id space is saturated the update falls back to a delete. A fixed
// seed fully determines the trace.

#include "fsse/common.hpp"

#include <cinttypes>
#include <cstdio>
#include <istream>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

namespace fsse {

struct TraceSpec {
    uint64_t length = 0;
    double alpha = 0.0;       // search probability
    uint32_t kw_universe = 1;
    uint64_t id_universe = 1;
    double del_frac = 0.0;    // among eligible updates
    uint64_t seed = 0;
    bool operator==(const TraceSpec&) const = default;
};

struct Query {
    enum class Kind : uint8_t { Update, Search };
    Kind kind = Kind::Update;
    uint32_t kw = 0;
    Op op = Op::Add;   // updates only
    DocId ind = 0;     // updates only
    bool operator==(const Query&) const = default;
};

struct Trace {
    TraceSpec spec;
    std::vector<Query> queries;
    bool operator==(const Trace&) const = default;
};

inline std::string keyword_name(uint32_t label) { return "w" + std::to_string(label); }

// mt19937_64 output is pinned by the standard; the reductions below avoid
// implementation-defined std distributions so traces are portable.
class DetRng {
public:
    explicit DetRng(uint64_t seed) : engine_(seed) {}
    uint64_t next() { return engine_(); }
    uint64_t below(uint64_t n) { return n == 0 ? 0 : next() % n; }
    double unit() { return double(next() >> 11) * 0x1.0p-53; }

private:
    std::mt19937_64 engine_;
};

inline Trace gen_trace(const TraceSpec& spec) {
    if (spec.alpha < 0.0 || spec.alpha > 1.0) throw std::invalid_argument("alpha out of [0,1]");
    if (spec.del_frac < 0.0 || spec.del_frac > 1.0)
        throw std::invalid_argument("del-frac out of [0,1]");
    if (spec.kw_universe == 0) throw std::invalid_argument("keyword universe must be >= 1");
    if (spec.id_universe == 0) throw std::invalid_argument("id universe must be >= 1");

    DetRng rng(spec.seed);
    Trace trace{spec, {}};
    trace.queries.reserve(spec.length);
    std::unordered_map<uint32_t, std::set<DocId>> present;
    for (uint64_t i = 0; i < spec.length; ++i) {
        Query q;
        bool is_search = rng.unit() < spec.alpha;
        q.kw = uint32_t(rng.below(spec.kw_universe));
        if (is_search) {
            q.kind = Query::Kind::Search;
        } else {
            q.kind = Query::Kind::Update;
            std::set<DocId>& ids = present[q.kw];
            bool saturated = ids.size() >= spec.id_universe;
            bool is_del = saturated || (!ids.empty() && rng.unit() < spec.del_frac);
            if (is_del) {
                q.op = Op::Del;
                auto it = ids.begin();
                std::advance(it, ptrdiff_t(rng.below(ids.size())));
                q.ind = *it;
                ids.erase(it);
            } else {
                q.op = Op::Add;
                // k-th absent identifier; each present id at or below the
                // running answer shifts it up by one.
                DocId ans = rng.below(spec.id_universe - ids.size());
                for (DocId p : ids) {
                    if (p <= ans)
                        ++ans;
                    else
                        break;
                }
                q.ind = ans;
                ids.insert(q.ind);
            }
        }
        trace.queries.push_back(q);
    }
    return trace;
}

// ---- trace file format ------------------------------------------------
//
//   # fsse-trace v1 len=... alpha=... kw=... ids=... del=... seed=...
//   S <kw>
//   U <kw> add|del <ind>

inline void write_trace(const Trace& t, std::ostream& out) {
    char head[256];
    std::snprintf(head, sizeof(head),
                  "# fsse-trace v1 len=%" PRIu64 " alpha=%.17g kw=%" PRIu32 " ids=%" PRIu64
                  " del=%.17g seed=%" PRIu64 "\n",
                  t.spec.length, t.spec.alpha, t.spec.kw_universe, t.spec.id_universe,
                  t.spec.del_frac, t.spec.seed);
    out << head;
    for (const Query& q : t.queries) {
        if (q.kind == Query::Kind::Search)
            out << "S " << q.kw << '\n';
        else
            out << "U " << q.kw << ' ' << op_name(q.op) << ' ' << q.ind << '\n';
    }
}

inline Trace read_trace(std::istream& in) {
    Trace t;
    std::string line;
    if (!std::getline(in, line)) throw FileFormatError("empty trace file");
    if (std::sscanf(line.c_str(),
                    "# fsse-trace v1 len=%" SCNu64 " alpha=%lg kw=%" SCNu32 " ids=%" SCNu64
                    " del=%lg seed=%" SCNu64,
                    &t.spec.length, &t.spec.alpha, &t.spec.kw_universe, &t.spec.id_universe,
                    &t.spec.del_frac, &t.spec.seed) != 6)
        throw FileFormatError("bad trace header: " + line);
    size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        Query q;
        if (tag == "S") {
            q.kind = Query::Kind::Search;
            if (!(ls >> q.kw)) throw FileFormatError("bad search line " + std::to_string(lineno));
        } else if (tag == "U") {
            q.kind = Query::Kind::Update;
            std::string op;
            if (!(ls >> q.kw >> op >> q.ind))
                throw FileFormatError("bad update line " + std::to_string(lineno));
            if (op == "add")
                q.op = Op::Add;
            else if (op == "del")
                q.op = Op::Del;
            else
                throw FileFormatError("bad op on line " + std::to_string(lineno));
        } else {
            throw FileFormatError("bad tag on line " + std::to_string(lineno));
        }
        t.queries.push_back(q);
    }
    if (t.queries.size() != t.spec.length)
        throw FileFormatError("trace length mismatch: header says " +
                              std::to_string(t.spec.length) + ", found " +
                              std::to_string(t.queries.size()));
    return t;
}

}  // namespace fsse
