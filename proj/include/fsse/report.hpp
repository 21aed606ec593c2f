#pragma once

// Metric reports. CSV rows use a fixed column set:
//   idx,kind,keyword_label,op,ind,intervals,cache_reads,bytes_read,
//   bytes_stored,prf,prp,prp_inv,h1,h2,rand,wall_us
// (bytes_stored is the per-query delta). The aggregate block trails the rows
// as '#'-prefixed lines; the JSON report carries the same rows field for
// field plus the aggregate object.

#include "fsse/bench.hpp"

#include <json.hpp>

#include <array>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <string>

namespace fsse {

constexpr const char* kCsvHeader =
    "idx,kind,keyword_label,op,ind,intervals,cache_reads,bytes_read,bytes_stored,"
    "prf,prp,prp_inv,h1,h2,rand,wall_us";

struct Aggregate {
    uint64_t queries = 0;
    uint64_t searches = 0;
    uint64_t updates = 0;
    double mean_search_intervals = 0.0;
    // mean intervals per search, bucketed by trace-position decile; NaN-free
    // (buckets with no searches report 0).
    std::array<double, 10> search_intervals_by_decile{};
    uint64_t total_bytes_read = 0;
    uint64_t final_bytes_stored = 0;
    CryptoCounters op_totals{};
    bool correct = true;
};

inline Aggregate aggregate(const RunResult& res, uint64_t trace_length) {
    Aggregate agg;
    agg.queries = res.rows.size();
    agg.correct = res.correct;
    agg.total_bytes_read = res.final_metrics.bytes_read;
    agg.final_bytes_stored = res.final_metrics.bytes_stored;
    agg.op_totals = res.final_metrics.ops;
    std::array<double, 10> sums{};
    std::array<uint64_t, 10> counts{};
    double total = 0;
    for (const QueryMetrics& row : res.rows) {
        if (row.kind != Query::Kind::Search) {
            ++agg.updates;
            continue;
        }
        ++agg.searches;
        total += double(row.intervals);
        size_t decile = trace_length == 0 ? 0 : size_t(((row.idx - 1) * 10) / trace_length);
        if (decile > 9) decile = 9;
        sums[decile] += double(row.intervals);
        ++counts[decile];
    }
    if (agg.searches > 0) agg.mean_search_intervals = total / double(agg.searches);
    for (size_t d = 0; d < 10; ++d)
        agg.search_intervals_by_decile[d] = counts[d] ? sums[d] / double(counts[d]) : 0.0;
    return agg;
}

namespace detail {

inline std::string fixed6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

}  // namespace detail

inline void write_csv(const RunResult& res, uint64_t trace_length, std::ostream& out) {
    out << kCsvHeader << '\n';
    for (const QueryMetrics& row : res.rows) {
        out << row.idx << ',' << (row.kind == Query::Kind::Search ? "search" : "update") << ','
            << row.keyword_label << ',' << (row.op ? op_name(*row.op) : "") << ',';
        if (row.ind) out << *row.ind;
        out << ',' << row.intervals << ',' << row.cache_reads << ',' << row.bytes_read << ','
            << row.bytes_stored_delta << ',' << row.ops.prf << ',' << row.ops.prp << ','
            << row.ops.prp_inv << ',' << row.ops.h1 << ',' << row.ops.h2 << ',' << row.ops.rand
            << ',' << row.wall_us << '\n';
    }
    Aggregate agg = aggregate(res, trace_length);
    out << "# aggregate queries=" << agg.queries << " searches=" << agg.searches
        << " updates=" << agg.updates << '\n';
    out << "# aggregate mean_search_intervals=" << detail::fixed6(agg.mean_search_intervals)
        << '\n';
    out << "# aggregate search_intervals_by_decile=";
    for (size_t d = 0; d < 10; ++d)
        out << (d ? "|" : "") << detail::fixed6(agg.search_intervals_by_decile[d]);
    out << '\n';
    out << "# aggregate total_bytes_read=" << agg.total_bytes_read
        << " final_bytes_stored=" << agg.final_bytes_stored << '\n';
    out << "# aggregate ops prf=" << agg.op_totals.prf << " prp=" << agg.op_totals.prp
        << " prp_inv=" << agg.op_totals.prp_inv << " h1=" << agg.op_totals.h1
        << " h2=" << agg.op_totals.h2 << " rand=" << agg.op_totals.rand << '\n';
    out << "# aggregate correct=" << (agg.correct ? "true" : "false") << '\n';
}

inline void write_json(const RunResult& res, uint64_t trace_length, std::ostream& out) {
    nlohmann::ordered_json doc;
    doc["queries"] = nlohmann::ordered_json::array();
    for (const QueryMetrics& row : res.rows) {
        nlohmann::ordered_json j;
        j["idx"] = row.idx;
        j["kind"] = row.kind == Query::Kind::Search ? "search" : "update";
        j["keyword_label"] = row.keyword_label;
        j["op"] = row.op ? op_name(*row.op) : "";
        if (row.ind)
            j["ind"] = *row.ind;
        else
            j["ind"] = nullptr;
        j["intervals"] = row.intervals;
        j["cache_reads"] = row.cache_reads;
        j["bytes_read"] = row.bytes_read;
        j["bytes_stored"] = row.bytes_stored_delta;
        j["prf"] = row.ops.prf;
        j["prp"] = row.ops.prp;
        j["prp_inv"] = row.ops.prp_inv;
        j["h1"] = row.ops.h1;
        j["h2"] = row.ops.h2;
        j["rand"] = row.ops.rand;
        j["wall_us"] = row.wall_us;
        doc["queries"].push_back(std::move(j));
    }
    Aggregate agg = aggregate(res, trace_length);
    nlohmann::ordered_json ja;
    ja["queries"] = agg.queries;
    ja["searches"] = agg.searches;
    ja["updates"] = agg.updates;
    ja["mean_search_intervals"] = agg.mean_search_intervals;
    ja["search_intervals_by_decile"] = agg.search_intervals_by_decile;
    ja["total_bytes_read"] = agg.total_bytes_read;
    ja["final_bytes_stored"] = agg.final_bytes_stored;
    ja["ops"] = {{"prf", agg.op_totals.prf},       {"prp", agg.op_totals.prp},
                 {"prp_inv", agg.op_totals.prp_inv}, {"h1", agg.op_totals.h1},
                 {"h2", agg.op_totals.h2},           {"rand", agg.op_totals.rand}};
    ja["correct"] = agg.correct;
    doc["aggregate"] = std::move(ja);
    out << doc.dump(2) << '\n';
}

inline void write_report(const RunResult& res, uint64_t trace_length, const std::string& format,
                         std::ostream& out) {
    if (format == "csv")
        write_csv(res, trace_length, out);
    else if (format == "json")
        write_json(res, trace_length, out);
    else
        throw std::invalid_argument("unknown report format: " + format);
}

}  // namespace fsse
