#pragma once

// Trace replay against either scheme, in-process or through the wire, with
// every search checked against the plaintext oracle and per-query metric
// rows (intervals, cache reads, bytes, primitive counts, wall time).

#include "fsse/common.hpp"
#include "fsse/crypto.hpp"
#include "fsse/fast.hpp"
#include "fsse/fastio.hpp"
#include "fsse/oracle.hpp"
#include "fsse/store.hpp"
#include "fsse/trace.hpp"
#include "fsse/wire.hpp"

#include <chrono>
#include <filesystem>
#include <optional>
#include <vector>

namespace fsse {

enum class RunMode { Local, Wire };

struct QueryMetrics {
    uint64_t idx = 0;  // 1-based position in the trace
    Query::Kind kind = Query::Kind::Update;
    uint32_t keyword_label = 0;
    std::optional<Op> op;
    std::optional<DocId> ind;
    uint64_t intervals = 0;
    uint64_t cache_reads = 0;
    uint64_t bytes_read = 0;
    int64_t bytes_stored_delta = 0;
    CryptoCounters ops{};
    uint64_t wall_us = 0;
};

struct RunOptions {
    RunMode mode = RunMode::Local;
    std::optional<uint64_t> crypto_seed;  // reproducible runs; system RNG otherwise
    std::filesystem::path state_path;     // wire mode: client state file
};

struct RunResult {
    std::vector<QueryMetrics> rows;
    bool correct = true;
    int64_t first_mismatch = -1;  // 1-based query index, -1 when correct
    IoMetrics final_metrics;
    Bytes store_image;  // serialized store after the run
};

inline RunResult run_trace(Scheme scheme, const Trace& trace, const RunOptions& opts = {}) {
    CryptoProvider provider = opts.crypto_seed ? CryptoProvider::with_seed(*opts.crypto_seed)
                                               : CryptoProvider::with_system_rng();
    EdbStore store(scheme, &provider);
    PlaintextOracle oracle;
    RunResult result;
    result.rows.reserve(trace.queries.size());

    std::optional<FastClient> fast_client;
    std::optional<FastServer> fast_server;
    std::optional<IoClient> io_client;
    std::optional<IoServer> io_server;
    std::optional<wire::Server> server;
    std::optional<wire::Client> client;

    if (opts.mode == RunMode::Local) {
        if (scheme == Scheme::Fast) {
            fast_client.emplace(FastClient::setup(provider));
            fast_server.emplace(store, provider);
        } else {
            io_client.emplace(IoClient::setup(provider));
            io_server.emplace(store, provider);
        }
    } else {
        server.emplace(scheme, store, provider);
        server->start();
        client.emplace(scheme, "127.0.0.1", server->port(), provider, opts.state_path);
    }

    uint64_t idx = 0;
    for (const Query& q : trace.queries) {
        ++idx;
        QueryMetrics row;
        row.idx = idx;
        row.kind = q.kind;
        row.keyword_label = q.kw;
        const std::string kw = keyword_name(q.kw);
        IoMetrics before = store.metrics_snapshot();
        auto t0 = std::chrono::steady_clock::now();
        if (q.kind == Query::Kind::Update) {
            row.op = q.op;
            row.ind = q.ind;
            if (opts.mode == RunMode::Local) {
                if (fast_client)
                    fast_server->apply(fast_client->update(kw, q.ind, q.op));
                else
                    io_server->apply(io_client->update(kw, q.ind, q.op));
            } else {
                client->update(kw, q.ind, q.op);
            }
            oracle.update(kw, q.ind, q.op);
        } else {
            std::set<DocId> got;
            if (opts.mode == RunMode::Local) {
                if (fast_client) {
                    if (auto token = fast_client->search_token(kw))
                        got = fast_server->search(*token).ids;
                } else if (auto token = io_client->search_token(kw)) {
                    got = io_server->search(*token).ids;
                }
            } else {
                auto ids = client->search(kw);
                got.insert(ids.begin(), ids.end());
            }
            if (got != oracle.search(kw)) {
                result.correct = false;
                result.first_mismatch = int64_t(idx);
            }
        }
        auto t1 = std::chrono::steady_clock::now();
        IoMetrics after = store.metrics_snapshot();
        row.intervals = after.non_contiguous_reads - before.non_contiguous_reads;
        row.cache_reads = after.cache_reads - before.cache_reads;
        row.bytes_read = after.bytes_read - before.bytes_read;
        row.bytes_stored_delta = int64_t(after.bytes_stored) - int64_t(before.bytes_stored);
        row.ops = after.ops - before.ops;
        row.wall_us =
            uint64_t(std::chrono::duration_cast<std::chrono::microseconds>(t1 - t0).count());
        result.rows.push_back(row);
        if (!result.correct) break;
    }

    if (server) server->stop();
    result.final_metrics = store.metrics_snapshot();
    result.store_image = store.serialize();
    return result;
}

// Least-squares slope of y over x.
inline double linear_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size() || xs.size() < 2)
        throw std::invalid_argument("need two points for a slope");
    double n = double(xs.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    double denom = n * sxx - sx * sx;
    if (denom == 0) throw std::invalid_argument("degenerate x values");
    return (n * sxy - sx * sy) / denom;
}

}  // namespace fsse
