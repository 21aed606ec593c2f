// fsse: forward-private encrypted search over a client-server key-value
// index. Subcommands: setup, serve, update, search, trace-gen, bench, audit,
// persist-check. The FSSE_STATE environment variable overrides --state.

#include "fsse/bench.hpp"
#include "fsse/leakage.hpp"
#include "fsse/report.hpp"
#include "fsse/store.hpp"
#include "fsse/trace.hpp"
#include "fsse/wire.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>

namespace {

using namespace fsse;

Scheme parse_scheme(const std::string& name) {
    if (name == "fast") return Scheme::Fast;
    if (name == "fastio") return Scheme::FastIo;
    throw CLI::ValidationError("--scheme", "must be 'fast' or 'fastio'");
}

// FSSE_STATE wins over the flag.
std::string effective_state(const std::string& flag_value) {
    const char* env = std::getenv("FSSE_STATE");
    if (env && *env) return env;
    return flag_value;
}

wire::ClientState load_or_fresh_state(const std::string& path, Scheme scheme,
                                      CryptoProvider& crypto) {
    if (!path.empty() && std::filesystem::exists(path)) {
        wire::ClientState s = wire::load_client_state(path);
        if (s.scheme != scheme)
            throw FileFormatError("state file " + path + " belongs to the other scheme");
        return s;
    }
    wire::ClientState s;
    s.scheme = scheme;
    s.key = crypto.random_block();
    return s;
}

void save_state_if(const std::string& path, const wire::ClientState& s) {
    if (!path.empty()) wire::save_client_state(path, s);
}

wire::Server* g_serving = nullptr;

void handle_signal(int) {
    if (g_serving) g_serving->request_stop();
}

struct CommonOpts {
    std::string scheme_name = "fast";
    std::string store_path;
    std::string state_path;
    std::string addr = "127.0.0.1:7700";
    std::string mode = "local";
};

int cmd_setup(const CommonOpts& opt) {
    Scheme scheme = parse_scheme(opt.scheme_name);
    CryptoProvider crypto = CryptoProvider::with_system_rng();
    if (!opt.store_path.empty()) {
        EdbStore store(scheme);
        store.persist(opt.store_path);
        std::cout << "store created: " << opt.store_path << "\n";
    }
    std::string state = effective_state(opt.state_path);
    if (!state.empty()) {
        wire::ClientState s;
        s.scheme = scheme;
        s.key = crypto.random_block();
        wire::save_client_state(state, s);
        std::cout << "client state created: " << state << "\n";
    }
    if (opt.store_path.empty() && state.empty())
        throw CLI::ValidationError("setup", "nothing to do: give --store and/or --state");
    return 0;
}

int cmd_serve(const CommonOpts& opt) {
    Scheme scheme = parse_scheme(opt.scheme_name);
    CryptoProvider crypto = CryptoProvider::with_system_rng();
    std::optional<EdbStore> store;
    if (!opt.store_path.empty() && std::filesystem::exists(opt.store_path)) {
        store.emplace(EdbStore::load(opt.store_path, &crypto));
        if (store->scheme() != scheme)
            throw FileFormatError("store file belongs to the other scheme");
    } else {
        store.emplace(scheme, &crypto);
    }
    auto [host, port] = wire::split_endpoint(opt.addr);
    wire::Server server(scheme, *store, crypto, host, port);
    g_serving = &server;
    std::signal(SIGINT, handle_signal);
    std::signal(SIGTERM, handle_signal);
    std::cout << "serving " << scheme_name(scheme) << " on " << host << ":" << server.port()
              << std::endl;
    server.run();
    g_serving = nullptr;
    if (!opt.store_path.empty()) {
        store->persist(opt.store_path);
        std::cout << "store persisted: " << opt.store_path << "\n";
    }
    return 0;
}

void print_ids(const std::vector<DocId>& ids) {
    if (ids.empty()) {
        std::cout << "no results\n";
        return;
    }
    for (size_t i = 0; i < ids.size(); ++i) std::cout << (i ? " " : "") << ids[i];
    std::cout << "\n";
}

int cmd_update(const CommonOpts& opt, const std::string& keyword, DocId ind,
               const std::string& op_name_str) {
    Scheme scheme = parse_scheme(opt.scheme_name);
    Op op;
    if (op_name_str == "add")
        op = Op::Add;
    else if (op_name_str == "del")
        op = Op::Del;
    else
        throw CLI::ValidationError("op", "must be 'add' or 'del'");
    CryptoProvider crypto = CryptoProvider::with_system_rng();
    std::string state = effective_state(opt.state_path);
    if (opt.mode == "wire") {
        auto [host, port] = wire::split_endpoint(opt.addr);
        wire::Client client(scheme, host, port, crypto, state);
        client.update(keyword, ind, op);
        std::cout << "ok\n";
        return 0;
    }
    wire::ClientState s = load_or_fresh_state(state, scheme, crypto);
    EdbStore store = !opt.store_path.empty() && std::filesystem::exists(opt.store_path)
                         ? EdbStore::load(opt.store_path, &crypto)
                         : EdbStore(scheme, &crypto);
    if (store.scheme() != scheme) throw FileFormatError("store file belongs to the other scheme");
    if (scheme == Scheme::Fast) {
        FastClient client(s.key, crypto);
        for (const auto& [kw, ks] : s.sigma) client.restore_entry(kw, ks);
        FastServer server(store, crypto);
        server.apply(client.update(keyword, ind, op));
        s.sigma = client.sigma();
    } else {
        IoClient client(s.key, crypto);
        for (const auto& [kw, ks] : s.sigma) client.restore_entry(kw, ks);
        IoServer server(store, crypto);
        server.apply(client.update(keyword, ind, op));
        s.sigma = client.sigma();
    }
    if (!opt.store_path.empty()) store.persist(opt.store_path);
    save_state_if(state, s);
    std::cout << "ok\n";
    return 0;
}

int cmd_search(const CommonOpts& opt, const std::string& keyword) {
    Scheme scheme = parse_scheme(opt.scheme_name);
    CryptoProvider crypto = CryptoProvider::with_system_rng();
    std::string state = effective_state(opt.state_path);
    if (opt.mode == "wire") {
        auto [host, port] = wire::split_endpoint(opt.addr);
        wire::Client client(scheme, host, port, crypto, state);
        print_ids(client.search(keyword));
        return 0;
    }
    wire::ClientState s = load_or_fresh_state(state, scheme, crypto);
    EdbStore store = !opt.store_path.empty() && std::filesystem::exists(opt.store_path)
                         ? EdbStore::load(opt.store_path, &crypto)
                         : EdbStore(scheme, &crypto);
    if (store.scheme() != scheme) throw FileFormatError("store file belongs to the other scheme");
    std::set<DocId> ids;
    if (scheme == Scheme::Fast) {
        FastClient client(s.key, crypto);
        for (const auto& [kw, ks] : s.sigma) client.restore_entry(kw, ks);
        FastServer server(store, crypto);
        if (auto token = client.search_token(keyword)) ids = server.search(*token).ids;
        s.sigma = client.sigma();
    } else {
        IoClient client(s.key, crypto);
        for (const auto& [kw, ks] : s.sigma) client.restore_entry(kw, ks);
        IoServer server(store, crypto);
        if (auto token = client.search_token(keyword)) ids = server.search(*token).ids;
        s.sigma = client.sigma();
    }
    if (!opt.store_path.empty()) store.persist(opt.store_path);  // FASTIO search mutates
    save_state_if(state, s);
    print_ids({ids.begin(), ids.end()});
    return 0;
}

struct TraceOpts {
    uint64_t len = 1000;
    std::vector<double> alphas;
    uint32_t kw_universe = 10;
    uint64_t id_universe = 50;
    double del_frac = 0.3;
    uint64_t seed = 1;
};

int cmd_trace_gen(const TraceOpts& t, const std::string& out_path) {
    double alpha = t.alphas.empty() ? 0.01 : t.alphas.front();
    Trace trace = gen_trace({t.len, alpha, t.kw_universe, t.id_universe, t.del_frac, t.seed});
    if (out_path.empty()) {
        write_trace(trace, std::cout);
        return 0;
    }
    std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + out_path);
    write_trace(trace, out);
    std::cout << "trace written: " << out_path << " (" << trace.queries.size() << " queries)\n";
    return 0;
}

std::string alpha_suffix_path(const std::string& base, double alpha) {
    char tag[32];
    std::snprintf(tag, sizeof(tag), ".alpha%g", alpha);
    auto dot = base.rfind('.');
    if (dot == std::string::npos || dot == 0) return base + tag;
    return base.substr(0, dot) + tag + base.substr(dot);
}

int cmd_bench(const CommonOpts& opt, const TraceOpts& t, const std::string& format,
              const std::string& out_path, std::optional<uint64_t> crypto_seed,
              const std::string& trace_path) {
    Scheme scheme = parse_scheme(opt.scheme_name);
    RunMode mode = opt.mode == "wire" ? RunMode::Wire : RunMode::Local;
    int rc = 0;
    auto one_run = [&](const Trace& trace, const std::string& path) {
        RunResult res = run_trace(scheme, trace, {mode, crypto_seed, {}});
        if (path.empty()) {
            write_report(res, trace.spec.length, format, std::cout);
        } else {
            std::ofstream out(path, std::ios::binary | std::ios::trunc);
            if (!out) throw std::runtime_error("cannot open " + path);
            write_report(res, trace.spec.length, format, out);
        }
        std::cerr << "bench scheme=" << scheme_name(scheme) << " alpha=" << trace.spec.alpha
                  << " queries=" << res.rows.size() << " correct=" << (res.correct ? "yes" : "NO");
        if (!res.correct) {
            std::cerr << " first_mismatch=" << res.first_mismatch;
            rc = 1;
        }
        std::cerr << "\n";
    };
    if (!trace_path.empty()) {
        std::ifstream in(trace_path);
        if (!in) throw std::runtime_error("cannot open " + trace_path);
        one_run(read_trace(in), out_path);
        return rc;
    }
    std::vector<double> alphas = t.alphas;
    if (alphas.empty()) alphas = {1e-2, 1e-3, 1e-4};  // default sweep
    for (double alpha : alphas) {
        Trace trace =
            gen_trace({t.len, alpha, t.kw_universe, t.id_universe, t.del_frac, t.seed});
        std::string path = out_path;
        if (!path.empty() && alphas.size() > 1) path = alpha_suffix_path(path, alpha);
        one_run(trace, path);
    }
    return rc;
}

int cmd_audit(const CommonOpts& opt, const TraceOpts& t, const std::string& out_path) {
    Scheme scheme = parse_scheme(opt.scheme_name);
    double alpha = t.alphas.empty() ? 0.25 : t.alphas.front();
    Trace trace = gen_trace({t.len, alpha, t.kw_universe, t.id_universe, t.del_frac, t.seed});
    CryptoProvider crypto = CryptoProvider::with_seed(t.seed);
    AuditReport report = audit_trace(scheme, trace, crypto);
    std::string text = report.to_csv();
    if (out_path.empty()) {
        std::cout << text;
    } else {
        std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + out_path);
        out << text;
    }
    std::cout << (report.pass() ? "PASS" : "FAIL") << " audit scheme=" << scheme_name(scheme)
              << " len=" << t.len << " seed=" << t.seed << "\n";
    return report.pass() ? 0 : 1;
}

int cmd_persist_check(const CommonOpts& opt, const TraceOpts& t, const std::string& dir) {
    Scheme scheme = parse_scheme(opt.scheme_name);
    std::filesystem::path base =
        dir.empty() ? std::filesystem::temp_directory_path() : std::filesystem::path(dir);
    std::filesystem::create_directories(base);
    auto store_path = base / "persist_check.edb";
    auto state_path = base / "persist_check.state";

    double alpha = t.alphas.empty() ? 0.1 : t.alphas.front();
    Trace trace = gen_trace({t.len, alpha, t.kw_universe, t.id_universe, t.del_frac, t.seed});
    CryptoProvider crypto = CryptoProvider::with_seed(t.seed);
    EdbStore store(scheme, &crypto);
    wire::ClientState state;
    state.scheme = scheme;
    state.key = crypto.random_block();
    PlaintextOracle oracle;

    auto replay = [&](auto& client, auto& server, size_t from, size_t to) -> bool {
        for (size_t i = from; i < to; ++i) {
            const Query& q = trace.queries[i];
            std::string kw = keyword_name(q.kw);
            if (q.kind == Query::Kind::Update) {
                server.apply(client.update(kw, q.ind, q.op));
                oracle.update(kw, q.ind, q.op);
            } else {
                std::set<DocId> got;
                if (auto token = client.search_token(kw)) got = server.search(*token).ids;
                if (got != oracle.search(kw)) return false;
            }
        }
        return true;
    };

    bool ok = true;
    size_t half = trace.queries.size() / 2;
    Bytes store_bytes, state_bytes;
    if (scheme == Scheme::Fast) {
        FastClient client(state.key, crypto);
        FastServer server(store, crypto);
        ok = replay(client, server, 0, half);
        state.sigma = client.sigma();
    } else {
        IoClient client(state.key, crypto);
        IoServer server(store, crypto);
        ok = replay(client, server, 0, half);
        state.sigma = client.sigma();
    }
    store.persist(store_path);
    wire::save_client_state(state_path, state);
    store_bytes = store.serialize();
    state_bytes = wire::serialize_client_state(state);

    EdbStore restored = EdbStore::load(store_path, &crypto);
    wire::ClientState restored_state = wire::load_client_state(state_path);
    bool store_exact = restored.serialize() == store_bytes;
    bool state_exact = wire::serialize_client_state(restored_state) == state_bytes;
    std::cout << (store_exact ? "PASS" : "FAIL") << " store round trip (" << store_bytes.size()
              << " bytes, " << restored.size(scheme == Scheme::Fast ? "T" : "T_e")
              << " index entries)\n";
    std::cout << (state_exact ? "PASS" : "FAIL") << " client state round trip ("
              << state_bytes.size() << " bytes, " << restored_state.sigma.size()
              << " keywords)\n";

    bool resumed = true;
    if (scheme == Scheme::Fast) {
        FastClient client(restored_state.key, crypto);
        for (const auto& [kw, ks] : restored_state.sigma) client.restore_entry(kw, ks);
        FastServer server(restored, crypto);
        resumed = replay(client, server, half, trace.queries.size());
    } else {
        IoClient client(restored_state.key, crypto);
        for (const auto& [kw, ks] : restored_state.sigma) client.restore_entry(kw, ks);
        IoServer server(restored, crypto);
        resumed = replay(client, server, half, trace.queries.size());
    }
    std::cout << (resumed ? "PASS" : "FAIL") << " resumed replay stays oracle-correct\n";
    ok = ok && store_exact && state_exact && resumed;
    std::cout << (ok ? "PASS" : "FAIL") << " persist-check scheme=" << scheme_name(scheme)
              << "\n";
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fsse: forward-private encrypted keyword search"};
    app.require_subcommand(1);

    CommonOpts opt;
    TraceOpts t;
    std::string format = "csv";
    std::string out_path;
    std::string dir;
    std::string trace_path;
    std::string keyword;
    std::string op_str;
    DocId ind = 0;
    std::optional<uint64_t> crypto_seed;

    auto add_common = [&](CLI::App* cmd, bool with_mode) {
        cmd->add_option("--scheme", opt.scheme_name, "fast | fastio")
            ->check(CLI::IsMember({"fast", "fastio"}));
        if (with_mode)
            cmd->add_option("--mode", opt.mode, "local | wire")
                ->check(CLI::IsMember({"local", "wire"}));
    };
    auto add_trace = [&](CLI::App* cmd) {
        cmd->add_option("--len", t.len, "trace length");
        cmd->add_option("--alpha", t.alphas, "search probability (repeatable for bench sweeps)");
        cmd->add_option("--kw-universe", t.kw_universe, "distinct keywords");
        cmd->add_option("--id-universe", t.id_universe, "distinct document ids per keyword");
        cmd->add_option("--del-frac", t.del_frac, "delete fraction among eligible updates");
        cmd->add_option("--seed", t.seed, "trace seed");
    };

    CLI::App* setup = app.add_subcommand("setup", "create a fresh store and/or client state");
    add_common(setup, false);
    setup->add_option("--store", opt.store_path, "store file to create");
    setup->add_option("--state", opt.state_path, "client state file to create");

    CLI::App* serve = app.add_subcommand("serve", "run the server until SIGINT/SIGTERM");
    add_common(serve, false);
    serve->add_option("--store", opt.store_path, "store file to load and persist");
    serve->add_option("--addr", opt.addr, "host:port to listen on");

    CLI::App* update = app.add_subcommand("update", "add or delete one keyword/id pair");
    add_common(update, true);
    update->add_option("keyword", keyword, "keyword")->required();
    update->add_option("id", ind, "document id")->required();
    update->add_option("op", op_str, "add | del")->required();
    update->add_option("--store", opt.store_path, "store file (local mode)");
    update->add_option("--state", opt.state_path, "client state file");
    update->add_option("--addr", opt.addr, "server endpoint (wire mode)");

    CLI::App* search = app.add_subcommand("search", "search one keyword");
    add_common(search, true);
    search->add_option("keyword", keyword, "keyword")->required();
    search->add_option("--store", opt.store_path, "store file (local mode)");
    search->add_option("--state", opt.state_path, "client state file");
    search->add_option("--addr", opt.addr, "server endpoint (wire mode)");

    CLI::App* trace_gen = app.add_subcommand("trace-gen", "generate a workload trace");
    add_trace(trace_gen);
    trace_gen->add_option("--out", out_path, "trace file (stdout when omitted)");

    CLI::App* bench = app.add_subcommand("bench", "replay traces and report metrics");
    add_common(bench, true);
    add_trace(bench);
    bench->add_option("--format", format, "csv | json")->check(CLI::IsMember({"csv", "json"}));
    bench->add_option("--out", out_path, "report path (stdout when omitted)");
    bench->add_option("--trace", trace_path, "replay this trace file instead of generating");
    bench->add_option("--crypto-seed", crypto_seed,
                      "deterministic scheme randomness (benchmarks only)");

    CLI::App* audit = app.add_subcommand("audit",
                                         "compare a real transcript against the simulator");
    add_common(audit, false);
    add_trace(audit);
    audit->add_option("--out", out_path, "report path (stdout when omitted)");

    CLI::App* persist_check =
        app.add_subcommand("persist-check", "store and state file round-trip check");
    add_common(persist_check, false);
    add_trace(persist_check);
    persist_check->add_option("--dir", dir, "directory for the checked files");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (setup->parsed()) return cmd_setup(opt);
        if (serve->parsed()) return cmd_serve(opt);
        if (update->parsed()) return cmd_update(opt, keyword, ind, op_str);
        if (search->parsed()) return cmd_search(opt, keyword);
        if (trace_gen->parsed()) return cmd_trace_gen(t, out_path);
        if (bench->parsed()) return cmd_bench(opt, t, format, out_path, crypto_seed, trace_path);
        if (audit->parsed()) return cmd_audit(opt, t, out_path);
        if (persist_check->parsed()) return cmd_persist_check(opt, t, dir);
    } catch (const CLI::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
