// Drives the installed binary through popen; FSSE_CLI_PATH comes from the
// build system.

#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct CliResult {
    int exit_code;
    std::string output;
};

CliResult run_cli(const std::string& args) {
    std::string cmd = std::string(FSSE_CLI_PATH) + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::string out;
    char buf[4096];
    size_t n;
    while ((n = fread(buf, 1, sizeof(buf), pipe)) > 0) out.append(buf, n);
    int status = pclose(pipe);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct TempDir {
    fs::path path;
    TempDir() : path(fs::temp_directory_path() /
                     ("fsse_cli_" + std::to_string(::getpid()) + "_" +
                      std::to_string(rand()))) {
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("usage errors exit with 2") {
    CHECK(run_cli("").exit_code == 2);
    CHECK(run_cli("frobnicate").exit_code == 2);
    CHECK(run_cli("bench --no-such-flag").exit_code == 2);
    CHECK(run_cli("update onlykw --scheme fast").exit_code == 2);
    CHECK(run_cli("--help").exit_code == 0);
}

TEST_CASE("trace-gen is byte-deterministic") {
    TempDir dir;
    std::string args = "trace-gen --len 5000 --alpha 0.02 --kw-universe 8 --id-universe 40 "
                       "--del-frac 0.3 --seed 77 --out ";
    CHECK(run_cli(args + dir.file("a.trace")).exit_code == 0);
    CHECK(run_cli(args + dir.file("b.trace")).exit_code == 0);
    CHECK(slurp(dir.file("a.trace")) == slurp(dir.file("b.trace")));
    CHECK(run_cli("trace-gen --len 10 --alpha 2.0 --seed 1").exit_code == 1);
}

TEST_CASE("local setup, update, search round trip") {
    TempDir dir;
    std::string store = " --store " + dir.file("s.edb");
    std::string state = " --state " + dir.file("c.state");
    CHECK(run_cli("setup --scheme fastio" + store + state).exit_code == 0);
    CHECK(run_cli("update note 12 add --scheme fastio" + store + state).exit_code == 0);
    CHECK(run_cli("update note 4 add --scheme fastio" + store + state).exit_code == 0);
    CliResult hit = run_cli("search note --scheme fastio" + store + state);
    CHECK(hit.exit_code == 0);
    CHECK(hit.output == "4 12\n");
    CHECK(run_cli("update note 12 del --scheme fastio" + store + state).exit_code == 0);
    CliResult after = run_cli("search note --scheme fastio" + store + state);
    CHECK(after.output == "4\n");
    CliResult miss = run_cli("search absent --scheme fastio" + store + state);
    CHECK(miss.exit_code == 0);
    CHECK(miss.output == "no results\n");
}

TEST_CASE("FSSE_STATE overrides the state flag") {
    TempDir dir;
    std::string store = " --store " + dir.file("s.edb");
    std::string env = "FSSE_STATE=" + dir.file("env.state") + " " FSSE_CLI_PATH;
    auto run_env = [&](const std::string& args) {
        std::string cmd = env + " " + args + " 2>&1";
        FILE* pipe = popen(cmd.c_str(), "r");
        REQUIRE(pipe != nullptr);
        char buf[4096];
        while (fread(buf, 1, sizeof(buf), pipe) > 0) {}
        return WEXITSTATUS(pclose(pipe));
    };
    CHECK(run_env("update k 1 add --scheme fast" + store + " --state " +
                  dir.file("ignored.state")) == 0);
    CHECK(fs::exists(dir.file("env.state")));
    CHECK_FALSE(fs::exists(dir.file("ignored.state")));
}

TEST_CASE("bench emits one row per query") {
    TempDir dir;
    CliResult res = run_cli(
        "bench --scheme fastio --alpha 0.01 --len 3000 --seed 7 --crypto-seed 5 --format csv "
        "--out " + dir.file("rep.csv"));
    CHECK(res.exit_code == 0);
    std::ifstream in(dir.file("rep.csv"));
    std::string line;
    size_t rows = 0, comments = 0;
    std::getline(in, line);  // header
    CHECK(line.rfind("idx,kind,", 0) == 0);
    while (std::getline(in, line)) {
        if (line.rfind("#", 0) == 0)
            ++comments;
        else
            ++rows;
    }
    CHECK(rows == 3000);
    CHECK(comments >= 5);
}

TEST_CASE("bench replays an explicit trace file in wire mode") {
    TempDir dir;
    CHECK(run_cli("trace-gen --len 400 --alpha 0.1 --seed 12 --out " +
                  dir.file("t.trace")).exit_code == 0);
    CliResult res = run_cli("bench --scheme fast --mode wire --crypto-seed 3 --trace " +
                            dir.file("t.trace") + " --format json --out " + dir.file("rep.json"));
    CHECK(res.exit_code == 0);
    std::string rep = slurp(dir.file("rep.json"));
    CHECK(rep.find("\"correct\": true") != std::string::npos);
}

TEST_CASE("audit prints a PASS report") {
    CliResult res = run_cli("audit --scheme fast --len 200 --seed 3");
    CHECK(res.exit_code == 0);
    CHECK(res.output.find("structure,PASS") != std::string::npos);
    CHECK(res.output.find("PASS audit scheme=fast") != std::string::npos);
    CliResult io = run_cli("audit --scheme fastio --len 200 --seed 3");
    CHECK(io.exit_code == 0);
    CHECK(io.output.find("PASS audit scheme=fastio") != std::string::npos);
}

TEST_CASE("persist-check passes for both schemes") {
    TempDir dir;
    for (std::string scheme : {"fast", "fastio"}) {
        CliResult res = run_cli("persist-check --scheme " + scheme +
                                " --len 600 --seed 11 --dir " + dir.file(scheme));
        INFO(res.output);
        CHECK(res.exit_code == 0);
        CHECK(res.output.find("FAIL") == std::string::npos);
    }
}
