#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <sys/wait.h>
#include <unistd.h>
#include <vector>

// End-to-end runs of the installed command-line driver. FPBRW_CLI_PATH and
// FPBRW_CONFIG_DIR come from the build system.

namespace fs = std::filesystem;

namespace {

struct CliResult {
    int exit_code = -1;
    std::string output;
};

CliResult run_cli(const std::string& args) {
    std::string cmd = std::string(FPBRW_CLI_PATH) + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    CliResult res;
    char buf[4096];
    while (std::size_t got = std::fread(buf, 1, sizeof buf, pipe)) res.output.append(buf, got);
    int status = pclose(pipe);
    res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return res;
}

std::string config_path(const std::string& name) {
    return (fs::path(FPBRW_CONFIG_DIR) / name).string();
}

struct TempDir {
    fs::path dir;
    explicit TempDir(const std::string& tag) {
        dir = fs::temp_directory_path() /
              ("fpbrw_test_" + tag + "_" + std::to_string(::getpid()));
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(dir, ec);
    }
    std::string str() const { return dir.string(); }
    std::string sub(const std::string& name) const { return (dir / name).string(); }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void spit(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    REQUIRE(out.good());
    out << text;
}

std::map<std::string, std::string> dir_bytes(const fs::path& dir) {
    std::map<std::string, std::string> m;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file()) m[e.path().filename().string()] = slurp(e.path());
    return m;
}

// Same file set, same bytes, manifest.json exempt (it records wall time).
void check_same_results(const fs::path& d1, const fs::path& d2) {
    auto a = dir_bytes(d1);
    auto b = dir_bytes(d2);
    REQUIRE(a.size() == b.size());
    REQUIRE(a.count("manifest.json") == 1);
    for (const auto& [name, bytes] : a) {
        REQUIRE(b.count(name) == 1);
        if (name == "manifest.json") continue;
        CHECK_MESSAGE(bytes == b.at(name), name, " differs between runs");
    }
}

} // namespace

TEST_CASE("cli: validate accepts the reference config and prints its digest") {
    auto res = run_cli("validate --config " + config_path("srw_z2_cubed.json"));
    CHECK(res.exit_code == 0);
    auto pos = res.output.find("ok: validate experiment, digest ");
    REQUIRE(pos != std::string::npos);
    std::string digest = res.output.substr(pos + 32, 16);
    CHECK(digest.size() == 16);
    for (char c : digest) CHECK(((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f')));
}

TEST_CASE("cli: validate names the standing assumptions it rejects") {
    TempDir td("badcfg");

    // Offspring mass at zero children.
    spit(td.sub("a2.json"), R"({
      "schema": "1", "experiment": "speed-experiment", "master_seed": 1,
      "group": {"factors": [{"cyclic": 2}, {"cyclic": 2}, {"cyclic": 2}]},
      "step": {"type": "srw"},
      "offspring": {"pmf": {"0": 0.2, "1": 0.3, "2": 0.5}}
    })");
    auto res = run_cli("validate --config " + td.sub("a2.json"));
    CHECK(res.exit_code == 1);
    CHECK(res.output.find("violation:") != std::string::npos);
    CHECK(res.output.find("A2") != std::string::npos);

    // Critical mean offspring.
    spit(td.sub("a1.json"), R"({
      "schema": "1", "experiment": "speed-experiment", "master_seed": 1,
      "group": {"factors": [{"cyclic": 2}, {"cyclic": 2}, {"cyclic": 2}]},
      "step": {"type": "srw"},
      "offspring": {"pmf": {"1": 1.0}}
    })");
    res = run_cli("validate --config " + td.sub("a1.json"));
    CHECK(res.exit_code == 1);
    CHECK(res.output.find("A1") != std::string::npos);

    // A factor weight of zero in a custom step law.
    spit(td.sub("a3.json"), R"({
      "schema": "1", "experiment": "rw-exact", "master_seed": 1,
      "group": {"factors": [{"cyclic": 2}, {"cyclic": 3}]},
      "step": {"type": "custom", "alphas": [0.0, 1.0],
               "factor_laws": [[0.0, 1.0], [0.0, 0.5, 0.5]]}
    })");
    res = run_cli("validate --config " + td.sub("a3.json"));
    CHECK(res.exit_code == 1);
    CHECK(res.output.find("A3") != std::string::npos);

    // Unparseable JSON reports a position instead of crashing.
    spit(td.sub("broken.json"), "{ \"experiment\": ");
    res = run_cli("validate --config " + td.sub("broken.json"));
    CHECK(res.exit_code == 1);
    CHECK(res.output.find("parse error") != std::string::npos);
}

TEST_CASE("cli: run output is reproducible replica for replica") {
    TempDir td("repro");
    auto cfg = config_path("exit_rate_small.json");

    auto r1 = run_cli("run --config " + cfg + " --out " + td.sub("one"));
    REQUIRE(r1.exit_code == 0);
    CHECK(r1.output.find("wrote exit_rate.csv") != std::string::npos);
    CHECK(r1.output.find("done") != std::string::npos);

    auto r2 = run_cli("run --config " + cfg + " --out " + td.sub("two"));
    REQUIRE(r2.exit_code == 0);
    check_same_results(td.sub("one"), td.sub("two"));

    // Worker count must not leak into any result file.
    auto r8 = run_cli("run --config " + cfg + " --out " + td.sub("eight") + " --threads 8");
    REQUIRE(r8.exit_code == 0);
    check_same_results(td.sub("one"), td.sub("eight"));

    // A different master seed must change the measurements.
    auto r9 = run_cli("run --config " + cfg + " --out " + td.sub("seeded") + " --seed 999");
    REQUIRE(r9.exit_code == 0);
    CHECK(slurp(td.dir / "one" / "exit_rate.csv") != slurp(td.dir / "seeded" / "exit_rate.csv"));
}

TEST_CASE("cli: report renders deterministically and rejects an empty directory") {
    TempDir td("report");
    auto cfg = config_path("rw_exact_z2_cubed.json");
    auto run = run_cli("run --config " + cfg + " --out " + td.sub("res"));
    REQUIRE(run.exit_code == 0);

    auto rep1 = run_cli("report --out " + td.sub("res"));
    CHECK(rep1.exit_code == 0);
    CHECK(rep1.output.find("# Experiment report") != std::string::npos);
    CHECK(rep1.output.find("## Exact distribution") != std::string::npos);
    REQUIRE(fs::exists(td.dir / "res" / "report.md"));
    auto bytes1 = slurp(td.dir / "res" / "report.md");

    auto rep2 = run_cli("report --out " + td.sub("res"));
    CHECK(rep2.exit_code == 0);
    CHECK(slurp(td.dir / "res" / "report.md") == bytes1);
    CHECK(rep2.output == rep1.output);

    fs::create_directories(td.dir / "empty");
    auto bad = run_cli("report --out " + td.sub("empty"));
    CHECK(bad.exit_code == 3);
    CHECK(bad.output.find("no manifest.json") != std::string::npos);
}

TEST_CASE("cli: a tiny cap override turns a clean run into a partial one") {
    TempDir td("cap");
    auto cfg = config_path("rw_exact_z2_cubed.json");

    auto ok = run_cli("run --config " + cfg + " --out " + td.sub("full"));
    REQUIRE(ok.exit_code == 0);

    auto part = run_cli("run --config " + cfg + " --out " + td.sub("capped") +
                        " --cap-override 10");
    CHECK(part.exit_code == 2);
    CHECK(part.output.find("cap hit:") != std::string::npos);
    // The manifest still lands, recording the partial status.
    REQUIRE(fs::exists(td.dir / "capped" / "manifest.json"));
    auto manifest = slurp(td.dir / "capped" / "manifest.json");
    CHECK(manifest.find("caps_hit") != std::string::npos);
}
