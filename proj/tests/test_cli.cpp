#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

using nlohmann::json;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string out;
};

RunResult run_cli(const std::string& args) {
    const std::string cmd = std::string(AOI_CLI_PATH) + " " + args + " 2>/dev/null";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    RunResult r;
    std::array<char, 4096> buf{};
    std::size_t n = 0;
    while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
    const int status = pclose(pipe);
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

// Two-source non-preemptive chain written out in the documented model format.
const char* kNpTwoSourceModel = R"({
  "num_states": 3,
  "age_dim": 3,
  "transitions": [
    {"id": 1, "source": 0, "target": 1, "rate": 0.5, "reset": [null, 1, 2]},
    {"id": 2, "source": 1, "target": 0, "rate": 1.0, "reset": [null, 0, 2]},
    {"id": 3, "source": 0, "target": 2, "rate": 0.5, "reset": [null, 1, 2]},
    {"id": 4, "source": 2, "target": 0, "rate": 1.0, "reset": [null, 1, 0]}
  ]
})";

const char* kDisconnectedModel = R"({
  "num_states": 4,
  "age_dim": 1,
  "transitions": [
    {"id": 1, "source": 0, "target": 1, "rate": 1.0, "reset": [0]},
    {"id": 2, "source": 1, "target": 0, "rate": 1.0, "reset": [0]},
    {"id": 3, "source": 2, "target": 3, "rate": 1.0, "reset": [0]},
    {"id": 4, "source": 3, "target": 2, "rate": 1.0, "reset": [0]}
  ]
})";

std::string write_temp(const char* name, const char* content) {
    const std::string path = std::string("/tmp/") + name;
    std::ofstream out(path);
    out << content;
    return path;
}

}  // namespace

TEST_CASE("analyze reports the worked correlation") {
    const auto r = run_cli("analyze --discipline ps --lambdas 0.5,0.5 --mu 1 --corr 1,2");
    REQUIRE(r.exit_code == 0);
    const json report = json::parse(r.out);
    CHECK(std::abs(report["correlation"].get<double>() - (-1.0 / 6.0)) <= 1e-4);
    CHECK(report["mean"]["1"].get<double>() == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("analyze normalizes s-bar and reports the unit MGF") {
    const auto r = run_cli("analyze --discipline np --lambdas 0.5,0.5 --mu 1 --s-bar 0,0");
    REQUIRE(r.exit_code == 0);
    const json report = json::parse(r.out);
    CHECK(report["mgf"].get<double>() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(report["region"] == "ok");
}

TEST_CASE("missing required flags exit with the config code") {
    const auto r = run_cli("analyze --discipline np --lambdas 0.5,0.5");
    CHECK(r.exit_code == 2);
}

TEST_CASE("out-of-region s exits with code 3") {
    const auto r = run_cli("analyze --discipline ps --lambdas 0.5,0.5 --mu 1 --K 1 --s 5.0");
    CHECK(r.exit_code == 3);
}

TEST_CASE("solve matches analyze on the bundled model file") {
    const std::string path = write_temp("aoi_cli_np.json", kNpTwoSourceModel);
    const auto solved = run_cli("solve " + path + " --K 1 --m 1");
    REQUIRE(solved.exit_code == 0);
    const json report = json::parse(solved.out);
    CHECK(report["moment"].get<double>() == doctest::Approx(4.5).epsilon(1e-9));
    CHECK(report["stationary_distribution"][0].get<double>() ==
          doctest::Approx(0.5).epsilon(1e-12));
    CHECK(report["max_eig_real"].get<double>() < 0.0);
    CHECK(report["stable"].get<bool>());

    const auto analyzed = run_cli("analyze --discipline np --lambdas 0.5,0.5 --mu 1");
    REQUIRE(analyzed.exit_code == 0);
    const json ref = json::parse(analyzed.out);
    CHECK(report["moment"].get<double>() ==
          doctest::Approx(ref["mean"]["1"].get<double>()).epsilon(1e-9));
    std::remove(path.c_str());
}

TEST_CASE("solve rejects duplicate K and reports non-ergodic chains") {
    const std::string path = write_temp("aoi_cli_np2.json", kNpTwoSourceModel);
    CHECK(run_cli("solve " + path + " --K 1,1 --m 1,1").exit_code == 2);
    std::remove(path.c_str());

    const std::string bad = write_temp("aoi_cli_disconnected.json", kDisconnectedModel);
    CHECK(run_cli("solve " + bad + " --K 0 --m 1").exit_code == 4);
    std::remove(bad.c_str());
}

TEST_CASE("simulate is byte-deterministic under a fixed seed") {
    const std::string flags =
        "simulate --discipline ps --lambdas 0.5,0.5 --mu 1 --events 20000 --reps 4 --seed 42";
    const auto a = run_cli(flags);
    const auto b = run_cli(flags);
    REQUIRE(a.exit_code == 0);
    CHECK(a.out == b.out);
    const json report = json::parse(a.out);
    CHECK(report["agreement"] == "pass");
    CHECK(report["estimates"]["mean[1]"].contains("stderr"));
}

TEST_CASE("simulate rejects out-of-region s before running") {
    const auto r = run_cli(
        "simulate --discipline ps --lambdas 0.5,0.5 --mu 1 --events 1000 --sources 1 --s 9.9");
    CHECK(r.exit_code == 3);
}

TEST_CASE("sweep emits the documented CSV and brackets the threshold") {
    const auto r = run_cli("sweep --var rho --min 0.5 --max 4.5 --steps 41 --mu 1");
    REQUIRE(r.exit_code == 0);
    std::istringstream lines(r.out);
    std::string header;
    std::getline(lines, header);
    CHECK(header == "x,corr_np,corr_ps,corr_sa");

    std::vector<double> xs, np, ps, sa;
    std::string line;
    while (std::getline(lines, line)) {
        double x, a, b, c;
        REQUIRE(std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf", &x, &a, &b, &c) == 4);
        xs.push_back(x);
        np.push_back(a);
        ps.push_back(b);
        sa.push_back(c);
    }
    REQUIRE(xs.size() == 41);
    // preemptive columns stay negative across the grid
    for (std::size_t i = 0; i < xs.size(); ++i) {
        CHECK(ps[i] < 0.0);
        CHECK(sa[i] < 0.0);
    }
    // the non-preemptive column changes sign inside the cell holding 2.2143
    bool bracketed = false;
    for (std::size_t i = 0; i + 1 < xs.size(); ++i)
        if (np[i] < 0.0 && np[i + 1] >= 0.0) {
            bracketed = true;
            CHECK(xs[i] <= 2.2143);
            CHECK(xs[i + 1] >= 2.2143);
        }
    CHECK(bracketed);

    // CSV re-parses to the printed values (12 significant digits)
    char round_trip[64];
    std::snprintf(round_trip, sizeof(round_trip), "%.12g", np[1]);
    CHECK(r.out.find(round_trip) != std::string::npos);
}

TEST_CASE("sweep with a third-source share keeps source-aware above source-agnostic") {
    const auto r = run_cli(
        "sweep --var lambda1 --min 0.2 --max 3.0 --steps 15 --mu 1 --lambda2 2 "
        "--disciplines ps,sa");
    REQUIRE(r.exit_code == 0);
    std::istringstream lines(r.out);
    std::string header;
    std::getline(lines, header);
    CHECK(header == "x,corr_ps,corr_sa");
    std::string line;
    while (std::getline(lines, line)) {
        double x, ps, sa;
        REQUIRE(std::sscanf(line.c_str(), "%lf,%lf,%lf", &x, &ps, &sa) == 3);
        CHECK(std::abs(sa) <= std::abs(ps) + 1e-12);
    }
}

TEST_CASE("malformed sweep grids exit with the config code") {
    CHECK(run_cli("sweep --var rho --min 2 --max 1 --steps 5").exit_code == 2);
    CHECK(run_cli("sweep --var rho_minus --min 0.1 --max 0.5 --steps 3").exit_code == 2);
}

TEST_CASE("analyze and solve agree on every emitted quantity") {
    const std::vector<std::string> disciplines{"np", "ps", "sa"};
    for (const auto& d : disciplines) {
        const std::string flags = "--discipline " + d + " --lambdas 0.4,0.9 --mu 1.1";
        const auto emitted = run_cli("model " + flags + " --output /tmp/aoi_agree.json");
        REQUIRE(emitted.exit_code == 0);

        const auto analyzed = run_cli("analyze " + flags + " --K 1,2 --s -0.2,-0.1 --corr 1,2");
        REQUIRE(analyzed.exit_code == 0);
        const json a = json::parse(analyzed.out);

        const auto solved_mgf = run_cli("solve /tmp/aoi_agree.json --K 1,2 --s -0.2,-0.1");
        REQUIRE(solved_mgf.exit_code == 0);
        const json sm = json::parse(solved_mgf.out);
        CHECK(std::abs(sm["mgf"].get<double>() - a["mgf"].get<double>()) <=
              1e-9 * std::abs(a["mgf"].get<double>()));

        const auto solved_mean = run_cli("solve /tmp/aoi_agree.json --K 2 --m 1");
        REQUIRE(solved_mean.exit_code == 0);
        const json sv = json::parse(solved_mean.out);
        CHECK(std::abs(sv["moment"].get<double>() - a["mean"]["2"].get<double>()) <=
              1e-9 * a["mean"]["2"].get<double>());
    }
    std::remove("/tmp/aoi_agree.json");
}

TEST_CASE("options load from a config file") {
    {
        std::ofstream cfg("/tmp/aoi_cli_cfg.ini");
        cfg << "[analyze]\n"
               "discipline=ps\n"
               "lambdas=0.5,0.5\n"
               "mu=1\n"
               "corr=1,2\n";
    }
    const auto r = run_cli("--config /tmp/aoi_cli_cfg.ini analyze");
    REQUIRE(r.exit_code == 0);
    const json report = json::parse(r.out);
    CHECK(std::abs(report["correlation"].get<double>() - (-1.0 / 6.0)) <= 1e-6);
    std::remove("/tmp/aoi_cli_cfg.ini");
}

TEST_CASE("model files emitted by the CLI feed back into solve") {
    const auto emitted =
        run_cli("model --discipline sa --lambdas 0.4,0.8 --mu 1.3 --output /tmp/aoi_cli_sa.json");
    REQUIRE(emitted.exit_code == 0);
    const auto solved = run_cli("solve /tmp/aoi_cli_sa.json --K 1 --m 1");
    REQUIRE(solved.exit_code == 0);
    const json report = json::parse(solved.out);
    const auto analyzed = run_cli("analyze --discipline sa --lambdas 0.4,0.8 --mu 1.3");
    const json ref = json::parse(analyzed.out);
    CHECK(report["moment"].get<double>() ==
          doctest::Approx(ref["mean"]["1"].get<double>()).epsilon(1e-9));
    std::remove("/tmp/aoi_cli_sa.json");
}
