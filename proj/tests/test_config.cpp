#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "expfun/config.hpp"
#include "expfun/experiments.hpp"
#include "expfun/report.hpp"

using namespace expfun;

namespace {

std::string diag_text(const ConfigResult& r) {
    std::string out;
    for (const auto& d : r.diagnostics)
        out += std::to_string(d.line) + " " + d.field + " " + d.message + "\n";
    return out;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::filesystem::path test_dir(const char* name) {
    auto p = std::filesystem::temp_directory_path() / "expfun_tests" / name;
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace

TEST_CASE("config round-trip is canonical") {
    const char* texts[] = {
        "kind = asymptotics\n"
        "seed = 42\n"
        "sim.step_h = 0.01\n"
        "sim.n_paths = 1000\n"
        "alpha = 1\n"
        "beta = 1\n"
        "tilt = 0.5\n"
        "triplet.drift_a = 1\n"
        "triplet.sigma = 1.4142135623730951\n"
        "triplet.jumps = two_sided_exp\n"
        "triplet.jump.rate = 2\n"
        "triplet.jump.p_up = 0.4\n"
        "triplet.jump.eta_plus = 3\n"
        "triplet.jump.eta_minus = 2.5\n"
        "f.family = power_tail\n"
        "f.K = 1\n"
        "f.beta = 1\n"
        "f.alpha = 1\n"
        "grid.t = 10, 20, 40\n"
        "check.rate_tol = 0.05\n",

        "kind = cbre\n"
        "seed = 9\n"
        "sim.step_h = 0.02\n"
        "sim.n_paths = 50\n"
        "cbre.x0 = 1.5\n"
        "cbre.c = 0.8\n"
        "cbre.alpha = 0.5\n"
        "cbre.tilted = true\n"
        "env.beta_drift = 0.3\n"
        "env.sigma = 1.2\n"
        "env.jumps = gaussian\n"
        "env.jump.rate = 0.7\n"
        "env.jump.mean = 0.1\n"
        "env.jump.stddev = 0.4\n"
        "grid.t = 1, 2, 4\n",

        "kind = acceptance\n"
        "seed = 1\n"
        "acceptance.criteria = 1, 2, 11\n",
    };
    for (const char* text : texts) {
        auto r1 = validate_config(text);
        INFO(diag_text(r1));
        REQUIRE(r1.ok());
        const std::string s1 = serialize(r1.config);
        auto r2 = validate_config(s1);
        INFO(diag_text(r2));
        REQUIRE(r2.ok());
        CHECK(serialize(r2.config) == s1);
    }
}

TEST_CASE("validation collects every violation, not just the first") {
    // Missing seed, beta outside the exponent domain, and a bad level, all in
    // one file: all three must be reported.
    auto r = validate_config(
        "kind = asymptotics\n"
        "sim.step_h = 0.01\n"
        "alpha = 1\n"
        "beta = 5\n"
        "x = -1\n"
        "triplet.drift_a = 0\n"
        "triplet.sigma = 1\n"
        "triplet.jumps = two_sided_exp\n"
        "triplet.jump.rate = 2\n"
        "triplet.jump.p_up = 0.4\n"
        "triplet.jump.eta_plus = 3\n"
        "triplet.jump.eta_minus = 2.5\n"
        "f.family = power_tail\n"
        "grid.t = 1, 2\n");
    CHECK(!r.ok());
    const std::string d = diag_text(r);
    INFO(d);
    CHECK(d.find("seed required") != std::string::npos);
    CHECK(d.find("beta") != std::string::npos);
    CHECK(d.find("3") != std::string::npos);  // domain endpoint cited
    CHECK(d.find(" x ") != std::string::npos);
    CHECK(r.diagnostics.size() >= 3);
}

TEST_CASE("invalid triplet fields are named") {
    auto r = validate_config(
        "kind = exponent\n"
        "seed = 1\n"
        "triplet.drift_a = 0\n"
        "triplet.sigma = -1\n"
        "grid.lambda = 0.5, 1\n");
    CHECK(!r.ok());
    CHECK(diag_text(r).find("sigma") != std::string::npos);
}

TEST_CASE("parser diagnostics carry line numbers and fields") {
    SECTION("unknown key") {
        auto r = validate_config("kind = exponent\nseed = 1\nbogus.key = 3\n"
                                 "triplet.sigma = 1\ngrid.lambda = 1\n");
        REQUIRE(!r.ok());
        bool found = false;
        for (const auto& d : r.diagnostics)
            if (d.field == "bogus.key" && d.line == 3) found = true;
        CHECK(found);
    }
    SECTION("duplicate key") {
        auto r = validate_config("kind = exponent\nseed = 1\nseed = 2\n"
                                 "triplet.sigma = 1\ngrid.lambda = 1\n");
        REQUIRE(!r.ok());
        CHECK(diag_text(r).find("duplicate") != std::string::npos);
    }
    SECTION("malformed number") {
        auto r = validate_config("kind = exponent\nseed = 1\nsim.step_h = abc\n"
                                 "triplet.sigma = 1\ngrid.lambda = 1\n");
        REQUIRE(!r.ok());
        CHECK(diag_text(r).find("sim.step_h") != std::string::npos);
    }
    SECTION("non-increasing grid") {
        auto r = validate_config("kind = exponent\nseed = 1\n"
                                 "triplet.sigma = 1\ngrid.lambda = 5, 3\n");
        REQUIRE(!r.ok());
        CHECK(diag_text(r).find("grid.lambda") != std::string::npos);
    }
    SECTION("criterion id out of range") {
        auto r = validate_config("kind = acceptance\nseed = 1\nacceptance.criteria = 13\n");
        REQUIRE(!r.ok());
        CHECK(diag_text(r).find("acceptance.criteria") != std::string::npos);
    }
    SECTION("per-kind requirements") {
        CHECK(!validate_config("kind = simulate\nseed = 1\ntriplet.sigma = 1\n").ok());
        CHECK(!validate_config("kind = asymptotics\nseed = 1\ntriplet.sigma = 1\n"
                               "grid.t = 1, 2\n").ok());  // no payoff
        CHECK(!validate_config("kind = cbre\nseed = 1\ngrid.t = 1, 2\n").ok());
        CHECK(!validate_config("kind = firstpassage\nseed = 1\ntriplet.sigma = 1\n").ok());
        CHECK(!validate_config("kind = asymptotics\nseed = 1\ntriplet.sigma = 1\n"
                               "coeff.kind = D9\nf.family = power_tail\n"
                               "grid.x = 1, 2\ncoeff.horizon_t = 4\n").ok());
    }
}

TEST_CASE("hashes and real formatting are stable") {
    // FNV-1a 64-bit reference vectors.
    CHECK(fnv1a64("") == 14695981039346656037ull);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
    CHECK(fnv1a64("foobar") == 0x85944171f73967e8ull);
    CHECK(hex64(14695981039346656037ull) == "cbf29ce484222325");
    CHECK(hex64(0) == "0000000000000000");

    for (double v : {0.1, 1.0 / 3.0, 1e-300, 12345.6789, -2.5e17, 3.14159265358979323846,
                     1.0, 0.0}) {
        const std::string s = detail::format_real(v);
        CHECK(std::strtod(s.c_str(), nullptr) == v);
    }
    CHECK(detail::format_real(1.0) == "1");
}

TEST_CASE("atomic_write replaces content and leaves no temp file") {
    const auto dir = test_dir("atomic");
    const auto path = dir / "out.txt";
    atomic_write(path.string(), "hello\n");
    CHECK(slurp(path) == "hello\n");
    atomic_write(path.string(), "replaced\n");
    CHECK(slurp(path) == "replaced\n");
    CHECK(!std::filesystem::exists(path.string() + ".tmp"));
}

TEST_CASE("exponent experiment: deterministic report and polynomial oracle") {
    const std::string text =
        "kind = exponent\n"
        "seed = 7\n"
        "triplet.drift_a = 1\n"
        "triplet.sigma = 1.4142135623730951\n"
        "grid.lambda = -1, 0.5, 1, 2\n";
    auto r = validate_config(text);
    REQUIRE(r.ok());
    const auto d1 = test_dir("exp1");
    const auto d2 = test_dir("exp2");
    CHECK(run_experiment(r.config, d1.string(), 0, true) == 0);
    CHECK(run_experiment(r.config, d2.string(), 0, true) == 0);
    const std::string rep1 = slurp(d1 / "report.json");
    CHECK(rep1 == slurp(d2 / "report.json"));
    CHECK(rep1.find(hex64(fnv1a64(serialize(r.config)))) != std::string::npos);

    // Phi(lambda) = -lambda + lambda^2 vanishes at lambda = 1.
    std::istringstream csv(slurp(d1 / "exponent.csv"));
    std::string line;
    std::getline(csv, line);
    CHECK(line == "lambda,phi,dphi,ddphi");
    bool checked = false;
    while (std::getline(csv, line)) {
        if (line.rfind("1,", 0) == 0) {
            const auto c1 = line.find(',');
            const auto c2 = line.find(',', c1 + 1);
            CHECK(std::fabs(std::strtod(line.substr(c1 + 1, c2 - c1 - 1).c_str(), nullptr)) <=
                  1e-12);
            checked = true;
        }
    }
    CHECK(checked);
}

TEST_CASE("zero-environment survival CSV matches the closed form") {
    const std::string text =
        "kind = cbre\n"
        "seed = 3\n"
        "sim.step_h = 0.01\n"
        "sim.n_paths = 128\n"
        "cbre.x0 = 1.5\n"
        "cbre.c = 0.8\n"
        "cbre.alpha = 0.5\n"
        "env.sigma = 0\n"
        "grid.t = 1, 2, 4\n";
    auto r = validate_config(text);
    INFO(diag_text(r));
    REQUIRE(r.ok());
    const auto dir = test_dir("cbre_zero");
    CHECK(run_experiment(r.config, dir.string(), 0, true) == 0);
    std::istringstream csv(slurp(dir / "survival.csv"));
    std::string line;
    std::getline(csv, line);  // header
    while (std::getline(csv, line)) {
        const auto c1 = line.find(',');
        const auto c2 = line.find(',', c1 + 1);
        const double t = std::strtod(line.substr(0, c1).c_str(), nullptr);
        const double p = std::strtod(line.substr(c1 + 1, c2 - c1 - 1).c_str(), nullptr);
        const double exact = 1.0 - std::exp(-1.5 * std::pow(0.8 * 0.5 * t, -2.0));
        CHECK(std::fabs(p - exact) <= 1e-6);
    }
}

TEST_CASE("exit statuses distinguish tolerance and sample-size breaches") {
    // An impossible tolerance on a first-passage fit: status 1.
    {
        auto r = validate_config(
            "kind = firstpassage\n"
            "seed = 11\n"
            "sim.step_h = 0.01\n"
            "sim.n_paths = 4000\n"
            "x = 1\n"
            "triplet.drift_a = -1\n"
            "triplet.sigma = 1.4142135623730951\n"
            "grid.t = 1, 2, 3, 4, 6, 8\n"
            "check.poly_tol = 1e-9\n");
        INFO(diag_text(r));
        REQUIRE(r.ok());
        const auto dir = test_dir("status1");
        CHECK(run_experiment(r.config, dir.string(), 0, true) == 1);
        CHECK(std::filesystem::exists(dir / "report.json"));
    }
    // An over-aggressive tilt at a tiny sample degenerates the weights:
    // status 3, and the report is still written.
    {
        auto r = validate_config(
            "kind = asymptotics\n"
            "seed = 12\n"
            "sim.step_h = 0.01\n"
            "sim.n_paths = 150\n"
            "alpha = 1\n"
            "tilt = 2\n"
            "triplet.drift_a = 1\n"
            "triplet.sigma = 1.4142135623730951\n"
            "f.family = power_tail\n"
            "grid.t = 4, 6\n");
        INFO(diag_text(r));
        REQUIRE(r.ok());
        const auto dir = test_dir("status3");
        CHECK(run_experiment(r.config, dir.string(), 0, true) == 3);
        CHECK(std::filesystem::exists(dir / "report.json"));
        CHECK(slurp(dir / "report.json").find("\"status\": 3") != std::string::npos);
    }
}
