#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <string>

#include "mtd/io.hpp"
#include "mtd/rng.hpp"

using namespace mtd;

namespace {

struct TempDir {
    std::string path;
    TempDir() {
        char tmpl[] = "/tmp/mtd_io_XXXXXX";
        path = mkdtemp(tmpl);
    }
    std::string file(const char* name) const { return path + "/" + name; }
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("measurement container round-trips and has the documented layout") {
    TempDir tmp;
    Measurement y;
    y.L = 3;
    y.sigma = 1.5;
    y.samples.resize(4);
    y.samples << 1.0, -2.5, 0.0, 1e-17;
    const auto path = tmp.file("m.mtd");
    io::write_measurement(path, y);

    const std::string raw = slurp(path);
    REQUIRE(raw.size() == 4 + 4 + 8 + 8 + 8 + 4 * 8);
    CHECK(raw.substr(0, 4) == "MTDM");
    CHECK(static_cast<unsigned char>(raw[4]) == 1);  // version, little-endian u32
    CHECK(static_cast<unsigned char>(raw[8]) == 4);  // N
    CHECK(static_cast<unsigned char>(raw[16]) == 3); // L

    const Measurement back = io::read_measurement(path);
    CHECK(back.L == 3);
    CHECK(back.sigma == 1.5);
    CHECK((back.samples - y.samples).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("bad measurement files report the offending offset") {
    TempDir tmp;
    const auto path = tmp.file("bad.mtd");
    std::ofstream(path, std::ios::binary) << "MTDMxxxx";
    try {
        io::read_measurement(path);
        FAIL("expected a DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("byte offset") != std::string::npos);
        CHECK(std::string(e.what()).find(path) != std::string::npos);
    }
}

TEST_CASE("signal and support files round-trip losslessly") {
    TempDir tmp;
    const Signal x = default_signal();
    io::write_signal(tmp.file("x.txt"), x);
    const Signal back = io::read_signal(tmp.file("x.txt"));
    CHECK((back.values - x.values).cwiseAbs().maxCoeff() == 0.0);

    const auto sup = generate_support_rejection(1000, 10, 20, 0, 3);
    io::write_support(tmp.file("s.txt"), sup);
    const auto back_s = io::read_support(tmp.file("s.txt"), 1000, 10);
    CHECK(back_s.starts == sup.starts);
}

TEST_CASE("psf files round-trip and report parse errors with offsets") {
    TempDir tmp;
    const auto xi = default_bench_psf(10);
    io::write_psf(tmp.file("xi.txt"), xi);
    const auto back = io::read_psf(tmp.file("xi.txt"), 10);
    CHECK(back.max_gap() == xi.max_gap());
    CHECK((back.mass - xi.mass).cwiseAbs().maxCoeff() == 0.0);

    std::ofstream(tmp.file("bad.txt")) << "10 0.5\n11 oops\n";
    try {
        io::read_psf(tmp.file("bad.txt"), 10);
        FAIL("expected a DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("byte offset") != std::string::npos);
    }
}

TEST_CASE("stats files round-trip bit-exactly") {
    TempDir tmp;
    Measurement y;
    y.L = 6;
    y.sigma = 0.77;
    y.samples.resize(500);
    Rng rng(9);
    for (int i = 0; i < 500; ++i) y.samples[i] = rng.normal();
    const auto stats = measurement_moments(y);
    io::write_stats(tmp.file("s.txt"), stats);
    const auto back = io::read_stats(tmp.file("s.txt"));
    CHECK(back.N == stats.N);
    CHECK(back.L == stats.L);
    CHECK(back.sigma == stats.sigma);
    CHECK(back.a1 == stats.a1);
    CHECK((back.a2 - stats.a2).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.a3 - stats.a3).cwiseAbs().maxCoeff() == 0.0);
    CHECK(back.noise_floor[2] == doctest::Approx(stats.noise_floor[2]).epsilon(1e-15));
}

TEST_CASE("reports omit timing unless asked") {
    TempDir tmp;
    EstimateReport rep;
    rep.method = "aa";
    rep.mode = Mode::ws;
    rep.x_hat = default_signal();
    rep.rho0_hat = 0.3;
    rep.final_cost = 1e-9;
    rep.stage_costs = {1.0, 0.1};
    rep.stage_iterations = {12, 9};
    rep.chosen_restart = 2;
    rep.seed = 5;
    rep.wall_time_s = 1.234;
    io::write_report(tmp.file("r.txt"), rep);
    const std::string body = slurp(tmp.file("r.txt"));
    CHECK(body.find("wall_time") == std::string::npos);
    CHECK(body.find("method aa") != std::string::npos);
    io::write_report(tmp.file("rt.txt"), rep, {}, true);
    CHECK(slurp(tmp.file("rt.txt")).find("wall_time_s") != std::string::npos);
}

TEST_CASE("bundled data files match the built-in defaults") {
    const Signal x = io::read_signal(std::string(MTD_SOURCE_DIR) + "/data/default_signal.txt");
    CHECK((x.values - default_signal().values).cwiseAbs().maxCoeff() == 0.0);
    const auto xi = io::read_psf(std::string(MTD_SOURCE_DIR) + "/data/default_psf.txt", 10);
    const auto builtin = default_bench_psf(10);
    REQUIRE(xi.max_gap() == builtin.max_gap());
    CHECK((xi.mass - builtin.mass).cwiseAbs().maxCoeff() == 0.0);
}
