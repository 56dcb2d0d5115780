#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mtd/bench.hpp"
#include "mtd/io.hpp"

using namespace mtd;

namespace {

struct TempDir {
    std::string path;
    TempDir() {
        char tmpl[] = "/tmp/mtd_bench_XXXXXX";
        path = mkdtemp(tmpl);
    }
    std::string file(const char* name) const { return path + "/" + name; }
};

BenchConfig small_config() {
    BenchConfig cfg;
    cfg.sigmas = {0.2, 0.8};
    cfg.trials = 2;
    cfg.N = 20000;
    cfg.L = 10;
    cfg.density = 0.3;
    cfg.mode = Mode::ws;
    cfg.methods = {"known-s", "deconv"};
    cfg.seed = 11;
    cfg.restarts = 2;
    cfg.slope_ranges = {{0.2, 0.8}};
    return cfg;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// CSV with the runtime column masked; timing is the one legitimately
// non-reproducible field. Raw rows carry it at index 6, aggregate rows at
// index 6 as well (mean_runtime_s).
std::string masked(const std::string& csv) {
    std::istringstream in(csv);
    std::string line, out;
    while (std::getline(in, line)) {
        std::vector<std::string> f;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) f.push_back(cell);
        if (f.size() >= 7) f[6] = "T";
        for (std::size_t i = 0; i < f.size(); ++i) out += (i ? "," : "") + f[i];
        out += '\n';
    }
    return out;
}

}  // namespace

TEST_CASE("row count is methods x grid x trials") {
    TempDir tmp;
    const auto cfg = small_config();
    run_bench(cfg, tmp.file("b"));
    const auto rows = read_raw_csv(tmp.file("b_raw.csv"));
    CHECK(rows.size() == 2u * 2u * 2u);
    for (const auto& r : rows) CHECK(r.status == "ok");
}

TEST_CASE("reruns and resumed runs reproduce the sweep modulo runtime") {
    TempDir tmp;
    const auto cfg = small_config();
    run_bench(cfg, tmp.file("full"));
    run_bench(cfg, tmp.file("again"));
    CHECK(masked(slurp(tmp.file("full_raw.csv"))) == masked(slurp(tmp.file("again_raw.csv"))));

    // Interrupt: keep only the header plus the first three rows, then resume.
    {
        std::istringstream in(slurp(tmp.file("full_raw.csv")));
        std::ofstream out(tmp.file("resume_raw.csv"));
        std::string line;
        for (int i = 0; i < 4 && std::getline(in, line); ++i) out << line << '\n';
    }
    run_bench(cfg, tmp.file("resume"));
    CHECK(masked(slurp(tmp.file("resume_raw.csv"))) == masked(slurp(tmp.file("full_raw.csv"))));
    CHECK(masked(slurp(tmp.file("resume_aggregate.csv"))) ==
          masked(slurp(tmp.file("full_aggregate.csv"))));
    CHECK(slurp(tmp.file("resume_slopes.csv")) == slurp(tmp.file("full_slopes.csv")));
}

TEST_CASE("aggregates are reproducible from raw rows by an independent reader") {
    TempDir tmp;
    const auto cfg = small_config();
    run_bench(cfg, tmp.file("b"));
    // The report path re-derives aggregate and slope files from the raw CSV.
    write_summaries(read_raw_csv(tmp.file("b_raw.csv")), cfg.slope_ranges, tmp.file("b2"));
    CHECK(slurp(tmp.file("b2_aggregate.csv")) == slurp(tmp.file("b_aggregate.csv")));
    CHECK(slurp(tmp.file("b2_slopes.csv")) == slurp(tmp.file("b_slopes.csv")));
}

TEST_CASE("csv header is stable") {
    TempDir tmp;
    run_bench(small_config(), tmp.file("b"));
    std::istringstream in(slurp(tmp.file("b_raw.csv")));
    std::string header;
    std::getline(in, header);
    CHECK(header == std::string(kRawHeader));
}

TEST_CASE("config files parse with overridable keys") {
    TempDir tmp;
    {
        std::ofstream out(tmp.file("cfg.txt"));
        out << "# comment line\n";
        out << "n 50000\nlength 10\ndensity 0.5\nmode asd\ntrials 3\n";
        out << "methods aa known-s\nseed 7\nsigmas 0.5 1 2\nslope_range 0.5 2\n";
    }
    const auto cfg = read_bench_config(tmp.file("cfg.txt"));
    CHECK(cfg.N == 50000);
    CHECK(cfg.mode == Mode::asd);
    CHECK(cfg.trials == 3);
    CHECK(cfg.methods == std::vector<std::string>{"aa", "known-s"});
    CHECK(cfg.sigmas == std::vector<double>{0.5, 1.0, 2.0});
    REQUIRE(cfg.slope_ranges.size() == 1);
    CHECK(cfg.slope_ranges[0].first == 0.5);
    cfg.validate();
}

TEST_CASE("slope fit recovers exact power laws") {
    std::vector<std::pair<double, double>> pts;
    for (double s : {0.1, 0.3, 1.0, 3.0}) pts.emplace_back(s, 2.0 * s * s * s);
    CHECK(fit_loglog_slope(pts) == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("misconfigured methods are rejected") {
    auto cfg = small_config();
    cfg.methods = {"aa-ws-on-asd"};
    CHECK_THROWS_AS(cfg.validate(), DataError);  // requires asd data
    cfg.methods = {"nope"};
    CHECK_THROWS_AS(cfg.validate(), DataError);
}
