#include "mtd/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>

#include "mtd/aa.hpp"
#include "mtd/baselines.hpp"
#include "mtd/em.hpp"
#include "mtd/io.hpp"
#include "mtd/moments.hpp"
#include "mtd/threading.hpp"

namespace mtd {

namespace {

const std::vector<std::string> kKnownMethods = {"aa", "em", "deconv", "known-s", "aa-ws-on-asd",
                                                "em-ws-on-asd"};

double nan_value() { return std::numeric_limits<double>::quiet_NaN(); }

std::string csv_num(double v) { return std::isnan(v) ? "nan" : io::format_double(v); }

}  // namespace

void BenchConfig::validate() const {
    if (sigmas.empty()) throw DataError("bench config: empty sigma grid");
    if (trials < 1) throw DataError("bench config: trials must be >= 1");
    if (L < 2 || N < 2 * L) throw DataError("bench config: invalid N or L");
    if (!(density > 0.0 && density <= 1.0)) throw DataError("bench config: density outside (0, 1]");
    if (methods.empty()) throw DataError("bench config: no methods selected");
    for (const auto& m : methods) {
        if (std::find(kKnownMethods.begin(), kKnownMethods.end(), m) == kKnownMethods.end())
            throw DataError("bench config: unknown method '" + m + "'");
        if ((m == "aa-ws-on-asd" || m == "em-ws-on-asd") && mode != Mode::asd)
            throw DataError("bench config: method '" + m + "' requires asd data");
    }
}

BenchConfig read_bench_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open bench config '" + path + "': " + std::strerror(errno));
    BenchConfig cfg;
    cfg.methods.clear();
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string key;
        if (!(ls >> key)) continue;
        auto bad = [&](const std::string& why) {
            throw DataError("'" + path + "' line " + std::to_string(lineno) + ": " + why);
        };
        if (key == "sigmas") {
            double v;
            cfg.sigmas.clear();
            while (ls >> v) cfg.sigmas.push_back(v);
            if (cfg.sigmas.empty()) bad("sigmas needs at least one value");
        } else if (key == "trials") {
            if (!(ls >> cfg.trials)) bad("trials needs an integer");
        } else if (key == "n") {
            if (!(ls >> cfg.N)) bad("n needs an integer");
        } else if (key == "length") {
            if (!(ls >> cfg.L)) bad("length needs an integer");
        } else if (key == "density") {
            if (!(ls >> cfg.density)) bad("density needs a number");
        } else if (key == "mode") {
            std::string m;
            if (!(ls >> m)) bad("mode needs ws or asd");
            cfg.mode = mode_from_name(m);
        } else if (key == "w") {
            if (!(ls >> cfg.W)) bad("w needs an integer");
        } else if (key == "psf_file") {
            ls >> cfg.psf_file;
        } else if (key == "signal_file") {
            ls >> cfg.signal_file;
        } else if (key == "methods") {
            std::string m;
            while (ls >> m) cfg.methods.push_back(m);
        } else if (key == "seed") {
            if (!(ls >> cfg.seed)) bad("seed needs an integer");
        } else if (key == "restarts") {
            if (!(ls >> cfg.restarts)) bad("restarts needs an integer");
        } else if (key == "em_max_iters") {
            if (!(ls >> cfg.em_max_iters)) bad("em_max_iters needs an integer");
        } else if (key == "workers") {
            if (!(ls >> cfg.workers)) bad("workers needs an integer");
        } else if (key == "slope_range") {
            double lo, hi;
            if (!(ls >> lo >> hi)) bad("slope_range needs two numbers");
            cfg.slope_ranges.emplace_back(lo, hi);
        } else {
            bad("unknown key '" + key + "'");
        }
    }
    return cfg;
}

std::vector<BenchRow> read_raw_csv(const std::string& path) {
    std::ifstream in(path);
    std::vector<BenchRow> rows;
    if (!in) return rows;
    std::string line;
    if (!std::getline(in, line)) return rows;  // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) f.push_back(cell);
        if (f.size() != 9) continue;  // tolerate a truncated final line
        BenchRow r;
        r.method = f[0];
        r.sigma = std::strtod(f[1].c_str(), nullptr);
        r.trial = std::atoi(f[2].c_str());
        r.rmse = std::strtod(f[3].c_str(), nullptr);
        r.rho0_err = std::strtod(f[4].c_str(), nullptr);
        r.rho1_rmse = std::strtod(f[5].c_str(), nullptr);
        r.runtime_s = std::strtod(f[6].c_str(), nullptr);
        r.score = std::strtod(f[7].c_str(), nullptr);
        r.status = f[8];
        rows.push_back(std::move(r));
    }
    return rows;
}

namespace {

std::string row_to_csv(const BenchRow& r) {
    std::string s = r.method;
    s += ',' + io::format_double(r.sigma);
    s += ',' + std::to_string(r.trial);
    s += ',' + csv_num(r.rmse);
    s += ',' + csv_num(r.rho0_err);
    s += ',' + csv_num(r.rho1_rmse);
    s += ',' + csv_num(r.runtime_s);
    s += ',' + csv_num(r.score);
    s += ',' + r.status;
    return s;
}

struct CellData {
    Measurement y;
    MomentStats stats;
    bool have_stats = false;
    DensityParams truth_density;
};

BenchRow run_method(const BenchConfig& cfg, const std::string& method, double sigma, int trial,
                    CellData& cell, std::uint64_t method_seed) {
    BenchRow row;
    row.method = method;
    row.sigma = sigma;
    row.trial = trial;
    row.rmse = row.rho0_err = row.rho1_rmse = row.score = nan_value();
    const auto t0 = std::chrono::steady_clock::now();
    try {
        const Signal& truth = *cell.y.truth_signal;
        const SupportSequence& support = *cell.y.truth_support;
        const bool needs_stats = method == "aa" || method == "aa-ws-on-asd";
        if (needs_stats && !cell.have_stats) {
            cell.stats = measurement_moments(cell.y);
            cell.have_stats = true;
        }
        Signal x_hat;
        if (method == "aa" || method == "aa-ws-on-asd") {
            const Mode solver_mode = method == "aa" ? cfg.mode : Mode::ws;
            AaConfig acfg;
            acfg.restarts = cfg.restarts;
            acfg.threads = 1;
            const EstimateReport rep = estimate_aa(cell.stats, solver_mode, acfg, method_seed);
            x_hat = rep.x_hat;
            row.score = rep.final_cost;
            row.rho0_err = std::abs(rep.rho0_hat - cell.truth_density.rho0);
            if (solver_mode == Mode::asd && cell.truth_density.rho1.norm() > 0.0)
                row.rho1_rmse =
                    (rep.rho1_hat - cell.truth_density.rho1).norm() / cell.truth_density.rho1.norm();
        } else if (method == "em" || method == "em-ws-on-asd") {
            const Mode solver_mode = method == "em" ? cfg.mode : Mode::ws;
            EmConfig ecfg;
            ecfg.restarts = cfg.restarts;
            ecfg.max_iters = cfg.em_max_iters;
            ecfg.threads = 1;
            const EstimateReport rep = estimate_em(cell.y, solver_mode, ecfg, method_seed);
            x_hat = rep.x_hat;
            row.score = rep.log_likelihood;
            row.rho0_err = std::abs(rep.rho0_hat - cell.truth_density.rho0);
            if (solver_mode == Mode::asd && cell.truth_density.rho1.norm() > 0.0)
                row.rho1_rmse =
                    (rep.rho1_hat - cell.truth_density.rho1).norm() / cell.truth_density.rho1.norm();
        } else if (method == "deconv") {
            const OracleDistances z = oracle_distances(cell.y, truth);
            x_hat = deconv_estimate(cell.y, z, support.M(), cfg.L + cfg.effective_W());
        } else if (method == "known-s") {
            x_hat = known_support_estimate(cell.y, support);
        } else {
            throw DataError("unknown method '" + method + "'");
        }
        row.rmse = rmse(x_hat, truth);
        row.status = "ok";
    } catch (const std::exception& e) {
        std::string why = e.what();
        for (char& ch : why)
            if (ch == ',' || ch == '\n') ch = ';';
        row.status = "failed: " + why;
    }
    row.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return row;
}

}  // namespace

void write_summaries(const std::vector<BenchRow>& rows,
                     const std::vector<std::pair<double, double>>& slope_ranges,
                     const std::string& out_prefix) {
    // Aggregates: mean over ok rows per (method, sigma), methods in first-
    // appearance order, sigmas ascending.
    std::vector<std::string> methods;
    for (const auto& r : rows)
        if (std::find(methods.begin(), methods.end(), r.method) == methods.end())
            methods.push_back(r.method);
    std::vector<double> sigmas;
    for (const auto& r : rows)
        if (std::find(sigmas.begin(), sigmas.end(), r.sigma) == sigmas.end()) sigmas.push_back(r.sigma);
    std::sort(sigmas.begin(), sigmas.end());

    std::string agg = "method,sigma,trials_ok,mean_rmse,mean_rho0_err,mean_rho1_rmse,mean_runtime_s\n";
    std::map<std::string, std::vector<std::pair<double, double>>> curves;
    for (const auto& m : methods) {
        for (const double s : sigmas) {
            int n_ok = 0;
            double sum_rmse = 0.0, sum_r0 = 0.0, sum_r1 = 0.0, sum_rt = 0.0;
            int n_r0 = 0, n_r1 = 0;
            for (const auto& r : rows) {
                if (r.method != m || r.sigma != s || r.status != "ok") continue;
                ++n_ok;
                sum_rmse += r.rmse;
                sum_rt += r.runtime_s;
                if (!std::isnan(r.rho0_err)) {
                    sum_r0 += r.rho0_err;
                    ++n_r0;
                }
                if (!std::isnan(r.rho1_rmse)) {
                    sum_r1 += r.rho1_rmse;
                    ++n_r1;
                }
            }
            if (n_ok == 0) continue;
            const double mean_rmse = sum_rmse / n_ok;
            curves[m].emplace_back(s, mean_rmse);
            agg += m + ',' + io::format_double(s) + ',' + std::to_string(n_ok) + ',' +
                   csv_num(mean_rmse) + ',' + csv_num(n_r0 ? sum_r0 / n_r0 : nan_value()) + ',' +
                   csv_num(n_r1 ? sum_r1 / n_r1 : nan_value()) + ',' + csv_num(sum_rt / n_ok) + '\n';
        }
    }
    {
        std::ofstream out(out_prefix + "_aggregate.csv", std::ios::trunc);
        if (!out) throw DataError("cannot write aggregate CSV for prefix '" + out_prefix + "'");
        out << agg;
    }

    std::string slopes = "method,sigma_lo,sigma_hi,n_points,slope\n";
    for (const auto& m : methods) {
        for (const auto& [lo, hi] : slope_ranges) {
            std::vector<std::pair<double, double>> pts;
            for (const auto& [s, v] : curves[m])
                if (s >= lo * (1 - 1e-9) && s <= hi * (1 + 1e-9) && v > 0.0) pts.emplace_back(s, v);
            if (pts.size() < 2) continue;
            slopes += m + ',' + io::format_double(lo) + ',' + io::format_double(hi) + ',' +
                      std::to_string(pts.size()) + ',' + csv_num(fit_loglog_slope(pts)) + '\n';
        }
    }
    std::ofstream out(out_prefix + "_slopes.csv", std::ios::trunc);
    if (!out) throw DataError("cannot write slopes CSV for prefix '" + out_prefix + "'");
    out << slopes;
}

double fit_loglog_slope(const std::vector<std::pair<double, double>>& points) {
    if (points.size() < 2) throw DataError("fit_loglog_slope: need at least two points");
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (const auto& [s, v] : points) {
        const double x = std::log(s);
        const double y = std::log(v);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double n = static_cast<double>(points.size());
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

void run_bench(const BenchConfig& cfg, const std::string& out_prefix) {
    cfg.validate();
    const std::string raw_path = out_prefix + "_raw.csv";

    // Previously completed rows, keyed by (method, sigma bits, trial).
    std::map<std::tuple<std::string, std::uint64_t, int>, BenchRow> done;
    for (auto& r : read_raw_csv(raw_path)) {
        std::uint64_t bits;
        std::memcpy(&bits, &r.sigma, 8);
        done.emplace(std::make_tuple(r.method, bits, r.trial), std::move(r));
    }

    const Signal x = cfg.signal_file.empty() ? default_signal() : io::read_signal(cfg.signal_file);
    if (x.length() != cfg.L) throw DataError("bench: signal length does not match config length");
    const int M = static_cast<int>(std::llround(cfg.density * static_cast<double>(cfg.N) / cfg.L));

    const int n_cells = static_cast<int>(cfg.sigmas.size()) * cfg.trials;
    std::ofstream out(raw_path, std::ios::trunc);
    if (!out) throw DataError("cannot write '" + raw_path + "'");
    out << kRawHeader << '\n';
    out.flush();

    std::mutex mu;
    std::map<int, std::vector<BenchRow>> ready;
    int next_flush = 0;

    parallel_for(n_cells, [&](int ci) {
        const int si = ci / cfg.trials;
        const int ti = ci % cfg.trials;
        const double sigma = cfg.sigmas[si];

        std::vector<BenchRow> rows;
        rows.reserve(cfg.methods.size());
        bool need_compute = false;
        for (const auto& m : cfg.methods) {
            std::uint64_t bits;
            std::memcpy(&bits, &sigma, 8);
            if (!done.count(std::make_tuple(m, bits, ti))) need_compute = true;
        }

        CellData cell;
        if (need_compute) {
            const std::uint64_t data_seed =
                derive_seed(cfg.seed, {0xDA7Au, static_cast<std::uint64_t>(si), static_cast<std::uint64_t>(ti)});
            SupportSequence support;
            if (!cfg.psf_file.empty()) {
                const PairSeparationFunction xi = io::read_psf(cfg.psf_file, cfg.L);
                support = generate_support_from_psf(cfg.N, cfg.L, xi, M, derive_seed(data_seed, {1}));
            } else {
                support = generate_support_rejection(cfg.N, cfg.L, M, cfg.effective_W(),
                                                     derive_seed(data_seed, {1}));
            }
            cell.y = synthesize(support, x, sigma, derive_seed(data_seed, {2}));
            cell.truth_density = density_from_support(support);
        }

        for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
            const std::string& m = cfg.methods[mi];
            std::uint64_t bits;
            std::memcpy(&bits, &sigma, 8);
            const auto key = std::make_tuple(m, bits, ti);
            if (auto it = done.find(key); it != done.end()) {
                rows.push_back(it->second);
                continue;
            }
            const std::uint64_t method_seed =
                derive_seed(cfg.seed, {0x3E7Du, static_cast<std::uint64_t>(mi),
                                       static_cast<std::uint64_t>(si), static_cast<std::uint64_t>(ti)});
            rows.push_back(run_method(cfg, m, sigma, ti, cell, method_seed));
        }

        std::lock_guard<std::mutex> lock(mu);
        ready[ci] = std::move(rows);
        while (true) {
            auto it = ready.find(next_flush);
            if (it == ready.end()) break;
            for (const auto& r : it->second) out << row_to_csv(r) << '\n';
            out.flush();
            ready.erase(it);
            ++next_flush;
        }
    }, cfg.workers);

    out.close();
    write_summaries(read_raw_csv(raw_path), cfg.slope_ranges, out_prefix);
}

}  // namespace mtd
