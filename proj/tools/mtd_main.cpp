#include <CLI11.hpp>
#include <cstdio>
#include <string>
#include <vector>

#include "mtd/aa.hpp"
#include "mtd/baselines.hpp"
#include "mtd/bench.hpp"
#include "mtd/em.hpp"
#include "mtd/io.hpp"
#include "mtd/moments.hpp"

namespace {

using namespace mtd;

std::string sidecar(const std::string& path, const char* suffix) {
    const auto dot = path.rfind('.');
    const std::string stem = dot == std::string::npos ? path : path.substr(0, dot);
    return stem + suffix;
}

int cmd_generate(const std::string& mode_s, int L, std::int64_t N, double density, double sigma,
                 std::uint64_t seed, const std::string& out, const std::string& psf_file,
                 int W, const std::string& signal_file) {
    const Mode mode = mode_from_name(mode_s);
    const Signal x = signal_file.empty() ? default_signal() : io::read_signal(signal_file);
    if (x.length() != L) throw DataError("signal file length does not match --length");
    const int M = static_cast<int>(std::llround(density * static_cast<double>(N) / L));
    const int W_eff = W >= 0 ? W : (mode == Mode::ws ? L - 1 : 0);
    SupportSequence support;
    if (!psf_file.empty()) {
        const PairSeparationFunction xi = io::read_psf(psf_file, L);
        support = generate_support_from_psf(N, L, xi, M, derive_seed(seed, {1}));
    } else {
        support = generate_support_rejection(N, L, M, W_eff, derive_seed(seed, {1}));
    }
    const Measurement y = synthesize(support, x, sigma, derive_seed(seed, {2}));
    io::write_measurement(out, y);
    io::write_signal(sidecar(out, ".signal.txt"), x);
    io::write_support(sidecar(out, ".support.txt"), support);
    std::printf("wrote %s (N=%lld, L=%d, sigma=%s, M=%d)\n", out.c_str(),
                static_cast<long long>(N), L, io::format_double(sigma).c_str(), support.M());
    return 0;
}

Measurement load_measurement_with_truth(const std::string& in, const std::string& truth_signal,
                                        const std::string& truth_support) {
    Measurement y = io::read_measurement(in);
    std::string sig_path = truth_signal.empty() ? sidecar(in, ".signal.txt") : truth_signal;
    std::string sup_path = truth_support.empty() ? sidecar(in, ".support.txt") : truth_support;
    if (std::ifstream probe(sig_path); probe) y.truth_signal = io::read_signal(sig_path);
    if (std::ifstream probe(sup_path); probe) y.truth_support = io::read_support(sup_path, y.N(), y.L);
    return y;
}

int cmd_stats(const std::string& in, const std::string& out) {
    const Measurement y = io::read_measurement(in);
    io::write_stats(out, measurement_moments(y));
    return 0;
}

int cmd_estimate(const std::string& method, const std::string& mode_s, const std::string& in,
                 const std::string& out, const std::string& signal_out, int restarts,
                 std::uint64_t seed, const std::string& truth_signal, int em_max_iters,
                 bool timing) {
    const Mode mode = mode_from_name(mode_s);
    MomentStats stats;
    Measurement y;
    bool have_measurement = false;
    // A stats file is structured text starting with "N "; the measurement
    // container starts with the MTDM magic.
    {
        std::ifstream probe(in, std::ios::binary);
        if (!probe) throw DataError("cannot open '" + in + "'");
        char head[4] = {0, 0, 0, 0};
        probe.read(head, 4);
        if (std::string(head, 4) == "MTDM") {
            y = load_measurement_with_truth(in, truth_signal, "");
            have_measurement = true;
        } else {
            stats = io::read_stats(in);
        }
    }
    EstimateReport rep;
    if (method == "aa") {
        if (have_measurement) stats = measurement_moments(y);
        AaConfig cfg;
        cfg.restarts = restarts;
        rep = estimate_aa(stats, mode, cfg, seed);
    } else if (method == "em") {
        if (!have_measurement)
            throw DataError("estimate --method em needs a measurement file, not a stats file");
        EmConfig cfg;
        cfg.restarts = restarts;
        cfg.max_iters = em_max_iters;
        rep = estimate_em(y, mode, cfg, seed);
    } else {
        throw DataError("unknown --method '" + method + "' (expected aa or em)");
    }
    std::vector<std::pair<std::string, std::string>> extras;
    if (!truth_signal.empty()) {
        const Signal truth = io::read_signal(truth_signal);
        extras.emplace_back("rmse", io::format_double(rmse(rep.x_hat, truth)));
    } else if (have_measurement && y.truth_signal) {
        extras.emplace_back("rmse", io::format_double(rmse(rep.x_hat, *y.truth_signal)));
    }
    io::write_report(out, rep, extras, timing);
    if (!signal_out.empty()) io::write_signal(signal_out, rep.x_hat);
    return 0;
}

int cmd_baseline(const std::string& method, const std::string& in, const std::string& out,
                 const std::string& signal_out, const std::string& truth_signal,
                 const std::string& truth_support, int min_gap, int M, bool timing) {
    Measurement y = load_measurement_with_truth(in, truth_signal, truth_support);
    EstimateReport rep;
    rep.mode = Mode::ws;
    const auto t0 = std::chrono::steady_clock::now();
    if (method == "deconv") {
        if (!y.truth_signal) throw DataError("deconv needs the true signal (sidecar or --truth-signal)");
        const OracleDistances z = oracle_distances(y, *y.truth_signal);
        const int M_eff = M > 0 ? M : (y.truth_support ? y.truth_support->M() : 0);
        if (M_eff <= 0) throw DataError("deconv needs --num-occurrences or a support sidecar");
        const int gap_eff = min_gap > 0 ? min_gap : (y.truth_support ? y.L : 2 * y.L - 1);
        rep.x_hat = deconv_estimate(y, z, M_eff, gap_eff);
        rep.method = "deconv";
    } else if (method == "known-s") {
        if (!y.truth_support) throw DataError("known-s needs the true support (sidecar or --truth-support)");
        rep.x_hat = known_support_estimate(y, *y.truth_support);
        rep.method = "known-s";
    } else {
        throw DataError("unknown --method '" + method + "' (expected deconv or known-s)");
    }
    rep.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::vector<std::pair<std::string, std::string>> extras;
    if (y.truth_signal)
        extras.emplace_back("rmse", io::format_double(rmse(rep.x_hat, *y.truth_signal)));
    io::write_report(out, rep, extras, timing);
    if (!signal_out.empty()) io::write_signal(signal_out, rep.x_hat);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Signal estimation from measurements with multiple unlocated occurrences"};
    app.require_subcommand(1);

    // generate
    auto* gen = app.add_subcommand("generate", "Synthesize a measurement with ground-truth sidecars");
    std::string g_mode = "ws", g_out, g_psf, g_signal;
    int g_L = 10, g_W = -1;
    std::int64_t g_N = 1000000;
    double g_density = 0.3, g_sigma = 1.0;
    std::uint64_t g_seed = 1;
    gen->add_option("--mode", g_mode, "ws or asd");
    gen->add_option("--length", g_L, "signal length L");
    gen->add_option("--num-samples", g_N, "measurement length N");
    gen->add_option("--density", g_density, "signal density rho0 = M*L/N");
    gen->add_option("--sigma", g_sigma, "noise standard deviation");
    gen->add_option("--seed", g_seed, "RNG seed");
    gen->add_option("--out", g_out, "output measurement file")->required();
    gen->add_option("--psf-file", g_psf, "draw gaps from this pair separation file");
    gen->add_option("--w", g_W, "minimum extra spacing W (default: L-1 ws, 0 asd)");
    gen->add_option("--signal", g_signal, "signal file (default: bundled test signal)");

    // stats
    auto* st = app.add_subcommand("stats", "Compute autocorrelation statistics of a measurement");
    std::string s_in, s_out;
    st->add_option("--in", s_in)->required();
    st->add_option("--out", s_out)->required();

    // estimate
    auto* est = app.add_subcommand("estimate", "Run the AA or EM estimator");
    std::string e_method = "aa", e_mode = "ws", e_in, e_out, e_signal_out, e_truth;
    int e_restarts = 10, e_em_iters = 1000;
    std::uint64_t e_seed = 1;
    bool e_timing = false;
    est->add_option("--method", e_method, "aa or em");
    est->add_option("--mode", e_mode, "ws or asd");
    est->add_option("--in", e_in, "measurement (.mtd) or stats file")->required();
    est->add_option("--out", e_out, "report file")->required();
    est->add_option("--signal-out", e_signal_out, "write the estimated signal here");
    est->add_option("--restarts", e_restarts);
    est->add_option("--seed", e_seed);
    est->add_option("--truth-signal", e_truth, "include RMSE against this signal in the report");
    est->add_option("--em-max-iters", e_em_iters);
    est->add_flag("--timing", e_timing, "include wall time in the report");

    // baseline
    auto* base = app.add_subcommand("baseline", "Run the deconv or known-support baseline");
    std::string b_method = "known-s", b_in, b_out, b_signal_out, b_truth_sig, b_truth_sup;
    int b_min_gap = 0, b_M = 0;
    bool b_timing = false;
    base->add_option("--method", b_method, "deconv or known-s");
    base->add_option("--in", b_in)->required();
    base->add_option("--out", b_out)->required();
    base->add_option("--signal-out", b_signal_out);
    base->add_option("--truth-signal", b_truth_sig);
    base->add_option("--truth-support", b_truth_sup);
    base->add_option("--min-gap", b_min_gap, "deconv exclusion radius (default from spacing model)");
    base->add_option("--num-occurrences", b_M, "deconv selection count (default: true M)");
    base->add_flag("--timing", b_timing);

    // bench
    auto* ben = app.add_subcommand("bench", "Run an RMSE-vs-sigma sweep");
    std::string n_config, n_prefix = "bench";
    std::vector<double> n_sigmas;
    std::vector<std::string> n_methods;
    int n_trials = -1, n_restarts = -1, n_workers = -1;
    std::int64_t n_N = -1;
    std::uint64_t n_seed = 0;
    bool n_have_seed = false;
    ben->add_option("--config", n_config, "bench config file");
    ben->add_option("--out-prefix", n_prefix, "output file prefix");
    ben->add_option("--sigmas", n_sigmas, "override sigma grid");
    ben->add_option("--methods", n_methods, "override method list");
    ben->add_option("--trials", n_trials);
    ben->add_option("--restarts", n_restarts);
    ben->add_option("--workers", n_workers);
    ben->add_option("--num-samples", n_N);
    ben->add_option_function<std::uint64_t>("--seed", [&](const std::uint64_t& v) {
        n_seed = v;
        n_have_seed = true;
    });

    // report
    auto* repc = app.add_subcommand("report", "Recompute aggregates and slopes from a raw CSV");
    std::string r_raw, r_prefix = "bench";
    std::vector<std::pair<double, double>> r_ranges;
    std::vector<double> r_range_flat;
    repc->add_option("--raw", r_raw)->required();
    repc->add_option("--out-prefix", r_prefix);
    repc->add_option("--slope-range", r_range_flat, "lo hi pairs for slope fits")->expected(-2);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (gen->parsed())
            return cmd_generate(g_mode, g_L, g_N, g_density, g_sigma, g_seed, g_out, g_psf, g_W, g_signal);
        if (st->parsed()) return cmd_stats(s_in, s_out);
        if (est->parsed())
            return cmd_estimate(e_method, e_mode, e_in, e_out, e_signal_out, e_restarts, e_seed, e_truth,
                                e_em_iters, e_timing);
        if (base->parsed())
            return cmd_baseline(b_method, b_in, b_out, b_signal_out, b_truth_sig, b_truth_sup, b_min_gap,
                                b_M, b_timing);
        if (ben->parsed()) {
            mtd::BenchConfig cfg;
            if (!n_config.empty()) cfg = mtd::read_bench_config(n_config);
            if (!n_sigmas.empty()) cfg.sigmas = n_sigmas;
            if (!n_methods.empty()) cfg.methods = n_methods;
            if (n_trials > 0) cfg.trials = n_trials;
            if (n_restarts > 0) cfg.restarts = n_restarts;
            if (n_workers >= 0) cfg.workers = n_workers;
            if (n_N > 0) cfg.N = n_N;
            if (n_have_seed) cfg.seed = n_seed;
            mtd::run_bench(cfg, n_prefix);
            return 0;
        }
        if (repc->parsed()) {
            for (std::size_t i = 0; i + 1 < r_range_flat.size(); i += 2)
                r_ranges.emplace_back(r_range_flat[i], r_range_flat[i + 1]);
            mtd::write_summaries(mtd::read_raw_csv(r_raw), r_ranges, r_prefix);
            return 0;
        }
    } catch (const mtd::DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 2;
    } catch (const mtd::NumericalError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 1;
}
