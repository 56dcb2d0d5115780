#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mtd/core.hpp"

namespace mtd {

/// Sweep description. File form is flat "key value" text; command-line
/// flags override file values.
struct BenchConfig {
    std::vector<double> sigmas;  // log-spaced grid, explicit values
    int trials = 20;
    std::int64_t N = 1000000;
    int L = 10;
    double density = 0.3;
    Mode mode = Mode::ws;
    int W = -1;  // -1: mode default (L-1 for ws, 0 for asd)
    std::string psf_file;
    std::string signal_file;
    std::vector<std::string> methods;  // aa em deconv known-s aa-ws-on-asd em-ws-on-asd
    std::uint64_t seed = 1;
    int restarts = 10;
    int em_max_iters = 1000;
    int workers = 0;
    std::vector<std::pair<double, double>> slope_ranges;

    int effective_W() const { return W >= 0 ? W : (mode == Mode::ws ? L - 1 : 0); }
    void validate() const;
};

BenchConfig read_bench_config(const std::string& path);

struct BenchRow {
    std::string method;
    double sigma = 0.0;
    int trial = 0;
    double rmse = 0.0;
    double rho0_err = 0.0;
    double rho1_rmse = 0.0;
    double runtime_s = 0.0;
    double score = 0.0;
    std::string status = "ok";
};

inline const char* kRawHeader = "method,sigma,trial,rmse,rho0_err,rho1_rmse,runtime_s,score,status";

/// Runs the sweep, streaming rows to <prefix>_raw.csv in canonical
/// (sigma, trial, method) order. Rows already present in the file are reused
/// instead of recomputed, which makes interrupted sweeps resumable. Also
/// rewrites <prefix>_aggregate.csv and <prefix>_slopes.csv at the end.
void run_bench(const BenchConfig& cfg, const std::string& out_prefix);

std::vector<BenchRow> read_raw_csv(const std::string& path);

/// Aggregate and slope emission from raw rows (reused by the report
/// command as an independent reader of the raw CSV).
void write_summaries(const std::vector<BenchRow>& rows,
                     const std::vector<std::pair<double, double>>& slope_ranges,
                     const std::string& out_prefix);

/// Least-squares slope of log(rmse) vs log(sigma) over (sigma, rmse) points.
double fit_loglog_slope(const std::vector<std::pair<double, double>>& points);

}  // namespace mtd
