#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "mtd/core.hpp"
#include "mtd/report.hpp"

namespace mtd {

/// Non-overlapping length-L windows of a measurement, one per column; the
/// trailing N mod L samples are discarded.
struct SegmentSet {
    Eigen::MatrixXd Y;  // L x Nd
    double sigma = 0.0;
    int L = 0;

    int count() const { return static_cast<int>(Y.cols()); }
};

SegmentSet make_segments(const Measurement& y);

/// Shift-configuration prior. In ws mode a free simplex over the 2K single
/// shifts; in asd mode parameterized by (alpha0, alpha1, rho1) from which
/// every configuration prior is derived. K is the shift-grid half-length of
/// the current marching stage (K = L at full resolution).
struct EmPriors {
    Mode mode = Mode::ws;
    int K = 0;
    Eigen::VectorXd alpha;  // ws only, size 2K
    double alpha0 = 0.0;    // asd
    double alpha1 = 0.0;    // asd
    Eigen::VectorXd rho1;   // asd, size K-1

    static EmPriors uniform_ws(int K);
    static EmPriors uniform_asd(int K);

    /// Prior of the single-occurrence configuration at coarse shift l in [0, 2K).
    double single(int l) const;
    /// Prior of the two-occurrence configuration (l1, l2), K < l1 < 2K,
    /// 0 < l2 <= l1-K.
    double pair_prior(int l1, int l2) const;
    /// Left side of the normalization constraint minus 1 (asd mode).
    double constraint_residual() const;
    void validate() const;
};

/// Per-segment posteriors over the configuration set of one marching stage.
/// Column m sums to 1. Config columns are ordered singles first (coarse
/// shift 0..2K-1) then pairs.
struct PosteriorTable {
    Mode mode = Mode::ws;
    int L = 0;
    int K = 0;
    double dx = 1.0;
    std::vector<int> single_fine;                 // rounded fine shift per single config
    std::vector<std::pair<int, int>> pair_fine;   // rounded fine shift pairs
    std::vector<std::pair<int, int>> pair_coarse; // coarse (l1, l2) labels
    Eigen::MatrixXd P;                            // (singles+pairs) x Nd

    int singles() const { return static_cast<int>(single_fine.size()); }
    int pairs() const { return static_cast<int>(pair_fine.size()); }
};

/// First L entries of the 2L-circular shift of the left-zero-padded signal:
/// the template C R_l Z x. l = 0 is the empty window, l = L the full signal.
Eigen::VectorXd shift_template(const Signal& x, int l);

/// Full-resolution E-step: posteriors proportional to likelihood x prior,
/// computed in the log domain with per-segment max subtraction.
PosteriorTable e_step(const SegmentSet& segments, const Signal& x, const EmPriors& priors);

/// Closed-form posterior-weighted signal update (single- and, in asd mode,
/// two-occurrence contributions). Errors if some coordinate receives zero
/// total posterior mass.
Signal m_step_signal(const SegmentSet& segments, const PosteriorTable& posteriors);

/// Closed-form prior update in ws mode: per-shift posterior average.
Eigen::VectorXd m_step_prior_ws(const PosteriorTable& posteriors);

struct FwOptions {
    double gap_tol = 1e-10;  // duality gap on the weight-normalized objective
    int max_iters = 200;
    int bisect_iters = 60;
};

struct FwDiagnostics {
    int iterations = 0;
    double gap = std::numeric_limits<double>::infinity();
    bool converged = false;
};

struct AsdPriorParams {
    double alpha0 = 0.0;
    double alpha1 = 0.0;
    Eigen::VectorXd rho1;
};

/// Frank-Wolfe maximization of the prior part of the expected complete-data
/// log-likelihood over the constraint polytope
/// alpha0 + (2K-1) alpha1 + sum_i ((K+i)/K) rho1[i] = 1, all parameters >= 0.
/// w_single holds aggregated posterior weights per coarse shift, w_pair_gap
/// per coarse gap index i (gap K+i). Starts from `warm` when given.
AsdPriorParams frank_wolfe_prior(const Eigen::VectorXd& w_single, const Eigen::VectorXd& w_pair_gap,
                                 int K, const AsdPriorParams* warm = nullptr, const FwOptions& opts = {},
                                 FwDiagnostics* diag = nullptr);

/// Aggregates posterior weights from the table and runs frank_wolfe_prior.
AsdPriorParams m_step_prior_asd(const PosteriorTable& posteriors, const AsdPriorParams* warm = nullptr,
                                const FwOptions& opts = {}, FwDiagnostics* diag = nullptr);

/// Approximate data log-likelihood: sum over segments of the log of the
/// prior-weighted likelihood mixture. Requires full-resolution priors.
double log_likelihood(const SegmentSet& segments, const Signal& x, const EmPriors& priors);

struct EmConfig {
    int restarts = 10;
    double x_tol = 1e-6;    // relative l2 change of x per stage
    int max_iters = 1000;   // per marching stage
    FwOptions fw;
    int threads = 0;
    bool record_trace = false;
};

/// Approximate EM with frequency marching (n_max = 1..floor((L+1)/2)) and
/// multistart; returns the restart with the maximum final log-likelihood.
EstimateReport estimate_em(const Measurement& y, Mode mode, const EmConfig& cfg, std::uint64_t seed);

}  // namespace mtd
