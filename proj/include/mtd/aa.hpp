#pragma once

#include <Eigen/Core>
#include <cstdint>

#include "mtd/core.hpp"
#include "mtd/moments.hpp"
#include "mtd/report.hpp"

namespace mtd {

/// Truncated Fourier-series parameterization of the signal used by the
/// coarse frequency-marching stages:
/// x[l] = c0 + sum_n c_n cos(2 pi n l / L) + d_n sin(2 pi n l / L).
struct FourierParams {
    Eigen::VectorXd c;  // c[0..n_max]
    Eigen::VectorXd d;  // d[1..n_max], stored from index 0
    int L = 0;
    int n_max = 0;

    Eigen::VectorXd synthesize() const;
    /// Least-squares projection of x onto the order-n_max basis.
    static FourierParams fit(const Eigen::VectorXd& x, int n_max);
};

struct AaConfig {
    int restarts = 10;
    double grad_tol = 1e-8;
    int max_iters = 500;  // per marching stage
    int threads = 0;      // 0 = worker_count()
};

struct CostEval {
    double value = 0.0;
    Eigen::VectorXd grad;
};

/// Least-squares misfit of (x, rho0) against measured statistics under the
/// well-separated model, with analytic gradient over (x entries, rho0).
CostEval cost_ws(const Signal& x, double rho0, const MomentStats& stats);

/// Arbitrary-spacing misfit; gradient over (x entries, rho0, rho1 entries).
CostEval cost_asd(const Signal& x, const DensityParams& params, const MomentStats& stats);

/// Coarse-stage misfit in Fourier coordinates against bin-averaged
/// statistics; gradient over (c entries, d entries, rho0, rho1c entries).
/// An empty rho1c selects the well-separated variant.
CostEval coarse_cost(const FourierParams& fp, double rho0, const Eigen::VectorXd& rho1c,
                     const CoarseStats& cstats);

/// Autocorrelation-fit estimator: multistart frequency marching over the
/// Fourier order followed by a full-resolution refinement in signal space;
/// returns the restart with minimum final cost.
EstimateReport estimate_aa(const MomentStats& stats, Mode mode, const AaConfig& cfg, std::uint64_t seed);

}  // namespace mtd
