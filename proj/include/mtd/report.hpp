#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "mtd/core.hpp"

namespace mtd {

/// Result of one estimator run (AA, EM, or a baseline).
struct EstimateReport {
    std::string method;
    Mode mode = Mode::ws;
    Signal x_hat;
    double rho0_hat = 0.0;
    Eigen::VectorXd rho1_hat;  // empty in ws mode

    double final_cost = std::numeric_limits<double>::quiet_NaN();      // AA: selected restart's cost
    double log_likelihood = std::numeric_limits<double>::quiet_NaN();  // EM: selected restart's likelihood
    std::vector<double> stage_costs;       // per frequency-marching stage
    std::vector<int> stage_iterations;     // optimizer/EM iterations per stage
    int chosen_restart = -1;
    std::uint64_t seed = 0;
    double wall_time_s = 0.0;

    // EM prior estimates (mode-dependent).
    Eigen::VectorXd em_alpha;  // ws: full 2L simplex
    double em_alpha0 = 0.0;    // asd
    double em_alpha1 = 0.0;    // asd
    bool fw_gap_flag = false;  // a Frank-Wolfe update hit its iteration cap

    // Per-stage log-likelihood traces of the chosen restart (diagnostics,
    // filled when requested).
    std::vector<std::vector<double>> ll_trace;
};

}  // namespace mtd
