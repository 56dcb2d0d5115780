#pragma once

#include <Eigen/Core>

#include "mtd/core.hpp"

namespace mtd {

/// Squared l2 distance between the true signal and every length-L window of
/// the measurement: z[i] = sum_l (x[l] - y[i+l])^2, i = 0..N-L.
struct OracleDistances {
    Eigen::VectorXd z;
};

OracleDistances oracle_distances(const Measurement& y, const Signal& x_true);

/// Oracle-assisted greedy deconvolution: repeatedly selects the index with
/// the lowest z, excluding indices within min_gap of previous picks, and
/// averages the M selected windows. Ties break toward the lowest index.
Signal deconv_estimate(const Measurement& y, const OracleDistances& z, int M, int min_gap);

/// Entrywise mean of the true occurrence windows (the lower-bound baseline).
Signal known_support_estimate(const Measurement& y, const SupportSequence& support);

}  // namespace mtd
