#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <vector>

#include "mtd/errors.hpp"
#include "mtd/rng.hpp"

namespace mtd {

enum class Mode { ws, asd };

const char* mode_name(Mode m);
Mode mode_from_name(const std::string& name);

/// The estimation target: a real vector of length L.
struct Signal {
    Eigen::VectorXd values;

    int length() const { return static_cast<int>(values.size()); }
    void validate() const;
};

/// Sorted start indices of the signal occurrences in a measurement (the
/// sparse form of the binary sequence s). Consecutive starts differ by at
/// least L so occurrences never overlap.
struct SupportSequence {
    std::vector<std::int64_t> starts;
    std::int64_t N = 0;
    int L = 0;

    int M() const { return static_cast<int>(starts.size()); }
    /// Checks ordering, bounds [0, N-L], and pairwise gaps >= min_gap.
    void validate(std::int64_t min_gap) const;
};

/// Distribution of gaps between consecutive occurrence starts, indexed by
/// gap length from 0 up to a bounded maximum. Mass below gap L is zero.
struct PairSeparationFunction {
    Eigen::VectorXd mass;  // mass[g] for gap g in [0, max_gap]
    int L = 0;

    int max_gap() const { return static_cast<int>(mass.size()) - 1; }
    void validate() const;
};

struct Measurement {
    Eigen::VectorXd samples;
    int L = 0;
    double sigma = 0.0;
    std::optional<Signal> truth_signal;
    std::optional<SupportSequence> truth_support;

    std::int64_t N() const { return static_cast<std::int64_t>(samples.size()); }
    void validate() const;
};

/// Signal density rho0 = M*L/N together with the cross-occurrence weights
/// rho1[i] = rho0 * xi[i+L], i = 0..L-2.
struct DensityParams {
    double rho0 = 0.0;
    Eigen::VectorXd rho1;

    void validate() const;
};

/// Draws M starts uniformly one by one, rejecting any draw closer than L+W
/// to an accepted start. Errors after `max_consecutive_rejections` failed
/// draws in a row (infeasible density).
SupportSequence generate_support_rejection(std::int64_t N, int L, int M, int W, std::uint64_t seed,
                                           std::int64_t max_consecutive_rejections = 1000000);

/// Sequential construction with gaps drawn i.i.d. from xi; the first start
/// is uniform in [0, L) and the walk stops once the next start would pass
/// N-L. May return fewer than target_M occurrences; errors if fewer than 2 fit.
SupportSequence generate_support_from_psf(std::int64_t N, int L, const PairSeparationFunction& xi,
                                          int target_M, std::uint64_t seed);

/// y = s * x + N(0, sigma^2), with ground truth attached.
Measurement synthesize(const SupportSequence& support, const Signal& x, double sigma, std::uint64_t seed);

/// Empirical gap histogram of a support, normalized by M-1.
PairSeparationFunction pair_separation(const SupportSequence& support);

/// ||estimate - truth||_2 / ||truth||_2, no alignment.
double rmse(const Signal& estimate, const Signal& truth);

/// The length-10 test signal bundled with the project, ||x||_2 = sqrt(10).
Signal default_signal();

/// Benchmark pair separation function for a given L: mass on gaps L..3L,
/// decaying linearly.
PairSeparationFunction default_bench_psf(int L);

/// rho0 and rho1 implied by a concrete support (via its empirical pair
/// separation function).
DensityParams density_from_support(const SupportSequence& support);

}  // namespace mtd
