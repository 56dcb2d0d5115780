#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>

#include "mtd/core.hpp"

namespace mtd {

/// Packed index into the row-major upper triangle {0 <= l1 <= l2 < L}.
inline int tri_index(int l1, int l2, int L) { return l1 * L - l1 * (l1 - 1) / 2 + (l2 - l1); }
inline int tri_count(int L) { return L * (L + 1) / 2; }

/// First three autocorrelations of a measurement, 1/N-normalized, with the
/// shifts restricted to the non-redundant set (0 <= l < L for order 2,
/// 0 <= l1 <= l2 < L for order 3). noise_floor holds the predicted residual
/// standard-deviation scales per order: sqrt(sigma^2/N),
/// sqrt((sigma^2+sigma^4)/N), sqrt((sigma^2+sigma^6)/N).
struct MomentStats {
    double a1 = 0.0;
    Eigen::VectorXd a2;  // shift l in [0, L)
    Eigen::VectorXd a3;  // packed upper triangle
    std::int64_t N = 0;
    int L = 0;
    double sigma = 0.0;
    std::array<double, 3> noise_floor{};

    double at3(int l1, int l2) const { return a3[tri_index(l1, l2, L)]; }
    void validate() const;
};

/// Zero-padded autocorrelations of a signal, 1/L-normalized. a2 and a3 are
/// stored for shifts up to max_shift (default 2L-2); entries with any shift
/// >= L are structurally zero.
struct SignalMoments {
    double a1 = 0.0;
    Eigen::VectorXd a2;   // shift in [0, max_shift]
    Eigen::MatrixXd a3;   // symmetric (max_shift+1)^2 table
    int L = 0;

    int max_shift() const { return static_cast<int>(a2.size()) - 1; }
};

/// Bin-averaged, noise-bias-corrected measurement statistics at spatial
/// resolution dx (frequency-marching stage n_max).
struct CoarseStats {
    double b1 = 0.0;
    Eigen::VectorXd b2;  // coarse shift l in [0, Lp)
    Eigen::VectorXd b3;  // packed upper triangle over [0, Lp)
    int Lp = 0;
    int n_max = 0;
    double dx = 1.0;
    int L = 0;
    std::int64_t N = 0;
    double sigma = 0.0;

    double at3(int l1, int l2) const { return b3[tri_index(l1, l2, Lp)]; }
};

/// Partial sums of the first three autocorrelations over a contiguous index
/// range [begin, end) of a measurement, restricted to products that lie
/// entirely inside the range. head/tail carry up to L-1 boundary samples on
/// each side so adjacent partials can be merged exactly.
struct MomentPartial {
    std::int64_t begin = 0;
    std::int64_t end = 0;
    std::int64_t N = 0;
    int L = 0;
    double sigma = 0.0;
    double s1 = 0.0;
    Eigen::VectorXd s2;
    Eigen::VectorXd s3;
    Eigen::VectorXd head;
    Eigen::VectorXd tail;

    bool empty() const { return begin == end; }
};

/// One-pass autocorrelations of y up to order 3. Internally the measurement
/// is cut into fixed 4096-sample chunks whose partial sums are merged
/// pairwise, so the result does not depend on how the work is scheduled.
MomentStats measurement_moments(const Measurement& y);

/// Partial sums over y[begin, end).
MomentPartial partial_moments(const Measurement& y, std::int64_t begin, std::int64_t end);

/// Associative merge of partials over adjacent ranges.
MomentPartial merge_partial(const MomentPartial& a, const MomentPartial& b);

/// 1/N normalization of a completed partial (must cover [0, N)).
MomentStats finalize_partial(const MomentPartial& p);

/// Zero-padded autocorrelations of x for shifts up to max_shift (<= 2L-2).
SignalMoments signal_moments(const Signal& x, int max_shift);
SignalMoments signal_moments(const Signal& x);

/// Expected measurement statistics under the well-separated model.
MomentStats forward_ws(const Signal& x, double rho0, double sigma);

/// Expected measurement statistics under the arbitrary-spacing model;
/// reduces to forward_ws when rho1 is identically zero.
MomentStats forward_asd(const Signal& x, const DensityParams& params, double sigma);

/// Spatial resolution of AA frequency-marching stage n_max.
double aa_delta_x(int L, int n_max);
/// Spatial resolution of EM frequency-marching stage n_max.
double em_delta_x(int L, int n_max);

/// Half-open coarse bin [first, last] of bin l at resolution dx; the first
/// bin is clamped to 0 and the last bin absorbs the tail up to range_max.
/// Rounding is half-away-from-zero.
std::pair<int, int> coarse_bin(int l, int bins, double dx, int range_max);

/// Nearest-integer shift used by the coarse signal statistics.
int rounded_shift(int l, double dx);

/// Bias-corrected bin averages of measurement statistics for AA stage n_max.
CoarseStats coarsen_measurement(const MomentStats& stats, int n_max);

/// Mass-preserving rebinning of a pair separation function onto 2*Lp coarse
/// bins at the AA stage-n_max resolution; the last bin absorbs all gaps past
/// the window range.
struct CoarsePsf {
    Eigen::VectorXd mass;  // 2*Lp bins
    double dx = 1.0;
    int Lp = 0;
};
CoarsePsf coarsen_psf(const PairSeparationFunction& xi, int n_max, int L);
CoarsePsf coarsen_psf_dx(const PairSeparationFunction& xi, double dx, int L);

/// Rebins a mass vector given on coarse bins [bin_lo, bin_lo+masses.size())
/// at resolution dx_old onto bins [new_lo, new_lo+new_count) at dx_new, by
/// spreading each bin's mass uniformly over its fine-grid window. Used to
/// warm-start rho1 and shift priors across marching stages.
Eigen::VectorXd rebin_masses(const Eigen::VectorXd& masses, int bin_lo, double dx_old, int total_bins_old,
                             int new_lo, int new_count, double dx_new, int total_bins_new, int fine_max);

}  // namespace mtd
