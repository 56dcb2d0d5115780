#include "mtd/moments.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "mtd/summation.hpp"

namespace mtd {

void MomentStats::validate() const {
    if (L <= 0) throw DataError("moment stats: invalid L");
    if (a2.size() != L || a3.size() != tri_count(L))
        throw DataError("moment stats: array sizes inconsistent with L");
    if (!std::isfinite(a1) || !a2.allFinite() || !a3.allFinite())
        throw DataError("moment stats: non-finite entries");
}

namespace {

std::array<double, 3> noise_floor_scales(double sigma, std::int64_t N) {
    if (N <= 0) return {0.0, 0.0, 0.0};
    const double s2 = sigma * sigma;
    return {std::sqrt(s2 / N), std::sqrt((s2 + s2 * s2) / N), std::sqrt((s2 + s2 * s2 * s2) / N)};
}

// Sums products fully contained in [begin, end) with base index i.
void accumulate_inside(const double* y, std::int64_t begin, std::int64_t end, int L, double& s1,
                       Eigen::VectorXd& s2, Eigen::VectorXd& s3) {
    for (std::int64_t i = begin; i < end; ++i) {
        const double yi = y[i];
        s1 += yi;
        const int lim = static_cast<int>(std::min<std::int64_t>(L - 1, end - 1 - i));
        for (int l1 = 0; l1 <= lim; ++l1) {
            const double q = yi * y[i + l1];
            s2[l1] += q;
            double* row = s3.data() + tri_index(l1, l1, L) - l1;
            for (int l2 = l1; l2 <= lim; ++l2) row[l2] += q * y[i + l2];
        }
    }
}

}  // namespace

MomentPartial partial_moments(const Measurement& y, std::int64_t begin, std::int64_t end) {
    if (begin < 0 || end > y.N() || begin > end) throw DataError("partial_moments: bad range");
    const int L = y.L;
    MomentPartial p;
    p.begin = begin;
    p.end = end;
    p.N = y.N();
    p.L = L;
    p.sigma = y.sigma;
    p.s2 = Eigen::VectorXd::Zero(L);
    p.s3 = Eigen::VectorXd::Zero(tri_count(L));
    accumulate_inside(y.samples.data(), begin, end, L, p.s1, p.s2, p.s3);
    const std::int64_t len = end - begin;
    const std::int64_t carry = std::min<std::int64_t>(L - 1, len);
    p.head = y.samples.segment(begin, carry);
    p.tail = y.samples.segment(end - carry, carry);
    return p;
}

MomentPartial merge_partial(const MomentPartial& a, const MomentPartial& b) {
    if (a.empty()) return b;
    if (b.empty()) return a;
    if (a.N != b.N || a.L != b.L || a.sigma != b.sigma)
        throw DataError("merge_partial: incompatible (N, L, sigma) metadata");
    if (a.end != b.begin) throw DataError("merge_partial: ranges not adjacent");
    const int L = a.L;
    MomentPartial m;
    m.begin = a.begin;
    m.end = b.end;
    m.N = a.N;
    m.L = L;
    m.sigma = a.sigma;
    m.s1 = a.s1 + b.s1;
    m.s2 = a.s2 + b.s2;
    m.s3 = a.s3 + b.s3;

    // Products that straddle the boundary c = a.end: base index i within
    // L-1 samples of c, largest index at or past c but inside [begin, end).
    const std::int64_t c = a.end;
    const std::int64_t tail_len = a.tail.size();
    const std::int64_t head_len = b.head.size();
    auto sample = [&](std::int64_t j) {
        return j < c ? a.tail[j - (c - tail_len)] : b.head[j - c];
    };
    const std::int64_t i_lo = std::max(a.begin, c - (L - 1));
    for (std::int64_t i = i_lo; i < c; ++i) {
        const double yi = sample(i);
        const int lim = static_cast<int>(std::min<std::int64_t>(L - 1, b.end - 1 - i));
        const int cross = static_cast<int>(c - i);
        for (int l = cross; l <= lim; ++l) m.s2[l] += yi * sample(i + l);
        for (int l1 = 0; l1 <= lim; ++l1) {
            const double q = yi * sample(i + l1);
            for (int l2 = std::max(l1, cross); l2 <= lim; ++l2)
                m.s3[tri_index(l1, l2, L)] += q * sample(i + l2);
        }
    }

    const std::int64_t len = m.end - m.begin;
    const std::int64_t carry = std::min<std::int64_t>(L - 1, len);
    if (a.end - a.begin >= carry) {
        m.head = a.head.head(carry);
    } else {
        m.head.resize(carry);
        m.head << a.head, b.head.head(carry - a.head.size());
    }
    if (b.end - b.begin >= carry) {
        m.tail = b.tail.tail(carry);
    } else {
        m.tail.resize(carry);
        m.tail << a.tail.tail(carry - b.tail.size()), b.tail;
    }
    return m;
}

MomentStats finalize_partial(const MomentPartial& p) {
    if (p.begin != 0 || p.end != p.N)
        throw DataError("finalize_partial: partial does not cover the full measurement");
    MomentStats s;
    s.N = p.N;
    s.L = p.L;
    s.sigma = p.sigma;
    const double inv = 1.0 / static_cast<double>(p.N);
    s.a1 = p.s1 * inv;
    s.a2 = p.s2 * inv;
    s.a3 = p.s3 * inv;
    s.noise_floor = noise_floor_scales(p.sigma, p.N);
    return s;
}

namespace {

MomentPartial merge_tree(const std::vector<MomentPartial>& parts, std::size_t lo, std::size_t hi) {
    if (hi - lo == 1) return parts[lo];
    const std::size_t mid = lo + (hi - lo) / 2;
    return merge_partial(merge_tree(parts, lo, mid), merge_tree(parts, mid, hi));
}

}  // namespace

MomentStats measurement_moments(const Measurement& y) {
    y.validate();
    if (y.N() < 2 * y.L) throw DataError("measurement_moments: need N >= 2L");
    const std::int64_t N = y.N();
    std::vector<MomentPartial> parts;
    parts.reserve(static_cast<std::size_t>((N + kSumChunk - 1) / kSumChunk));
    for (std::int64_t b = 0; b < N; b += kSumChunk)
        parts.push_back(partial_moments(y, b, std::min<std::int64_t>(N, b + kSumChunk)));
    return finalize_partial(merge_tree(parts, 0, parts.size()));
}

SignalMoments signal_moments(const Signal& x, int max_shift) {
    x.validate();
    const int L = x.length();
    if (max_shift > 2 * L - 2) throw DataError("signal_moments: max_shift beyond 2L-2");
    SignalMoments sm;
    sm.L = L;
    const double inv = 1.0 / L;
    sm.a1 = x.values.sum() * inv;
    sm.a2 = Eigen::VectorXd::Zero(max_shift + 1);
    for (int l = 0; l <= std::min(max_shift, L - 1); ++l) {
        double s = 0.0;
        for (int k = 0; k + l < L; ++k) s += x.values[k] * x.values[k + l];
        sm.a2[l] = s * inv;
    }
    sm.a3 = Eigen::MatrixXd::Zero(max_shift + 1, max_shift + 1);
    for (int u = 0; u <= std::min(max_shift, L - 1); ++u) {
        for (int v = u; v <= std::min(max_shift, L - 1); ++v) {
            double s = 0.0;
            for (int k = 0; k + v < L; ++k) s += x.values[k] * x.values[k + u] * x.values[k + v];
            sm.a3(u, v) = s * inv;
            sm.a3(v, u) = s * inv;
        }
    }
    return sm;
}

SignalMoments signal_moments(const Signal& x) { return signal_moments(x, 2 * x.length() - 2); }

namespace detail {

// Shared predictor for the forward models and the least-squares costs: both
// must produce bitwise-identical values so residuals vanish exactly at the
// generating parameters.
void predict_moments(const SignalMoments& sm, double rho0, const Eigen::VectorXd* rho1, double sigma,
                     double& a1, Eigen::VectorXd& a2, Eigen::VectorXd& a3) {
    const int L = sm.L;
    const double s2 = sigma * sigma;
    a1 = rho0 * sm.a1;
    a2.resize(L);
    for (int l = 0; l < L; ++l) {
        double v = rho0 * sm.a2[l];
        if (l == 0) v += s2;
        if (rho1) {
            for (int j = L; j <= L + l - 1; ++j) v += (*rho1)[j - L] * sm.a2[j - l];
        }
        a2[l] = v;
    }
    a3.resize(tri_count(L));
    for (int l1 = 0; l1 < L; ++l1) {
        for (int l2 = l1; l2 < L; ++l2) {
            const int D = (l1 == 0) + (l2 == 0) + (l1 == l2);
            double v = rho0 * sm.a3(l1, l2) + rho0 * sm.a1 * s2 * D;
            if (rho1) {
                for (int j = L; j <= L + l2 - l1 - 1; ++j)
                    v += (*rho1)[j - L] * sm.a3(j - l2, j + l1 - l2);
                for (int j = L; j <= L + l1 - 1; ++j) v += (*rho1)[j - L] * sm.a3(l2 - l1, j - l1);
            }
            a3[tri_index(l1, l2, L)] = v;
        }
    }
}

}  // namespace detail

namespace {

MomentStats forward_common(const Signal& x, double rho0, const Eigen::VectorXd* rho1, double sigma) {
    const SignalMoments sm = signal_moments(x);
    MomentStats s;
    s.L = x.length();
    s.N = 0;
    s.sigma = sigma;
    s.noise_floor = {0.0, 0.0, 0.0};
    detail::predict_moments(sm, rho0, rho1, sigma, s.a1, s.a2, s.a3);
    return s;
}

}  // namespace

MomentStats forward_ws(const Signal& x, double rho0, double sigma) {
    if (!(rho0 > 0.0 && rho0 <= 1.0)) throw DataError("forward_ws: rho0 outside (0, 1]");
    return forward_common(x, rho0, nullptr, sigma);
}

MomentStats forward_asd(const Signal& x, const DensityParams& params, double sigma) {
    params.validate();
    if (params.rho1.size() != x.length() - 1) throw DataError("forward_asd: rho1 must have L-1 entries");
    return forward_common(x, params.rho0, &params.rho1, sigma);
}

double aa_delta_x(int L, int n_max) {
    if (L % 2 == 1 && n_max == (L - 1) / 2) return 1.0;
    return L / (2.0 * n_max);
}

double em_delta_x(int L, int n_max) { return std::max(1.0, L / (2.0 * n_max)); }

int rounded_shift(int l, double dx) { return static_cast<int>(std::llround(l * dx)); }

namespace {

// boundary(l) of the tiling of [0, range_max] into `bins` windows; the
// interior boundaries follow round((l - 1/2) * dx), half away from zero.
std::int64_t bin_boundary(int l, int bins, double dx, int range_max) {
    if (l <= 0) return 0;
    if (l >= bins) return static_cast<std::int64_t>(range_max) + 1;
    return std::max<std::int64_t>(0, std::llround(std::round((l - 0.5) * dx)));
}

}  // namespace

std::pair<int, int> coarse_bin(int l, int bins, double dx, int range_max) {
    const auto lo = bin_boundary(l, bins, dx, range_max);
    const auto hi = bin_boundary(l + 1, bins, dx, range_max) - 1;
    return {static_cast<int>(lo), static_cast<int>(hi)};
}

CoarseStats coarsen_measurement(const MomentStats& stats, int n_max) {
    stats.validate();
    const int L = stats.L;
    if (n_max < 1 || n_max > L / 2) throw DataError("coarsen_measurement: n_max outside [1, L/2]");
    const double dx = aa_delta_x(L, n_max);
    const int Lp = static_cast<int>(std::llround(L / dx));
    const double s2 = stats.sigma * stats.sigma;

    CoarseStats cs;
    cs.Lp = Lp;
    cs.n_max = n_max;
    cs.dx = dx;
    cs.L = L;
    cs.N = stats.N;
    cs.sigma = stats.sigma;
    cs.b1 = stats.a1;
    cs.b2 = Eigen::VectorXd::Zero(Lp);
    cs.b3 = Eigen::VectorXd::Zero(tri_count(Lp));

    std::vector<std::pair<int, int>> bins(Lp);
    for (int l = 0; l < Lp; ++l) {
        bins[l] = coarse_bin(l, Lp, dx, L - 1);
        if (bins[l].first > bins[l].second)
            throw DataError("coarsen_measurement: empty bin at index " + std::to_string(l));
    }
    for (int l = 0; l < Lp; ++l) {
        double sum = 0.0;
        int count = 0;
        for (int i = bins[l].first; i <= bins[l].second; ++i) {
            sum += stats.a2[i] - (i == 0 ? s2 : 0.0);
            ++count;
        }
        cs.b2[l] = sum / count;
    }
    for (int l1 = 0; l1 < Lp; ++l1) {
        for (int l2 = l1; l2 < Lp; ++l2) {
            double sum = 0.0;
            int count = 0;
            for (int i1 = bins[l1].first; i1 <= bins[l1].second; ++i1) {
                for (int i2 = std::max(i1, bins[l2].first); i2 <= bins[l2].second; ++i2) {
                    const int D = (i1 == 0) + (i2 == 0) + (i1 == i2);
                    sum += stats.at3(i1, i2) - stats.a1 * s2 * D;
                    ++count;
                }
            }
            if (count == 0)
                throw DataError("coarsen_measurement: empty order-3 bin (" + std::to_string(l1) + ", " +
                                std::to_string(l2) + ")");
            cs.b3[tri_index(l1, l2, Lp)] = sum / count;
        }
    }
    return cs;
}

CoarsePsf coarsen_psf_dx(const PairSeparationFunction& xi, double dx, int L) {
    xi.validate();
    const int Lp = static_cast<int>(std::llround(L / dx));
    CoarsePsf out;
    out.dx = dx;
    out.Lp = Lp;
    out.mass = Eigen::VectorXd::Zero(2 * Lp);
    const int bins = 2 * Lp;
    const int range_max = std::max(xi.max_gap(), static_cast<int>(bin_boundary(bins - 1, bins, dx, xi.max_gap())));
    for (int g = 0; g <= xi.max_gap(); ++g) {
        if (xi.mass[g] == 0.0) continue;
        int l = std::min(bins - 1, static_cast<int>(g / dx + 0.5));
        while (l > 0 && g < bin_boundary(l, bins, dx, range_max)) --l;
        while (l < bins - 1 && g >= bin_boundary(l + 1, bins, dx, range_max)) ++l;
        out.mass[l] += xi.mass[g];
    }
    return out;
}

CoarsePsf coarsen_psf(const PairSeparationFunction& xi, int n_max, int L) {
    if (n_max < 1) throw DataError("coarsen_psf: n_max must be >= 1");
    return coarsen_psf_dx(xi, aa_delta_x(L, n_max), L);
}

Eigen::VectorXd rebin_masses(const Eigen::VectorXd& masses, int bin_lo, double dx_old, int total_bins_old,
                             int new_lo, int new_count, double dx_new, int total_bins_new, int fine_max) {
    Eigen::VectorXd fine = Eigen::VectorXd::Zero(fine_max + 1);
    for (int i = 0; i < masses.size(); ++i) {
        if (masses[i] == 0.0) continue;
        auto [lo, hi] = coarse_bin(bin_lo + i, total_bins_old, dx_old, fine_max);
        lo = std::min(lo, fine_max);
        hi = std::min(hi, fine_max);
        const double share = masses[i] / (hi - lo + 1);
        for (int g = lo; g <= hi; ++g) fine[g] += share;
    }
    Eigen::VectorXd out = Eigen::VectorXd::Zero(new_count);
    for (int i = 0; i < new_count; ++i) {
        auto [lo, hi] = coarse_bin(new_lo + i, total_bins_new, dx_new, fine_max);
        for (int g = lo; g <= std::min(hi, fine_max); ++g) out[i] += fine[g];
    }
    return out;
}

}  // namespace mtd
