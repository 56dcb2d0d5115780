#include "mtd/em.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>
#include <string>

#include "mtd/moments.hpp"
#include "mtd/rng.hpp"
#include "mtd/summation.hpp"
#include "mtd/threading.hpp"

namespace mtd {

namespace {

constexpr double kSigmaFloor = 1e-12;  // keeps the sigma = 0 limit finite (hard assignment)
constexpr int kSegBlock = 8192;

double safe_sigma(double sigma) { return std::max(sigma, kSigmaFloor); }

}  // namespace

SegmentSet make_segments(const Measurement& y) {
    y.validate();
    const int L = y.L;
    const auto Nd = static_cast<int>(y.N() / L);
    if (Nd < 1) throw DataError("make_segments: measurement shorter than one segment");
    SegmentSet s;
    s.L = L;
    s.sigma = y.sigma;
    s.Y.resize(L, Nd);
    for (int m = 0; m < Nd; ++m) s.Y.col(m) = y.samples.segment(static_cast<std::int64_t>(m) * L, L);
    return s;
}

EmPriors EmPriors::uniform_ws(int K) {
    EmPriors p;
    p.mode = Mode::ws;
    p.K = K;
    p.alpha = Eigen::VectorXd::Constant(2 * K, 1.0 / (2 * K));
    return p;
}

EmPriors EmPriors::uniform_asd(int K) {
    // The constraint weight of the normalization is split evenly across the
    // alpha0, alpha1, and rho1 blocks.
    EmPriors p;
    p.mode = Mode::asd;
    p.K = K;
    p.alpha0 = 1.0 / 3.0;
    p.alpha1 = 1.0 / (3.0 * (2 * K - 1));
    p.rho1 = Eigen::VectorXd::Zero(K - 1);
    double coeff_sum = 0.0;
    for (int i = 0; i < K - 1; ++i) coeff_sum += static_cast<double>(K + i) / K;
    for (int i = 0; i < K - 1; ++i) p.rho1[i] = (1.0 / 3.0) / coeff_sum;
    return p;
}

double EmPriors::single(int l) const {
    if (l < 0 || l >= 2 * K) throw DataError("EmPriors::single: shift out of range");
    if (mode == Mode::ws) return alpha[l];
    if (l == 0) return alpha0;
    const int g = std::min(l, 2 * K - l);
    double s = 0.0;
    for (int i = K - g; i <= K - 2; ++i) s += rho1[i];
    return alpha1 + s / K;
}

double EmPriors::pair_prior(int l1, int l2) const {
    if (mode != Mode::asd) throw DataError("EmPriors::pair_prior: ws priors have no pair configurations");
    if (!(l1 > K && l1 < 2 * K && l2 > 0 && l2 <= l1 - K))
        throw DataError("EmPriors::pair_prior: invalid configuration");
    return rho1[l1 - l2 - K] / K;
}

double EmPriors::constraint_residual() const {
    double s = alpha0 + (2 * K - 1) * alpha1;
    for (int i = 0; i < rho1.size(); ++i) s += (static_cast<double>(K + i) / K) * rho1[i];
    return s - 1.0;
}

void EmPriors::validate() const {
    if (K < 2) throw DataError("EmPriors: K must be >= 2");
    if (mode == Mode::ws) {
        if (alpha.size() != 2 * K) throw DataError("EmPriors: alpha must have 2K entries");
        double s = 0.0;
        for (int l = 0; l < alpha.size(); ++l) {
            if (!(alpha[l] >= 0.0)) throw DataError("EmPriors: negative alpha entry");
            s += alpha[l];
        }
        if (s <= 0.0) throw DataError("EmPriors: all-zero priors");
        if (std::abs(s - 1.0) > 1e-12) throw DataError("EmPriors: alpha does not sum to 1");
    } else {
        if (rho1.size() != K - 1) throw DataError("EmPriors: rho1 must have K-1 entries");
        if (!(alpha0 >= 0.0 && alpha1 >= 0.0)) throw DataError("EmPriors: negative parameter");
        for (int i = 0; i < rho1.size(); ++i)
            if (!(rho1[i] >= 0.0)) throw DataError("EmPriors: negative rho1 entry");
        if (alpha0 + alpha1 + rho1.sum() <= 0.0) throw DataError("EmPriors: all-zero priors");
        if (std::abs(constraint_residual()) > 1e-12)
            throw DataError("EmPriors: normalization constraint violated");
    }
}

Eigen::VectorXd shift_template(const Signal& x, int l) {
    const int L = x.length();
    if (l < 0 || l >= 2 * L) throw DataError("shift_template: shift out of range [0, 2L)");
    Eigen::VectorXd t = Eigen::VectorXd::Zero(L);
    for (int i = 0; i < L; ++i) {
        const int idx = (i + l) % (2 * L);
        if (idx >= L) t[i] = x.values[idx - L];
    }
    return t;
}

namespace {

// Configuration set of one frequency-marching stage: coarse shifts l map to
// the rounded fine shifts round(l * dx). For dx >= 1 the rounding is
// injective, so deduplication never triggers; it is still checked.
struct StageConfigs {
    int L = 0;
    int K = 0;
    double dx = 1.0;
    std::vector<int> single_fine;                  // per config, coarse l = index
    std::vector<std::pair<int, int>> pair_fine;    // asd only
    std::vector<std::pair<int, int>> pair_coarse;  // coarse labels of pair configs

    int count() const { return static_cast<int>(single_fine.size() + pair_fine.size()); }
};

StageConfigs build_stage(int L, double dx, Mode mode) {
    StageConfigs st;
    st.L = L;
    st.dx = dx;
    st.K = static_cast<int>(std::llround(L / dx));
    const int K = st.K;
    std::set<int> seen;
    for (int l = 0; l < 2 * K; ++l) {
        const int fine = rounded_shift(l, dx);
        if (!seen.insert(fine).second)
            throw NumericalError("build_stage: duplicate rounded shift at dx >= 1");
        st.single_fine.push_back(fine);
    }
    if (mode == Mode::asd) {
        for (int l1 = K + 1; l1 < 2 * K; ++l1) {
            for (int l2 = 1; l2 <= l1 - K; ++l2) {
                st.pair_fine.emplace_back(rounded_shift(l1, dx), rounded_shift(l2, dx));
                st.pair_coarse.emplace_back(l1, l2);
            }
        }
    }
    return st;
}

Eigen::MatrixXd stage_templates(const StageConfigs& st, const Signal& x) {
    Eigen::MatrixXd T(st.L, st.count());
    int c = 0;
    for (const int l : st.single_fine) T.col(c++) = shift_template(x, l);
    for (const auto& [l1, l2] : st.pair_fine)
        T.col(c++) = shift_template(x, l1) + shift_template(x, l2);
    return T;
}

// E-step and data log-likelihood in one pass. Posterior columns are written
// into P_out when non-null. Segments are processed in fixed blocks so the
// result does not depend on scheduling.
double em_pass(const SegmentSet& segs, const Signal& x, const EmPriors& priors, const StageConfigs& st,
               Eigen::MatrixXd* P_out) {
    priors.validate();
    if (priors.K != st.K) throw DataError("em_pass: priors built for a different stage");
    if (x.length() != segs.L) throw DataError("em_pass: signal length mismatch");
    const int C = st.count();
    const int S = static_cast<int>(st.single_fine.size());
    const int Nd = segs.count();
    const double sig = safe_sigma(segs.sigma);
    const double inv_var = 1.0 / (sig * sig);

    const Eigen::MatrixXd T = stage_templates(st, x);
    Eigen::VectorXd half_tnorm(C);
    for (int c = 0; c < C; ++c) half_tnorm[c] = 0.5 * T.col(c).squaredNorm();
    Eigen::VectorXd log_prior(C);
    for (int c = 0; c < C; ++c) {
        const double pr = c < S ? priors.single(c)
                                : priors.pair_prior(st.pair_coarse[c - S].first, st.pair_coarse[c - S].second);
        log_prior[c] = pr > 0.0 ? std::log(pr) : -std::numeric_limits<double>::infinity();
    }
    const double log_norm = -0.5 * st.L * std::log(2.0 * M_PI * sig * sig);

    if (P_out) P_out->resize(C, Nd);
    std::vector<double> block_ll;
    block_ll.reserve(static_cast<std::size_t>(Nd / kSegBlock) + 1);
    Eigen::VectorXd v(C);
    std::vector<double> seg_ll(kSegBlock);
    for (int b0 = 0; b0 < Nd; b0 += kSegBlock) {
        const int bn = std::min(kSegBlock, Nd - b0);
        const Eigen::MatrixXd corr = T.transpose() * segs.Y.middleCols(b0, bn);  // C x bn
        for (int m = 0; m < bn; ++m) {
            double vmax = -std::numeric_limits<double>::infinity();
            for (int c = 0; c < C; ++c) {
                v[c] = (corr(c, m) - half_tnorm[c]) * inv_var + log_prior[c];
                vmax = std::max(vmax, v[c]);
            }
            if (!std::isfinite(vmax))
                throw NumericalError("em_pass: all configurations have zero prior");
            double z = 0.0;
            for (int c = 0; c < C; ++c) {
                const double e = std::exp(v[c] - vmax);
                z += e;
                if (P_out) (*P_out)(c, b0 + m) = e;
            }
            if (P_out) P_out->col(b0 + m) /= z;
            seg_ll[m] = vmax + std::log(z) - 0.5 * segs.Y.col(b0 + m).squaredNorm() * inv_var + log_norm;
        }
        block_ll.push_back(pairwise_sum(seg_ll.data(), bn));
    }
    return pairwise_sum(block_ll);
}

PosteriorTable make_table(const StageConfigs& st, Mode mode) {
    PosteriorTable t;
    t.mode = mode;
    t.L = st.L;
    t.K = st.K;
    t.dx = st.dx;
    t.single_fine = st.single_fine;
    t.pair_fine = st.pair_fine;
    t.pair_coarse = st.pair_coarse;
    return t;
}

}  // namespace

PosteriorTable e_step(const SegmentSet& segments, const Signal& x, const EmPriors& priors) {
    const StageConfigs st = build_stage(segments.L, 1.0, priors.mode);
    if (priors.K != segments.L) throw DataError("e_step: priors must be full resolution (K = L)");
    PosteriorTable t = make_table(st, priors.mode);
    em_pass(segments, x, priors, st, &t.P);
    return t;
}

Signal m_step_signal(const SegmentSet& segments, const PosteriorTable& post) {
    const int L = segments.L;
    if (post.L != L) throw DataError("m_step_signal: table built for a different L");
    if (post.P.cols() != segments.count()) throw DataError("m_step_signal: segment count mismatch");
    const int S = post.singles();

    const Eigen::MatrixXd G = post.P * segments.Y.transpose();  // C x L, G(c, q)
    const Eigen::VectorXd rowsum = post.P.rowwise().sum();

    Eigen::VectorXd num = Eigen::VectorXd::Zero(L);
    Eigen::VectorXd den = Eigen::VectorXd::Zero(L);
    for (int c = 0; c < S; ++c) {
        const int l = post.single_fine[c];
        if (l == 0) continue;
        for (int j = std::max(0, l - L); j <= std::min(L - 1, l - 1); ++j) {
            num[j] += G(c, j + L - l);
            den[j] += rowsum[c];
        }
    }
    for (int c = 0; c < post.pairs(); ++c) {
        const auto [l1, l2] = post.pair_fine[c];
        const int row = S + c;
        for (int j = l1 - L; j <= L - 1; ++j) {
            num[j] += G(row, j + L - l1);
            den[j] += rowsum[row];
        }
        for (int j = 0; j <= l2 - 1; ++j) {
            num[j] += G(row, j + L - l2);
            den[j] += rowsum[row];
        }
    }
    Signal out;
    out.values.resize(L);
    for (int j = 0; j < L; ++j) {
        if (den[j] <= 0.0)
            throw NumericalError("m_step_signal: zero posterior mass for signal coordinate " +
                                 std::to_string(j));
        out.values[j] = num[j] / den[j];
    }
    return out;
}

Eigen::VectorXd m_step_prior_ws(const PosteriorTable& post) {
    if (post.mode != Mode::ws) throw DataError("m_step_prior_ws: table is not in ws mode");
    const Eigen::VectorXd rowsum = post.P.rowwise().sum();
    return rowsum / static_cast<double>(post.P.cols());
}

namespace {

// Prior-block objective on the constraint polytope, with weights already
// normalized to sum 1. theta layout: [alpha0, alpha1, rho1...].
struct FwObjective {
    int K;
    Eigen::VectorXd wg;      // weights grouped by g = min(l, 2K-l), index 1..K
    double w0;               // weight of the no-occurrence configuration
    Eigen::VectorXd w_pair;  // weights per gap index i (gap K+i)
    Eigen::VectorXd cvec;    // constraint coefficients

    double alpha_of_g(const Eigen::VectorXd& th, int g) const {
        double s = 0.0;
        for (int i = K - g; i <= K - 2; ++i) s += th[2 + i];
        return th[1] + s / K;
    }

    double value(const Eigen::VectorXd& th) const {
        double val = 0.0;
        if (w0 > 0.0) val += w0 * std::log(th[0]);
        for (int g = 1; g <= K; ++g)
            if (wg[g] > 0.0) val += wg[g] * std::log(alpha_of_g(th, g));
        for (int i = 0; i < K - 1; ++i)
            if (w_pair[i] > 0.0) val += w_pair[i] * (std::log(th[2 + i]) - std::log(static_cast<double>(K)));
        return val;
    }

    Eigen::VectorXd gradient(const Eigen::VectorXd& th) const {
        Eigen::VectorXd g_out = Eigen::VectorXd::Zero(th.size());
        if (w0 > 0.0) g_out[0] = w0 / th[0];
        Eigen::VectorXd ratio(K + 1);
        for (int g = 1; g <= K; ++g) ratio[g] = wg[g] > 0.0 ? wg[g] / alpha_of_g(th, g) : 0.0;
        double rsum = 0.0;
        for (int g = 1; g <= K; ++g) rsum += ratio[g];
        g_out[1] = rsum;
        for (int i = 0; i < K - 1; ++i) {
            double s = 0.0;
            for (int g = K - i; g <= K; ++g) s += ratio[g];
            g_out[2 + i] = s / K;
            if (w_pair[i] > 0.0) g_out[2 + i] += w_pair[i] / th[2 + i];
        }
        return g_out;
    }
};

}  // namespace

AsdPriorParams frank_wolfe_prior(const Eigen::VectorXd& w_single, const Eigen::VectorXd& w_pair_gap,
                                 int K, const AsdPriorParams* warm, const FwOptions& opts,
                                 FwDiagnostics* diag) {
    if (w_single.size() != 2 * K || w_pair_gap.size() != K - 1)
        throw DataError("frank_wolfe_prior: weight vector sizes inconsistent with K");
    const int dim = K + 1;
    FwObjective obj;
    obj.K = K;
    const double total = w_single.sum() + w_pair_gap.sum();
    if (!(total > 0.0)) throw NumericalError("frank_wolfe_prior: zero total weight");
    obj.w0 = w_single[0] / total;
    obj.wg = Eigen::VectorXd::Zero(K + 1);
    for (int l = 1; l < 2 * K; ++l) obj.wg[std::min(l, 2 * K - l)] += w_single[l] / total;
    obj.w_pair = w_pair_gap / total;
    obj.cvec = Eigen::VectorXd::Zero(dim);
    obj.cvec[0] = 1.0;
    obj.cvec[1] = 2.0 * K - 1.0;
    for (int i = 0; i < K - 1; ++i) obj.cvec[2 + i] = static_cast<double>(K + i) / K;

    Eigen::VectorXd th(dim);
    if (warm) {
        th[0] = std::max(warm->alpha0, 0.0);
        th[1] = std::max(warm->alpha1, 0.0);
        for (int i = 0; i < K - 1; ++i) th[2 + i] = std::max(warm->rho1[i], 0.0);
        const double s = obj.cvec.dot(th);
        if (s > 0.0)
            th /= s;
        else
            warm = nullptr;
    }
    if (!warm) {
        const EmPriors u = EmPriors::uniform_asd(K);
        th[0] = u.alpha0;
        th[1] = u.alpha1;
        th.tail(K - 1) = u.rho1;
    }

    FwDiagnostics local;
    for (local.iterations = 0; local.iterations < opts.max_iters; ++local.iterations) {
        const Eigen::VectorXd g = obj.gradient(th);
        int jstar = 0;
        double best = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < dim; ++j) {
            const double ratio = g[j] / obj.cvec[j];
            if (ratio > best) {
                best = ratio;
                jstar = j;
            }
        }
        Eigen::VectorXd v = Eigen::VectorXd::Zero(dim);
        v[jstar] = 1.0 / obj.cvec[jstar];
        const Eigen::VectorXd dir = v - th;
        local.gap = g.dot(dir);
        if (local.gap <= opts.gap_tol) {
            local.converged = true;
            break;
        }
        // Exact line search: bisection on the (decreasing) directional
        // derivative of the concave slice.
        auto slope = [&](double t) {
            const Eigen::VectorXd p = th + t * dir;
            double s = 0.0;
            if (obj.w0 > 0.0) s += obj.w0 / p[0] * dir[0];
            for (int g2 = 1; g2 <= K; ++g2) {
                if (obj.wg[g2] <= 0.0) continue;
                double ag = obj.alpha_of_g(p, g2);
                double dg = dir[1];
                for (int i = K - g2; i <= K - 2; ++i) dg += dir[2 + i] / K;
                if (ag <= 0.0) return dg > 0.0 ? std::numeric_limits<double>::infinity()
                                               : -std::numeric_limits<double>::infinity();
                s += obj.wg[g2] / ag * dg;
            }
            for (int i = 0; i < K - 1; ++i) {
                if (obj.w_pair[i] <= 0.0) continue;
                if (p[2 + i] <= 0.0)
                    return dir[2 + i] > 0.0 ? std::numeric_limits<double>::infinity()
                                            : -std::numeric_limits<double>::infinity();
                s += obj.w_pair[i] / p[2 + i] * dir[2 + i];
            }
            return s;
        };
        double lo = 0.0, hi = 1.0;
        if (slope(0.0) <= 0.0) break;  // no ascent along the vertex direction
        if (slope(1.0) >= 0.0) {
            th = v;
            continue;
        }
        for (int b = 0; b < opts.bisect_iters; ++b) {
            const double mid = 0.5 * (lo + hi);
            if (slope(mid) > 0.0)
                lo = mid;
            else
                hi = mid;
        }
        th += (0.5 * (lo + hi)) * dir;
    }
    // Keep the iterate exactly on the constraint hyperplane.
    th /= obj.cvec.dot(th);

    if (diag) *diag = local;
    AsdPriorParams out;
    out.alpha0 = th[0];
    out.alpha1 = th[1];
    out.rho1 = th.tail(K - 1);
    return out;
}

AsdPriorParams m_step_prior_asd(const PosteriorTable& post, const AsdPriorParams* warm,
                                const FwOptions& opts, FwDiagnostics* diag) {
    if (post.mode != Mode::asd) throw DataError("m_step_prior_asd: table is not in asd mode");
    const int K = post.K;
    const Eigen::VectorXd rowsum = post.P.rowwise().sum();
    Eigen::VectorXd w_single = rowsum.head(post.singles());
    Eigen::VectorXd w_pair = Eigen::VectorXd::Zero(K - 1);
    for (int c = 0; c < post.pairs(); ++c) {
        const auto [l1, l2] = post.pair_coarse[c];
        w_pair[l1 - l2 - K] += rowsum[post.singles() + c];
    }
    return frank_wolfe_prior(w_single, w_pair, K, warm, opts, diag);
}

double log_likelihood(const SegmentSet& segments, const Signal& x, const EmPriors& priors) {
    if (priors.K != segments.L)
        throw DataError("log_likelihood: priors must be full resolution (K = L)");
    const StageConfigs st = build_stage(segments.L, 1.0, priors.mode);
    return em_pass(segments, x, priors, st, nullptr);
}

namespace {

struct EmRestartOutcome {
    bool ok = false;
    std::string error;
    double ll = -std::numeric_limits<double>::infinity();
    Signal x;
    EmPriors priors;
    std::vector<double> stage_ll;
    std::vector<int> stage_iters;
    std::vector<std::vector<double>> traces;
    bool fw_flag = false;
};

EmPriors rebin_priors(const EmPriors& prev, int K_new, double dx_new, int L) {
    const int fine_max = 2 * L - 1;
    EmPriors next;
    next.mode = prev.mode;
    next.K = K_new;
    const double dx_old = static_cast<double>(L) / prev.K;
    if (prev.mode == Mode::ws) {
        next.alpha = rebin_masses(prev.alpha, 0, dx_old, 2 * prev.K, 0, 2 * K_new, dx_new, 2 * K_new,
                                  fine_max);
        const double s = next.alpha.sum();
        if (s > 0.0)
            next.alpha /= s;
        else
            next.alpha.setConstant(1.0 / (2 * K_new));
    } else {
        next.rho1 = rebin_masses(prev.rho1, prev.K, dx_old, 2 * prev.K, K_new, K_new - 1, dx_new,
                                 2 * K_new, fine_max);
        next.alpha0 = std::max(prev.alpha0, 0.0);
        double coeff = 0.0;
        for (int i = 0; i < K_new - 1; ++i)
            coeff += (static_cast<double>(K_new + i) / K_new) * next.rho1[i];
        next.alpha1 = std::max(0.0, (1.0 - next.alpha0 - coeff) / (2 * K_new - 1));
        // Rescale onto the constraint hyperplane.
        const double s = next.alpha0 + (2 * K_new - 1) * next.alpha1 + coeff;
        if (s > 0.0) {
            next.alpha0 /= s;
            next.alpha1 /= s;
            next.rho1 /= s;
        } else {
            next = EmPriors::uniform_asd(K_new);
        }
    }
    return next;
}

}  // namespace

EstimateReport estimate_em(const Measurement& y, Mode mode, const EmConfig& cfg, std::uint64_t seed) {
    y.validate();
    if (y.N() < 2 * y.L) throw DataError("estimate_em: need N >= 2L");
    if (cfg.restarts < 1) throw DataError("estimate_em: restarts must be >= 1");
    const auto t0 = std::chrono::steady_clock::now();
    const SegmentSet segs = make_segments(y);
    const int L = y.L;
    const int n_stages = (L + 1) / 2;

    std::vector<EmRestartOutcome> outcomes(cfg.restarts);
    parallel_for(cfg.restarts, [&](int r) {
        EmRestartOutcome& out = outcomes[r];
        try {
            Rng rng(derive_seed(seed, {0xE3u, static_cast<std::uint64_t>(r)}));
            Signal x;
            x.values.resize(L);
            for (int j = 0; j < L; ++j) x.values[j] = rng.normal();
            x.values *= std::sqrt(static_cast<double>(L)) / x.values.norm();

            EmPriors priors;
            for (int n = 1; n <= n_stages; ++n) {
                const double dx = em_delta_x(L, n);
                const int K = static_cast<int>(std::llround(L / dx));
                const StageConfigs st = build_stage(L, dx, mode);
                if (n == 1)
                    priors = mode == Mode::ws ? EmPriors::uniform_ws(K) : EmPriors::uniform_asd(K);
                else
                    priors = rebin_priors(priors, K, dx, L);

                std::vector<double> lls;
                int iter = 0;
                Eigen::MatrixXd P;
                for (; iter < cfg.max_iters; ++iter) {
                    const double ll = em_pass(segs, x, priors, st, &P);
                    lls.push_back(ll);
                    PosteriorTable table = make_table(st, mode);
                    table.P = std::move(P);
                    Signal x_next = m_step_signal(segs, table);
                    if (mode == Mode::ws) {
                        priors.alpha = m_step_prior_ws(table);
                    } else {
                        AsdPriorParams warm{priors.alpha0, priors.alpha1, priors.rho1};
                        FwDiagnostics fw;
                        const AsdPriorParams upd = m_step_prior_asd(table, &warm, cfg.fw, &fw);
                        out.fw_flag = out.fw_flag || !fw.converged;
                        priors.alpha0 = upd.alpha0;
                        priors.alpha1 = upd.alpha1;
                        priors.rho1 = upd.rho1;
                    }
                    P = std::move(table.P);
                    const double rel = (x_next.values - x.values).norm() / x.values.norm();
                    x = std::move(x_next);
                    if (rel < cfg.x_tol) {
                        ++iter;
                        break;
                    }
                }
                out.stage_iters.push_back(iter);
                out.stage_ll.push_back(lls.empty() ? 0.0 : lls.back());
                if (cfg.record_trace) out.traces.push_back(std::move(lls));
            }
            const StageConfigs final_stage = build_stage(L, 1.0, mode);
            out.ll = em_pass(segs, x, priors, final_stage, nullptr);
            out.x = std::move(x);
            out.priors = std::move(priors);
            out.ok = true;
        } catch (const std::exception& e) {
            out.ok = false;
            out.error = e.what();
        }
    }, cfg.threads);

    int best = -1;
    for (int r = 0; r < cfg.restarts; ++r) {
        if (!outcomes[r].ok) continue;
        if (best < 0 || outcomes[r].ll > outcomes[best].ll) best = r;
    }
    if (best < 0)
        throw NumericalError("estimate_em: all restarts failed; last error: " + outcomes.back().error);

    EmRestartOutcome& win = outcomes[best];
    EstimateReport rep;
    rep.method = "em";
    rep.mode = mode;
    rep.x_hat = win.x;
    rep.log_likelihood = win.ll;
    rep.stage_costs = win.stage_ll;
    rep.stage_iterations = win.stage_iters;
    rep.chosen_restart = best;
    rep.seed = seed;
    rep.fw_gap_flag = win.fw_flag;
    rep.ll_trace = std::move(win.traces);
    rep.rho0_hat = L * win.priors.single(L);
    if (mode == Mode::ws) {
        rep.em_alpha = win.priors.alpha;
    } else {
        rep.em_alpha0 = win.priors.alpha0;
        rep.em_alpha1 = win.priors.alpha1;
        rep.rho1_hat = win.priors.rho1;
    }
    rep.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

}  // namespace mtd
