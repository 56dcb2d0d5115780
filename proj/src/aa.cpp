#include "mtd/aa.hpp"

#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "mtd/optim.hpp"
#include "mtd/rng.hpp"
#include "mtd/threading.hpp"

namespace mtd {

namespace detail {
void predict_moments(const SignalMoments& sm, double rho0, const Eigen::VectorXd* rho1, double sigma,
                     double& a1, Eigen::VectorXd& a2, Eigen::VectorXd& a3);
}

Eigen::VectorXd FourierParams::synthesize() const {
    Eigen::VectorXd x = Eigen::VectorXd::Constant(L, c[0]);
    for (int n = 1; n <= n_max; ++n) {
        for (int l = 0; l < L; ++l) {
            const double ang = 2.0 * M_PI * n * l / L;
            x[l] += c[n] * std::cos(ang) + d[n - 1] * std::sin(ang);
        }
    }
    return x;
}

FourierParams FourierParams::fit(const Eigen::VectorXd& x, int n_max) {
    const int L = static_cast<int>(x.size());
    FourierParams fp;
    fp.L = L;
    fp.n_max = n_max;
    fp.c = Eigen::VectorXd::Zero(n_max + 1);
    fp.d = Eigen::VectorXd::Zero(n_max);
    fp.c[0] = x.mean();
    for (int n = 1; n <= n_max; ++n) {
        Eigen::VectorXd cb(L), sb(L);
        for (int l = 0; l < L; ++l) {
            const double ang = 2.0 * M_PI * n * l / L;
            cb[l] = std::cos(ang);
            sb[l] = std::sin(ang);
        }
        fp.c[n] = x.dot(cb) / cb.squaredNorm();
        const double sn = sb.squaredNorm();
        fp.d[n - 1] = sn > 1e-9 ? x.dot(sb) / sn : 0.0;
    }
    return fp;
}

namespace {

// Derivatives of the zero-padded signal autocorrelations with respect to a
// signal entry. `px` is the padded lookup.
struct SignalGrad {
    const Eigen::VectorXd& x;
    int L;

    double px(int j) const { return (j >= 0 && j < L) ? x[j] : 0.0; }
    double da1() const { return 1.0 / L; }
    double da2(int m, int j) const { return (px(j + m) + px(j - m)) / L; }
    double da3(int u, int v, int j) const {
        return (px(j + u) * px(j + v) + px(j - u) * px(j - u + v) + px(j - v) * px(j - v + u)) / L;
    }
};

// Full-resolution least-squares misfit shared by cost_ws and cost_asd;
// rho1 == nullptr selects the well-separated model.
CostEval full_cost(const Eigen::VectorXd& x, double rho0, const Eigen::VectorXd* rho1,
                   const MomentStats& stats) {
    const int L = stats.L;
    const double sigma2 = stats.sigma * stats.sigma;
    Signal xs{x};
    const SignalMoments sm = signal_moments(xs);
    double p1;
    Eigen::VectorXd p2, p3;
    detail::predict_moments(sm, rho0, rho1, stats.sigma, p1, p2, p3);

    const int n_rho1 = rho1 ? static_cast<int>(rho1->size()) : 0;
    CostEval out;
    out.grad = Eigen::VectorXd::Zero(L + 1 + n_rho1);
    auto gx = out.grad.head(L);
    double& grho0 = out.grad[L];
    auto grho1 = out.grad.tail(n_rho1);
    const SignalGrad sg{x, L};

    const double w1 = 1.0;
    const double w2 = 1.0 / L;
    const double w3 = 2.0 / (L * (L + 1.0));

    const double r1 = stats.a1 - p1;
    out.value = w1 * r1 * r1;
    {
        const double common = -2.0 * w1 * r1;
        grho0 += common * sm.a1;
        for (int j = 0; j < L; ++j) gx[j] += common * rho0 * sg.da1();
    }
    for (int l = 0; l < L; ++l) {
        const double r = stats.a2[l] - p2[l];
        out.value += w2 * r * r;
        const double common = -2.0 * w2 * r;
        grho0 += common * sm.a2[l];
        for (int j = 0; j < L; ++j) gx[j] += common * rho0 * sg.da2(l, j);
        for (int jj = L; jj <= L + l - 1 && rho1; ++jj) {
            const int i = jj - L;
            grho1[i] += common * sm.a2[jj - l];
            const double coeff = common * (*rho1)[i];
            for (int j = 0; j < L; ++j) gx[j] += coeff * sg.da2(jj - l, j);
        }
    }
    for (int l1 = 0; l1 < L; ++l1) {
        for (int l2 = l1; l2 < L; ++l2) {
            const int D = (l1 == 0) + (l2 == 0) + (l1 == l2);
            const double r = stats.at3(l1, l2) - p3[tri_index(l1, l2, L)];
            out.value += w3 * r * r;
            const double common = -2.0 * w3 * r;
            grho0 += common * (sm.a3(l1, l2) + sm.a1 * sigma2 * D);
            for (int j = 0; j < L; ++j)
                gx[j] += common * rho0 * (sg.da3(l1, l2, j) + sigma2 * D / L);
            if (!rho1) continue;
            for (int jj = L; jj <= L + l2 - l1 - 1; ++jj) {
                const int i = jj - L;
                const int u = jj - l2, v = jj + l1 - l2;
                grho1[i] += common * sm.a3(u, v);
                const double coeff = common * (*rho1)[i];
                for (int j = 0; j < L; ++j) gx[j] += coeff * sg.da3(u, v, j);
            }
            for (int jj = L; jj <= L + l1 - 1; ++jj) {
                const int i = jj - L;
                const int u = l2 - l1, v = jj - l1;
                grho1[i] += common * sm.a3(u, v);
                const double coeff = common * (*rho1)[i];
                for (int j = 0; j < L; ++j) gx[j] += coeff * sg.da3(u, v, j);
            }
        }
    }
    return out;
}

}  // namespace

CostEval cost_ws(const Signal& x, double rho0, const MomentStats& stats) {
    stats.validate();
    if (x.length() != stats.L) throw DataError("cost_ws: signal length mismatch");
    return full_cost(x.values, rho0, nullptr, stats);
}

CostEval cost_asd(const Signal& x, const DensityParams& params, const MomentStats& stats) {
    stats.validate();
    if (x.length() != stats.L) throw DataError("cost_asd: signal length mismatch");
    if (params.rho1.size() != stats.L - 1) throw DataError("cost_asd: rho1 must have L-1 entries");
    return full_cost(x.values, params.rho0, &params.rho1, stats);
}

CostEval coarse_cost(const FourierParams& fp, double rho0, const Eigen::VectorXd& rho1c,
                     const CoarseStats& cs) {
    if (fp.n_max != cs.n_max)
        throw DataError("coarse_cost: Fourier order does not match the coarse statistics");
    const int L = fp.L;
    const int Lp = cs.Lp;
    const bool asd = rho1c.size() > 0;
    if (asd && rho1c.size() != Lp - 1) throw DataError("coarse_cost: rho1c must have Lp-1 entries");

    const Eigen::VectorXd x = fp.synthesize();
    Signal xs{x};
    const SignalMoments sm = signal_moments(xs);
    const SignalGrad sg{x, L};
    auto R = [&](int l) { return rounded_shift(l, cs.dx); };

    Eigen::VectorXd gx = Eigen::VectorXd::Zero(L);
    double grho0 = 0.0;
    Eigen::VectorXd grho1c = Eigen::VectorXd::Zero(asd ? Lp - 1 : 0);

    const double w1 = 1.0;
    const double w2 = 1.0 / Lp;
    const double w3 = 2.0 / (Lp * (Lp + 1.0));

    CostEval out;
    {
        const double r = cs.b1 - rho0 * sm.a1;
        out.value = w1 * r * r;
        const double common = -2.0 * w1 * r;
        grho0 += common * sm.a1;
        for (int j = 0; j < L; ++j) gx[j] += common * rho0 * sg.da1();
    }
    for (int l = 0; l < Lp; ++l) {
        double p = rho0 * sm.a2[R(l)];
        if (asd)
            for (int jj = Lp; jj <= Lp + l - 1; ++jj) p += rho1c[jj - Lp] * sm.a2[R(jj - l)];
        const double r = cs.b2[l] - p;
        out.value += w2 * r * r;
        const double common = -2.0 * w2 * r;
        grho0 += common * sm.a2[R(l)];
        for (int j = 0; j < L; ++j) gx[j] += common * rho0 * sg.da2(R(l), j);
        if (asd) {
            for (int jj = Lp; jj <= Lp + l - 1; ++jj) {
                const int i = jj - Lp;
                grho1c[i] += common * sm.a2[R(jj - l)];
                const double coeff = common * rho1c[i];
                for (int j = 0; j < L; ++j) gx[j] += coeff * sg.da2(R(jj - l), j);
            }
        }
    }
    for (int l1 = 0; l1 < Lp; ++l1) {
        for (int l2 = l1; l2 < Lp; ++l2) {
            double p = rho0 * sm.a3(R(l1), R(l2));
            if (asd) {
                for (int jj = Lp; jj <= Lp + l2 - l1 - 1; ++jj)
                    p += rho1c[jj - Lp] * sm.a3(R(jj - l2), R(jj + l1 - l2));
                for (int jj = Lp; jj <= Lp + l1 - 1; ++jj)
                    p += rho1c[jj - Lp] * sm.a3(R(l2 - l1), R(jj - l1));
            }
            const double r = cs.at3(l1, l2) - p;
            out.value += w3 * r * r;
            const double common = -2.0 * w3 * r;
            grho0 += common * sm.a3(R(l1), R(l2));
            for (int j = 0; j < L; ++j) gx[j] += common * rho0 * sg.da3(R(l1), R(l2), j);
            if (asd) {
                for (int jj = Lp; jj <= Lp + l2 - l1 - 1; ++jj) {
                    const int i = jj - Lp;
                    const int u = R(jj - l2), v = R(jj + l1 - l2);
                    grho1c[i] += common * sm.a3(u, v);
                    const double coeff = common * rho1c[i];
                    for (int j = 0; j < L; ++j) gx[j] += coeff * sg.da3(u, v, j);
                }
                for (int jj = Lp; jj <= Lp + l1 - 1; ++jj) {
                    const int i = jj - Lp;
                    const int u = R(l2 - l1), v = R(jj - l1);
                    grho1c[i] += common * sm.a3(u, v);
                    const double coeff = common * rho1c[i];
                    for (int j = 0; j < L; ++j) gx[j] += coeff * sg.da3(u, v, j);
                }
            }
        }
    }

    // Chain rule through the Fourier synthesis.
    const int nc = fp.n_max + 1;
    out.grad = Eigen::VectorXd::Zero(nc + fp.n_max + 1 + grho1c.size());
    out.grad[0] = gx.sum();
    for (int n = 1; n <= fp.n_max; ++n) {
        double gc = 0.0, gd = 0.0;
        for (int l = 0; l < L; ++l) {
            const double ang = 2.0 * M_PI * n * l / L;
            gc += gx[l] * std::cos(ang);
            gd += gx[l] * std::sin(ang);
        }
        out.grad[n] = gc;
        out.grad[nc + n - 1] = gd;
    }
    out.grad[nc + fp.n_max] = grho0;
    out.grad.tail(grho1c.size()) = grho1c;
    return out;
}

namespace {

struct RestartOutcome {
    bool ok = false;
    std::string error;
    double final_cost = std::numeric_limits<double>::infinity();
    Eigen::VectorXd x;
    double rho0 = 0.0;
    Eigen::VectorXd rho1;
    std::vector<double> stage_costs;
    std::vector<int> stage_iters;
};

}  // namespace

EstimateReport estimate_aa(const MomentStats& stats, Mode mode, const AaConfig& cfg, std::uint64_t seed) {
    stats.validate();
    if (cfg.restarts < 1) throw DataError("estimate_aa: restarts must be >= 1");
    const auto t0 = std::chrono::steady_clock::now();
    const int L = stats.L;
    const int n_stages = L / 2;
    const bool asd = mode == Mode::asd;
    const int fine_max = 2 * L - 1;

    std::vector<CoarseStats> cstats;
    cstats.reserve(n_stages);
    for (int n = 1; n <= n_stages; ++n) cstats.push_back(coarsen_measurement(stats, n));

    std::vector<RestartOutcome> outcomes(cfg.restarts);
    parallel_for(cfg.restarts, [&](int r) {
        RestartOutcome& out = outcomes[r];
        try {
            Rng rng(derive_seed(seed, {0xAAu, static_cast<std::uint64_t>(r)}));
            Eigen::VectorXd x0(L);
            for (int j = 0; j < L; ++j) x0[j] = rng.normal();
            x0 *= std::sqrt(static_cast<double>(L)) / x0.norm();
            double rho0 = rng.uniform(0.1, 0.9);
            Eigen::VectorXd rho1 = Eigen::VectorXd::Zero(L - 1);
            if (asd) {
                for (int i = 0; i < L - 1; ++i) rho1[i] = rng.uniform01();
                rho1 *= (rho0 / 2.0) / rho1.sum();
            }

            FourierParams fp = FourierParams::fit(x0, 1);
            Eigen::VectorXd rho1c;
            double dx_prev = 1.0;
            int Lp_prev = L;
            if (asd) rho1c = rho1;

            for (int n = 1; n <= n_stages; ++n) {
                const CoarseStats& cs = cstats[n - 1];
                if (n > 1) {
                    FourierParams wide;
                    wide.L = L;
                    wide.n_max = n;
                    wide.c = Eigen::VectorXd::Zero(n + 1);
                    wide.d = Eigen::VectorXd::Zero(n);
                    wide.c.head(fp.c.size()) = fp.c;
                    wide.d.head(fp.d.size()) = fp.d;
                    fp = std::move(wide);
                }
                if (asd)
                    rho1c = rebin_masses(rho1c, Lp_prev, dx_prev, 2 * Lp_prev, cs.Lp, cs.Lp - 1, cs.dx,
                                         2 * cs.Lp, fine_max);
                const int nc = n + 1;
                const int dim = nc + n + 1 + (asd ? cs.Lp - 1 : 0);
                Eigen::VectorXd theta(dim);
                theta.head(nc) = fp.c;
                theta.segment(nc, n) = fp.d;
                theta[nc + n] = rho0;
                if (asd) theta.tail(cs.Lp - 1) = rho1c;
                Eigen::VectorXd lb = Eigen::VectorXd::Constant(dim, -std::numeric_limits<double>::infinity());
                lb.tail(dim - nc - n).setZero();

                FourierParams work = fp;
                Objective obj = [&](const Eigen::VectorXd& th, Eigen::VectorXd* grad) {
                    work.c = th.head(nc);
                    work.d = th.segment(nc, n);
                    const double r0 = th[nc + n];
                    const Eigen::VectorXd r1c = asd ? th.tail(cs.Lp - 1) : Eigen::VectorXd();
                    CostEval e = coarse_cost(work, r0, r1c, cs);
                    if (grad) *grad = std::move(e.grad);
                    return e.value;
                };
                MinimizeResult mres = minimize(obj, theta, lb, {cfg.grad_tol, cfg.max_iters});
                fp.c = mres.x.head(nc);
                fp.d = mres.x.segment(nc, n);
                rho0 = mres.x[nc + n];
                if (asd) rho1c = mres.x.tail(cs.Lp - 1);
                out.stage_costs.push_back(mres.value);
                out.stage_iters.push_back(mres.iterations);
                dx_prev = cs.dx;
                Lp_prev = cs.Lp;
            }

            // Full-resolution refinement in raw signal coordinates. The last
            // Fourier stage runs at dx = 1, so its rho1c is already on the
            // fine gap grid.
            Eigen::VectorXd x = fp.synthesize();
            const int dim = L + 1 + (asd ? L - 1 : 0);
            Eigen::VectorXd theta(dim);
            theta.head(L) = x;
            theta[L] = rho0;
            if (asd) theta.tail(L - 1) = rho1c;
            Eigen::VectorXd lb = Eigen::VectorXd::Constant(dim, -std::numeric_limits<double>::infinity());
            lb.tail(dim - L).setZero();
            Objective obj = [&](const Eigen::VectorXd& th, Eigen::VectorXd* grad) {
                const Eigen::VectorXd xv = th.head(L);
                const double r0 = th[L];
                const Eigen::VectorXd* r1 = nullptr;
                Eigen::VectorXd r1v;
                if (asd) {
                    r1v = th.tail(L - 1);
                    r1 = &r1v;
                }
                CostEval e = full_cost(xv, r0, r1, stats);
                if (grad) *grad = std::move(e.grad);
                return e.value;
            };
            MinimizeResult mres = minimize(obj, theta, lb, {cfg.grad_tol, 2 * cfg.max_iters});
            out.final_cost = mres.value;
            out.x = mres.x.head(L);
            out.rho0 = mres.x[L];
            if (asd) out.rho1 = mres.x.tail(L - 1);
            out.stage_costs.push_back(mres.value);
            out.stage_iters.push_back(mres.iterations);
            out.ok = true;
        } catch (const std::exception& e) {
            out.ok = false;
            out.error = e.what();
        }
    }, cfg.threads);

    int best = -1;
    for (int r = 0; r < cfg.restarts; ++r) {
        if (!outcomes[r].ok) continue;
        if (best < 0 || outcomes[r].final_cost < outcomes[best].final_cost) best = r;
    }
    if (best < 0)
        throw NumericalError("estimate_aa: all restarts failed; last error: " + outcomes.back().error);

    const RestartOutcome& win = outcomes[best];
    EstimateReport rep;
    rep.method = "aa";
    rep.mode = mode;
    rep.x_hat = Signal{win.x};
    rep.rho0_hat = win.rho0;
    rep.rho1_hat = win.rho1;
    rep.final_cost = win.final_cost;
    rep.stage_costs = win.stage_costs;
    rep.stage_iterations = win.stage_iters;
    rep.chosen_restart = best;
    rep.seed = seed;
    rep.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

}  // namespace mtd
