#include "mtd/optim.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <vector>

#include "mtd/errors.hpp"

namespace mtd {

namespace {

Eigen::VectorXd project(const Eigen::VectorXd& x, const Eigen::VectorXd& lb) {
    return x.cwiseMax(lb);
}

double projected_grad_norm(const Eigen::VectorXd& x, const Eigen::VectorXd& g, const Eigen::VectorXd& lb) {
    return (x - project(x - g, lb)).norm();
}

}  // namespace

MinimizeResult minimize(const Objective& f, Eigen::VectorXd init, const Eigen::VectorXd& lower_bounds,
                        const MinimizeOptions& opts) {
    const int n = static_cast<int>(init.size());
    if (lower_bounds.size() != n) throw DataError("minimize: bound vector size mismatch");

    Eigen::VectorXd x = project(init, lower_bounds);
    Eigen::VectorXd g(n);
    double fx = f(x, &g);
    if (!std::isfinite(fx)) throw NumericalError("minimize: non-finite cost at initial point");

    Eigen::MatrixXd B = Eigen::MatrixXd::Identity(n, n);  // Hessian approximation
    MinimizeResult res;
    res.converged = false;
    res.accepted_costs.push_back(fx);

    const double c1 = 1e-4;
    int it = 0;
    for (; it < opts.max_iters; ++it) {
        if (projected_grad_norm(x, g, lower_bounds) <= opts.grad_tol) {
            res.converged = true;
            break;
        }

        // Active coordinates sit at their bound with the gradient pushing
        // outward; the quasi-Newton step is taken on the free subspace.
        const double act_eps = 1e-12 * (1.0 + x.cwiseAbs().maxCoeff());
        std::vector<int> free_idx;
        free_idx.reserve(n);
        for (int i = 0; i < n; ++i) {
            const bool at_bound = std::isfinite(lower_bounds[i]) && x[i] - lower_bounds[i] <= act_eps;
            if (!(at_bound && g[i] > 0.0)) free_idx.push_back(i);
        }

        Eigen::VectorXd d = Eigen::VectorXd::Zero(n);
        bool have_qn = false;
        if (!free_idx.empty()) {
            const int m = static_cast<int>(free_idx.size());
            Eigen::MatrixXd Bff(m, m);
            Eigen::VectorXd gf(m);
            for (int a = 0; a < m; ++a) {
                gf[a] = g[free_idx[a]];
                for (int b = 0; b < m; ++b) Bff(a, b) = B(free_idx[a], free_idx[b]);
            }
            Eigen::LDLT<Eigen::MatrixXd> ldlt(Bff);
            if (ldlt.info() == Eigen::Success) {
                Eigen::VectorXd df = ldlt.solve(-gf);
                if (df.allFinite() && gf.dot(df) < 0.0) {
                    for (int a = 0; a < m; ++a) d[free_idx[a]] = df[a];
                    have_qn = true;
                }
            }
        }

        bool accepted = false;
        Eigen::VectorXd x_new, g_new(n);
        double f_new = fx;
        for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
            if (attempt == 1 || !have_qn) d = -g;  // steepest-descent fallback
            double t = 1.0;
            for (int bt = 0; bt < 60; ++bt, t *= 0.5) {
                Eigen::VectorXd cand = project(x + t * d, lower_bounds);
                Eigen::VectorXd step = cand - x;
                if (step.norm() == 0.0) continue;
                const double gTs = g.dot(step);
                if (gTs >= 0.0) continue;  // projection turned d uphill
                const double fc = f(cand, nullptr);
                if (std::isfinite(fc) && fc <= fx + c1 * gTs) {
                    x_new = std::move(cand);
                    f_new = fc;
                    accepted = true;
                    break;
                }
            }
        }
        if (!accepted) break;  // line search exhausted; x is the best point found

        f(x_new, &g_new);
        const Eigen::VectorXd s = x_new - x;
        const Eigen::VectorXd yv = g_new - g;
        const double sy = s.dot(yv);
        if (sy > 1e-12 * s.norm() * yv.norm()) {
            const Eigen::VectorXd Bs = B * s;
            const double sBs = s.dot(Bs);
            if (sBs > 0.0) B += (yv * yv.transpose()) / sy - (Bs * Bs.transpose()) / sBs;
        }
        x = std::move(x_new);
        g = std::move(g_new);
        fx = f_new;
        res.accepted_costs.push_back(fx);
    }

    res.x = std::move(x);
    res.value = fx;
    res.iterations = it;
    if (!res.converged)
        res.converged = projected_grad_norm(res.x, g, lower_bounds) <= opts.grad_tol;
    return res;
}

}  // namespace mtd
