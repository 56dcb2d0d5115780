#pragma once

#include <Eigen/Core>
#include <functional>
#include <vector>

namespace mtd {

/// Differentiable objective: returns the value and, when grad is non-null,
/// fills the gradient at the same point.
using Objective = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd* grad)>;

struct MinimizeOptions {
    double grad_tol = 1e-8;  // projected-gradient norm
    int max_iters = 500;
};

struct MinimizeResult {
    Eigen::VectorXd x;
    double value = 0.0;
    int iterations = 0;
    bool converged = false;
    std::vector<double> accepted_costs;  // cost after each accepted step
};

/// Bound-constrained minimization with per-coordinate lower bounds (use
/// -inf for free coordinates). Projected quasi-Newton (BFGS on the free
/// subspace) with Armijo backtracking; iterates stay feasible and the cost
/// is non-increasing across accepted steps. Stops when the projected
/// gradient norm falls below grad_tol or the iteration cap is reached.
MinimizeResult minimize(const Objective& f, Eigen::VectorXd init, const Eigen::VectorXd& lower_bounds,
                        const MinimizeOptions& opts = {});

}  // namespace mtd
