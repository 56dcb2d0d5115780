#include <doctest.h>

#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "mtd/errors.hpp"
#include "mtd/optim.hpp"

using namespace mtd;

namespace {
const double kInf = std::numeric_limits<double>::infinity();
}

TEST_CASE("unconstrained convex quadratic reaches the analytic minimizer") {
    // f(x) = 1/2 x'Ax - b'x with SPD A; minimizer solves Ax = b.
    Eigen::MatrixXd A(3, 3);
    A << 4, 1, 0, 1, 3, 1, 0, 1, 2;
    Eigen::VectorXd b(3);
    b << 1, -2, 0.5;
    const Eigen::VectorXd target = A.ldlt().solve(b);
    Objective f = [&](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
        if (g) *g = A * x - b;
        return 0.5 * x.dot(A * x) - b.dot(x);
    };
    const Eigen::VectorXd lb = Eigen::VectorXd::Constant(3, -kInf);
    const auto res = minimize(f, Eigen::VectorXd::Zero(3), lb);
    CHECK(res.converged);
    CHECK((res.x - target).norm() <= 1e-8);
}

TEST_CASE("active bound returns the clamped KKT point") {
    // f(x) = (x - a)^2 with lower bound b > a: the solution is x = b, where
    // the projected gradient vanishes.
    Objective f = [](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
        if (g) (*g)[0] = 2.0 * (x[0] + 2.0);
        return (x[0] + 2.0) * (x[0] + 2.0);
    };
    Eigen::VectorXd lb(1);
    lb << 1.0;
    Eigen::VectorXd init(1);
    init << 5.0;
    const auto res = minimize(f, init, lb);
    CHECK(res.converged);
    CHECK(res.x[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("stationary initial point returns immediately") {
    Objective f = [](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
        if (g) *g = 2.0 * x;
        return x.squaredNorm();
    };
    const Eigen::VectorXd lb = Eigen::VectorXd::Constant(2, -kInf);
    const auto res = minimize(f, Eigen::VectorXd::Zero(2), lb);
    CHECK(res.converged);
    CHECK(res.iterations == 0);
    CHECK(res.x.norm() == 0.0);
}

TEST_CASE("accepted costs are monotone non-increasing") {
    Objective rosen = [](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
        const double a = 1.0 - x[0];
        const double b = x[1] - x[0] * x[0];
        if (g) {
            (*g)[0] = -2.0 * a - 400.0 * x[0] * b;
            (*g)[1] = 200.0 * b;
        }
        return a * a + 100.0 * b * b;
    };
    Eigen::VectorXd init(2);
    init << -1.2, 1.0;
    const Eigen::VectorXd lb = Eigen::VectorXd::Constant(2, -kInf);
    const auto res = minimize(rosen, init, lb, {1e-8, 2000});
    CHECK(res.converged);
    CHECK((res.x - Eigen::VectorXd::Ones(2)).norm() <= 1e-6);
    for (std::size_t i = 1; i < res.accepted_costs.size(); ++i)
        CHECK(res.accepted_costs[i] <= res.accepted_costs[i - 1]);
}

TEST_CASE("bounds are never violated along the way") {
    // Quadratic pulling hard into the corner.
    Objective f = [](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
        const Eigen::VectorXd c = Eigen::VectorXd::Constant(4, -3.0);
        if (g) *g = 2.0 * (x - c);
        return (x - c).squaredNorm();
    };
    Eigen::VectorXd lb = Eigen::VectorXd::Zero(4);
    lb[2] = -kInf;
    Eigen::VectorXd init = Eigen::VectorXd::Constant(4, 2.0);
    const auto res = minimize(f, init, lb);
    CHECK(res.converged);
    CHECK(res.x[0] == doctest::Approx(0.0));
    CHECK(res.x[1] == doctest::Approx(0.0));
    CHECK(res.x[2] == doctest::Approx(-3.0));
    CHECK(res.x[3] == doctest::Approx(0.0));
}

TEST_CASE("non-finite cost at the initial point throws") {
    Objective f = [](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
        if (g) g->setZero();
        return std::log(x[0]);  // -inf at 0
    };
    Eigen::VectorXd lb(1), init(1);
    lb << 0.0;
    init << 0.0;
    CHECK_THROWS_AS(minimize(f, init, lb), NumericalError);
}
