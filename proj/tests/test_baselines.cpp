#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <vector>

#include "mtd/baselines.hpp"
#include "mtd/rng.hpp"

using namespace mtd;

TEST_CASE("oracle distances: aligned windows score zero, empty data scores the norm") {
    const Signal x = default_signal();
    const auto sup = generate_support_rejection(2000, 10, 40, 9, 1);
    const auto y = synthesize(sup, x, 0.0, 2);
    const auto z = oracle_distances(y, x);
    for (const auto s : sup.starts) CHECK(z.z[s] == doctest::Approx(0.0).epsilon(1e-20));

    Measurement zero;
    zero.L = 10;
    zero.sigma = 0.0;
    zero.samples = Eigen::VectorXd::Zero(100);
    const auto z0 = oracle_distances(zero, x);
    for (int i = 0; i < z0.z.size(); ++i)
        CHECK(z0.z[i] == doctest::Approx(x.values.squaredNorm()).epsilon(1e-14));
}

TEST_CASE("oracle distances match the naive double loop") {
    Rng rng(3);
    Measurement y;
    y.L = 7;
    y.sigma = 0.0;
    y.samples.resize(100);
    for (int i = 0; i < 100; ++i) y.samples[i] = rng.normal();
    Signal x;
    x.values.resize(7);
    for (int i = 0; i < 7; ++i) x.values[i] = rng.normal();
    const auto z = oracle_distances(y, x);
    for (int i = 0; i + 7 <= 100; ++i) {
        double s = 0.0;
        for (int l = 0; l < 7; ++l) {
            const double d = x.values[l] - y.samples[i + l];
            s += d * d;
        }
        CHECK(z.z[i] == doctest::Approx(s).epsilon(1e-12));
    }
}

TEST_CASE("noiseless deconv recovers the support and the signal exactly") {
    const Signal x = default_signal();
    const auto sup = generate_support_rejection(5000, 10, 100, 9, 4);
    const auto y = synthesize(sup, x, 0.0, 5);
    const auto z = oracle_distances(y, x);
    const Signal est = deconv_estimate(y, z, sup.M(), 2 * 10 - 1);
    CHECK((est.values - x.values).lpNorm<Eigen::Infinity>() <= 1e-12);
}

TEST_CASE("greedy selection respects the exclusion radius") {
    const Signal x = default_signal();
    const auto sup = generate_support_rejection(20000, 10, 500, 0, 6);
    const auto y = synthesize(sup, x, 1.0, 7);
    const auto z = oracle_distances(y, x);
    // Reimplement the pick loop to observe the chosen indices.
    const int min_gap = 10;
    Signal est = deconv_estimate(y, z, sup.M(), min_gap);
    // Cross-check with an independent selection.
    std::vector<std::int64_t> order(z.z.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](auto a, auto b) { return z.z[a] < z.z[b]; });
    std::vector<std::int64_t> picked;
    for (const auto i : order) {
        bool ok = true;
        for (const auto j : picked)
            if (std::llabs(i - j) < min_gap) ok = false;
        if (ok) picked.push_back(i);
        if (static_cast<int>(picked.size()) == sup.M()) break;
    }
    for (std::size_t a = 0; a < picked.size(); ++a)
        for (std::size_t b = a + 1; b < picked.size(); ++b)
            CHECK(std::llabs(picked[a] - picked[b]) >= min_gap);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(10);
    for (const auto i : picked) mean += y.samples.segment(i, 10);
    mean /= static_cast<double>(picked.size());
    CHECK((est.values - mean).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("deconv errors out when the exclusion radius exhausts candidates") {
    Measurement y;
    y.L = 10;
    y.sigma = 0.0;
    y.samples = Eigen::VectorXd::Zero(40);
    OracleDistances z;
    z.z = Eigen::VectorXd::Ones(31);
    CHECK_THROWS_AS(deconv_estimate(y, z, 5, 19), NumericalError);
}

TEST_CASE("known-support estimate at sigma=0 is exact and its noise follows sigma/sqrt(M)") {
    const Signal x = default_signal();
    const auto sup = generate_support_rejection(100000, 10, 3000, 9, 8);
    const auto clean = synthesize(sup, x, 0.0, 9);
    CHECK((known_support_estimate(clean, sup).values - x.values).lpNorm<Eigen::Infinity>() <= 1e-12);

    const double sigma = 0.5;
    double mean_rmse = 0.0;
    const int trials = 20;
    for (int t = 0; t < trials; ++t) {
        const auto noisy = synthesize(sup, x, sigma, 100 + t);
        mean_rmse += rmse(known_support_estimate(noisy, sup), x);
    }
    mean_rmse /= trials;
    const double expected = sigma * std::sqrt(10.0) / (std::sqrt(3000.0) * x.values.norm());
    CHECK(mean_rmse >= 0.5 * expected);
    CHECK(mean_rmse <= 2.0 * expected);
}

TEST_CASE("known-support RMSE scales linearly in sigma") {
    const Signal x = default_signal();
    const auto sup = generate_support_rejection(100000, 10, 3000, 9, 10);
    std::vector<double> sigmas = {0.1, 0.2, 0.4, 0.8, 1.6};
    std::vector<double> values;
    for (std::size_t si = 0; si < sigmas.size(); ++si) {
        double acc = 0.0;
        for (int t = 0; t < 10; ++t) {
            const auto noisy = synthesize(sup, x, sigmas[si], 200 + 10 * si + t);
            acc += rmse(known_support_estimate(noisy, sup), x);
        }
        values.push_back(acc / 10);
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < sigmas.size(); ++i) {
        const double lx = std::log(sigmas[i]), ly = std::log(values[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double n = static_cast<double>(sigmas.size());
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    CHECK(slope >= 0.8);
    CHECK(slope <= 1.2);
}
