#include "mtd/baselines.hpp"

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

namespace mtd {

OracleDistances oracle_distances(const Measurement& y, const Signal& x_true) {
    y.validate();
    x_true.validate();
    if (x_true.length() != y.L) throw DataError("oracle_distances: signal length mismatch");
    const int L = y.L;
    const std::int64_t count = y.N() - L + 1;
    OracleDistances out;
    out.z.resize(count);
    for (std::int64_t i = 0; i < count; ++i)
        out.z[i] = (x_true.values - y.samples.segment(i, L)).squaredNorm();
    return out;
}

Signal deconv_estimate(const Measurement& y, const OracleDistances& z, int M, int min_gap) {
    if (M < 1) throw DataError("deconv_estimate: M must be >= 1");
    if (min_gap < 1) throw DataError("deconv_estimate: min_gap must be >= 1");
    const int L = y.L;
    const std::int64_t count = z.z.size();
    if (count != y.N() - L + 1) throw DataError("deconv_estimate: z length mismatch");

    std::vector<std::int64_t> order(count);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::int64_t a, std::int64_t b) { return z.z[a] < z.z[b]; });

    std::vector<std::int64_t> picked;
    picked.reserve(M);
    std::vector<bool> blocked(count, false);
    for (const std::int64_t i : order) {
        if (blocked[i]) continue;
        picked.push_back(i);
        if (static_cast<int>(picked.size()) == M) break;
        const std::int64_t lo = std::max<std::int64_t>(0, i - (min_gap - 1));
        const std::int64_t hi = std::min<std::int64_t>(count - 1, i + (min_gap - 1));
        for (std::int64_t j = lo; j <= hi; ++j) blocked[j] = true;
    }
    if (static_cast<int>(picked.size()) < M)
        throw NumericalError("deconv_estimate: only " + std::to_string(picked.size()) +
                             " feasible picks for M = " + std::to_string(M));

    Signal est;
    est.values = Eigen::VectorXd::Zero(L);
    for (const std::int64_t i : picked) est.values += y.samples.segment(i, L);
    est.values /= static_cast<double>(M);
    return est;
}

Signal known_support_estimate(const Measurement& y, const SupportSequence& support) {
    if (support.M() == 0) throw DataError("known_support_estimate: empty support");
    if (support.L != y.L || support.N != y.N())
        throw DataError("known_support_estimate: support does not match the measurement");
    Signal est;
    est.values = Eigen::VectorXd::Zero(y.L);
    for (const std::int64_t s : support.starts) est.values += y.samples.segment(s, y.L);
    est.values /= static_cast<double>(support.M());
    return est;
}

}  // namespace mtd
