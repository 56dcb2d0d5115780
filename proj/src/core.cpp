#include "mtd/core.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

namespace mtd {

const char* mode_name(Mode m) { return m == Mode::ws ? "ws" : "asd"; }

Mode mode_from_name(const std::string& name) {
    if (name == "ws") return Mode::ws;
    if (name == "asd") return Mode::asd;
    throw DataError("unknown mode '" + name + "' (expected ws or asd)");
}

void Signal::validate() const {
    if (values.size() == 0) throw DataError("signal is empty");
    if (!values.allFinite()) throw DataError("signal contains non-finite entries");
}

void SupportSequence::validate(std::int64_t min_gap) const {
    if (L <= 0 || N < L) throw DataError("support sequence has invalid N or L");
    if (starts.empty()) return;
    if (starts.front() < 0 || starts.back() > N - L)
        throw DataError("support start outside [0, N-L]");
    for (std::size_t k = 1; k < starts.size(); ++k) {
        if (starts[k] - starts[k - 1] < min_gap)
            throw DataError("support gap below minimum at pair index " + std::to_string(k));
    }
}

void PairSeparationFunction::validate() const {
    if (L <= 0) throw DataError("pair separation function has invalid L");
    double total = 0.0;
    for (int g = 0; g <= max_gap(); ++g) {
        const double m = mass[g];
        if (!(m >= 0.0)) throw DataError("pair separation mass negative or NaN at gap " + std::to_string(g));
        if (g < L && m != 0.0) throw DataError("pair separation mass below gap L at gap " + std::to_string(g));
        total += m;
    }
    if (std::abs(total - 1.0) > 1e-12)
        throw DataError("pair separation masses sum to " + std::to_string(total) + ", expected 1");
}

void Measurement::validate() const {
    if (L <= 0 || N() < L) throw DataError("measurement shorter than signal length");
    if (!(sigma >= 0.0)) throw DataError("negative noise level");
    if (!samples.allFinite()) throw DataError("measurement contains non-finite samples");
}

void DensityParams::validate() const {
    if (!(rho0 > 0.0 && rho0 <= 1.0)) throw DataError("rho0 outside (0, 1]");
    double s = 0.0;
    for (int i = 0; i < rho1.size(); ++i) {
        if (!(rho1[i] >= 0.0)) throw DataError("rho1 entry negative at index " + std::to_string(i));
        s += rho1[i];
    }
    if (s > rho0 + 1e-12) throw DataError("sum of rho1 exceeds rho0");
}

SupportSequence generate_support_rejection(std::int64_t N, int L, int M, int W, std::uint64_t seed,
                                           std::int64_t max_consecutive_rejections) {
    if (L <= 0 || N < L) throw DataError("generate_support_rejection: invalid N or L");
    if (M < 0 || W < 0) throw DataError("generate_support_rejection: negative M or W");
    Rng rng(seed);
    const std::int64_t min_gap = L + W;
    const std::uint64_t range = static_cast<std::uint64_t>(N - L + 1);
    std::set<std::int64_t> accepted;
    std::int64_t consecutive_rejections = 0;
    while (static_cast<int>(accepted.size()) < M) {
        const auto u = static_cast<std::int64_t>(rng.below(range));
        bool ok = true;
        auto it = accepted.lower_bound(u);
        if (it != accepted.end() && *it - u < min_gap) ok = false;
        if (ok && it != accepted.begin() && u - *std::prev(it) < min_gap) ok = false;
        if (ok) {
            accepted.insert(it, u);
            consecutive_rejections = 0;
        } else if (++consecutive_rejections > max_consecutive_rejections) {
            throw NumericalError("generate_support_rejection: placement failure after " +
                                 std::to_string(max_consecutive_rejections) +
                                 " consecutive rejections (density too high)");
        }
    }
    SupportSequence s;
    s.starts.assign(accepted.begin(), accepted.end());
    s.N = N;
    s.L = L;
    s.validate(min_gap);
    return s;
}

SupportSequence generate_support_from_psf(std::int64_t N, int L, const PairSeparationFunction& xi,
                                          int target_M, std::uint64_t seed) {
    xi.validate();
    if (target_M < 2) throw DataError("generate_support_from_psf: target_M must be >= 2");
    if (xi.L != L) throw DataError("generate_support_from_psf: xi has mismatched L");
    Rng rng(seed);
    // Cumulative gap law, sampled by inverse CDF in ascending gap order.
    std::vector<double> cdf(xi.mass.size());
    double acc = 0.0;
    for (int g = 0; g < xi.mass.size(); ++g) {
        acc += xi.mass[g];
        cdf[g] = acc;
    }
    SupportSequence s;
    s.N = N;
    s.L = L;
    std::int64_t pos = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(L)));
    while (pos <= N - L) {
        s.starts.push_back(pos);
        if (static_cast<int>(s.starts.size()) == target_M) break;
        const double u = rng.uniform01();
        int gap = xi.max_gap();
        for (int g = 0; g <= xi.max_gap(); ++g) {
            if (u < cdf[g]) {
                gap = g;
                break;
            }
        }
        pos += gap;
    }
    if (s.starts.size() < 2)
        throw DataError("generate_support_from_psf: fewer than 2 occurrences fit in the measurement");
    s.validate(L);
    return s;
}

Measurement synthesize(const SupportSequence& support, const Signal& x, double sigma, std::uint64_t seed) {
    x.validate();
    if (support.L != x.length()) throw DataError("synthesize: support and signal disagree on L");
    if (!(sigma >= 0.0)) throw DataError("synthesize: negative sigma");
    support.validate(support.L);
    Measurement y;
    y.L = x.length();
    y.sigma = sigma;
    y.samples = Eigen::VectorXd::Zero(support.N);
    for (const std::int64_t s0 : support.starts) y.samples.segment(s0, x.length()) += x.values;
    if (sigma > 0.0) {
        Rng rng(seed);
        for (std::int64_t i = 0; i < support.N; ++i) y.samples[i] += sigma * rng.normal();
    }
    y.truth_signal = x;
    y.truth_support = support;
    return y;
}

PairSeparationFunction pair_separation(const SupportSequence& support) {
    if (support.M() < 2) throw DataError("pair_separation: need at least 2 occurrences");
    std::int64_t max_gap = 0;
    for (std::size_t k = 1; k < support.starts.size(); ++k)
        max_gap = std::max(max_gap, support.starts[k] - support.starts[k - 1]);
    PairSeparationFunction xi;
    xi.L = support.L;
    xi.mass = Eigen::VectorXd::Zero(max_gap + 1);
    const double w = 1.0 / static_cast<double>(support.M() - 1);
    for (std::size_t k = 1; k < support.starts.size(); ++k)
        xi.mass[support.starts[k] - support.starts[k - 1]] += w;
    return xi;
}

double rmse(const Signal& estimate, const Signal& truth) {
    if (estimate.length() != truth.length()) throw DataError("rmse: length mismatch");
    const double denom = truth.values.norm();
    if (denom == 0.0) throw DataError("rmse: truth signal has zero norm");
    return (estimate.values - truth.values).norm() / denom;
}

Signal default_signal() {
    // Smooth two-bump test shape on L = 10, scaled so ||x||_2 = sqrt(10).
    // Mirrored in data/default_signal.txt.
    Signal x;
    x.values.resize(10);
    x.values << 0.5590084825681328, 0.8598787646096514, 1.18484834635317,
        1.3682735531841004, 1.3144543691312434, 1.126568402961456,
        0.9963869529373685, 0.9251678643104587, 0.7556797747380986,
        0.505330379283906;
    return x;
}

PairSeparationFunction default_bench_psf(int L) {
    PairSeparationFunction xi;
    xi.L = L;
    xi.mass = Eigen::VectorXd::Zero(3 * L + 1);
    double total = 0.0;
    for (int g = L; g <= 3 * L; ++g) total += static_cast<double>(3 * L + 1 - g);
    for (int g = L; g <= 3 * L; ++g) xi.mass[g] = static_cast<double>(3 * L + 1 - g) / total;
    return xi;
}

DensityParams density_from_support(const SupportSequence& support) {
    DensityParams p;
    p.rho0 = static_cast<double>(support.M()) * support.L / static_cast<double>(support.N);
    p.rho1 = Eigen::VectorXd::Zero(support.L - 1);
    const PairSeparationFunction xi = pair_separation(support);
    for (int i = 0; i + support.L <= xi.max_gap() && i < support.L - 1; ++i)
        p.rho1[i] = p.rho0 * xi.mass[i + support.L];
    return p;
}

}  // namespace mtd
