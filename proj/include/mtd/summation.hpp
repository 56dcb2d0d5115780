#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <vector>

namespace mtd {

/// Fixed chunk length used by every streaming accumulation in the project.
/// Keeping it a global constant makes sums independent of how work is split
/// across threads.
inline constexpr std::ptrdiff_t kSumChunk = 4096;

/// Pairwise (tree) sum of a contiguous range. Deterministic for a fixed
/// range; error grows like O(log n) rather than O(n).
inline double pairwise_sum(const double* data, std::ptrdiff_t n) {
    if (n <= 8) {
        double s = 0.0;
        for (std::ptrdiff_t i = 0; i < n; ++i) s += data[i];
        return s;
    }
    const std::ptrdiff_t half = n / 2;
    return pairwise_sum(data, half) + pairwise_sum(data + half, n - half);
}

inline double pairwise_sum(const std::vector<double>& v) {
    return pairwise_sum(v.data(), static_cast<std::ptrdiff_t>(v.size()));
}

inline double pairwise_sum(const Eigen::VectorXd& v) {
    return pairwise_sum(v.data(), static_cast<std::ptrdiff_t>(v.size()));
}

}  // namespace mtd
