#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace btf::stats {

inline double mean(std::span<const double> v) {
    if (v.empty()) throw std::length_error("mean of an empty sample");
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

/// Sample standard deviation (n - 1 denominator); zero for a single value.
inline double sd(std::span<const double> v) {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

inline double variance(std::span<const double> v) {
    const double s = sd(v);
    return s * s;
}

/// Empirical quantile by linear interpolation between order statistics:
/// h = (N - 1) p, Q = x_(floor h) + (h - floor h)(x_(floor h + 1) - x_(floor h)),
/// zero-based on the sorted sample.
inline double quantile_sorted(std::span<const double> sorted, double p) {
    if (sorted.empty()) throw std::length_error("quantile of an empty sample");
    if (!(p >= 0.0 && p <= 1.0)) throw std::domain_error("quantile probability outside [0, 1]");
    const double h = static_cast<double>(sorted.size() - 1) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline double quantile(std::vector<double> v, double p) {
    std::sort(v.begin(), v.end());
    return quantile_sorted(v, p);
}

}  // namespace btf::stats
