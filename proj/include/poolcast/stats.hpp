#pragma once

// Small numeric helpers shared by the engines.

#include <poolcast/error.hpp>

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string_view>
#include <vector>

namespace poolcast {

inline double mean(std::span<const double> x) {
    if (x.empty()) return 0.0;
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

/// Population variance (divides by n).
inline double variance(std::span<const double> x) {
    if (x.empty()) return 0.0;
    const double m = mean(x);
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return s / static_cast<double>(x.size());
}

/// Linear interpolation between order statistics (Hyndman-Fan type 7).
/// `sorted` must be ascending.
inline double quantile_sorted(std::span<const double> sorted, double p) {
    if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
    const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline double normal_quantile(double p) {
    return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

inline std::vector<double> difference(std::span<const double> x, int lag = 1) {
    std::vector<double> out;
    if (static_cast<int>(x.size()) <= lag) return out;
    out.reserve(x.size() - static_cast<std::size_t>(lag));
    for (std::size_t i = static_cast<std::size_t>(lag); i < x.size(); ++i) out.push_back(x[i] - x[i - lag]);
    return out;
}

/// Centred moving average of order `period` (2 x period MA for even periods).
/// Undefined positions are NaN.
inline std::vector<double> centred_moving_average(std::span<const double> x, int period) {
    const auto n = static_cast<int>(x.size());
    std::vector<double> out(x.size(), std::numeric_limits<double>::quiet_NaN());
    if (period % 2 == 1) {
        const int half = period / 2;
        for (int t = half; t + half < n; ++t) {
            double s = 0.0;
            for (int k = -half; k <= half; ++k) s += x[t + k];
            out[t] = s / period;
        }
    } else {
        const int half = period / 2;
        for (int t = half; t + half < n; ++t) {
            double s = 0.5 * x[t - half] + 0.5 * x[t + half];
            for (int k = -half + 1; k < half; ++k) s += x[t + k];
            out[t] = s / period;
        }
    }
    return out;
}

struct Decomposition {
    std::vector<double> trend;      // NaN where undefined
    std::vector<double> seasonal;   // full length
    std::vector<double> remainder;  // NaN where trend undefined
    std::vector<double> indices;    // one per season, position 0 = first observation's season
};

/// Classical additive or multiplicative decomposition.
inline Decomposition classical_decomposition(std::span<const double> x, int period, bool multiplicative) {
    if (period < 2 || static_cast<int>(x.size()) < 2 * period)
        throw Error(ErrorCode::SeriesTooShort, "classical decomposition needs two full cycles");
    Decomposition d;
    d.trend = centred_moving_average(x, period);
    std::vector<double> sum(period, 0.0);
    std::vector<int> count(period, 0);
    for (std::size_t t = 0; t < x.size(); ++t) {
        if (std::isnan(d.trend[t])) continue;
        const double detr = multiplicative ? x[t] / d.trend[t] : x[t] - d.trend[t];
        sum[t % period] += detr;
        ++count[t % period];
    }
    d.indices.resize(period);
    for (int i = 0; i < period; ++i) d.indices[i] = count[i] > 0 ? sum[i] / count[i] : (multiplicative ? 1.0 : 0.0);
    const double centre = mean(d.indices);
    for (auto& v : d.indices) v = multiplicative ? v / centre : v - centre;
    d.seasonal.resize(x.size());
    d.remainder.resize(x.size());
    for (std::size_t t = 0; t < x.size(); ++t) {
        d.seasonal[t] = d.indices[t % period];
        if (std::isnan(d.trend[t])) {
            d.remainder[t] = std::numeric_limits<double>::quiet_NaN();
        } else {
            d.remainder[t] = multiplicative ? x[t] / (d.trend[t] * d.seasonal[t]) : x[t] - d.trend[t] - d.seasonal[t];
        }
    }
    return d;
}

/// Seasonal strength max(0, 1 - Var(R) / Var(S + R)) over the span where the
/// additive classical decomposition defines a remainder.
inline double seasonal_strength(std::span<const double> x, int period) {
    const auto d = classical_decomposition(x, period, false);
    std::vector<double> r, sr;
    for (std::size_t t = 0; t < x.size(); ++t) {
        if (std::isnan(d.remainder[t])) continue;
        r.push_back(d.remainder[t]);
        sr.push_back(d.remainder[t] + d.seasonal[t]);
    }
    const double vsr = variance(sr);
    if (!(vsr > 0.0)) return 0.0;
    return std::max(0.0, 1.0 - variance(r) / vsr);
}

/// Smallest root modulus of 1 - c[0] z - c[1] z^2 - ... ; +inf for a constant
/// polynomial.
inline double min_root_modulus(std::span<const double> coef) {
    std::size_t deg = coef.size();
    while (deg > 0 && coef[deg - 1] == 0.0) --deg;
    if (deg == 0) return std::numeric_limits<double>::infinity();
    // Roots of z^deg * p(1/z) are the reciprocals of the roots of p, so the
    // smallest root of p has modulus 1 / (largest eigenvalue of the companion
    // matrix of x^deg - c0 x^(deg-1) - ... - c_{deg-1}).
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(deg), static_cast<Eigen::Index>(deg));
    for (std::size_t i = 0; i < deg; ++i) companion(0, static_cast<Eigen::Index>(i)) = coef[i];
    for (std::size_t i = 1; i < deg; ++i) companion(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i - 1)) = 1.0;
    const Eigen::VectorXcd ev = companion.eigenvalues();
    double largest = 0.0;
    for (Eigen::Index i = 0; i < ev.size(); ++i) largest = std::max(largest, std::abs(ev[i]));
    return largest == 0.0 ? std::numeric_limits<double>::infinity() : 1.0 / largest;
}

/// Stable 64-bit FNV-1a, used to derive per-series random streams.
inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

}  // namespace poolcast
