#pragma once

// Derivative-free simplex minimization.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

namespace poolcast {

struct SimplexOptions {
    double tolerance = 1e-8;  // absolute spread of objective values across the simplex
    int max_evaluations = 2000;
    int restarts = 2;
};

struct SimplexResult {
    std::vector<double> x;
    double value = std::numeric_limits<double>::infinity();
    int evaluations = 0;
    bool converged = false;
};

using Objective = std::function<double(std::span<const double>)>;

namespace detail {

inline SimplexResult nelder_mead_once(const Objective& f, std::vector<double> start, std::span<const double> steps,
                                      const SimplexOptions& opt) {
    const std::size_t n = start.size();
    SimplexResult res;
    std::vector<std::vector<double>> pts(n + 1, start);
    std::vector<double> vals(n + 1);
    auto eval = [&](const std::vector<double>& x) {
        ++res.evaluations;
        double v = f(x);
        return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
    };
    vals[0] = eval(pts[0]);
    for (std::size_t i = 0; i < n; ++i) {
        pts[i + 1][i] += steps[i];
        vals[i + 1] = eval(pts[i + 1]);
        if (!std::isfinite(vals[i + 1])) {
            // try the opposite direction before giving up on this vertex
            pts[i + 1][i] = start[i] - steps[i];
            vals[i + 1] = eval(pts[i + 1]);
        }
    }
    if (n == 0) {
        res.x = start;
        res.value = vals[0];
        res.converged = true;
        return res;
    }

    std::vector<std::size_t> order(n + 1);
    std::vector<double> centroid(n), xr(n), xe(n), xc(n);
    while (true) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return vals[a] < vals[b]; });
        const auto best = order.front(), worst = order.back(), second = order[n - 1];
        if (std::isfinite(vals[worst]) && vals[worst] - vals[best] <= opt.tolerance) {
            res.converged = true;
            break;
        }
        if (res.evaluations >= opt.max_evaluations) break;

        std::fill(centroid.begin(), centroid.end(), 0.0);
        for (std::size_t k = 0; k < n + 1; ++k) {
            if (k == worst) continue;
            for (std::size_t i = 0; i < n; ++i) centroid[i] += pts[k][i] / static_cast<double>(n);
        }
        for (std::size_t i = 0; i < n; ++i) xr[i] = centroid[i] + (centroid[i] - pts[worst][i]);
        const double fr = eval(xr);
        if (fr < vals[best]) {
            for (std::size_t i = 0; i < n; ++i) xe[i] = centroid[i] + 2.0 * (centroid[i] - pts[worst][i]);
            const double fe = eval(xe);
            if (fe < fr) {
                pts[worst] = xe;
                vals[worst] = fe;
            } else {
                pts[worst] = xr;
                vals[worst] = fr;
            }
            continue;
        }
        if (fr < vals[second]) {
            pts[worst] = xr;
            vals[worst] = fr;
            continue;
        }
        const bool outside = fr < vals[worst];
        for (std::size_t i = 0; i < n; ++i) {
            xc[i] = outside ? centroid[i] + 0.5 * (xr[i] - centroid[i])
                            : centroid[i] + 0.5 * (pts[worst][i] - centroid[i]);
        }
        const double fc = eval(xc);
        if (fc < (outside ? fr : vals[worst])) {
            pts[worst] = xc;
            vals[worst] = fc;
            continue;
        }
        // shrink towards the best vertex
        for (std::size_t k = 0; k < n + 1; ++k) {
            if (k == best) continue;
            for (std::size_t i = 0; i < n; ++i) pts[k][i] = pts[best][i] + 0.5 * (pts[k][i] - pts[best][i]);
            vals[k] = eval(pts[k]);
        }
    }
    const auto best = static_cast<std::size_t>(std::min_element(vals.begin(), vals.end()) - vals.begin());
    res.x = pts[best];
    res.value = vals[best];
    return res;
}

}  // namespace detail

/// Nelder-Mead with restarts. Each restart rebuilds the simplex around the
/// incumbent, which un-sticks collapsed simplices. Infeasible points should
/// return +inf.
inline SimplexResult minimize_simplex(const Objective& f, std::vector<double> start, std::span<const double> steps,
                                      const SimplexOptions& opt = {}) {
    SimplexResult best = detail::nelder_mead_once(f, std::move(start), steps, opt);
    int total = best.evaluations;
    for (int r = 0; r < opt.restarts && std::isfinite(best.value); ++r) {
        std::vector<double> restart_steps(steps.begin(), steps.end());
        const double scale = r == 0 ? 0.5 : 0.25;
        for (auto& s : restart_steps) s *= scale;
        auto next = detail::nelder_mead_once(f, best.x, restart_steps, opt);
        total += next.evaluations;
        const bool improved = next.value < best.value - opt.tolerance;
        if (next.value < best.value) best = std::move(next);
        if (!improved) break;
    }
    best.evaluations = total;
    return best;
}

}  // namespace poolcast
