#pragma once

// Accuracy, interval and calibration metrics, the modified Diebold-Mariano
// test, and value-added / cost accounting.

#include <poolcast/arima.hpp>
#include <poolcast/error.hpp>
#include <poolcast/ets.hpp>
#include <poolcast/pools.hpp>
#include <poolcast/stats.hpp>

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace poolcast {

/// In-sample mean absolute error of the seasonal naive method.
inline double seasonal_naive_scale(std::span<const double> train, int period) {
    const int s = std::max(period, 1);
    if (static_cast<int>(train.size()) <= s)
        throw Error(ErrorCode::InvalidArgument, "training series must be longer than the period");
    double sum = 0.0;
    for (std::size_t i = static_cast<std::size_t>(s); i < train.size(); ++i) sum += std::abs(train[i] - train[i - s]);
    const double scale = sum / static_cast<double>(train.size() - static_cast<std::size_t>(s));
    if (!(scale > 0.0)) throw Error(ErrorCode::ZeroDenominator, "seasonal naive in-sample error is zero");
    return scale;
}

namespace eval_detail {

inline void check_lengths(std::size_t a, std::size_t b, const char* what) {
    if (a != b || a == 0) throw Error(ErrorCode::InvalidArgument, std::string(what) + ": length mismatch or empty horizon");
}

}  // namespace eval_detail

inline double mase(std::span<const double> train, std::span<const double> test, std::span<const double> point,
                   int period) {
    eval_detail::check_lengths(test.size(), point.size(), "mase");
    const double scale = seasonal_naive_scale(train, period);
    double sum = 0.0;
    for (std::size_t t = 0; t < test.size(); ++t) sum += std::abs(test[t] - point[t]);
    return sum / static_cast<double>(test.size()) / scale;
}

/// Interval score: width plus 2/alpha times the distance to the violated bound.
inline double interval_score(double lower, double upper, double y, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::InvalidArgument, "alpha must lie in (0, 1)");
    double w = upper - lower;
    if (y < lower) w += 2.0 / alpha * (lower - y);
    if (y > upper) w += 2.0 / alpha * (y - upper);
    return w;
}

/// `Mean` averages the interval score over the horizon; `Sum` keeps the sum.
enum class MsisForm { Mean, Sum };

inline MsisForm parse_msis_form(std::string_view s) {
    if (s == "mean") return MsisForm::Mean;
    if (s == "sum") return MsisForm::Sum;
    throw Error(ErrorCode::InvalidArgument, "unknown MSIS form '" + std::string(s) + "'");
}

inline std::string_view to_string(MsisForm f) { return f == MsisForm::Mean ? "mean" : "sum"; }

inline double msis(std::span<const double> train, std::span<const double> test, std::span<const double> lower,
                   std::span<const double> upper, double alpha, int period, MsisForm form = MsisForm::Mean) {
    eval_detail::check_lengths(test.size(), lower.size(), "msis");
    eval_detail::check_lengths(test.size(), upper.size(), "msis");
    const double scale = seasonal_naive_scale(train, period);
    double sum = 0.0;
    for (std::size_t t = 0; t < test.size(); ++t) sum += interval_score(lower[t], upper[t], test[t], alpha);
    if (form == MsisForm::Mean) sum /= static_cast<double>(test.size());
    return sum / scale;
}

inline std::vector<bool> covered(std::span<const double> test, std::span<const double> lower,
                                 std::span<const double> upper) {
    eval_detail::check_lengths(test.size(), lower.size(), "coverage");
    std::vector<bool> out(test.size());
    for (std::size_t t = 0; t < test.size(); ++t) out[t] = lower[t] <= test[t] && test[t] <= upper[t];
    return out;
}

inline constexpr std::array<double, 5> kDefaultLevels = {0.80, 0.85, 0.90, 0.95, 0.99};

struct EvaluationRecord {
    std::string series_id;
    std::string pool_label;
    double mase = 0.0;
    std::map<double, double> msis;
    std::map<double, std::vector<bool>> covered;
    double cost_seconds = 0.0;
    std::string selected_model;
};

struct Coverage {
    std::vector<double> per_horizon;  // fraction covered at each step, over records reaching that step
    double overall = 0.0;             // fraction over all (record, step) pairs
};

inline Coverage calibration(std::span<const EvaluationRecord> records, double level) {
    if (records.empty()) throw Error(ErrorCode::InvalidArgument, "calibration needs at least one record");
    std::vector<std::size_t> hit, total;
    std::size_t all_hit = 0, all_total = 0;
    for (const auto& r : records) {
        auto it = r.covered.find(level);
        if (it == r.covered.end()) continue;
        const auto& c = it->second;
        if (hit.size() < c.size()) {
            hit.resize(c.size(), 0);
            total.resize(c.size(), 0);
        }
        for (std::size_t t = 0; t < c.size(); ++t) {
            hit[t] += c[t] ? 1 : 0;
            ++total[t];
            all_hit += c[t] ? 1 : 0;
            ++all_total;
        }
    }
    Coverage out;
    out.per_horizon.resize(hit.size());
    for (std::size_t t = 0; t < hit.size(); ++t)
        out.per_horizon[t] = static_cast<double>(hit[t]) / static_cast<double>(total[t]);
    out.overall = all_total ? static_cast<double>(all_hit) / static_cast<double>(all_total) : 0.0;
    return out;
}

enum class DmLoss { Absolute, Squared };

struct DmResult {
    double statistic = 0.0;
    double p_value = 1.0;
    int m = 0;
};

/// Small-sample multiplier of the modified test.
inline double hln_correction(int m, int h) {
    const double mm = m, hh = h;
    return std::sqrt((mm + 1.0 - 2.0 * hh + hh * (hh - 1.0) / mm) / mm);
}

/// Modified Diebold-Mariano test of equal accuracy for h-step errors. A
/// positive statistic means `errors_a` has the larger loss. The long-run
/// variance uses autocovariances up to lag h-1.
inline DmResult dm_test_modified(std::span<const double> errors_a, std::span<const double> errors_b, int h,
                                 DmLoss loss = DmLoss::Absolute) {
    if (errors_a.size() != errors_b.size()) throw Error(ErrorCode::InvalidArgument, "error sequences differ in length");
    if (h < 1) throw Error(ErrorCode::InvalidArgument, "horizon must be >= 1");
    const int m = static_cast<int>(errors_a.size());
    if (m < std::max(4, h + 1)) throw Error(ErrorCode::SampleTooSmall, "DM test needs m >= max(4, h + 1)");
    std::vector<double> d(static_cast<std::size_t>(m));
    for (int t = 0; t < m; ++t) {
        const double a = errors_a[t], b = errors_b[t];
        d[t] = loss == DmLoss::Absolute ? std::abs(a) - std::abs(b) : a * a - b * b;
    }
    const double dbar = mean(d);
    double V = 0.0;
    for (int k = 0; k < h; ++k) {
        double g = 0.0;
        for (int t = k; t < m; ++t) g += (d[t] - dbar) * (d[t - k] - dbar);
        g /= m;
        V += k == 0 ? g : 2.0 * g;
    }
    V /= m;
    if (!(V > 0.0)) throw Error(ErrorCode::DegenerateVariance, "loss differential has no variance");
    DmResult r;
    r.m = m;
    r.statistic = dbar / std::sqrt(V) * hln_correction(m, h);
    const boost::math::students_t_distribution<double> t(m - 1);
    r.p_value = 2.0 * boost::math::cdf(boost::math::complement(t, std::abs(r.statistic)));
    return r;
}

/// Percentage improvement of the complex step's metric over the simple one.
inline double fva(double metric_simple, double metric_complex) {
    if (!(metric_simple > 0.0)) throw Error(ErrorCode::InvalidArgument, "baseline metric must be positive");
    return 100.0 * (metric_simple - metric_complex) / metric_simple;
}

/// Percentage cost reduction of the complex step (negative when it costs more).
inline double ccr(double cost_simple, double cost_complex) {
    if (!(cost_simple > 0.0)) throw Error(ErrorCode::InvalidArgument, "baseline cost must be positive");
    return 100.0 * (cost_simple - cost_complex) / cost_simple;
}

inline double monetize(double total_cpu_seconds, double rate_per_cpu_hour) {
    if (total_cpu_seconds < 0.0 || rate_per_cpu_hour < 0.0)
        throw Error(ErrorCode::InvalidArgument, "cost inputs must be non-negative");
    return total_cpu_seconds / 3600.0 * rate_per_cpu_hour;
}

/// Percentage of selections in each profile class, keyed by class name.
inline std::map<std::string, double> profile_frequencies(std::span<const EvaluationRecord> records) {
    std::map<std::string, double> out;
    for (auto c : kProfileClasses) out[std::string(to_string(c))] = 0.0;
    if (records.empty()) return out;
    for (const auto& r : records) out[std::string(to_string(profile_class(parse_ets_spec(r.selected_model))))] += 1.0;
    for (auto& [k, v] : out) v = 100.0 * v / static_cast<double>(records.size());
    return out;
}

/// Percentage of series whose selected p, q, P, Q (and any of them) differ
/// between two ARIMA pools. Both inputs map series id to the order.
inline std::map<std::string, double> order_change_frequencies(const std::map<std::string, ArimaOrder>& selections_k,
                                                              const std::map<std::string, ArimaOrder>& selections_km1) {
    if (selections_k.size() != selections_km1.size()) throw Error(ErrorCode::IdMismatch, "series sets differ");
    std::map<std::string, double> out{{"p", 0.0}, {"q", 0.0}, {"P", 0.0}, {"Q", 0.0}, {"any", 0.0}};
    for (const auto& [id, a] : selections_k) {
        auto it = selections_km1.find(id);
        if (it == selections_km1.end()) throw Error(ErrorCode::IdMismatch, "series '" + id + "' missing");
        const auto& b = it->second;
        out["p"] += a.p != b.p;
        out["q"] += a.q != b.q;
        out["P"] += a.P != b.P;
        out["Q"] += a.Q != b.Q;
        out["any"] += (a.p != b.p || a.q != b.q || a.P != b.P || a.Q != b.Q);
    }
    if (!selections_k.empty())
        for (auto& [k, v] : out) v = 100.0 * v / static_cast<double>(selections_k.size());
    return out;
}

}  // namespace poolcast
