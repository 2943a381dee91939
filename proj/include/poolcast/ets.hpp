#pragma once

// Exponential smoothing (ETS) state-space models: specification, maximum
// likelihood fitting, selection by information criterion and forecasting
// with analytic or simulated prediction intervals.

#include <poolcast/criteria.hpp>
#include <poolcast/error.hpp>
#include <poolcast/forecast.hpp>
#include <poolcast/optim.hpp>
#include <poolcast/stats.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <compare>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace poolcast {

enum class ErrorType { Additive, Multiplicative };
enum class TrendType { None, Additive, AdditiveDamped, Multiplicative, MultiplicativeDamped };
enum class SeasonType { None, Additive, Multiplicative };

struct EtsModelSpec {
    ErrorType error = ErrorType::Additive;
    TrendType trend = TrendType::None;
    SeasonType season = SeasonType::None;

    bool operator==(const EtsModelSpec&) const = default;

    bool has_trend() const { return trend != TrendType::None; }
    bool has_season() const { return season != SeasonType::None; }
    bool damped() const { return trend == TrendType::AdditiveDamped || trend == TrendType::MultiplicativeDamped; }
    bool multiplicative_trend() const {
        return trend == TrendType::Multiplicative || trend == TrendType::MultiplicativeDamped;
    }
    bool any_multiplicative() const {
        return error == ErrorType::Multiplicative || multiplicative_trend() || season == SeasonType::Multiplicative;
    }
};

/// Acronym such as "ANN" or "MAdM".
inline std::string descriptor(const EtsModelSpec& s) {
    std::string out(1, s.error == ErrorType::Additive ? 'A' : 'M');
    switch (s.trend) {
    case TrendType::None: out += "N"; break;
    case TrendType::Additive: out += "A"; break;
    case TrendType::AdditiveDamped: out += "Ad"; break;
    case TrendType::Multiplicative: out += "M"; break;
    case TrendType::MultiplicativeDamped: out += "Md"; break;
    }
    out += s.season == SeasonType::None ? 'N' : (s.season == SeasonType::Additive ? 'A' : 'M');
    return out;
}

inline EtsModelSpec parse_ets_spec(std::string_view text) {
    auto fail = [&] { return Error(ErrorCode::InvalidArgument, "bad ETS descriptor '" + std::string(text) + "'"); };
    if (text.size() != 3 && text.size() != 4) throw fail();
    EtsModelSpec s;
    if (text[0] == 'A') s.error = ErrorType::Additive;
    else if (text[0] == 'M') s.error = ErrorType::Multiplicative;
    else throw fail();
    const bool damped = text.size() == 4;
    if (damped && text[2] != 'd') throw fail();
    switch (text[1]) {
    case 'N':
        if (damped) throw fail();
        s.trend = TrendType::None;
        break;
    case 'A': s.trend = damped ? TrendType::AdditiveDamped : TrendType::Additive; break;
    case 'M': s.trend = damped ? TrendType::MultiplicativeDamped : TrendType::Multiplicative; break;
    default: throw fail();
    }
    switch (text.back()) {
    case 'N': s.season = SeasonType::None; break;
    case 'A': s.season = SeasonType::Additive; break;
    case 'M': s.season = SeasonType::Multiplicative; break;
    default: throw fail();
    }
    return s;
}

/// Position in the 5x3 taxonomy grid read row by row, additive-error block
/// first. Used for deterministic ordering and tie-breaking.
inline int canonical_index(const EtsModelSpec& s) {
    return (s.error == ErrorType::Additive ? 0 : 15) + static_cast<int>(s.trend) * 3 + static_cast<int>(s.season);
}

inline bool canonical_less(const EtsModelSpec& a, const EtsModelSpec& b) {
    return canonical_index(a) < canonical_index(b);
}

/// The 30 taxonomy cells in canonical order.
inline std::vector<EtsModelSpec> all_ets_specs() {
    std::vector<EtsModelSpec> out;
    for (auto e : {ErrorType::Additive, ErrorType::Multiplicative})
        for (auto t : {TrendType::None, TrendType::Additive, TrendType::AdditiveDamped, TrendType::Multiplicative,
                       TrendType::MultiplicativeDamped})
            for (auto s : {SeasonType::None, SeasonType::Additive, SeasonType::Multiplicative}) out.push_back({e, t, s});
    return out;
}

/// 19 of the 30 models are stable enough to fit: additive errors never mix
/// with multiplicative components, and multiplicative trends never mix with
/// additive seasonality.
inline bool is_applicable(const EtsModelSpec& s) {
    if (s.error == ErrorType::Additive) return !s.multiplicative_trend() && s.season != SeasonType::Multiplicative;
    return !(s.multiplicative_trend() && s.season == SeasonType::Additive);
}

inline std::vector<EtsModelSpec> applicable_ets_specs() {
    std::vector<EtsModelSpec> out;
    for (const auto& s : all_ets_specs())
        if (is_applicable(s)) out.push_back(s);
    return out;
}

struct EtsState {
    double level = 0.0;
    double trend = 0.0;
    std::vector<double> season;  // season[0] is the most recent index, season[m-1] the one used next
};

/// Smoothing parameters and initial states. Absent components are ignored.
struct EtsParameters {
    double alpha = 0.0;
    double beta = 0.0;
    double gamma = 0.0;
    double phi = 1.0;
    EtsState initial;
};

struct EtsFit {
    EtsModelSpec spec;
    int period = 1;
    double alpha = 0.0;
    std::optional<double> beta;
    std::optional<double> gamma;
    std::optional<double> phi;
    EtsState initial_state;
    EtsState final_state;
    double sigma2 = 0.0;  // innovation variance, SSE / (n - k)
    double log_likelihood = 0.0;
    int k = 0;
    int n = 0;
    Criteria criteria;
    double fit_seconds = 0.0;
    double mse = 0.0;
    std::vector<double> fitted;     // one-step-ahead means
    std::vector<double> residuals;  // innovations (relative for multiplicative error)
    int evaluations = 0;

    std::string name() const { return descriptor(spec); }
};

struct EtsFitOptions {
    std::optional<double> fixed_alpha;
    std::optional<double> fixed_beta;
    std::optional<double> fixed_gamma;
    std::optional<double> fixed_phi;
    AiccForm aicc_form = AiccForm::Standard;
    SimplexOptions simplex{};
};

namespace ets_detail {

constexpr double kSmoothLower = 1e-4;
constexpr double kSmoothUpper = 1.0 - 1e-4;
constexpr double kPhiLower = 0.8;
constexpr double kPhiUpper = 0.98;
constexpr double kTiny = 1e-10;

inline int season_count(const EtsModelSpec& s, int period) { return s.has_season() ? period : 0; }

/// Result of running the recursions over a sample.
struct FilterResult {
    bool valid = true;
    double sse = 0.0;
    double sum_log_mean = 0.0;  // sum of log|mu_t|, only used with multiplicative errors
    EtsState state;
};

inline double trend_part(const EtsModelSpec& s, double l, double b, double phi) {
    switch (s.trend) {
    case TrendType::None: return l;
    case TrendType::Additive:
    case TrendType::AdditiveDamped: return l + phi * b;
    case TrendType::Multiplicative:
    case TrendType::MultiplicativeDamped: return l * std::pow(b, phi);
    }
    return l;
}

/// One-step mean given the current state.
inline double one_step_mean(const EtsModelSpec& s, const EtsState& x, double phi) {
    const double q = trend_part(s, x.level, x.trend, phi);
    switch (s.season) {
    case SeasonType::None: return q;
    case SeasonType::Additive: return q + x.season.back();
    case SeasonType::Multiplicative: return q * x.season.back();
    }
    return q;
}

/// Advances the state with observation y. Returns false if the state leaves
/// the region where the recursions are defined.
inline bool update_state(const EtsModelSpec& s, EtsState& x, double y, const EtsParameters& p) {
    const double phi = s.damped() ? p.phi : 1.0;
    const double q = trend_part(s, x.level, x.trend, phi);
    const double seas = s.has_season() ? x.season.back() : 0.0;
    double deseason = y;
    if (s.season == SeasonType::Additive) deseason = y - seas;
    else if (s.season == SeasonType::Multiplicative) {
        if (std::abs(seas) < kTiny) return false;
        deseason = y / seas;
    }
    const double old_level = x.level;
    x.level = q + p.alpha * (deseason - q);
    if (s.has_trend()) {
        if (s.multiplicative_trend()) {
            if (old_level <= 0.0) return false;
            const double phib = std::pow(x.trend, phi);
            const double r = x.level / old_level;
            x.trend = phib + (p.beta / p.alpha) * (r - phib);
        } else {
            const double phib = phi * x.trend;
            const double r = x.level - old_level;
            x.trend = phib + (p.beta / p.alpha) * (r - phib);
        }
    }
    if (s.has_season()) {
        double target = y - q;
        if (s.season == SeasonType::Multiplicative) {
            if (std::abs(q) < kTiny) return false;
            target = y / q;
        }
        const double fresh = seas + p.gamma * (target - seas);
        std::rotate(x.season.rbegin(), x.season.rbegin() + 1, x.season.rend());
        x.season.front() = fresh;
    }
    if (s.multiplicative_trend() && (x.level <= 0.0 || x.trend <= 0.0)) return false;
    return std::isfinite(x.level) && std::isfinite(x.trend);
}

inline FilterResult run_filter(const EtsModelSpec& s, std::span<const double> y, const EtsParameters& p,
                               std::vector<double>* fitted = nullptr, std::vector<double>* resid = nullptr) {
    FilterResult r;
    r.state = p.initial;
    const double phi = s.damped() ? p.phi : 1.0;
    if (fitted) fitted->assign(y.size(), 0.0);
    if (resid) resid->assign(y.size(), 0.0);
    for (std::size_t t = 0; t < y.size(); ++t) {
        const double mu = one_step_mean(s, r.state, phi);
        if (!std::isfinite(mu)) {
            r.valid = false;
            return r;
        }
        double e = y[t] - mu;
        if (s.error == ErrorType::Multiplicative) {
            if (std::abs(mu) < kTiny) {
                r.valid = false;
                return r;
            }
            e /= mu;
            r.sum_log_mean += std::log(std::abs(mu));
        }
        r.sse += e * e;
        if (fitted) (*fitted)[t] = mu;
        if (resid) (*resid)[t] = e;
        if (!update_state(s, r.state, y[t], p)) {
            r.valid = false;
            return r;
        }
    }
    r.valid = std::isfinite(r.sse);
    return r;
}

/// Gaussian log-likelihood with the innovation variance profiled out.
inline double log_likelihood(const EtsModelSpec& s, const FilterResult& r, std::size_t n) {
    const double nn = static_cast<double>(n);
    const double s2 = std::max(r.sse / nn, 1e-300);
    double ll = -0.5 * nn * (std::log(2.0 * std::numbers::pi * s2) + 1.0);
    if (s.error == ErrorType::Multiplicative) ll -= r.sum_log_mean;
    return ll;
}

/// Heuristic starting states: seasonal indices from a classical decomposition
/// of the first cycles, level and trend from a regression on the first ten
/// seasonally adjusted observations.
inline EtsState initial_states(const EtsModelSpec& s, std::span<const double> y, int period) {
    EtsState x;
    std::vector<double> adj(y.begin(), y.end());
    if (s.has_season()) {
        const int cycles = std::min(3, static_cast<int>(y.size()) / period);
        const bool mult = s.season == SeasonType::Multiplicative;
        const auto d = classical_decomposition(y.first(static_cast<std::size_t>(cycles * period)), period, mult);
        // state order: index m-1 is the season of the first observation
        x.season.resize(period);
        for (int i = 0; i < period; ++i) x.season[period - 1 - i] = d.indices[i];
        for (std::size_t t = 0; t < adj.size(); ++t) {
            const double si = d.indices[t % period];
            adj[t] = mult ? adj[t] / std::max(si, 1e-2) : adj[t] - si;
        }
    }
    const std::size_t maxn = std::min<std::size_t>(10, adj.size());
    if (!s.has_trend()) {
        x.level = mean(std::span<const double>(adj).first(maxn));
        return x;
    }
    // least squares on t = 1..maxn
    double st = 0, sy = 0, stt = 0, sty = 0;
    for (std::size_t i = 0; i < maxn; ++i) {
        const double t = static_cast<double>(i + 1);
        st += t;
        sy += adj[i];
        stt += t * t;
        sty += t * adj[i];
    }
    const double nn = static_cast<double>(maxn);
    const double slope = (nn * sty - st * sy) / (nn * stt - st * st);
    const double intercept = (sy - slope * st) / nn;
    if (!s.multiplicative_trend()) {
        x.level = intercept;
        x.trend = slope;
        if (std::abs(x.level + x.trend) < 1e-8) {
            x.level *= 1.001;
            x.trend *= 1.001;
        }
    } else {
        double l0 = intercept + slope;
        if (std::abs(l0) < 1e-8) l0 = 1e-7;
        double b0 = (intercept + 2.0 * slope) / l0;
        l0 /= b0;
        if (std::abs(b0) > 1e10) b0 = std::copysign(1e10, b0);
        if (l0 < 1e-8 || b0 < 1e-8) {
            l0 = std::max(adj[0], 1e-3);
            b0 = std::max(adj[1] / adj[0], 1e-3);
        }
        x.level = l0;
        x.trend = b0;
    }
    return x;
}

/// Maps between the optimizer's flat vector and structured parameters.
struct Layout {
    EtsModelSpec spec;
    int period = 1;
    bool free_alpha = true, free_beta = false, free_gamma = false, free_phi = false;
    EtsParameters fixed;  // values for non-free parameters

    int smoothing_count() const { return free_alpha + free_beta + free_gamma + free_phi; }
    int state_count() const {
        return 1 + (spec.has_trend() ? 1 : 0) + (spec.has_season() ? period - 1 : 0);
    }
    int size() const { return smoothing_count() + state_count(); }

    EtsParameters unpack(std::span<const double> v) const {
        EtsParameters p = fixed;
        std::size_t i = 0;
        if (free_alpha) p.alpha = v[i++];
        if (free_beta) p.beta = v[i++];
        if (free_gamma) p.gamma = v[i++];
        if (free_phi) p.phi = v[i++];
        p.initial.level = v[i++];
        p.initial.trend = spec.has_trend() ? v[i++] : 0.0;
        if (spec.has_season()) {
            p.initial.season.assign(period, 0.0);
            double sum = 0.0;
            for (int j = 0; j < period - 1; ++j) {
                p.initial.season[j] = v[i++];
                sum += p.initial.season[j];
            }
            p.initial.season[period - 1] =
                spec.season == SeasonType::Multiplicative ? static_cast<double>(period) - sum : -sum;
        } else {
            p.initial.season.clear();
        }
        return p;
    }

    bool feasible(const EtsParameters& p) const {
        if (free_alpha && (p.alpha < kSmoothLower || p.alpha > kSmoothUpper)) return false;
        if (free_beta && (p.beta < kSmoothLower || p.beta > p.alpha)) return false;
        if (free_gamma && (p.gamma < kSmoothLower || p.gamma > 1.0 - p.alpha)) return false;
        if (free_phi && (p.phi < kPhiLower || p.phi > kPhiUpper)) return false;
        if (spec.multiplicative_trend() && (p.initial.level <= 0.0 || p.initial.trend <= 0.0)) return false;
        if (spec.season == SeasonType::Multiplicative) {
            for (double v : p.initial.season)
                if (v <= 0.0) return false;
        }
        return true;
    }
};

inline EtsFit finish_fit(const EtsModelSpec& spec, int period, std::span<const double> y, const EtsParameters& p,
                         int k, AiccForm form) {
    EtsFit fit;
    fit.spec = spec;
    fit.period = period;
    fit.alpha = p.alpha;
    if (spec.has_trend()) fit.beta = p.beta;
    if (spec.has_season()) fit.gamma = p.gamma;
    if (spec.damped()) fit.phi = p.phi;
    fit.initial_state = p.initial;
    auto r = run_filter(spec, y, p, &fit.fitted, &fit.residuals);
    if (!r.valid) throw Error(ErrorCode::OptimizationFailed, descriptor(spec) + ": parameters leave the admissible region");
    fit.final_state = r.state;
    fit.n = static_cast<int>(y.size());
    fit.k = k;
    fit.log_likelihood = log_likelihood(spec, r, y.size());
    fit.criteria = all_criteria(fit.log_likelihood, k, fit.n, form);
    fit.mse = r.sse / fit.n;
    fit.sigma2 = fit.n > k ? r.sse / (fit.n - k) : r.sse / fit.n;
    return fit;
}

inline void check_data(const EtsModelSpec& spec, std::span<const double> y, int period) {
    if (!is_applicable(spec))
        throw Error(ErrorCode::InapplicableModel, descriptor(spec) + " is not one of the applicable models");
    if (spec.has_season() && period < 2)
        throw Error(ErrorCode::InapplicableModel, descriptor(spec) + " needs a seasonal period >= 2");
    if (spec.any_multiplicative()) {
        for (double v : y)
            if (v <= 0.0) throw Error(ErrorCode::NonPositiveData, descriptor(spec) + " requires strictly positive data");
    }
    if (spec.has_season() && static_cast<int>(y.size()) < 2 * period)
        throw Error(ErrorCode::SeriesTooShort, descriptor(spec) + " needs two full seasonal cycles");
    if (spec.season == SeasonType::Multiplicative) {
        const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
        if (*lo == *hi) throw Error(ErrorCode::DegenerateSeries, descriptor(spec) + " on a constant series");
    }
}

}  // namespace ets_detail

/// Free parameter count: smoothing and damping parameters, free initial
/// states (one seasonal state is pinned by normalisation) and the variance.
inline int ets_parameter_count(const EtsModelSpec& spec, int period, const EtsFitOptions& opt = {}) {
    int k = 1;
    if (!opt.fixed_alpha) ++k;
    if (spec.has_trend() && !opt.fixed_beta) ++k;
    if (spec.has_season() && !opt.fixed_gamma) ++k;
    if (spec.damped() && !opt.fixed_phi) ++k;
    k += 1 + (spec.has_trend() ? 1 : 0) + (spec.has_season() ? period - 1 : 0);
    return k;
}

/// Maximum likelihood fit of one ETS model.
inline EtsFit ets_fit(std::span<const double> train, int period, const EtsModelSpec& spec,
                      const EtsFitOptions& options = {}) {
    using namespace ets_detail;
    const auto started = std::chrono::steady_clock::now();
    check_data(spec, train, period);
    const int k = ets_parameter_count(spec, period, options);
    if (static_cast<int>(train.size()) < k + 2)
        throw Error(ErrorCode::SeriesTooShort, descriptor(spec) + ": " + std::to_string(train.size()) +
                                                   " observations for " + std::to_string(k) + " parameters");

    const int m = spec.has_season() ? period : 1;
    Layout layout;
    layout.spec = spec;
    layout.period = period;
    layout.free_alpha = !options.fixed_alpha;
    layout.free_beta = spec.has_trend() && !options.fixed_beta;
    layout.free_gamma = spec.has_season() && !options.fixed_gamma;
    layout.free_phi = spec.damped() && !options.fixed_phi;

    const double alpha0 = options.fixed_alpha.value_or(kSmoothLower + 0.2 * (kSmoothUpper - kSmoothLower) / m);
    layout.fixed.alpha = alpha0;
    layout.fixed.beta = options.fixed_beta.value_or(std::max(kSmoothLower, 0.1 * alpha0));
    layout.fixed.gamma = options.fixed_gamma.value_or(kSmoothLower + 0.05 * (1.0 - alpha0 - kSmoothLower));
    layout.fixed.phi = options.fixed_phi.value_or(kPhiLower + 0.99 * (kPhiUpper - kPhiLower));

    const EtsState init = initial_states(spec, train, period);
    double scale = 0.0;
    for (double v : train) scale += std::abs(v);
    scale /= static_cast<double>(train.size());
    if (scale == 0.0) scale = 1.0;

    std::vector<double> start, steps;
    if (layout.free_alpha) { start.push_back(layout.fixed.alpha); steps.push_back(0.1); }
    if (layout.free_beta) { start.push_back(layout.fixed.beta); steps.push_back(0.5 * layout.fixed.beta); }
    if (layout.free_gamma) { start.push_back(layout.fixed.gamma); steps.push_back(0.05); }
    if (layout.free_phi) { start.push_back(layout.fixed.phi); steps.push_back(-0.02); }
    start.push_back(init.level);
    steps.push_back(spec.multiplicative_trend() ? 0.05 * init.level : std::max(0.1 * std::abs(init.level), 0.05 * scale));
    if (spec.has_trend()) {
        start.push_back(init.trend);
        steps.push_back(spec.multiplicative_trend() ? 0.01 : std::max(0.1 * std::abs(init.trend), 0.01 * scale));
    }
    if (spec.has_season()) {
        for (int j = 0; j < period - 1; ++j) {
            start.push_back(init.season[j]);
            steps.push_back(spec.season == SeasonType::Multiplicative ? 0.05 : std::max(0.1 * std::abs(init.season[j]), 0.01 * scale));
        }
    }

    const std::size_t n = train.size();
    auto objective = [&](std::span<const double> v) {
        const auto p = layout.unpack(v);
        if (!layout.feasible(p)) return std::numeric_limits<double>::infinity();
        const auto r = run_filter(spec, train, p);
        if (!r.valid) return std::numeric_limits<double>::infinity();
        const double nn = static_cast<double>(n);
        double obj = nn * std::log(std::max(r.sse, nn * 1e-300));
        if (spec.error == ErrorType::Multiplicative) obj += 2.0 * r.sum_log_mean;
        return obj;
    };

    auto res = minimize_simplex(objective, start, steps, options.simplex);
    if (!std::isfinite(res.value))
        throw Error(ErrorCode::OptimizationFailed, descriptor(spec) + ": no admissible parameter set found");
    auto fit = finish_fit(spec, period, train, layout.unpack(res.x), k, options.aicc_form);
    fit.evaluations = res.evaluations;
    fit.fit_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return fit;
}

/// Evaluates a model at fully specified parameters (no optimisation). The
/// parameter count reports every parameter as estimated.
inline EtsFit ets_evaluate(std::span<const double> train, int period, const EtsModelSpec& spec,
                           const EtsParameters& params, AiccForm form = AiccForm::Standard) {
    ets_detail::check_data(spec, train, period);
    EtsParameters p = params;
    if (!spec.has_trend()) p.initial.trend = 0.0;
    if (spec.has_season() && static_cast<int>(p.initial.season.size()) != period)
        throw Error(ErrorCode::InvalidArgument, "seasonal initial state must have one value per season");
    return ets_detail::finish_fit(spec, period, train, p, ets_parameter_count(spec, period), form);
}

namespace ets_detail {

/// Sum over i=1..j of phi^i.
inline double damped_sum(double phi, int j) {
    double s = 0.0, pw = 1.0;
    for (int i = 1; i <= j; ++i) {
        pw *= phi;
        s += pw;
    }
    return s;
}

inline double point_at(const EtsFit& f, int h) {
    const auto& x = f.final_state;
    const double phi = f.phi.value_or(1.0);
    double q = x.level;
    switch (f.spec.trend) {
    case TrendType::None: break;
    case TrendType::Additive: q = x.level + h * x.trend; break;
    case TrendType::AdditiveDamped: q = x.level + damped_sum(phi, h) * x.trend; break;
    case TrendType::Multiplicative: q = x.level * std::pow(x.trend, h); break;
    case TrendType::MultiplicativeDamped: q = x.level * std::pow(x.trend, damped_sum(phi, h)); break;
    }
    if (!f.spec.has_season()) return q;
    const int m = f.period;
    // season used at step h is the one observed m - ((h-1) mod m) steps ago
    const double s = x.season[static_cast<std::size_t>(m - 1 - ((h - 1) % m))];
    return f.spec.season == SeasonType::Additive ? q + s : q * s;
}

/// Coefficient of the innovation j steps back in the linear state recursion.
inline double innovation_weight(const EtsFit& f, int j) {
    double c = f.alpha;
    if (f.spec.has_trend()) {
        const double beta = f.beta.value_or(0.0);
        c += f.spec.damped() ? beta * damped_sum(f.phi.value_or(1.0), j) : beta * j;
    }
    if (f.spec.has_season() && j % f.period == 0) c += f.gamma.value_or(0.0);
    return c;
}

inline Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

/// Exact conditional mean and variance for multiplicative error and
/// multiplicative seasonality with a linear trend. Tracks the first two
/// moments of vec(x z') where x = (level, trend) and z holds the seasonal
/// states; the innovation enters each factor linearly.
inline void product_moments(const EtsFit& f, int h, std::vector<double>& mu, std::vector<double>& var) {
    using Eigen::MatrixXd;
    using Eigen::VectorXd;
    const int m = f.period;
    const double s2 = f.sigma2;
    const double phi = f.phi.value_or(1.0);
    const bool trend = f.spec.has_trend();
    const int tx = trend ? 2 : 1;

    MatrixXd F1(tx, tx), G1(tx, tx);
    VectorXd w1(tx);
    if (trend) {
        F1 << 1.0, phi, 0.0, phi;
        G1 << f.alpha, f.alpha * phi, f.beta.value_or(0.0), f.beta.value_or(0.0) * phi;
        w1 << 1.0, phi;
    } else {
        F1 << 1.0;
        G1 << f.alpha;
        w1 << 1.0;
    }
    // z_t = (s_t, s_{t-1}, ..., s_{t-m+1}); the next forecast uses z's last entry
    MatrixXd F2 = MatrixXd::Zero(m, m), G2 = MatrixXd::Zero(m, m);
    F2(0, m - 1) = 1.0;
    for (int i = 1; i < m; ++i) F2(i, i - 1) = 1.0;
    G2(0, m - 1) = f.gamma.value_or(0.0);
    VectorXd w2 = VectorXd::Zero(m);
    w2(m - 1) = 1.0;

    VectorXd x(tx);
    x(0) = f.final_state.level;
    if (trend) x(1) = f.final_state.trend;
    VectorXd z(m);
    for (int i = 0; i < m; ++i) z(i) = f.final_state.season[static_cast<std::size_t>(i)];

    MatrixXd M = x * z.transpose();
    const Eigen::Index dim = tx * m;
    MatrixXd V = MatrixXd::Zero(dim, dim);
    const MatrixXd A = kron(F2, F1);
    const MatrixXd B = kron(F2, G1) + kron(G2, F1);
    const MatrixXd C = kron(G2, G1);
    const VectorXd w = kron(w2, w1);

    mu.assign(h, 0.0);
    var.assign(h, 0.0);
    for (int i = 0; i < h; ++i) {
        mu[i] = w1.dot(M * w2);
        const double v1 = w.dot(V * w);
        var[i] = (1.0 + s2) * v1 + s2 * mu[i] * mu[i];
        const VectorXd vm = Eigen::Map<const VectorXd>(M.data(), dim);
        const MatrixXd mm = vm * vm.transpose();
        V = A * V * A.transpose() +
            s2 * (A * V * C.transpose() + C * V * A.transpose() + B * (V + mm) * B.transpose() +
                  s2 * C * (3.0 * V + 2.0 * mm) * C.transpose());
        M = F1 * M * F2.transpose() + s2 * G1 * M * G2.transpose();
    }
}

}  // namespace ets_detail

/// Draws `paths` future sample paths of length h from the fitted model.
/// Returned row-major: paths x h.
inline std::vector<double> ets_simulate(const EtsFit& fit, int h, int paths, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, std::sqrt(std::max(fit.sigma2, 0.0)));
    EtsParameters p;
    p.alpha = fit.alpha;
    p.beta = fit.beta.value_or(0.0);
    p.gamma = fit.gamma.value_or(0.0);
    p.phi = fit.phi.value_or(1.0);
    const double phi = fit.spec.damped() ? p.phi : 1.0;
    std::vector<double> out(static_cast<std::size_t>(paths) * h);
    for (int i = 0; i < paths; ++i) {
        EtsState x = fit.final_state;
        bool alive = true;
        for (int t = 0; t < h; ++t) {
            double y = std::numeric_limits<double>::quiet_NaN();
            const double e = noise(rng);
            if (alive) {
                const double mu = ets_detail::one_step_mean(fit.spec, x, phi);
                y = fit.spec.error == ErrorType::Additive ? mu + e : mu * (1.0 + e);
                alive = std::isfinite(y) && ets_detail::update_state(fit.spec, x, y, p);
                if (!std::isfinite(y)) y = std::numeric_limits<double>::quiet_NaN();
            }
            out[static_cast<std::size_t>(i) * h + t] = y;
        }
    }
    return out;
}

/// True when no closed-form forecast variance exists (multiplicative trend).
inline bool ets_requires_simulation(const EtsModelSpec& spec) { return spec.multiplicative_trend(); }

constexpr int kDefaultSimulationPaths = 5000;

/// Point forecasts and prediction intervals for levels in (0, 1).
inline Forecast ets_forecast(const EtsFit& fit, int h, std::span<const double> levels,
                             int paths = kDefaultSimulationPaths, std::uint64_t seed = 0) {
    if (h < 1) throw Error(ErrorCode::InvalidArgument, "horizon must be >= 1");
    for (double lv : levels)
        if (!(lv > 0.0 && lv < 1.0)) throw Error(ErrorCode::InvalidArgument, "confidence levels must lie in (0, 1)");
    using namespace ets_detail;
    Forecast fc;
    fc.source = fit.name();
    fc.point.resize(h);
    for (int i = 0; i < h; ++i) fc.point[i] = point_at(fit, i + 1);

    if (ets_requires_simulation(fit.spec)) {
        fc.method = IntervalMethod::Simulated;
        const auto sims = ets_simulate(fit, h, paths, seed);
        std::vector<std::vector<double>> columns(h);
        for (int t = 0; t < h; ++t) {
            columns[t].reserve(paths);
            for (int i = 0; i < paths; ++i) {
                const double v = sims[static_cast<std::size_t>(i) * h + t];
                if (!std::isnan(v)) columns[t].push_back(v);
            }
            std::sort(columns[t].begin(), columns[t].end());
        }
        for (double lv : levels) {
            Interval iv;
            iv.lower.resize(h);
            iv.upper.resize(h);
            for (int t = 0; t < h; ++t) {
                iv.lower[t] = quantile_sorted(columns[t], 0.5 - lv / 2.0);
                iv.upper[t] = quantile_sorted(columns[t], 0.5 + lv / 2.0);
            }
            fc.intervals[lv] = std::move(iv);
        }
        return fc;
    }

    fc.method = IntervalMethod::Analytic;
    std::vector<double> var(h);
    const double s2 = fit.sigma2;
    if (fit.spec.error == ErrorType::Additive) {
        double acc = 0.0;
        for (int i = 0; i < h; ++i) {
            if (i > 0) {
                const double c = innovation_weight(fit, i);
                acc += c * c;
            }
            var[i] = s2 * (1.0 + acc);
        }
    } else if (fit.spec.season != SeasonType::Multiplicative) {
        std::vector<double> theta(h);
        for (int i = 0; i < h; ++i) {
            double t = fc.point[i] * fc.point[i];
            for (int j = 1; j <= i; ++j) {
                const double c = innovation_weight(fit, j);
                t += s2 * c * c * theta[i - j];
            }
            theta[i] = t;
            var[i] = (1.0 + s2) * theta[i] - fc.point[i] * fc.point[i];
        }
    } else {
        std::vector<double> mu;
        product_moments(fit, h, mu, var);
        fc.point = mu;
    }
    for (double lv : levels) {
        const double z = normal_quantile(0.5 + lv / 2.0);
        Interval iv;
        iv.lower.resize(h);
        iv.upper.resize(h);
        for (int t = 0; t < h; ++t) {
            const double half = z * std::sqrt(std::max(var[t], 0.0));
            iv.lower[t] = fc.point[t] - half;
            iv.upper[t] = fc.point[t] + half;
        }
        fc.intervals[lv] = std::move(iv);
    }
    return fc;
}

/// One candidate in a selection run.
struct CandidateRecord {
    std::string model;
    bool fitted = false;
    double criterion = std::numeric_limits<double>::infinity();
    double log_likelihood = 0.0;
    int k = 0;
    double fit_seconds = 0.0;
    std::string failure;  // error text when not fitted
};

struct EtsSelection {
    EtsFit best;
    std::vector<CandidateRecord> log;       // canonical order
    std::vector<std::string> excluded;      // dropped before fitting, with reason
    std::vector<EtsFit> fits;               // successful fits, canonical order
};

/// Candidates actually fitted for a pool on given data: seasonal models are
/// dropped for period 1 and multiplicative models for non-positive data.
inline std::vector<EtsModelSpec> ets_candidates(std::span<const EtsModelSpec> pool, std::span<const double> train,
                                                int period, std::vector<std::string>* excluded = nullptr) {
    const bool positive = std::all_of(train.begin(), train.end(), [](double v) { return v > 0.0; });
    std::vector<EtsModelSpec> out;
    for (const auto& s : pool) {
        if (s.has_season() && period < 2) continue;
        if (s.any_multiplicative() && !positive) {
            if (excluded) excluded->push_back(descriptor(s) + ": non-positive data");
            continue;
        }
        if (std::find(out.begin(), out.end(), s) == out.end()) out.push_back(s);
    }
    std::sort(out.begin(), out.end(), canonical_less);
    return out;
}

/// Fits every candidate and keeps the one with the smallest criterion; exact
/// ties go to the earlier model in canonical order.
inline EtsSelection ets_select(std::span<const double> train, int period, std::span<const EtsModelSpec> pool,
                               Criterion criterion, const EtsFitOptions& options = {}, bool keep_fits = false) {
    EtsSelection sel;
    const auto candidates = ets_candidates(pool, train, period, &sel.excluded);
    std::optional<EtsFit> best;
    for (const auto& spec : candidates) {
        CandidateRecord rec;
        rec.model = descriptor(spec);
        const auto started = std::chrono::steady_clock::now();
        try {
            auto fit = ets_fit(train, period, spec, options);
            rec.fitted = true;
            rec.criterion = fit.criteria.get(criterion);
            rec.log_likelihood = fit.log_likelihood;
            rec.k = fit.k;
            rec.fit_seconds = fit.fit_seconds;
            if (!std::isfinite(rec.criterion)) {
                rec.fitted = false;
                rec.failure = "criterion undefined";
            } else if (!best || rec.criterion < best->criteria.get(criterion)) {
                best = fit;
            }
            if (keep_fits && rec.fitted) sel.fits.push_back(std::move(fit));
        } catch (const Error& e) {
            rec.failure = e.what();
            rec.fit_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        }
        sel.log.push_back(std::move(rec));
    }
    if (!best) throw Error(ErrorCode::AllModelsFailed, "no ETS candidate could be fitted");
    sel.best = std::move(*best);
    return sel;
}

}  // namespace poolcast
