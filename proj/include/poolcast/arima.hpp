#pragma once

// Seasonal ARIMA: differencing selection, exact maximum likelihood via a
// Kalman filter on the differenced series, exhaustive and stepwise order
// search, and Gaussian forecasting.

#include <poolcast/criteria.hpp>
#include <poolcast/error.hpp>
#include <poolcast/ets.hpp>
#include <poolcast/forecast.hpp>
#include <poolcast/optim.hpp>
#include <poolcast/stats.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace poolcast {

struct ArimaOrder {
    int p = 0, d = 0, q = 0;
    int P = 0, D = 0, Q = 0;
    int period = 1;
    bool constant = false;

    int order() const { return p + q + P + Q; }
    bool operator==(const ArimaOrder&) const = default;

    void validate() const {
        if (p < 0 || d < 0 || q < 0 || P < 0 || D < 0 || Q < 0 || period < 1)
            throw Error(ErrorCode::InvalidOrder, "orders must be non-negative and the period positive");
        if (period == 1 && (P != 0 || D != 0 || Q != 0))
            throw Error(ErrorCode::InvalidOrder, "seasonal terms need a period > 1");
        if (constant && d + D > 1) throw Error(ErrorCode::InvalidOrder, "a constant needs d + D <= 1");
    }
};

/// "ARIMA(p,d,q)(P,D,Q)[s]+c"; the seasonal part is omitted for period 1.
inline std::string descriptor(const ArimaOrder& o) {
    std::string s = "ARIMA(" + std::to_string(o.p) + "," + std::to_string(o.d) + "," + std::to_string(o.q) + ")";
    if (o.period > 1)
        s += "(" + std::to_string(o.P) + "," + std::to_string(o.D) + "," + std::to_string(o.Q) + ")[" +
             std::to_string(o.period) + "]";
    if (o.constant) s += "+c";
    return s;
}

inline ArimaOrder parse_arima_descriptor(const std::string& text) {
    ArimaOrder o;
    int used = 0;
    if (std::sscanf(text.c_str(), "ARIMA(%d,%d,%d)%n", &o.p, &o.d, &o.q, &used) != 3)
        throw Error(ErrorCode::InvalidArgument, "bad ARIMA descriptor '" + text + "'");
    std::string_view rest(text);
    rest.remove_prefix(static_cast<std::size_t>(used));
    if (rest.starts_with("(")) {
        int more = 0;
        if (std::sscanf(rest.data(), "(%d,%d,%d)[%d]%n", &o.P, &o.D, &o.Q, &o.period, &more) != 4)
            throw Error(ErrorCode::InvalidArgument, "bad ARIMA descriptor '" + text + "'");
        rest.remove_prefix(static_cast<std::size_t>(more));
    }
    if (rest == "+c") o.constant = true;
    else if (!rest.empty()) throw Error(ErrorCode::InvalidArgument, "bad ARIMA descriptor '" + text + "'");
    o.validate();
    return o;
}

struct ArimaCoefficients {
    std::vector<double> ar, ma, sar, sma;
    double mean = 0.0;  // on the differenced scale; ignored without a constant
};

struct ArimaFit {
    ArimaOrder order;
    std::vector<double> ar, ma, sar, sma;
    std::optional<double> constant;
    double sigma2 = 0.0;
    double log_likelihood = 0.0;
    int k = 0;
    int n_effective = 0;
    Criteria criteria;
    double fit_seconds = 0.0;
    int evaluations = 0;

    // forecasting state
    std::vector<double> history;      // training series
    std::vector<double> full_ar;      // expanded phi(B)Phi(B^s), coefficients of B^1..
    std::vector<double> full_ma;      // expanded theta(B)Theta(B^s)
    std::vector<double> filtered;     // state estimate after the last observation
    std::vector<double> residuals;    // standardized one-step innovations

    std::string name() const { return descriptor(order); }
};

namespace arima_detail {

/// Coefficients c of 1 + sign * sum c_i B^i multiplied by the seasonal
/// polynomial in B^s. Returned without the leading 1.
inline std::vector<double> expand(std::span<const double> ns, std::span<const double> seas, int s, double sign) {
    const std::size_t deg = ns.size() + seas.size() * static_cast<std::size_t>(s);
    std::vector<double> a(ns.size() + 1, 0.0), b(seas.size() * static_cast<std::size_t>(s) + 1, 0.0);
    a[0] = b[0] = 1.0;
    for (std::size_t i = 0; i < ns.size(); ++i) a[i + 1] = sign * ns[i];
    for (std::size_t i = 0; i < seas.size(); ++i) b[(i + 1) * static_cast<std::size_t>(s)] = sign * seas[i];
    std::vector<double> c(deg + 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) c[i + j] += a[i] * b[j];
    std::vector<double> out(deg);
    for (std::size_t i = 1; i <= deg; ++i) out[i - 1] = sign * c[i];
    return out;
}

/// Differencing polynomial (1-B)^d (1-B^s)^D written as 1 - sum delta_i B^i.
inline std::vector<double> differencing_polynomial(int d, int D, int s) {
    std::vector<double> c{1.0};
    auto mul = [&](int lag) {
        std::vector<double> r(c.size() + static_cast<std::size_t>(lag), 0.0);
        for (std::size_t i = 0; i < c.size(); ++i) {
            r[i] += c[i];
            r[i + static_cast<std::size_t>(lag)] -= c[i];
        }
        c = std::move(r);
    };
    for (int i = 0; i < d; ++i) mul(1);
    for (int i = 0; i < D; ++i) mul(s);
    std::vector<double> out(c.size() - 1);
    for (std::size_t i = 1; i < c.size(); ++i) out[i - 1] = -c[i];
    return out;
}

inline std::vector<double> apply_differencing(std::span<const double> y, int d, int D, int s) {
    std::vector<double> w(y.begin(), y.end());
    for (int i = 0; i < D; ++i) w = difference(w, s);
    for (int i = 0; i < d; ++i) w = difference(w, 1);
    return w;
}

/// Maps unconstrained values to a stationary AR coefficient vector through
/// partial autocorrelations.
inline std::vector<double> to_stationary(std::span<const double> raw) {
    const std::size_t p = raw.size();
    std::vector<double> out(p), work(p);
    for (std::size_t j = 0; j < p; ++j) work[j] = out[j] = std::tanh(raw[j]);
    for (std::size_t j = 1; j < p; ++j) {
        const double a = out[j];
        for (std::size_t k = 0; k < j; ++k) work[k] -= a * out[j - k - 1];
        for (std::size_t k = 0; k < j; ++k) out[k] = work[k];
    }
    return out;
}

inline std::vector<double> from_stationary(std::span<const double> coef) {
    const std::size_t p = coef.size();
    std::vector<double> out(coef.begin(), coef.end()), work(out);
    for (std::size_t j = p; j-- > 1;) {
        const double a = out[j];
        for (std::size_t k = 0; k < j; ++k) work[k] = (out[k] + a * out[j - k - 1]) / (1.0 - a * a);
        for (std::size_t k = 0; k < j; ++k) out[k] = work[k];
    }
    for (auto& v : out) v = std::atanh(std::clamp(v, -0.999999, 0.999999));
    return out;
}

inline std::vector<double> psi_weights(std::span<const double> ar, std::span<const double> ma, std::size_t count) {
    std::vector<double> psi(count, 0.0);
    if (count == 0) return psi;
    psi[0] = 1.0;
    for (std::size_t j = 1; j < count; ++j) {
        double v = j <= ma.size() ? ma[j - 1] : 0.0;
        for (std::size_t i = 1; i <= std::min(j, ar.size()); ++i) v += ar[i - 1] * psi[j - i];
        psi[j] = v;
    }
    return psi;
}

/// Autocovariances gamma(0..max_lag) of a stationary ARMA with unit
/// innovation variance.
inline std::vector<double> arma_autocovariance(std::span<const double> ar, std::span<const double> ma,
                                               std::size_t max_lag) {
    const std::size_t p = ar.size(), q = ma.size();
    const auto psi = psi_weights(ar, ma, q + 1);
    auto theta = [&](std::size_t j) { return j == 0 ? 1.0 : (j <= q ? ma[j - 1] : 0.0); };
    auto rhs = [&](std::size_t k) {
        double s = 0.0;
        for (std::size_t j = k; j <= q; ++j) s += theta(j) * psi[j - k];
        return s;
    };
    std::vector<double> gamma(std::max(max_lag, p) + 1, 0.0);
    if (p > 0) {
        Eigen::MatrixXd A = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(p + 1), static_cast<Eigen::Index>(p + 1));
        Eigen::VectorXd b(static_cast<Eigen::Index>(p + 1));
        for (std::size_t k = 0; k <= p; ++k) {
            for (std::size_t i = 1; i <= p; ++i) {
                const std::size_t lag = k >= i ? k - i : i - k;
                A(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(lag)) -= ar[i - 1];
            }
            b(static_cast<Eigen::Index>(k)) = rhs(k);
        }
        const Eigen::VectorXd g = A.partialPivLu().solve(b);
        for (std::size_t k = 0; k <= p; ++k) gamma[k] = g(static_cast<Eigen::Index>(k));
    } else {
        gamma[0] = rhs(0);
    }
    for (std::size_t k = p + 1; k < gamma.size(); ++k) {
        double v = rhs(k);
        for (std::size_t i = 1; i <= p; ++i) v += ar[i - 1] * gamma[k - i];
        gamma[k] = v;
    }
    gamma.resize(max_lag + 1);
    return gamma;
}

/// Companion-form state model: state dimension r = max(p, q + 1),
/// T = [phi | shift], R = (1, theta_1, ..., theta_{r-1}).
struct StateModel {
    std::size_t r = 1;
    std::vector<double> phi;  // length r
    std::vector<double> R;    // length r

    StateModel(std::span<const double> ar, std::span<const double> ma) {
        r = std::max(ar.size(), ma.size() + 1);
        phi.assign(r, 0.0);
        R.assign(r, 0.0);
        std::copy(ar.begin(), ar.end(), phi.begin());
        R[0] = 1.0;
        std::copy(ma.begin(), ma.end(), R.begin() + 1);
    }

    /// out = T P T' + R R' (row-major r x r).
    void propagate(const std::vector<double>& P, std::vector<double>& out) const {
        const double p00 = P[0];
        auto at = [&](std::size_t i, std::size_t j) { return (i < r && j < r) ? P[i * r + j] : 0.0; };
        for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t j = i; j < r; ++j) {
                const double v = phi[i] * phi[j] * p00 + phi[i] * at(0, j + 1) + phi[j] * at(i + 1, 0) +
                                 at(i + 1, j + 1) + R[i] * R[j];
                out[i * r + j] = v;
                out[j * r + i] = v;
            }
        }
    }

    void advance(std::vector<double>& a) const {
        const double a0 = a[0];
        for (std::size_t i = 0; i < r; ++i) a[i] = phi[i] * a0 + (i + 1 < r ? a[i + 1] : 0.0);
    }
};

/// Stationary state covariance (unit innovation variance) built from the
/// ARMA autocovariances: the first row in closed form, the rest from the
/// fixed-point relation P = T P T' + R R'.
inline std::vector<double> stationary_covariance(const StateModel& m, std::span<const double> ar,
                                                 std::span<const double> ma) {
    const std::size_t r = m.r;
    const auto gamma = arma_autocovariance(ar, ma, r + 1);
    const auto psi = psi_weights(ar, ma, r + 1);
    std::vector<double> P(r * r, 0.0);
    P[0] = gamma[0];
    for (std::size_t j = 1; j < r; ++j) {
        double v = 0.0;
        for (std::size_t k = j; k < r; ++k) v += m.phi[k] * gamma[k - j + 1] + m.R[k] * psi[k - j];
        P[j] = P[j * r] = v;
    }
    auto at = [&](std::size_t i, std::size_t j) { return (i < r && j < r) ? P[i * r + j] : 0.0; };
    for (std::size_t i = r; i-- > 1;) {
        for (std::size_t j = r; j-- > i;) {
            const double v = m.phi[i] * m.phi[j] * P[0] + m.phi[i] * at(0, j + 1) + m.phi[j] * at(i + 1, 0) +
                             at(i + 1, j + 1) + m.R[i] * m.R[j];
            P[i * r + j] = P[j * r + i] = v;
        }
    }
    return P;
}

/// Reference covariance by iterating the doubling recursion until the
/// transition power vanishes. Slower; used to cross-check.
inline std::vector<double> stationary_covariance_doubling(const StateModel& m) {
    const auto r = static_cast<Eigen::Index>(m.r);
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(r, r);
    for (Eigen::Index i = 0; i < r; ++i) {
        T(i, 0) = m.phi[static_cast<std::size_t>(i)];
        if (i + 1 < r) T(i, i + 1) = 1.0;
    }
    Eigen::VectorXd R(r);
    for (Eigen::Index i = 0; i < r; ++i) R(i) = m.R[static_cast<std::size_t>(i)];
    Eigen::MatrixXd P = R * R.transpose();
    Eigen::MatrixXd A = T;
    for (int it = 0; it < 60 && A.cwiseAbs().maxCoeff() > 1e-15; ++it) {
        P = P + A * P * A.transpose();
        A = A * A;
    }
    std::vector<double> out(m.r * m.r);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < r; ++j) out[static_cast<std::size_t>(i * r + j)] = P(i, j);
    return out;
}

struct Likelihood {
    double ssq = 0.0;     // sum of v_t^2 / F_t
    double sumlog = 0.0;  // sum of log F_t
    std::size_t n = 0;
    bool valid = true;
    std::vector<double> state;
    std::vector<double> std_residuals;
};

/// Exact Gaussian likelihood of the zero-mean stationary series z.
inline Likelihood kalman_likelihood(std::span<const double> z, std::span<const double> ar, std::span<const double> ma,
                                    bool keep_residuals = false) {
    Likelihood out;
    const StateModel m(ar, ma);
    const std::size_t r = m.r;
    std::vector<double> a(r, 0.0), P = stationary_covariance(m, ar, ma), Pp(r * r), M(r);
    if (keep_residuals) out.std_residuals.resize(z.size());
    for (std::size_t t = 0; t < z.size(); ++t) {
        if (t > 0) {
            m.advance(a);
            m.propagate(P, Pp);
            std::swap(P, Pp);
        }
        const double F = P[0];
        if (!(F > 0.0) || !std::isfinite(F)) {
            out.valid = false;
            return out;
        }
        const double v = z[t] - a[0];
        out.ssq += v * v / F;
        out.sumlog += std::log(F);
        if (keep_residuals) out.std_residuals[t] = v / std::sqrt(F);
        for (std::size_t i = 0; i < r; ++i) M[i] = P[i * r];
        for (std::size_t i = 0; i < r; ++i) {
            a[i] += M[i] * v / F;
            for (std::size_t j = 0; j < r; ++j) P[i * r + j] -= M[i] * M[j] / F;
        }
    }
    out.n = z.size();
    out.state = std::move(a);
    out.valid = std::isfinite(out.ssq) && std::isfinite(out.sumlog);
    return out;
}

inline double log_likelihood_from(const Likelihood& lk) {
    const double n = static_cast<double>(lk.n);
    const double s2 = std::max(lk.ssq / n, 1e-300);
    return -0.5 * (n * std::log(2.0 * std::numbers::pi * s2) + n + lk.sumlog);
}

/// Conditional sum of squares, conditioning on the first p + sP values.
inline double css(std::span<const double> z, std::span<const double> ar, std::span<const double> ma) {
    const std::size_t ncond = ar.size();
    std::vector<double> e(z.size(), 0.0);
    double ssq = 0.0;
    for (std::size_t t = ncond; t < z.size(); ++t) {
        double v = z[t];
        for (std::size_t i = 0; i < ar.size(); ++i) v -= ar[i] * z[t - i - 1];
        for (std::size_t j = 0; j < std::min(ma.size(), t - ncond); ++j) v -= ma[j] * e[t - j - 1];
        e[t] = v;
        ssq += v * v;
    }
    return ssq;
}

constexpr double kRootMargin = 1.001;

inline std::vector<double> negated(std::span<const double> v) {
    std::vector<double> out(v.begin(), v.end());
    for (auto& x : out) x = -x;
    return out;
}

}  // namespace arima_detail

/// Level-stationarity KPSS statistic with a Bartlett long-run variance.
/// A negative `lag_window` selects floor(4 (n/100)^(1/4)).
inline double kpss_statistic(std::span<const double> x, int lag_window = -1) {
    const std::size_t n = x.size();
    if (n < 8) throw Error(ErrorCode::SeriesTooShort, "KPSS needs at least 8 observations");
    const int L = lag_window >= 0 ? lag_window : static_cast<int>(std::floor(4.0 * std::pow(n / 100.0, 0.25)));
    const double m = mean(x);
    std::vector<double> e(n);
    for (std::size_t t = 0; t < n; ++t) e[t] = x[t] - m;
    double partial = 0.0, eta = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        partial += e[t];
        eta += partial * partial;
    }
    double lrv = 0.0;
    for (double v : e) lrv += v * v;
    lrv /= static_cast<double>(n);
    for (int l = 1; l <= L && static_cast<std::size_t>(l) < n; ++l) {
        double g = 0.0;
        for (std::size_t t = static_cast<std::size_t>(l); t < n; ++t) g += e[t] * e[t - l];
        lrv += 2.0 * (1.0 - l / (L + 1.0)) * g / static_cast<double>(n);
    }
    const double nn = static_cast<double>(n);
    if (eta == 0.0) return 0.0;
    if (!(lrv > 0.0)) return std::numeric_limits<double>::infinity();
    return eta / (nn * nn * lrv);
}

constexpr double kKpssCritical5 = 0.463;
constexpr double kSeasonalStrengthThreshold = 0.64;

/// Seasonal differences from the seasonal-strength rule, then first
/// differences from repeated KPSS tests at the 5% level (at most two).
inline std::pair<int, int> choose_differencing(std::span<const double> train, int period) {
    int D = 0;
    std::vector<double> x(train.begin(), train.end());
    if (period > 1 && static_cast<int>(x.size()) >= 2 * period) {
        if (seasonal_strength(x, period) >= kSeasonalStrengthThreshold) {
            D = 1;
            x = difference(x, period);
        }
    }
    int d = 0;
    while (d < 2) {
        if (kpss_statistic(x) <= kKpssCritical5) break;
        x = difference(x, 1);
        ++d;
        if (x.size() < 8) {
            if (d < 2) throw Error(ErrorCode::SeriesTooShort, "too few observations left after differencing");
            break;
        }
    }
    return {d, D};
}

struct ArimaFitOptions {
    AiccForm aicc_form = AiccForm::Standard;
    SimplexOptions simplex{1e-8, 2000, 1};
    std::optional<ArimaCoefficients> fixed;  // evaluate at these values instead of estimating
};

inline int arima_parameter_count(const ArimaOrder& o) { return o.order() + (o.constant ? 1 : 0) + 1; }

/// Exact Gaussian maximum likelihood on the differenced series, started from
/// a conditional-sum-of-squares fit.
inline ArimaFit arima_fit(std::span<const double> train, const ArimaOrder& order, const ArimaFitOptions& options = {}) {
    using namespace arima_detail;
    const auto started = std::chrono::steady_clock::now();
    order.validate();
    const int s = order.period;
    const auto w = apply_differencing(train, order.d, order.D, s);
    const int k = arima_parameter_count(order);
    const int n_eff = static_cast<int>(w.size());
    if (n_eff < k + 2)
        throw Error(ErrorCode::SeriesTooShort, descriptor(order) + ": " + std::to_string(n_eff) +
                                                   " differenced observations for " + std::to_string(k) + " parameters");
    const std::size_t ar_deg = static_cast<std::size_t>(order.p + s * order.P);
    if (static_cast<std::size_t>(n_eff) <= ar_deg + 1)
        throw Error(ErrorCode::SeriesTooShort, descriptor(order) + ": sample shorter than the AR lag span");

    const std::size_t np = static_cast<std::size_t>(order.p), nq = static_cast<std::size_t>(order.q);
    const std::size_t nP = static_cast<std::size_t>(order.P), nQ = static_cast<std::size_t>(order.Q);
    const std::size_t narma = np + nq + nP + nQ;

    struct Unpacked {
        std::vector<double> ar, ma, sar, sma;
        double mean = 0.0;
    };
    // v layout: ar (p), ma (q), sar (P), sma (Q), [mean]
    auto unpack = [&](std::span<const double> v, bool transform) {
        Unpacked u;
        auto take = [&](std::size_t off, std::size_t len) { return std::vector<double>(v.begin() + off, v.begin() + off + len); };
        u.ar = take(0, np);
        u.ma = take(np, nq);
        u.sar = take(np + nq, nP);
        u.sma = take(np + nq + nP, nQ);
        if (transform) {
            u.ar = to_stationary(u.ar);
            u.sar = to_stationary(u.sar);
        }
        u.mean = order.constant ? v[narma] : 0.0;
        return u;
    };
    auto centred = [&](double mu) {
        std::vector<double> z(w);
        for (auto& v : z) v -= mu;
        return z;
    };

    const double wmean = mean(w);
    const double wsd = std::sqrt(variance(w));
    Unpacked best;
    int evaluations = 0;

    if (options.fixed) {
        best.ar = options.fixed->ar;
        best.ma = options.fixed->ma;
        best.sar = options.fixed->sar;
        best.sma = options.fixed->sma;
        best.mean = order.constant ? options.fixed->mean : 0.0;
        if (best.ar.size() != np || best.ma.size() != nq || best.sar.size() != nP || best.sma.size() != nQ)
            throw Error(ErrorCode::InvalidArgument, "fixed coefficients do not match the order");
    } else if (narma == 0) {
        // the mean is the exact maximum likelihood estimate for white noise
        best.mean = order.constant ? wmean : 0.0;
    } else {
        const std::size_t dim = narma + (order.constant ? 1 : 0);
        std::vector<double> start(dim, 0.0), steps(dim, 0.1);
        if (order.constant) {
            start[narma] = wmean;
            steps[narma] = wsd > 0.0 ? 0.1 * wsd : std::max(0.1 * std::abs(wmean), 0.1);
        }
        // conditional sum of squares for starting values
        auto css_obj = [&](std::span<const double> v) {
            const auto u = unpack(v, false);
            const auto z = centred(u.mean);
            const double r = css(z, expand(u.ar, u.sar, s, -1.0), expand(u.ma, u.sma, s, 1.0));
            return std::isfinite(r) ? r : std::numeric_limits<double>::infinity();
        };
        SimplexOptions css_opt = options.simplex;
        css_opt.restarts = 0;
        const auto css_res = minimize_simplex(css_obj, start, steps, css_opt);
        evaluations += css_res.evaluations;
        std::vector<double> ml_start(dim, 0.0);
        if (order.constant) ml_start[narma] = wmean;
        if (std::isfinite(css_res.value)) {
            const auto u = unpack(css_res.x, false);
            const bool ar_ok = min_root_modulus(u.ar) > 1.0 && min_root_modulus(u.sar) > 1.0;
            const bool ma_ok = min_root_modulus(negated(u.ma)) > 1.0 && min_root_modulus(negated(u.sma)) > 1.0;
            if (ar_ok) {
                auto a = from_stationary(u.ar), sa = from_stationary(u.sar);
                std::copy(a.begin(), a.end(), ml_start.begin());
                std::copy(sa.begin(), sa.end(), ml_start.begin() + static_cast<std::ptrdiff_t>(np + nq));
            }
            if (ma_ok) {
                std::copy(u.ma.begin(), u.ma.end(), ml_start.begin() + static_cast<std::ptrdiff_t>(np));
                std::copy(u.sma.begin(), u.sma.end(), ml_start.begin() + static_cast<std::ptrdiff_t>(np + nq + nP));
            }
            if (order.constant) ml_start[narma] = u.mean;
        }
        auto ml_obj = [&](std::span<const double> v) {
            const auto u = unpack(v, true);
            const auto z = centred(u.mean);
            const auto lk = kalman_likelihood(z, expand(u.ar, u.sar, s, -1.0), expand(u.ma, u.sma, s, 1.0));
            if (!lk.valid) return std::numeric_limits<double>::infinity();
            const double nn = static_cast<double>(lk.n);
            return nn * std::log(std::max(lk.ssq / nn, 1e-300)) + lk.sumlog;
        };
        const auto res = minimize_simplex(ml_obj, ml_start, steps, options.simplex);
        evaluations += res.evaluations;
        if (!std::isfinite(res.value)) throw Error(ErrorCode::OptimizationFailed, descriptor(order));
        best = unpack(res.x, true);
    }

    if (min_root_modulus(best.ar) <= kRootMargin || min_root_modulus(best.sar) <= kRootMargin)
        throw Error(ErrorCode::NonStationaryFit, descriptor(order));
    if (min_root_modulus(negated(best.ma)) <= kRootMargin || min_root_modulus(negated(best.sma)) <= kRootMargin)
        throw Error(ErrorCode::NonInvertibleFit, descriptor(order));

    ArimaFit fit;
    fit.order = order;
    fit.ar = best.ar;
    fit.ma = best.ma;
    fit.sar = best.sar;
    fit.sma = best.sma;
    if (order.constant) fit.constant = best.mean;
    fit.full_ar = expand(best.ar, best.sar, s, -1.0);
    fit.full_ma = expand(best.ma, best.sma, s, 1.0);
    const auto lk = kalman_likelihood(centred(best.mean), fit.full_ar, fit.full_ma, true);
    if (!lk.valid) throw Error(ErrorCode::OptimizationFailed, descriptor(order) + ": likelihood undefined");
    fit.sigma2 = lk.ssq / static_cast<double>(lk.n);
    fit.log_likelihood = log_likelihood_from(lk);
    fit.k = k;
    fit.n_effective = n_eff;
    fit.criteria = all_criteria(fit.log_likelihood, k, n_eff, options.aicc_form);
    fit.history.assign(train.begin(), train.end());
    fit.filtered = lk.state;
    fit.residuals = lk.std_residuals;
    fit.evaluations = evaluations;
    fit.fit_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return fit;
}

/// Difference-equation point forecasts with Gaussian intervals from the
/// cumulative psi-weight variance of the integrated model.
inline Forecast arima_forecast(const ArimaFit& fit, int h, std::span<const double> levels) {
    using namespace arima_detail;
    if (h < 1) throw Error(ErrorCode::InvalidArgument, "horizon must be >= 1");
    for (double lv : levels)
        if (!(lv > 0.0 && lv < 1.0)) throw Error(ErrorCode::InvalidArgument, "confidence levels must lie in (0, 1)");
    const auto& o = fit.order;
    const StateModel m(fit.full_ar, fit.full_ma);
    std::vector<double> a = fit.filtered;
    const double mu = fit.constant.value_or(0.0);
    std::vector<double> wf(h);
    for (int i = 0; i < h; ++i) {
        m.advance(a);
        wf[i] = a[0] + mu;
    }
    const auto delta = differencing_polynomial(o.d, o.D, o.period);
    std::vector<double> y(fit.history);
    Forecast fc;
    fc.source = fit.name();
    fc.method = IntervalMethod::Analytic;
    fc.point.resize(h);
    for (int i = 0; i < h; ++i) {
        double v = wf[i];
        const std::size_t t = y.size();
        for (std::size_t j = 0; j < delta.size(); ++j) v += delta[j] * y[t - j - 1];
        y.push_back(v);
        fc.point[i] = v;
    }
    // integrated AR polynomial phi(B) * delta(B), both written as 1 - sum c_i B^i
    std::vector<double> a_poly(fit.full_ar.size() + 1, 0.0), d_poly(delta.size() + 1, 0.0);
    a_poly[0] = d_poly[0] = 1.0;
    for (std::size_t i = 0; i < fit.full_ar.size(); ++i) a_poly[i + 1] = -fit.full_ar[i];
    for (std::size_t i = 0; i < delta.size(); ++i) d_poly[i + 1] = -delta[i];
    std::vector<double> prod(a_poly.size() + d_poly.size() - 1, 0.0);
    for (std::size_t i = 0; i < a_poly.size(); ++i)
        for (std::size_t j = 0; j < d_poly.size(); ++j) prod[i + j] += a_poly[i] * d_poly[j];
    std::vector<double> integrated(prod.size() - 1);
    for (std::size_t i = 1; i < prod.size(); ++i) integrated[i - 1] = -prod[i];
    const auto psi = psi_weights(integrated, fit.full_ma, static_cast<std::size_t>(h));
    std::vector<double> var(h);
    double acc = 0.0;
    for (int i = 0; i < h; ++i) {
        acc += psi[i] * psi[i];
        var[i] = fit.sigma2 * acc;
    }
    for (double lv : levels) {
        const double z = normal_quantile(0.5 + lv / 2.0);
        Interval iv;
        iv.lower.resize(h);
        iv.upper.resize(h);
        for (int i = 0; i < h; ++i) {
            const double half = z * std::sqrt(var[i]);
            iv.lower[i] = fc.point[i] - half;
            iv.upper[i] = fc.point[i] + half;
        }
        fc.intervals[lv] = std::move(iv);
    }
    return fc;
}

struct ArimaSelection {
    ArimaFit best;
    std::vector<CandidateRecord> log;
    int d = 0;
    int D = 0;
};

/// (p, q, P, Q) tuples with p + q + P + Q <= K in lexicographic order; the
/// seasonal orders stay at zero for non-seasonal data.
inline std::vector<std::array<int, 4>> arima_order_tuples(int K, bool seasonal) {
    std::vector<std::array<int, 4>> out;
    const int maxS = seasonal ? K : 0;
    for (int p = 0; p <= K; ++p)
        for (int q = 0; p + q <= K; ++q)
            for (int P = 0; P <= maxS && p + q + P <= K; ++P)
                for (int Q = 0; Q <= maxS && p + q + P + Q <= K; ++Q) out.push_back({p, q, P, Q});
    return out;
}

namespace arima_detail {

inline CandidateRecord try_fit(std::span<const double> train, const ArimaOrder& o, Criterion criterion,
                               const ArimaFitOptions& options, std::optional<ArimaFit>& best) {
    CandidateRecord rec;
    rec.model = descriptor(o);
    const auto started = std::chrono::steady_clock::now();
    try {
        auto fit = arima_fit(train, o, options);
        rec.criterion = fit.criteria.get(criterion);
        rec.log_likelihood = fit.log_likelihood;
        rec.k = fit.k;
        rec.fit_seconds = fit.fit_seconds;
        rec.fitted = std::isfinite(rec.criterion);
        if (!rec.fitted) rec.failure = "criterion undefined";
        else if (!best || rec.criterion < best->criteria.get(criterion)) best = std::move(fit);
    } catch (const Error& e) {
        rec.failure = e.what();
        rec.fit_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    }
    return rec;
}

}  // namespace arima_detail

/// Fits every order with p + q + P + Q <= K (with and without a constant when
/// d + D <= 1) after fixing the differencing once.
inline ArimaSelection arima_search_exhaustive(std::span<const double> train, int period, int K, Criterion criterion,
                                              const ArimaFitOptions& options = {}) {
    if (K < 1 || K > 8) throw Error(ErrorCode::InvalidArgument, "maximum order K must be in 1..8");
    ArimaSelection sel;
    std::tie(sel.d, sel.D) = choose_differencing(train, period);
    const bool allow_const = sel.d + sel.D <= 1;
    std::optional<ArimaFit> best;
    for (const auto& t : arima_order_tuples(K, period > 1)) {
        for (bool c : {false, true}) {
            if (c && !allow_const) continue;
            ArimaOrder o{t[0], sel.d, t[1], t[2], sel.D, t[3], period, c};
            sel.log.push_back(arima_detail::try_fit(train, o, criterion, options, best));
        }
    }
    if (!best) throw Error(ErrorCode::AllModelsFailed, "no ARIMA candidate could be fitted");
    sel.best = std::move(*best);
    return sel;
}

struct StepwiseLimits {
    int max_p = 5, max_q = 5, max_P = 2, max_Q = 2;
    int max_order = 8;
};

/// Greedy hill-climb over (p, q, P, Q, constant): moves to the first
/// neighbour that improves the criterion and stops when none does.
inline ArimaSelection arima_search_stepwise(std::span<const double> train, int period, Criterion criterion,
                                            const ArimaFitOptions& options = {}, const StepwiseLimits& limits = {}) {
    ArimaSelection sel;
    std::tie(sel.d, sel.D) = choose_differencing(train, period);
    const bool seasonal = period > 1;
    const bool allow_const = sel.d + sel.D <= 1;
    using Key = std::tuple<int, int, int, int, bool>;
    std::map<Key, double> visited;
    std::optional<ArimaFit> best;

    auto valid = [&](const Key& key) {
        const auto [p, q, P, Q, c] = key;
        if (p < 0 || q < 0 || P < 0 || Q < 0) return false;
        if (p > limits.max_p || q > limits.max_q || P > limits.max_P || Q > limits.max_Q) return false;
        if (!seasonal && (P > 0 || Q > 0)) return false;
        if (p + q + P + Q > limits.max_order) return false;
        return !c || allow_const;
    };
    auto visit = [&](const Key& key) -> double {
        if (auto it = visited.find(key); it != visited.end()) return it->second;
        const auto [p, q, P, Q, c] = key;
        ArimaOrder o{p, sel.d, q, P, sel.D, Q, period, c};
        auto rec = arima_detail::try_fit(train, o, criterion, options, best);
        const double value = rec.fitted ? rec.criterion : std::numeric_limits<double>::infinity();
        visited.emplace(key, value);
        sel.log.push_back(std::move(rec));
        return value;
    };

    std::vector<Key> initial = {{2, 2, 1, 1, allow_const}, {0, 0, 0, 0, allow_const}, {1, 0, 1, 0, allow_const},
                                {0, 1, 0, 1, allow_const}};
    Key incumbent{};
    double incumbent_value = std::numeric_limits<double>::infinity();
    bool have = false;
    for (auto key : initial) {
        if (!seasonal) {
            std::get<2>(key) = 0;
            std::get<3>(key) = 0;
        }
        if (!valid(key) || visited.count(key)) continue;
        const double v = visit(key);
        if (!have || v < incumbent_value) {
            incumbent = key;
            incumbent_value = v;
            have = true;
        }
    }

    bool improved = true;
    while (improved) {
        improved = false;
        const auto [p, q, P, Q, c] = incumbent;
        const std::vector<Key> neighbours = {
            {p, q, P - 1, Q, c}, {p, q, P + 1, Q, c}, {p, q, P, Q - 1, c}, {p, q, P, Q + 1, c},
            {p - 1, q, P, Q, c}, {p + 1, q, P, Q, c}, {p, q - 1, P, Q, c}, {p, q + 1, P, Q, c},
            {p, q, P, Q, !c}};
        for (const auto& key : neighbours) {
            if (!valid(key) || visited.count(key)) continue;
            const double v = visit(key);
            if (v < incumbent_value) {
                incumbent = key;
                incumbent_value = v;
                improved = true;
                break;
            }
        }
    }
    if (!best) throw Error(ErrorCode::AllModelsFailed, "no ARIMA candidate could be fitted");
    sel.best = std::move(*best);
    return sel;
}

}  // namespace poolcast
