#include <poolcast/evaluation.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace poolcast;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "expected an error";
    return ErrorCode::InvalidArgument;
}

// Brute-force oracles written from the definitions.

double oracle_denominator(const std::vector<double>& y, int s) {
    double sum = 0.0;
    int count = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (static_cast<int>(i) < s) continue;
        sum += std::fabs(y[i] - y[i - s]);
        ++count;
    }
    return sum / count;
}

double oracle_w(double l, double u, double y, double a) {
    if (y < l) return (u - l) + (2 / a) * (l - y);
    if (y > u) return (u - l) + (2 / a) * (y - u);
    return u - l;
}

double t_density(double x, double nu) {
    return std::exp(std::lgamma((nu + 1) / 2) - std::lgamma(nu / 2) - 0.5 * std::log(nu * std::numbers::pi) -
                    (nu + 1) / 2 * std::log1p(x * x / nu));
}

/// Two-sided tail of Student's t by composite Simpson integration of the density.
double t_two_sided(double x, double nu) {
    x = std::fabs(x);
    const int n = 200000;
    const double step = x / n;
    double acc = t_density(0, nu) + t_density(x, nu);
    for (int i = 1; i < n; ++i) acc += (i % 2 ? 4.0 : 2.0) * t_density(i * step, nu);
    return 1.0 - 2.0 * acc * step / 3.0;
}

std::pair<double, double> dm_oracle(const std::vector<double>& a, const std::vector<double>& b, int h) {
    const int m = static_cast<int>(a.size());
    std::vector<double> d;
    for (int t = 0; t < m; ++t) d.push_back(std::fabs(a[t]) - std::fabs(b[t]));
    double dbar = 0;
    for (double v : d) dbar += v;
    dbar /= m;
    double V = 0;
    for (int k = -(h - 1); k <= h - 1; ++k) {
        const int kk = std::abs(k);
        double g = 0;
        for (int t = kk; t < m; ++t) g += (d[t] - dbar) * (d[t - kk] - dbar);
        V += g / m;
    }
    const double stat = dbar / std::sqrt(V / m) * std::sqrt((m + 1.0 - 2.0 * h + h * (h - 1.0) / m) / m);
    return {stat, t_two_sided(stat, m - 1.0)};
}

}  // namespace

TEST(Metrics, MaseExamples) {
    const std::vector<double> train{1, 2, 3, 4}, test{5, 6};
    EXPECT_DOUBLE_EQ(mase(train, test, std::vector<double>{5, 5}, 1), 0.5);
    EXPECT_DOUBLE_EQ(mase(train, test, test, 1), 0.0);
    EXPECT_EQ(code_of([] {
                  mase(std::vector<double>{1, 2, 3, 4, 1, 2, 3, 4}, std::vector<double>{1}, std::vector<double>{1}, 4);
              }),
              ErrorCode::ZeroDenominator);
}

TEST(Metrics, IntervalScoreExamples) {
    EXPECT_DOUBLE_EQ(interval_score(0, 1, 0.5, 0.05), 1.0);
    EXPECT_NEAR(interval_score(0, 1, -0.1, 0.05), 5.0, 1e-12);
    EXPECT_NEAR(interval_score(0, 1, 1.2, 0.2), 3.0, 1e-12);
}

TEST(Metrics, MsisExamples) {
    const std::vector<double> train{0, 2, 0, 2};
    EXPECT_DOUBLE_EQ(msis(train, std::vector<double>{2}, std::vector<double>{1}, std::vector<double>{3}, 0.05, 1), 1.0);
    const std::vector<double> test{1, 1.5, 2}, lo{0, 0, 0}, hi{4, 4, 4};
    EXPECT_DOUBLE_EQ(msis(train, test, lo, hi, 0.05, 1), 2.0);
    EXPECT_DOUBLE_EQ(msis(train, test, lo, hi, 0.05, 1, MsisForm::Sum), 6.0);
    const std::vector<double> lo2{-0.1, -0.1, -0.1}, hi2{4.1, 4.1, 4.1};
    EXPECT_GT(msis(train, test, lo2, hi2, 0.05, 1), msis(train, test, lo, hi, 0.05, 1));
    EXPECT_EQ(parse_msis_form("sum"), MsisForm::Sum);
    EXPECT_THROW(parse_msis_form("median"), Error);
}

TEST(Metrics, AgreeWithOracleOnRandomCases) {
    std::mt19937_64 rng(123);
    std::normal_distribution<double> n(0, 5);
    std::uniform_int_distribution<int> len(1, 8), per(1, 4);
    std::uniform_real_distribution<double> alpha(0.01, 0.4), width(0, 6);
    for (int c = 0; c < 100; ++c) {
        const int s = per(rng), h = len(rng);
        std::vector<double> train(static_cast<std::size_t>(s + 2 + len(rng))), test(h), f(h), lo(h), hi(h);
        for (auto& v : train) v = n(rng);
        for (int t = 0; t < h; ++t) {
            test[t] = n(rng);
            f[t] = n(rng);
            lo[t] = f[t] - width(rng);
            hi[t] = f[t] + width(rng);
        }
        const double a = alpha(rng);
        const double denom = oracle_denominator(train, s);
        double abs_err = 0, w = 0;
        std::vector<bool> cover;
        for (int t = 0; t < h; ++t) {
            abs_err += std::fabs(test[t] - f[t]);
            w += oracle_w(lo[t], hi[t], test[t], a);
            cover.push_back(!(test[t] < lo[t]) && !(test[t] > hi[t]));
        }
        const double m = abs_err / h / denom;
        const double ms = w / h / denom;
        EXPECT_NEAR(mase(train, test, f, s), m, 1e-12 * m);
        EXPECT_NEAR(msis(train, test, lo, hi, a, s), ms, 1e-12 * ms);
        for (int t = 0; t < h; ++t) {
            const double wt = oracle_w(lo[t], hi[t], test[t], a);
            EXPECT_NEAR(interval_score(lo[t], hi[t], test[t], a), wt, 1e-12 * wt);
        }
        EXPECT_EQ(covered(test, lo, hi), cover);
    }
}

TEST(Metrics, ScaleInvariance) {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> n(10, 3);
    std::vector<double> train(20), test(5), f(5), lo(5), hi(5);
    for (auto& v : train) v = n(rng);
    for (int t = 0; t < 5; ++t) {
        test[t] = n(rng);
        f[t] = n(rng);
        lo[t] = f[t] - 2;
        hi[t] = f[t] + 1;
    }
    const double c = 37.25;
    auto scaled = [c](std::vector<double> v) {
        for (auto& x : v) x *= c;
        return v;
    };
    EXPECT_NEAR(mase(scaled(train), scaled(test), scaled(f), 4), mase(train, test, f, 4), 1e-12);
    EXPECT_NEAR(msis(scaled(train), scaled(test), scaled(lo), scaled(hi), 0.05, 4), msis(train, test, lo, hi, 0.05, 4),
                1e-11);
}

TEST(Calibration, EdgeCases) {
    EvaluationRecord wide, degenerate;
    const std::vector<double> y{1, 2, 3};
    wide.covered[0.95] = covered(y, std::vector<double>(3, -1e300), std::vector<double>(3, 1e300));
    degenerate.covered[0.95] = covered(y, std::vector<double>(3, 7.0), std::vector<double>(3, 7.0));
    const std::vector<EvaluationRecord> a{wide}, b{degenerate}, both{wide, degenerate};
    EXPECT_EQ(calibration(a, 0.95).overall, 1.0);
    EXPECT_EQ(calibration(b, 0.95).overall, 0.0);
    const auto c = calibration(both, 0.95);
    EXPECT_EQ(c.overall, 0.5);
    EXPECT_EQ(c.per_horizon, (std::vector<double>{0.5, 0.5, 0.5}));
    EXPECT_THROW(calibration(std::vector<EvaluationRecord>{}, 0.95), Error);
}

TEST(DieboldMariano, CorrectionFactor) {
    for (int m : {4, 10, 57, 1000}) EXPECT_DOUBLE_EQ(hln_correction(m, 1), std::sqrt((m - 1.0) / m));
}

TEST(DieboldMariano, DegenerateAndTooSmall) {
    const std::vector<double> a{1, -2, 3, 4, 5};
    EXPECT_EQ(code_of([&] { dm_test_modified(a, a, 1); }), ErrorCode::DegenerateVariance);
    EXPECT_EQ(code_of([] { dm_test_modified(std::vector<double>{1, 2, 3}, std::vector<double>{2, 1, 3}, 1); }),
              ErrorCode::SampleTooSmall);
    EXPECT_EQ(code_of([&] { dm_test_modified(a, std::vector<double>{1, 2, 3, 4, 6}, 5); }), ErrorCode::SampleTooSmall);
}

TEST(DieboldMariano, SymmetryAndOracle) {
    std::mt19937_64 rng(31);
    std::normal_distribution<double> n(0, 1);
    std::uniform_int_distribution<int> len(6, 60), hor(1, 4);
    for (int c = 0; c < 50; ++c) {
        const int m = len(rng), h = hor(rng);
        std::vector<double> a(m), b(m);
        for (int t = 0; t < m; ++t) {
            a[t] = n(rng) * 1.3;
            b[t] = n(rng);
        }
        DmResult r;
        try {
            r = dm_test_modified(a, b, h);
        } catch (const Error& e) {
            ASSERT_EQ(e.code(), ErrorCode::DegenerateVariance);
            continue;
        }
        const auto [stat, p] = dm_oracle(a, b, h);
        EXPECT_NEAR(r.statistic, stat, 1e-9 * std::max(1.0, std::fabs(stat)));
        EXPECT_NEAR(r.p_value, p, 1e-9);
        const auto s = dm_test_modified(b, a, h);
        EXPECT_DOUBLE_EQ(s.statistic, -r.statistic);
        EXPECT_DOUBLE_EQ(s.p_value, r.p_value);
    }
}

TEST(DieboldMariano, DetectsShiftedLosses) {
    int hits = 0;
    for (int r = 0; r < 100; ++r) {
        std::mt19937_64 rng(7000 + r);
        std::normal_distribution<double> n(0, 1);
        std::exponential_distribution<double> shift(2.0);
        std::vector<double> a(200), b(200);
        for (int t = 0; t < 200; ++t) {
            b[t] = n(rng);
            a[t] = std::fabs(b[t]) + shift(rng);
        }
        const auto res = dm_test_modified(a, b, 1);
        hits += res.p_value < 0.05 && res.statistic > 0;
    }
    EXPECT_GE(hits, 95);
}

TEST(ValueAdded, PaperExamples) {
    EXPECT_NEAR(fva(0.942, 0.947), -0.53, 0.005);
    EXPECT_NEAR(fva(0.962, 0.938), 2.49, 0.005);
    EXPECT_EQ(fva(0.9, 0.9), 0.0);
    EXPECT_LT(fva(1.0, 1.2) * fva(1.2, 1.0), 0.0);
    EXPECT_NEAR(ccr(0.450, 0.973), -116.0, 0.5);
    EXPECT_NEAR(ccr(0.029, 0.141), -386.2, 0.05);
    EXPECT_EQ(ccr(2.0, 2.0), 0.0);
    EXPECT_NEAR(monetize(7.6e6 * 3600.0, 0.05), 380000.0, 1e-6);
    EXPECT_EQ(monetize(0.0, 0.05), 0.0);
    EXPECT_DOUBLE_EQ(monetize(3600.0, 0.05), 0.05);
    EXPECT_THROW(fva(0.0, 1.0), Error);
    EXPECT_THROW(monetize(-1.0, 0.05), Error);
}

TEST(Frequencies, ProfilesAndOrders) {
    std::vector<EvaluationRecord> recs(4);
    recs[0].selected_model = "ANN";
    recs[1].selected_model = "MAdN";
    recs[2].selected_model = "ANA";
    recs[3].selected_model = "MAdM";
    auto f = profile_frequencies(recs);
    EXPECT_EQ(f["level_only"], 25.0);
    EXPECT_EQ(f["trend_only"], 25.0);
    EXPECT_EQ(f["seasonal_only"], 25.0);
    EXPECT_EQ(f["trend_and_seasonal"], 25.0);
    for (auto& r : recs) r.selected_model = "ANN";
    EXPECT_EQ(profile_frequencies(recs)["level_only"], 100.0);

    std::map<std::string, ArimaOrder> k, km1;
    k["a"] = ArimaOrder{1, 0, 0, 0, 0, 0, 4, false};
    k["b"] = ArimaOrder{0, 1, 1, 1, 0, 0, 4, false};
    k["c"] = ArimaOrder{2, 0, 0, 0, 0, 1, 4, false};
    k["d"] = ArimaOrder{0, 0, 0, 0, 0, 0, 4, true};
    km1 = k;
    for (const auto& [term, v] : order_change_frequencies(k, km1)) EXPECT_EQ(v, 0.0) << term;
    km1["a"].p = 0;
    km1["c"].Q = 0;
    km1["c"].q = 1;
    const auto o = order_change_frequencies(k, km1);
    EXPECT_EQ(o.at("p"), 25.0);
    EXPECT_EQ(o.at("q"), 25.0);
    EXPECT_EQ(o.at("P"), 0.0);
    EXPECT_EQ(o.at("Q"), 25.0);
    EXPECT_EQ(o.at("any"), 50.0);
    km1.erase("d");
    EXPECT_EQ(code_of([&] { order_change_frequencies(k, km1); }), ErrorCode::IdMismatch);
    km1["e"] = ArimaOrder{};
    EXPECT_EQ(code_of([&] { order_change_frequencies(k, km1); }), ErrorCode::IdMismatch);
}
