#include <poolcast/arima.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <set>

using namespace poolcast;

namespace {

const std::vector<double> kLevels{0.8, 0.95};

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "expected an error";
    return ErrorCode::InvalidArgument;
}

std::vector<double> white_noise(std::uint64_t seed, int n, double mu = 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> e(mu, 1.0);
    std::vector<double> y(n);
    for (auto& v : y) v = e(rng);
    return y;
}

std::vector<double> ar1(std::uint64_t seed, int n, double phi) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> e(0.0, 1.0);
    std::vector<double> y(n);
    double x = e(rng) / std::sqrt(1 - phi * phi);
    for (auto& v : y) {
        v = x;
        x = phi * x + e(rng);
    }
    return y;
}

/// Textbook KPSS written with explicit sums, used as an independent oracle.
double kpss_oracle(const std::vector<double>& x, int L) {
    const double n = static_cast<double>(x.size());
    double m = 0.0;
    for (double v : x) m += v;
    m /= n;
    double num = 0.0;
    for (std::size_t t = 0; t < x.size(); ++t) {
        double S = 0.0;
        for (std::size_t i = 0; i <= t; ++i) S += x[i] - m;
        num += S * S;
    }
    double s2 = 0.0;
    for (int l = 0; l <= L; ++l) {
        double g = 0.0;
        for (std::size_t t = static_cast<std::size_t>(l); t < x.size(); ++t) g += (x[t] - m) * (x[t - l] - m);
        s2 += (l == 0 ? 1.0 : 2.0 * (1.0 - l / (L + 1.0))) * g / n;
    }
    return num / (n * n * s2);
}

}  // namespace

TEST(Kpss, GoldenValues) {
    std::vector<double> alt(100), ramp(100);
    for (int i = 0; i < 100; ++i) {
        alt[i] = i % 2 ? -1.0 : 1.0;
        ramp[i] = i + 1.0;
    }
    const double a = kpss_statistic(alt);
    const double r = kpss_statistic(ramp);
    EXPECT_LT(a, kKpssCritical5);
    EXPECT_GT(r, kKpssCritical5);
    EXPECT_NEAR(a, kpss_oracle(alt, 4), 1e-12);
    EXPECT_NEAR(r, kpss_oracle(ramp, 4), 1e-9);
    // frozen from the brute-force oracle
    EXPECT_NEAR(a, 0.025, 1e-12);
    EXPECT_NEAR(r, 2.1010059238282817, 1e-9);
    EXPECT_EQ(kpss_statistic(std::vector<double>(20, 3.0)), 0.0);
    EXPECT_EQ(code_of([] { kpss_statistic(std::vector<double>(7, 1.0)); }), ErrorCode::SeriesTooShort);

    const auto wn = white_noise(5, 73);
    for (int L : {0, 1, 3, 6}) EXPECT_NEAR(kpss_statistic(wn, L), kpss_oracle(wn, L), 1e-10);
}

TEST(Differencing, WhiteNoiseNeedsNone) {
    int none = 0, idempotent = 0;
    for (int r = 0; r < 200; ++r) {
        const auto y = white_noise(100 + r, 100, 10.0);
        const auto [d, D] = choose_differencing(y, 1);
        none += d == 0 && D == 0;
        const auto w = arima_detail::apply_differencing(y, d, D, 1);
        idempotent += choose_differencing(w, 1) == std::pair<int, int>(0, 0);
    }
    EXPECT_GE(none, 190);
    EXPECT_GE(idempotent, 180);
}

TEST(Differencing, RandomWalkNeedsFirstDifference) {
    int hits = 0;
    for (int r = 0; r < 200; ++r) {
        auto y = white_noise(500 + r, 300);
        for (std::size_t t = 1; t < y.size(); ++t) y[t] += y[t - 1];
        hits += choose_differencing(y, 1).first >= 1;
    }
    EXPECT_GE(hits, 190);
}

TEST(Differencing, SeasonalPatternWithTrend) {
    const double pattern[4] = {5, -3, 8, -10};
    std::vector<double> y;
    for (int t = 0; t < 40; ++t) y.push_back(100 + 0.5 * t + pattern[t % 4]);
    EXPECT_EQ(choose_differencing(y, 4).second, 1);
    EXPECT_EQ(code_of([] { choose_differencing(std::vector<double>{1, 5, 9, 2, 1.1, 5.1, 9.1, 2.1}, 4); }),
              ErrorCode::SeriesTooShort);
    EXPECT_EQ(code_of([] { choose_differencing(std::vector<double>{1, 2, 3, 4, 5, 6, 7}, 1); }),
              ErrorCode::SeriesTooShort);
}

TEST(Arima, RandomWalkClosedForm) {
    const std::vector<double> y{3, 5, 4, 6};
    const ArimaOrder o{0, 1, 0, 0, 0, 0, 1, false};
    const auto f = arima_fit(y, o);
    EXPECT_NEAR(f.sigma2, 3.0, 1e-12);
    EXPECT_NEAR(f.log_likelihood, -0.5 * (3 * std::log(2 * std::numbers::pi * 3.0) + 3.0), 1e-10);
    EXPECT_EQ(f.k, 1);
    EXPECT_EQ(f.n_effective, 3);
    const auto fc = arima_forecast(f, 5, kLevels);
    for (double v : fc.point) EXPECT_DOUBLE_EQ(v, 6.0);
    for (int h = 1; h < 5; ++h)
        EXPECT_GE(fc.intervals.at(0.95).upper[h] - fc.point[h], fc.intervals.at(0.95).upper[h - 1] - fc.point[h - 1]);
    EXPECT_NEAR(fc.intervals.at(0.95).upper[3] - 6.0, normal_quantile(0.975) * std::sqrt(3.0 * 4), 1e-9);
}

TEST(Arima, ConstantIsSampleMean) {
    const auto y = white_noise(3, 60, 4.0);
    const auto f = arima_fit(y, ArimaOrder{0, 0, 0, 0, 0, 0, 1, true});
    ASSERT_TRUE(f.constant.has_value());
    EXPECT_NEAR(*f.constant, mean(y), 1e-12);
    double msd = 0.0;
    for (double v : y) msd += (v - mean(y)) * (v - mean(y));
    EXPECT_NEAR(f.sigma2, msd / y.size(), 1e-12);
}

TEST(Arima, FixedArForecastHalves) {
    ArimaFitOptions opt;
    opt.fixed = ArimaCoefficients{{0.5}, {}, {}, {}, 0.0};
    const auto f = arima_fit(std::vector<double>{1, 3, 2, 5, 8}, ArimaOrder{1, 0, 0, 0, 0, 0, 1, false}, opt);
    const auto fc = arima_forecast(f, 4, kLevels);
    EXPECT_NEAR(fc.point[0], 4.0, 1e-12);
    EXPECT_NEAR(fc.point[1], 2.0, 1e-12);
    EXPECT_NEAR(fc.point[2], 1.0, 1e-12);
    EXPECT_NEAR(fc.point[3], 0.5, 1e-12);
    for (int h = 1; h < 4; ++h)
        EXPECT_GE(fc.intervals.at(0.8).upper[h] - fc.point[h], fc.intervals.at(0.8).upper[h - 1] - fc.point[h - 1]);
}

TEST(Arima, RecoversAr1) {
    int hits = 0;
    for (int r = 0; r < 100; ++r) {
        const auto y = ar1(900 + r, 500, 0.7);
        const auto f = arima_fit(y, ArimaOrder{1, 0, 0, 0, 0, 0, 1, false});
        hits += std::abs(f.ar[0] - 0.7) <= 0.1;
    }
    EXPECT_GE(hits, 90);
}

TEST(Arima, ExactLikelihoodMatchesDirectGaussian) {
    // AR(1) exact likelihood written out as a product of conditionals
    const auto y = ar1(17, 30, 0.6);
    ArimaFitOptions opt;
    opt.fixed = ArimaCoefficients{{0.6}, {}, {}, {}, 0.0};
    const auto f = arima_fit(y, ArimaOrder{1, 0, 0, 0, 0, 0, 1, false}, opt);
    double ssq = y[0] * y[0] * (1 - 0.36);
    for (std::size_t t = 1; t < y.size(); ++t) ssq += (y[t] - 0.6 * y[t - 1]) * (y[t] - 0.6 * y[t - 1]);
    const double n = 30;
    const double s2 = ssq / n;
    const double expected = -0.5 * (n * std::log(2 * std::numbers::pi * s2) + n + std::log(1.0 / (1 - 0.36)));
    EXPECT_NEAR(f.log_likelihood, expected, 1e-9);
    EXPECT_NEAR(f.sigma2, s2, 1e-12);
}

TEST(Arima, StationaryCovarianceAgreesWithDoubling) {
    const std::vector<std::pair<std::vector<double>, std::vector<double>>> cases{
        {{0.5}, {}}, {{0.3, -0.2}, {0.4}}, {{}, {0.6, 0.2}}, {{1.1, -0.3, 0.1}, {-0.5, 0.25}},
        {arima_detail::expand(std::vector<double>{0.4}, std::vector<double>{0.5}, 4, -1.0),
         arima_detail::expand(std::vector<double>{0.3}, std::vector<double>{-0.4}, 4, 1.0)}};
    for (const auto& [ar, ma] : cases) {
        const arima_detail::StateModel m(ar, ma);
        const auto a = arima_detail::stationary_covariance(m, ar, ma);
        const auto b = arima_detail::stationary_covariance_doubling(m);
        ASSERT_EQ(a.size(), b.size());
        for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-8 * (1 + std::abs(b[i])));
    }
}

TEST(Arima, RootMarginRejectsUnitRoot) {
    ArimaFitOptions opt;
    opt.fixed = ArimaCoefficients{{1.0}, {}, {}, {}, 0.0};
    const auto y = white_noise(1, 30);
    EXPECT_EQ(code_of([&] { arima_fit(y, ArimaOrder{1, 0, 0, 0, 0, 0, 1, false}, opt); }), ErrorCode::NonStationaryFit);
    opt.fixed = ArimaCoefficients{{}, {-1.0}, {}, {}, 0.0};
    EXPECT_EQ(code_of([&] { arima_fit(y, ArimaOrder{0, 0, 1, 0, 0, 0, 1, false}, opt); }), ErrorCode::NonInvertibleFit);
}

TEST(Arima, OrdersAndDescriptors) {
    EXPECT_EQ(arima_order_tuples(1, true).size(), 5u);
    const std::vector<std::array<int, 4>> two{{0, 0, 0, 0}, {0, 1, 0, 0}, {0, 2, 0, 0},
                                              {1, 0, 0, 0}, {1, 1, 0, 0}, {2, 0, 0, 0}};
    EXPECT_EQ(arima_order_tuples(2, false), two);
    const std::size_t table[] = {5, 15, 35, 70, 126, 210, 330, 495};
    for (int K = 1; K <= 8; ++K) {
        EXPECT_EQ(arima_order_tuples(K, true).size(), table[K - 1]);
        EXPECT_EQ(arima_order_tuples(K, false).size(), static_cast<std::size_t>((K + 1) * (K + 2) / 2));
    }
    for (const auto* text : {"ARIMA(1,1,0)", "ARIMA(2,0,1)(1,1,0)[12]", "ARIMA(0,0,0)+c", "ARIMA(0,1,1)(0,0,1)[4]+c"})
        EXPECT_EQ(descriptor(parse_arima_descriptor(text)), text);
    EXPECT_EQ(code_of([] { parse_arima_descriptor("ARIMA(1,2,0)+c"); }), ErrorCode::InvalidOrder);
    EXPECT_EQ(code_of([] { ArimaOrder{0, 0, 0, 1, 0, 0, 1, false}.validate(); }), ErrorCode::InvalidOrder);
    EXPECT_EQ(code_of([] { ArimaOrder{-1, 0, 0, 0, 0, 0, 1, false}.validate(); }), ErrorCode::InvalidOrder);
    EXPECT_EQ(code_of([] { parse_arima_descriptor("ARMA(1,0)"); }), ErrorCode::InvalidArgument);
    EXPECT_EQ(arima_parameter_count(ArimaOrder{1, 1, 2, 1, 0, 1, 4, true}), 7);
}

TEST(ArimaSearch, ExhaustiveIsMinimalAndNested) {
    const auto y = ar1(77, 80, 0.5);
    EXPECT_EQ(code_of([&] { arima_search_exhaustive(y, 1, 9, Criterion::Aicc); }), ErrorCode::InvalidArgument);
    EXPECT_EQ(code_of([&] { arima_search_exhaustive(y, 1, 0, Criterion::Aicc); }), ErrorCode::InvalidArgument);
    double previous = std::numeric_limits<double>::infinity();
    for (int K = 1; K <= 4; ++K) {
        const auto sel = arima_search_exhaustive(y, 1, K, Criterion::Aicc);
        const double best = sel.best.criteria.aicc;
        for (const auto& r : sel.log) {
            if (r.fitted) {
                EXPECT_LE(best, r.criterion) << r.model;
            }
        }
        EXPECT_LE(best, previous);
        previous = best;
    }
}

TEST(ArimaSearch, SeasonalExhaustiveLogsEveryCandidate) {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> e(0, 1);
    const double pattern[4] = {3, -1, 4, -6};
    std::vector<double> y;
    for (int t = 0; t < 48; ++t) y.push_back(50 + pattern[t % 4] + e(rng));
    const auto sel = arima_search_exhaustive(y, 4, 2, Criterion::Aicc);
    EXPECT_EQ(sel.D, 1);
    const std::size_t per = sel.d + sel.D <= 1 ? 2 : 1;
    EXPECT_EQ(sel.log.size(), 15u * per);
    EXPECT_EQ(sel.log.front().model, descriptor(ArimaOrder{0, sel.d, 0, 0, 1, 0, 4, false}));
}

TEST(ArimaSearch, StepwiseNeverBeatsExhaustiveK8) {
    for (int r = 0; r < 4; ++r) {
        std::vector<double> y = r % 2 ? ar1(40 + r, 70, 0.8) : white_noise(40 + r, 70, 3.0);
        if (r == 2) {
            for (std::size_t t = 1; t < y.size(); ++t) y[t] += y[t - 1];
        }
        const auto step = arima_search_stepwise(y, 1, Criterion::Aicc);
        const auto full = arima_search_exhaustive(y, 1, 8, Criterion::Aicc);
        EXPECT_GE(step.best.criteria.aicc, full.best.criteria.aicc);
        std::set<std::string> seen;
        for (const auto& rec : step.log) EXPECT_TRUE(seen.insert(rec.model).second) << rec.model;
    }
}

TEST(ArimaSearch, StepwiseWhiteNoisePicksMean) {
    int hits = 0;
    const ArimaOrder target{0, 0, 0, 0, 0, 0, 1, true};
    for (int r = 0; r < 200; ++r) {
        const auto y = white_noise(3000 + r, 100, 5.0);
        hits += arima_search_stepwise(y, 1, Criterion::Bic).best.order == target;
    }
    EXPECT_GE(hits, 180);
}
