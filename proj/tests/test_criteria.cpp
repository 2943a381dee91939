#include <poolcast/criteria.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace poolcast;

TEST(Criteria, DirectSubstitution) {
    EXPECT_DOUBLE_EQ(criterion_value(0.0, 2, 50, Criterion::Aic), 4.0);
    EXPECT_DOUBLE_EQ(criterion_value(-10.0, 3, 50, Criterion::Aic), 26.0);
    EXPECT_NEAR(criterion_value(0.0, 2, 1002, Criterion::Aicc), 4.0 + 12.0 / 999.0, 1e-14);
    EXPECT_NEAR(criterion_value(0.0, 2, 1002, Criterion::Aicc, AiccForm::Printed), 4.0 + 6.0 / 999.0, 1e-14);
    EXPECT_NEAR(criterion_value(0.0, 2, 100, Criterion::Bic), 2.0 * std::log(100.0), 1e-12);
}

TEST(Criteria, ZeroParametersRemovePenalties) {
    for (int n : {5, 30, 1000}) {
        const double aic = criterion_value(-7.5, 0, n, Criterion::Aic);
        EXPECT_EQ(criterion_value(-7.5, 0, n, Criterion::Bic), aic);
        EXPECT_EQ(criterion_value(-7.5, 0, n, Criterion::Aicc), aic);
    }
}

TEST(Criteria, SampleTooSmall) {
    EXPECT_THROW(criterion_value(0.0, 3, 4, Criterion::Aicc), Error);
    try {
        criterion_value(0.0, 3, 4, Criterion::Aicc);
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::SampleTooSmall);
    }
    EXPECT_NO_THROW(criterion_value(0.0, 3, 4, Criterion::Aic));
    EXPECT_TRUE(std::isinf(all_criteria(0.0, 3, 4).aicc));
}

TEST(Criteria, FormsDifferByHalfTheCorrection) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> ll(-1e4, 1e3);
    std::uniform_int_distribution<int> kk(0, 30);
    for (int i = 0; i < 200; ++i) {
        const int k = kk(rng);
        const int n = k + 2 + kk(rng) * 7;
        const double l = ll(rng);
        const double diff = criterion_value(l, k, n, Criterion::Aicc) -
                            criterion_value(l, k, n, Criterion::Aicc, AiccForm::Printed);
        const double expected = double(k) * (k + 1) / (n - k - 1);
        EXPECT_NEAR(diff, expected, 1e-9 * std::max(1.0, std::abs(l)));
    }
}

TEST(Criteria, Parsing) {
    EXPECT_EQ(parse_criterion("aicc"), Criterion::Aicc);
    EXPECT_EQ(parse_criterion("bic"), Criterion::Bic);
    EXPECT_EQ(parse_aicc_form("paper"), AiccForm::Printed);
    EXPECT_THROW(parse_criterion("hqic"), Error);
}
