#pragma once

// Named model pools, ARIMA order bounds and balanced-pool enumeration.

#include <poolcast/arima.hpp>
#include <poolcast/criteria.hpp>
#include <poolcast/error.hpp>
#include <poolcast/ets.hpp>

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace poolcast {

enum class EtsPoolName { All, NoMultTrend, Damped, MatchErrorSeasonal, Reduced };

inline constexpr std::array<EtsPoolName, 5> kEtsPoolNames = {EtsPoolName::All, EtsPoolName::NoMultTrend,
                                                             EtsPoolName::Damped, EtsPoolName::MatchErrorSeasonal,
                                                             EtsPoolName::Reduced};

inline std::string_view to_string(EtsPoolName n) {
    switch (n) {
    case EtsPoolName::All: return "all";
    case EtsPoolName::NoMultTrend: return "no_mult_trend";
    case EtsPoolName::Damped: return "damped";
    case EtsPoolName::MatchErrorSeasonal: return "match";
    case EtsPoolName::Reduced: return "reduced";
    }
    return "all";
}

inline EtsPoolName parse_ets_pool_name(std::string_view s) {
    if (s == "all") return EtsPoolName::All;
    if (s == "no_mult_trend") return EtsPoolName::NoMultTrend;
    if (s == "damped") return EtsPoolName::Damped;
    if (s == "match" || s == "match_error_seasonal") return EtsPoolName::MatchErrorSeasonal;
    if (s == "reduced") return EtsPoolName::Reduced;
    throw Error(ErrorCode::InvalidArgument, "unknown ETS pool '" + std::string(s) + "'");
}

namespace pool_detail {

inline bool keeps(EtsPoolName n, const EtsModelSpec& s) {
    const bool mult_trend = s.multiplicative_trend();
    const bool undamped_trend = s.has_trend() && !s.damped();
    const bool mismatch = s.has_season() && ((s.error == ErrorType::Additive) != (s.season == SeasonType::Additive));
    switch (n) {
    case EtsPoolName::All: return true;
    case EtsPoolName::NoMultTrend: return !mult_trend;
    case EtsPoolName::Damped: return !undamped_trend;
    case EtsPoolName::MatchErrorSeasonal: return !mismatch;
    case EtsPoolName::Reduced: return !mult_trend && !undamped_trend && !mismatch;
    }
    return false;
}

}  // namespace pool_detail

/// Model set of a named pool in canonical order. Seasonal specs are dropped
/// when `seasonal` is false.
inline std::vector<EtsModelSpec> ets_pool(EtsPoolName name, bool seasonal) {
    std::vector<EtsModelSpec> out;
    for (const auto& s : applicable_ets_specs()) {
        if (!seasonal && s.has_season()) continue;
        if (pool_detail::keeps(name, s)) out.push_back(s);
    }
    return out;
}

enum class ProfileClass { LevelOnly, TrendOnly, SeasonalOnly, TrendAndSeasonal };

inline constexpr std::array<ProfileClass, 4> kProfileClasses = {ProfileClass::LevelOnly, ProfileClass::TrendOnly,
                                                                ProfileClass::SeasonalOnly,
                                                                ProfileClass::TrendAndSeasonal};

inline std::string_view to_string(ProfileClass c) {
    switch (c) {
    case ProfileClass::LevelOnly: return "level_only";
    case ProfileClass::TrendOnly: return "trend_only";
    case ProfileClass::SeasonalOnly: return "seasonal_only";
    case ProfileClass::TrendAndSeasonal: return "trend_and_seasonal";
    }
    return "level_only";
}

inline ProfileClass profile_class(const EtsModelSpec& s) {
    if (s.has_trend()) return s.has_season() ? ProfileClass::TrendAndSeasonal : ProfileClass::TrendOnly;
    return s.has_season() ? ProfileClass::SeasonalOnly : ProfileClass::LevelOnly;
}

enum class PoolFamily { Ets, Arima };

/// A resolved pool label: either an ETS model set or an ARIMA order bound.
struct ModelPool {
    std::string label;
    PoolFamily family = PoolFamily::Ets;
    std::optional<std::vector<EtsModelSpec>> ets_specs;
    std::optional<int> arima_max_order;
};

/// Parses `ets:all | ets:no_mult_trend | ets:damped | ets:match | ets:reduced |
/// arima:K<k>`. ETS pools hold the seasonal model set; candidates are
/// narrowed per series.
inline ModelPool parse_pool(std::string_view label) {
    ModelPool pool;
    pool.label = std::string(label);
    if (label.starts_with("ets:")) {
        pool.family = PoolFamily::Ets;
        pool.ets_specs = ets_pool(parse_ets_pool_name(label.substr(4)), true);
        return pool;
    }
    if (label.starts_with("arima:K") || label.starts_with("arima:k")) {
        const auto digits = label.substr(7);
        int k = 0;
        if (digits.empty() || digits.size() > 1 || digits[0] < '1' || digits[0] > '8')
            throw Error(ErrorCode::InvalidArgument, "ARIMA pools are arima:K1 .. arima:K8, got '" + pool.label + "'");
        k = digits[0] - '0';
        pool.family = PoolFamily::Arima;
        pool.arima_max_order = k;
        return pool;
    }
    throw Error(ErrorCode::InvalidArgument, "unknown pool label '" + pool.label + "'");
}

inline std::uint64_t binomial(int n, int k) {
    if (k < 0 || k > n) return 0;
    std::uint64_t r = 1;
    for (int i = 1; i <= k; ++i) r = r * static_cast<std::uint64_t>(n - k + i) / static_cast<std::uint64_t>(i);
    return r;
}

/// Number of (p, q, P, Q) tuples with p + q + P + Q <= K.
inline std::uint64_t arima_tuple_count(int K, bool seasonal) {
    return seasonal ? binomial(K + 4, 4) : binomial(K + 2, 2);
}

/// Every subset of `models` holding at least one model of each profile class
/// present for the data type (level and trend only when non-seasonal).
/// Pools are ordered lexicographically by membership vector over the
/// canonical model order, first model most significant, and can be
/// addressed by index.
class BalancedPools {
public:
    BalancedPools(std::vector<EtsModelSpec> models, bool seasonal) : seasonal_(seasonal) {
        std::sort(models.begin(), models.end(), canonical_less);
        models.erase(std::unique(models.begin(), models.end()), models.end());
        for (const auto& m : models)
            if (seasonal || !m.has_season()) models_.push_back(m);
        if (models_.size() > 30) throw Error(ErrorCode::InvalidArgument, "too many models to enumerate");

        const std::size_t classes = seasonal ? 4 : 2;
        std::array<std::uint32_t, 4> class_mask{};
        for (std::size_t i = 0; i < models_.size(); ++i)
            class_mask[static_cast<std::size_t>(profile_class(models_[i]))] |= bit(i);
        for (std::size_t c = 0; c < classes; ++c)
            if (class_mask[c] == 0)
                throw Error(ErrorCode::EmptyProfileClass,
                            std::string("no model in profile class ") + std::string(to_string(kProfileClasses[c])));

        const std::uint32_t total = std::uint32_t{1} << models_.size();
        for (std::uint32_t v = 1; v < total; ++v) {
            // v enumerates membership vectors in lexicographic order; map its
            // most significant bit to model 0
            const std::uint32_t mask = reverse(v);
            bool ok = true;
            for (std::size_t c = 0; c < classes && ok; ++c) ok = (mask & class_mask[c]) != 0;
            if (ok) masks_.push_back(mask);
        }
    }

    std::size_t size() const { return masks_.size(); }
    const std::vector<EtsModelSpec>& models() const { return models_; }
    bool seasonal() const { return seasonal_; }

    /// Membership mask of pool `index`; bit i selects models()[i].
    std::uint32_t mask(std::size_t index) const { return masks_.at(index); }

    std::vector<EtsModelSpec> at(std::size_t index) const { return members(mask(index)); }

    std::vector<EtsModelSpec> members(std::uint32_t m) const {
        std::vector<EtsModelSpec> out;
        for (std::size_t i = 0; i < models_.size(); ++i)
            if (m & bit(i)) out.push_back(models_[i]);
        return out;
    }

    /// Mask of an explicit model set, or nullopt if it contains a model
    /// outside models().
    std::optional<std::uint32_t> mask_of(const std::vector<EtsModelSpec>& set) const {
        std::uint32_t m = 0;
        for (const auto& s : set) {
            auto it = std::find(models_.begin(), models_.end(), s);
            if (it == models_.end()) return std::nullopt;
            m |= bit(static_cast<std::size_t>(it - models_.begin()));
        }
        return m;
    }

    /// Closed-form count: product over classes of (2^|class| - 1).
    std::uint64_t expected_count() const {
        std::array<int, 4> sizes{};
        for (const auto& m : models_) ++sizes[static_cast<std::size_t>(profile_class(m))];
        std::uint64_t n = 1;
        for (std::size_t c = 0; c < (seasonal_ ? 4u : 2u); ++c) n *= (std::uint64_t{1} << sizes[c]) - 1;
        return n;
    }

private:
    static std::uint32_t bit(std::size_t i) { return std::uint32_t{1} << i; }

    std::uint32_t reverse(std::uint32_t v) const {
        std::uint32_t r = 0;
        for (std::size_t i = 0; i < models_.size(); ++i)
            if (v & bit(models_.size() - 1 - i)) r |= bit(i);
        return r;
    }

    bool seasonal_;
    std::vector<EtsModelSpec> models_;
    std::vector<std::uint32_t> masks_;
};

inline BalancedPools enumerate_balanced_pools(std::vector<EtsModelSpec> models, bool seasonal) {
    return BalancedPools(std::move(models), seasonal);
}

}  // namespace poolcast
