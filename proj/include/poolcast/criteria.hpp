#pragma once

#include <poolcast/error.hpp>

#include <cmath>
#include <limits>
#include <string>
#include <string_view>

namespace poolcast {

enum class Criterion { Aic, Bic, Aicc };

/// Small-sample correction of the AICc. `Standard` adds 2k(k+1)/(n-k-1);
/// `Printed` adds k(k+1)/(n-k-1), the variant found in some write-ups.
enum class AiccForm { Standard, Printed };

inline std::string_view to_string(Criterion c) {
    switch (c) {
    case Criterion::Aic: return "aic";
    case Criterion::Bic: return "bic";
    case Criterion::Aicc: return "aicc";
    }
    return "aicc";
}

inline Criterion parse_criterion(std::string_view s) {
    if (s == "aic") return Criterion::Aic;
    if (s == "bic") return Criterion::Bic;
    if (s == "aicc") return Criterion::Aicc;
    throw Error(ErrorCode::InvalidArgument, "unknown criterion '" + std::string(s) + "'");
}

inline AiccForm parse_aicc_form(std::string_view s) {
    if (s == "standard") return AiccForm::Standard;
    if (s == "paper" || s == "printed") return AiccForm::Printed;
    throw Error(ErrorCode::InvalidArgument, "unknown AICc form '" + std::string(s) + "'");
}

inline double criterion_value(double log_likelihood, int k, int n, Criterion which,
                              AiccForm form = AiccForm::Standard) {
    const double aic = -2.0 * log_likelihood + 2.0 * k;
    switch (which) {
    case Criterion::Aic: return aic;
    case Criterion::Bic: return aic + k * (std::log(static_cast<double>(n)) - 2.0);
    case Criterion::Aicc: {
        if (n <= k + 1)
            throw Error(ErrorCode::SampleTooSmall, "AICc needs n > k + 1 (n=" + std::to_string(n) +
                                                       ", k=" + std::to_string(k) + ")");
        const double num = static_cast<double>(k) * (k + 1) * (form == AiccForm::Standard ? 2.0 : 1.0);
        return aic + num / static_cast<double>(n - k - 1);
    }
    }
    return aic;
}

struct Criteria {
    double aic = 0.0;
    double bic = 0.0;
    double aicc = 0.0;

    double get(Criterion c) const {
        switch (c) {
        case Criterion::Aic: return aic;
        case Criterion::Bic: return bic;
        case Criterion::Aicc: return aicc;
        }
        return aicc;
    }
};

/// AICc is +inf when the sample is too small for the correction.
inline Criteria all_criteria(double log_likelihood, int k, int n, AiccForm form = AiccForm::Standard) {
    Criteria c;
    c.aic = criterion_value(log_likelihood, k, n, Criterion::Aic);
    c.bic = criterion_value(log_likelihood, k, n, Criterion::Bic);
    c.aicc = n > k + 1 ? criterion_value(log_likelihood, k, n, Criterion::Aicc, form)
                       : std::numeric_limits<double>::infinity();
    return c;
}

}  // namespace poolcast
