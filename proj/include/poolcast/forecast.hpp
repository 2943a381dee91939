#pragma once

#include <map>
#include <string>
#include <vector>

namespace poolcast {

enum class IntervalMethod { Analytic, Simulated };

struct Interval {
    std::vector<double> lower;
    std::vector<double> upper;
};

/// Point forecasts plus prediction intervals keyed by confidence level.
struct Forecast {
    std::vector<double> point;
    std::map<double, Interval> intervals;
    std::string source;
    IntervalMethod method = IntervalMethod::Analytic;
};

inline const char* to_string(IntervalMethod m) { return m == IntervalMethod::Analytic ? "analytic" : "simulated"; }

}  // namespace poolcast
