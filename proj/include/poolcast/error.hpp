#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace poolcast {

enum class ErrorCode {
    InvalidArgument,
    Io,
    MalformedRow,
    NonFiniteValue,
    HorizonTooLarge,
    MissingHorizon,
    DuplicateId,
    InapplicableModel,
    NonPositiveData,
    DegenerateSeries,
    OptimizationFailed,
    AllModelsFailed,
    SeriesTooShort,
    NonStationaryFit,
    NonInvertibleFit,
    InvalidOrder,
    SampleTooSmall,
    EmptyProfileClass,
    ZeroDenominator,
    DegenerateVariance,
    IdMismatch,
    DatasetMismatch,
};

inline std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::HorizonTooLarge: return "HorizonTooLarge";
    case ErrorCode::MissingHorizon: return "MissingHorizon";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::InapplicableModel: return "InapplicableModel";
    case ErrorCode::NonPositiveData: return "NonPositiveData";
    case ErrorCode::DegenerateSeries: return "DegenerateSeries";
    case ErrorCode::OptimizationFailed: return "OptimizationFailed";
    case ErrorCode::AllModelsFailed: return "AllModelsFailed";
    case ErrorCode::SeriesTooShort: return "SeriesTooShort";
    case ErrorCode::NonStationaryFit: return "NonStationaryFit";
    case ErrorCode::NonInvertibleFit: return "NonInvertibleFit";
    case ErrorCode::InvalidOrder: return "InvalidOrder";
    case ErrorCode::SampleTooSmall: return "SampleTooSmall";
    case ErrorCode::EmptyProfileClass: return "EmptyProfileClass";
    case ErrorCode::ZeroDenominator: return "ZeroDenominator";
    case ErrorCode::DegenerateVariance: return "DegenerateVariance";
    case ErrorCode::IdMismatch: return "IdMismatch";
    case ErrorCode::DatasetMismatch: return "DatasetMismatch";
    }
    return "Unknown";
}

/// Every failure raised by the library carries a machine-readable code.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace poolcast
