#pragma once

// Series, dataset ingestion and fixed-origin splitting.

#include <poolcast/error.hpp>

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

namespace poolcast {

enum class Frequency { Yearly, Quarterly, Monthly, Other };

inline std::string_view to_string(Frequency f) {
    switch (f) {
    case Frequency::Yearly: return "yearly";
    case Frequency::Quarterly: return "quarterly";
    case Frequency::Monthly: return "monthly";
    case Frequency::Other: return "other";
    }
    return "other";
}

inline Frequency frequency_from_period(int period) {
    switch (period) {
    case 1: return Frequency::Yearly;
    case 4: return Frequency::Quarterly;
    case 12: return Frequency::Monthly;
    default: return Frequency::Other;
    }
}

/// Holdout length used by the M competitions for each frequency.
inline std::optional<int> default_horizon(Frequency f) {
    switch (f) {
    case Frequency::Yearly: return 6;
    case Frequency::Quarterly: return 8;
    case Frequency::Monthly: return 18;
    case Frequency::Other: return std::nullopt;
    }
    return std::nullopt;
}

/// Smallest in-sample length accepted for a seasonal period.
inline int min_train_length(int period) { return std::max(3, 2 * period); }

/// One observed series. Immutable after construction; the constructor
/// enforces finiteness and that the training part is long enough for the
/// seasonal-naive scaling denominator.
class TimeSeries {
public:
    TimeSeries(std::string id, int period, std::vector<double> values, int horizon,
               std::optional<std::string> category = std::nullopt)
        : id_(std::move(id)), period_(period), horizon_(horizon), values_(std::move(values)),
          category_(std::move(category)) {
        if (period_ < 1) throw Error(ErrorCode::InvalidArgument, id_ + ": period must be >= 1");
        if (horizon_ < 1) throw Error(ErrorCode::InvalidArgument, id_ + ": horizon must be >= 1");
        for (double v : values_) {
            if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteValue, id_);
        }
        if (static_cast<long>(values_.size()) < static_cast<long>(horizon_) + min_train_length(period_)) {
            throw Error(ErrorCode::HorizonTooLarge,
                        id_ + ": " + std::to_string(values_.size()) + " values cannot hold horizon " +
                            std::to_string(horizon_) + " plus " + std::to_string(min_train_length(period_)) +
                            " training points");
        }
    }

    const std::string& id() const noexcept { return id_; }
    int period() const noexcept { return period_; }
    int horizon() const noexcept { return horizon_; }
    std::span<const double> values() const noexcept { return values_; }
    std::size_t size() const noexcept { return values_.size(); }
    const std::optional<std::string>& category() const noexcept { return category_; }

    bool operator==(const TimeSeries&) const = default;

private:
    std::string id_;
    int period_;
    int horizon_;
    std::vector<double> values_;
    std::optional<std::string> category_;
};

/// Fixed-origin split. Fitting code receives only `train()`.
class SplitSeries {
public:
    SplitSeries(std::vector<double> train, std::vector<double> test)
        : train_(std::move(train)), test_(std::move(test)) {}

    std::span<const double> train() const noexcept { return train_; }
    std::span<const double> test() const noexcept { return test_; }
    int origin() const noexcept { return static_cast<int>(train_.size()); }
    int horizon() const noexcept { return static_cast<int>(test_.size()); }

private:
    std::vector<double> train_;
    std::vector<double> test_;
};

inline SplitSeries split_fixed_origin(const TimeSeries& series) {
    auto v = series.values();
    const auto n = v.size() - static_cast<std::size_t>(series.horizon());
    return SplitSeries({v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n)},
                       {v.begin() + static_cast<std::ptrdiff_t>(n), v.end()});
}

class Dataset {
public:
    Dataset() = default;
    explicit Dataset(std::vector<TimeSeries> series, std::optional<Frequency> label = std::nullopt)
        : series_(std::move(series)) {
        std::unordered_set<std::string> seen;
        for (const auto& s : series_) {
            if (!seen.insert(s.id()).second) throw Error(ErrorCode::DuplicateId, s.id());
        }
        if (label) {
            label_ = *label;
        } else if (!series_.empty()) {
            label_ = frequency_from_period(series_.front().period());
            for (const auto& s : series_) {
                if (frequency_from_period(s.period()) != label_) {
                    label_ = Frequency::Other;
                    break;
                }
            }
        }
    }

    std::span<const TimeSeries> series() const noexcept { return series_; }
    std::size_t size() const noexcept { return series_.size(); }
    Frequency frequency_label() const noexcept { return label_; }

    bool operator==(const Dataset&) const = default;

private:
    std::vector<TimeSeries> series_;
    Frequency label_ = Frequency::Other;
};

enum class DatasetFormat { WideCsv, Jsonl };

inline DatasetFormat parse_dataset_format(std::string_view s) {
    if (s == "wide-csv" || s == "csv") return DatasetFormat::WideCsv;
    if (s == "jsonl") return DatasetFormat::Jsonl;
    throw Error(ErrorCode::InvalidArgument, "unknown dataset format '" + std::string(s) + "'");
}

/// 17 significant digits: enough for any double to survive a text round-trip.
inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace detail {

inline std::string malformed(std::size_t line, std::size_t offset, std::string_view what) {
    return "line " + std::to_string(line) + " (byte offset " + std::to_string(offset) + "): " + std::string(what);
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline bool parse_int(std::string_view s, int& out) {
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && p == s.data() + s.size();
}

inline bool parse_double(std::string_view s, double& out) {
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && p == s.data() + s.size();
}

inline int resolve_horizon(std::optional<int> horizon, int period, const std::string& id,
                           std::optional<Frequency> forced) {
    if (horizon) return *horizon;
    const auto freq = forced.value_or(frequency_from_period(period));
    if (auto h = default_horizon(freq)) return *h;
    throw Error(ErrorCode::MissingHorizon, id + ": no horizon given and frequency is unknown");
}

inline TimeSeries parse_csv_row(std::string_view line, std::size_t line_no, std::size_t offset,
                                std::optional<Frequency> forced) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        auto comma = line.find(',', start);
        cells.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    while (!cells.empty() && cells.back().empty()) cells.pop_back();
    if (cells.size() < 5) throw Error(ErrorCode::MalformedRow, malformed(line_no, offset, "expected id,period,horizon,category,values..."));
    std::string id(cells[0]);
    if (id.empty()) throw Error(ErrorCode::MalformedRow, malformed(line_no, offset, "empty id"));
    int period = 0;
    if (!parse_int(cells[1], period) || period < 1)
        throw Error(ErrorCode::MalformedRow, malformed(line_no, offset, "bad period '" + std::string(cells[1]) + "'"));
    std::optional<int> horizon;
    if (!cells[2].empty()) {
        int h = 0;
        if (!parse_int(cells[2], h) || h < 1)
            throw Error(ErrorCode::MalformedRow, malformed(line_no, offset, "bad horizon '" + std::string(cells[2]) + "'"));
        horizon = h;
    }
    std::optional<std::string> category;
    if (!cells[3].empty()) category = std::string(cells[3]);
    std::vector<double> values;
    values.reserve(cells.size() - 4);
    for (std::size_t i = 4; i < cells.size(); ++i) {
        double v = 0.0;
        if (cells[i].empty() || !parse_double(cells[i], v))
            throw Error(ErrorCode::MalformedRow, malformed(line_no, offset, "bad value '" + std::string(cells[i]) + "'"));
        if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteValue, id);
        values.push_back(v);
    }
    const int h = resolve_horizon(horizon, period, id, forced);
    return TimeSeries(std::move(id), period, std::move(values), h, std::move(category));
}

inline TimeSeries parse_json_row(std::string_view line, std::size_t line_no, std::size_t offset,
                                 std::optional<Frequency> forced) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::MalformedRow, malformed(line_no, offset, e.what()));
    }
    try {
        auto id = j.at("id").get<std::string>();
        const int period = j.at("s").get<int>();
        if (period < 1) throw Error(ErrorCode::MalformedRow, malformed(line_no, offset, "bad period"));
        std::optional<int> horizon;
        if (j.contains("h") && !j["h"].is_null()) horizon = j["h"].get<int>();
        std::optional<std::string> category;
        if (j.contains("category") && !j["category"].is_null()) category = j["category"].get<std::string>();
        std::vector<double> values;
        for (const auto& v : j.at("values")) {
            if (v.is_null()) throw Error(ErrorCode::NonFiniteValue, id);
            if (v.is_string()) {
                double d = 0.0;
                if (!parse_double(v.get<std::string>(), d))
                    throw Error(ErrorCode::MalformedRow, malformed(line_no, offset, "non-numeric value"));
                if (!std::isfinite(d)) throw Error(ErrorCode::NonFiniteValue, id);
                values.push_back(d);
                continue;
            }
            values.push_back(v.get<double>());
        }
        const int h = resolve_horizon(horizon, period, id, forced);
        return TimeSeries(std::move(id), period, std::move(values), h, std::move(category));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MalformedRow, malformed(line_no, offset, e.what()));
    }
}

}  // namespace detail

/// Parses a dataset from text. `forced` overrides the per-row frequency used
/// to resolve missing horizons.
inline Dataset parse_dataset(std::string_view text, DatasetFormat format,
                             std::optional<Frequency> forced = std::nullopt) {
    std::vector<TimeSeries> out;
    std::size_t offset = 0;
    std::size_t line_no = 0;
    while (offset < text.size()) {
        auto nl = text.find('\n', offset);
        auto end = nl == std::string_view::npos ? text.size() : nl;
        auto line = text.substr(offset, end - offset);
        ++line_no;
        if (!detail::trim(line).empty()) {
            out.push_back(format == DatasetFormat::WideCsv ? detail::parse_csv_row(line, line_no, offset, forced)
                                                           : detail::parse_json_row(line, line_no, offset, forced));
        }
        offset = end + 1;
    }
    return Dataset(std::move(out), forced);
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline Dataset load_dataset(const std::string& path, DatasetFormat format,
                            std::optional<Frequency> forced = std::nullopt) {
    return parse_dataset(read_file(path), format, forced);
}

inline std::string serialize_dataset(const Dataset& dataset, DatasetFormat format) {
    std::string out;
    for (const auto& s : dataset.series()) {
        if (format == DatasetFormat::WideCsv) {
            out += s.id();
            out += ',' + std::to_string(s.period()) + ',' + std::to_string(s.horizon()) + ',';
            out += s.category().value_or("");
            for (double v : s.values()) {
                out += ',';
                out += format_double(v);
            }
        } else {
            out += "{\"id\":" + nlohmann::json(s.id()).dump();
            out += ",\"s\":" + std::to_string(s.period());
            out += ",\"h\":" + std::to_string(s.horizon());
            out += ",\"category\":" + (s.category() ? nlohmann::json(*s.category()).dump() : std::string("null"));
            out += ",\"values\":[";
            bool first = true;
            for (double v : s.values()) {
                if (!first) out += ',';
                first = false;
                out += format_double(v);
            }
            out += "]}";
        }
        out += '\n';
    }
    return out;
}

inline void save_dataset(const Dataset& dataset, const std::string& path, DatasetFormat format) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
    out << serialize_dataset(dataset, format);
}

}  // namespace poolcast
