#pragma once

// Benchmark orchestration: per-series selection and scoring for each pool,
// report aggregation, balanced-pool ranking and value-added tables.

#include <poolcast/arima.hpp>
#include <poolcast/core.hpp>
#include <poolcast/criteria.hpp>
#include <poolcast/error.hpp>
#include <poolcast/ets.hpp>
#include <poolcast/evaluation.hpp>
#include <poolcast/pools.hpp>
#include <poolcast/stats.hpp>

#include <json.hpp>

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace poolcast {

using Json = nlohmann::ordered_json;

struct ExperimentConfig {
    std::string input;
    DatasetFormat format = DatasetFormat::WideCsv;
    std::vector<std::string> pools{"ets:reduced"};
    Criterion criterion = Criterion::Aicc;
    std::vector<double> levels{kDefaultLevels.begin(), kDefaultLevels.end()};
    std::uint64_t seed = 42;
    int workers = 1;
    int paths = kDefaultSimulationPaths;
    AiccForm aicc_form = AiccForm::Standard;
    MsisForm msis_form = MsisForm::Mean;
    bool include_forecasts = true;
    std::string out;
    std::string records;

    void validate() const {
        if (pools.empty()) throw Error(ErrorCode::InvalidArgument, "at least one pool is required");
        for (const auto& p : pools) parse_pool(p);
        if (levels.empty()) throw Error(ErrorCode::InvalidArgument, "at least one confidence level is required");
        for (double l : levels)
            if (!(l > 0.0 && l < 1.0)) throw Error(ErrorCode::InvalidArgument, "confidence levels must lie in (0, 1)");
        if (workers < 1) throw Error(ErrorCode::InvalidArgument, "workers must be >= 1");
        if (paths < 1) throw Error(ErrorCode::InvalidArgument, "paths must be >= 1");
    }
};

/// Independent random stream per series, stable across scheduling.
inline std::uint64_t series_seed(std::uint64_t seed, std::string_view id) { return splitmix64(seed ^ fnv1a(id)); }

inline std::string dataset_fingerprint(const Dataset& d) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a(serialize_dataset(d, DatasetFormat::Jsonl))));
    return buf;
}

inline std::string level_key(double level) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", level);
    return buf;
}

/// Everything measured for one (series, pool) pair.
struct SeriesResult {
    EvaluationRecord record;
    int period = 1;
    double criterion = 0.0;
    std::vector<double> scaled_errors;  // |y - f| / seasonal naive scale, per step
    Forecast forecast;
    bool explosive = false;
    bool multiplicative_trend = false;
    int candidates = 0;
    int failed_candidates = 0;
};

struct SkipRecord {
    std::string series_id;
    std::string pool;
    std::string code;
    std::string reason;
};

struct ExplosiveSummary {
    std::vector<std::string> series;
    std::size_t multiplicative_trend = 0;
};

struct PoolAggregate {
    std::string label;
    std::size_t records = 0;
    std::size_t skips = 0;
    double mase_mean = 0.0;
    std::map<double, double> msis_mean;
    std::map<double, Coverage> coverage;
    double cost_mean_seconds = 0.0;
    double cost_ratio = 1.0;  // relative to the first pool
    std::map<std::string, double> profiles;  // ETS pools only
    ExplosiveSummary explosive;
};

struct DmEntry {
    std::string pool_a;
    std::string pool_b;
    int step = 1;
    int m = 0;
    std::optional<double> statistic;
    std::optional<double> p_value;
    std::string outcome;
};

struct BenchReport {
    ExperimentConfig config;
    std::string fingerprint;
    std::size_t series = 0;
    std::string frequency;
    std::vector<PoolAggregate> pools;
    std::vector<DmEntry> dm;
    std::vector<SeriesResult> results;  // sorted by series id, then pool order
    std::vector<SkipRecord> skips;      // same order
    double total_seconds = 0.0;
    std::string host;
    int workers = 1;
};

namespace bench_detail {

inline std::string host_name() {
    char buf[256] = {};
    if (gethostname(buf, sizeof buf - 1) != 0) return "unknown";
    return buf;
}

/// Runs `task(i)` for i in [0, n) on `workers` threads; each index is claimed
/// once from a shared counter.
inline void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& task) {
    const std::size_t threads = std::min<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), n);
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) task(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) task(i);
        });
}

class Progress {
public:
    explicit Progress(std::ostream* out) : out_(out) {}

    void emit(const Json& event) {
        if (!out_) return;
        const std::lock_guard lock(mutex_);
        *out_ << event.dump() << '\n';
        out_->flush();
    }

private:
    std::ostream* out_;
    std::mutex mutex_;
};

inline bool is_explosive(const Forecast& fc, std::span<const double> train) {
    double scale = 0.0;
    for (double v : train) scale = std::max(scale, std::abs(v));
    const double limit = 10.0 * scale;
    auto bad = [&](double v) { return !std::isfinite(v) || std::abs(v) > limit; };
    for (double v : fc.point)
        if (bad(v)) return true;
    for (const auto& [level, iv] : fc.intervals) {
        for (double v : iv.lower)
            if (bad(v)) return true;
        for (double v : iv.upper)
            if (bad(v)) return true;
    }
    return false;
}

struct Selected {
    Forecast forecast;
    std::string model;
    double criterion = 0.0;
    bool multiplicative_trend = false;
    int candidates = 0;
    int failed = 0;
};

inline Selected select_and_forecast(const ModelPool& pool, std::span<const double> train, int period, int h,
                                    const ExperimentConfig& cfg, std::uint64_t seed) {
    Selected out;
    if (pool.family == PoolFamily::Ets) {
        EtsFitOptions opt;
        opt.aicc_form = cfg.aicc_form;
        const auto sel = ets_select(train, period, *pool.ets_specs, cfg.criterion, opt);
        out.forecast = ets_forecast(sel.best, h, cfg.levels, cfg.paths, seed);
        out.model = sel.best.name();
        out.criterion = sel.best.criteria.get(cfg.criterion);
        out.multiplicative_trend = sel.best.spec.multiplicative_trend();
        out.candidates = static_cast<int>(sel.log.size());
        for (const auto& r : sel.log) out.failed += r.fitted ? 0 : 1;
    } else {
        ArimaFitOptions opt;
        opt.aicc_form = cfg.aicc_form;
        const auto sel = arima_search_exhaustive(train, period, *pool.arima_max_order, cfg.criterion, opt);
        out.forecast = arima_forecast(sel.best, h, cfg.levels);
        out.model = sel.best.name();
        out.criterion = sel.best.criteria.get(cfg.criterion);
        out.candidates = static_cast<int>(sel.log.size());
        for (const auto& r : sel.log) out.failed += r.fitted ? 0 : 1;
    }
    return out;
}

inline SeriesResult evaluate_series(const TimeSeries& series, const ModelPool& pool, const ExperimentConfig& cfg) {
    const auto split = split_fixed_origin(series);
    const std::uint64_t seed = splitmix64(series_seed(cfg.seed, series.id()) ^ fnv1a(pool.label));
    const auto started = std::chrono::steady_clock::now();
    auto sel = select_and_forecast(pool, split.train(), series.period(), split.horizon(), cfg, seed);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

    SeriesResult r;
    r.period = series.period();
    r.record.series_id = series.id();
    r.record.pool_label = pool.label;
    r.record.selected_model = sel.model;
    r.record.cost_seconds = seconds;
    r.record.mase = mase(split.train(), split.test(), sel.forecast.point, series.period());
    const double scale = seasonal_naive_scale(split.train(), series.period());
    for (double level : cfg.levels) {
        const auto& iv = sel.forecast.intervals.at(level);
        r.record.msis[level] = msis(split.train(), split.test(), iv.lower, iv.upper, 1.0 - level, series.period(),
                                    cfg.msis_form);
        r.record.covered[level] = covered(split.test(), iv.lower, iv.upper);
    }
    for (std::size_t t = 0; t < split.test().size(); ++t)
        r.scaled_errors.push_back(std::abs(split.test()[t] - sel.forecast.point[t]) / scale);
    r.criterion = sel.criterion;
    r.explosive = is_explosive(sel.forecast, split.train());
    r.multiplicative_trend = sel.multiplicative_trend;
    r.candidates = sel.candidates;
    r.failed_candidates = sel.failed;
    r.forecast = std::move(sel.forecast);
    return r;
}

inline PoolAggregate aggregate(const std::string& label, const std::vector<const SeriesResult*>& rows,
                               std::size_t skips, const std::vector<double>& levels, bool ets) {
    PoolAggregate a;
    a.label = label;
    a.records = rows.size();
    a.skips = skips;
    std::vector<EvaluationRecord> recs;
    recs.reserve(rows.size());
    for (const auto* r : rows) recs.push_back(r->record);
    if (!rows.empty()) {
        double mase_sum = 0.0, cost_sum = 0.0;
        std::map<double, double> msis_sum;
        for (const auto& r : recs) {
            mase_sum += r.mase;
            cost_sum += r.cost_seconds;
            for (double l : levels) msis_sum[l] += r.msis.at(l);
        }
        const double n = static_cast<double>(rows.size());
        a.mase_mean = mase_sum / n;
        a.cost_mean_seconds = cost_sum / n;
        for (double l : levels) {
            a.msis_mean[l] = msis_sum[l] / n;
            a.coverage[l] = calibration(recs, l);
        }
        if (ets) a.profiles = profile_frequencies(recs);
    }
    for (const auto* r : rows) {
        if (!r->explosive) continue;
        a.explosive.series.push_back(r->record.series_id);
        if (r->multiplicative_trend) ++a.explosive.multiplicative_trend;
    }
    return a;
}

/// Pairwise tests at each horizon step across series. Series are
/// independent, so each step uses the lag-0 variance (h = 1).
inline std::vector<DmEntry> dm_matrix(const std::vector<std::string>& labels,
                                      const std::map<std::string, std::map<std::string, const SeriesResult*>>& by_pool) {
    std::vector<DmEntry> out;
    for (std::size_t a = 0; a < labels.size(); ++a) {
        for (std::size_t b = a + 1; b < labels.size(); ++b) {
            const auto& ra = by_pool.at(labels[a]);
            const auto& rb = by_pool.at(labels[b]);
            std::size_t steps = 0;
            for (const auto& [id, r] : ra) steps = std::max(steps, r->scaled_errors.size());
            for (std::size_t j = 0; j < steps; ++j) {
                std::vector<double> ea, eb;
                for (const auto& [id, r] : ra) {
                    auto it = rb.find(id);
                    if (it == rb.end() || r->scaled_errors.size() <= j || it->second->scaled_errors.size() <= j)
                        continue;
                    ea.push_back(r->scaled_errors[j]);
                    eb.push_back(it->second->scaled_errors[j]);
                }
                DmEntry e;
                e.pool_a = labels[a];
                e.pool_b = labels[b];
                e.step = static_cast<int>(j + 1);
                e.m = static_cast<int>(ea.size());
                try {
                    const auto res = dm_test_modified(ea, eb, 1, DmLoss::Absolute);
                    e.statistic = res.statistic;
                    e.p_value = res.p_value;
                    if (res.p_value < 0.05) e.outcome = (res.statistic > 0 ? labels[b] : labels[a]) + " better";
                    else e.outcome = "no difference";
                } catch (const Error& err) {
                    e.outcome = err.code() == ErrorCode::DegenerateVariance ? "no difference" : "insufficient data";
                }
                out.push_back(std::move(e));
            }
        }
    }
    return out;
}

}  // namespace bench_detail

/// Selects, forecasts and scores every (series, pool) pair. Failures become
/// skip records; the run itself never aborts on a series.
inline BenchReport run_benchmark(const Dataset& dataset, const ExperimentConfig& config,
                                 std::ostream* progress = nullptr) {
    config.validate();
    std::vector<ModelPool> pools;
    for (const auto& label : config.pools) pools.push_back(parse_pool(label));
    std::vector<std::string> labels;
    for (const auto& p : pools) labels.push_back(p.label);
    if (std::set<std::string>(labels.begin(), labels.end()).size() != labels.size())
        throw Error(ErrorCode::InvalidArgument, "duplicate pool label");

    const auto started = std::chrono::steady_clock::now();
    const auto all = dataset.series();
    const std::size_t n = all.size();
    std::vector<std::vector<std::optional<SeriesResult>>> results(n, std::vector<std::optional<SeriesResult>>(pools.size()));
    std::vector<std::vector<std::optional<SkipRecord>>> skips(n, std::vector<std::optional<SkipRecord>>(pools.size()));
    bench_detail::Progress prog(progress);
    prog.emit(Json{{"event", "start"}, {"series", n}, {"pools", labels}, {"workers", config.workers}});
    std::atomic<std::size_t> done{0};

    bench_detail::parallel_for(n, config.workers, [&](std::size_t i) {
        const auto& s = all[i];
        for (std::size_t p = 0; p < pools.size(); ++p) {
            try {
                results[i][p] = bench_detail::evaluate_series(s, pools[p], config);
            } catch (const Error& e) {
                skips[i][p] = SkipRecord{s.id(), pools[p].label, std::string(to_string(e.code())), e.what()};
            } catch (const std::exception& e) {
                skips[i][p] = SkipRecord{s.id(), pools[p].label, "Internal", e.what()};
            }
            Json ev{{"event", "series"}, {"id", s.id()}, {"pool", pools[p].label}};
            if (results[i][p]) {
                ev["status"] = "ok";
                ev["model"] = results[i][p]->record.selected_model;
            } else {
                ev["status"] = "skip";
                ev["code"] = skips[i][p]->code;
                ev["reason"] = skips[i][p]->reason;
            }
            prog.emit(ev);
        }
        const auto k = ++done;
        prog.emit(Json{{"event", "progress"}, {"done", k}, {"total", n}});
    });

    BenchReport report;
    report.config = config;
    report.fingerprint = dataset_fingerprint(dataset);
    report.series = n;
    report.frequency = std::string(to_string(dataset.frequency_label()));
    report.host = bench_detail::host_name();
    report.workers = config.workers;

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return all[a].id() < all[b].id(); });
    for (auto i : order) {
        for (std::size_t p = 0; p < pools.size(); ++p) {
            if (results[i][p]) report.results.push_back(std::move(*results[i][p]));
            if (skips[i][p]) report.skips.push_back(std::move(*skips[i][p]));
        }
    }

    std::map<std::string, std::map<std::string, const SeriesResult*>> by_pool;
    std::map<std::string, std::vector<const SeriesResult*>> rows;
    for (const auto& r : report.results) {
        by_pool[r.record.pool_label][r.record.series_id] = &r;
        rows[r.record.pool_label].push_back(&r);
    }
    for (const auto& pool : pools) {
        std::size_t skipped = 0;
        for (const auto& s : report.skips) skipped += s.pool == pool.label;
        by_pool[pool.label];
        report.pools.push_back(bench_detail::aggregate(pool.label, rows[pool.label], skipped, config.levels,
                                                       pool.family == PoolFamily::Ets));
    }
    const double base = report.pools.front().cost_mean_seconds;
    for (auto& a : report.pools) a.cost_ratio = base > 0.0 ? a.cost_mean_seconds / base : 0.0;
    report.dm = bench_detail::dm_matrix(labels, by_pool);
    report.total_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    prog.emit(Json{{"event", "finish"}, {"records", report.results.size()}, {"skips", report.skips.size()}});
    return report;
}

namespace bench_detail {

inline Json coverage_json(const Coverage& c) { return Json{{"per_horizon", c.per_horizon}, {"overall", c.overall}}; }

inline Json optional_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

}  // namespace bench_detail

/// Field names holding wall-clock measurements or host details. Everything
/// else in a report is a pure function of the dataset and configuration.
inline const std::set<std::string>& timing_fields() {
    static const std::set<std::string> fields{"cost_seconds", "cost_mean_seconds", "cost_ratio", "total_seconds",
                                              "environment"};
    return fields;
}

inline Json strip_timing(const Json& j) {
    if (j.is_object()) {
        Json out = Json::object();
        for (const auto& [k, v] : j.items())
            if (!timing_fields().count(k)) out[k] = strip_timing(v);
        return out;
    }
    if (j.is_array()) {
        Json out = Json::array();
        for (const auto& v : j) out.push_back(strip_timing(v));
        return out;
    }
    return j;
}

inline Json to_json(const BenchReport& r) {
    using bench_detail::coverage_json;
    Json j;
    j["schema"] = "poolcast.bench/1";
    const auto& c = r.config;
    Json levels = Json::array();
    for (double l : c.levels) levels.push_back(l);
    j["config"] = Json{{"pools", c.pools},
                       {"criterion", std::string(to_string(c.criterion))},
                       {"levels", levels},
                       {"seed", c.seed},
                       {"paths", c.paths},
                       {"aicc_form", c.aicc_form == AiccForm::Standard ? "standard" : "paper"},
                       {"msis_form", std::string(to_string(c.msis_form))}};
    j["dataset"] = Json{{"fingerprint", r.fingerprint}, {"series", r.series}, {"frequency", r.frequency}};
    j["environment"] = Json{{"host", r.host},
                            {"workers", r.workers},
                            {"hardware_threads", std::thread::hardware_concurrency()},
                            {"total_seconds", r.total_seconds}};
    Json pools = Json::array();
    for (const auto& a : r.pools) {
        Json p;
        p["label"] = a.label;
        p["records"] = a.records;
        p["skips"] = a.skips;
        p["mase_mean"] = a.mase_mean;
        Json ms = Json::object(), cov = Json::object();
        for (const auto& [l, v] : a.msis_mean) ms[level_key(l)] = v;
        for (const auto& [l, v] : a.coverage) cov[level_key(l)] = coverage_json(v);
        p["msis_mean"] = ms;
        p["coverage"] = cov;
        p["cost_mean_seconds"] = a.cost_mean_seconds;
        p["cost_ratio"] = a.cost_ratio;
        if (!a.profiles.empty()) p["profiles"] = a.profiles;
        p["explosive"] = Json{{"count", a.explosive.series.size()},
                              {"multiplicative_trend", a.explosive.multiplicative_trend},
                              {"series", a.explosive.series}};
        pools.push_back(std::move(p));
    }
    j["pools"] = std::move(pools);
    Json dm = Json::array();
    for (const auto& e : r.dm)
        dm.push_back(Json{{"pool_a", e.pool_a},
                          {"pool_b", e.pool_b},
                          {"step", e.step},
                          {"m", e.m},
                          {"statistic", bench_detail::optional_json(e.statistic)},
                          {"p_value", bench_detail::optional_json(e.p_value)},
                          {"outcome", e.outcome}});
    j["dm"] = std::move(dm);
    Json recs = Json::array();
    for (const auto& s : r.results) {
        Json x;
        x["series_id"] = s.record.series_id;
        x["pool"] = s.record.pool_label;
        x["selected_model"] = s.record.selected_model;
        x["criterion"] = s.criterion;
        x["mase"] = s.record.mase;
        Json ms = Json::object(), cov = Json::object();
        for (const auto& [l, v] : s.record.msis) ms[level_key(l)] = v;
        for (const auto& [l, v] : s.record.covered) cov[level_key(l)] = v;
        x["msis"] = ms;
        x["covered"] = cov;
        x["explosive"] = s.explosive;
        x["candidates"] = s.candidates;
        x["failed_candidates"] = s.failed_candidates;
        x["cost_seconds"] = s.record.cost_seconds;
        if (c.include_forecasts) {
            Json iv = Json::object();
            for (const auto& [l, v] : s.forecast.intervals) iv[level_key(l)] = Json{{"lower", v.lower}, {"upper", v.upper}};
            x["forecast"] = Json{{"method", to_string(s.forecast.method)}, {"point", s.forecast.point}, {"intervals", iv}};
        }
        recs.push_back(std::move(x));
    }
    j["records"] = std::move(recs);
    Json sk = Json::array();
    for (const auto& s : r.skips)
        sk.push_back(Json{{"series_id", s.series_id}, {"pool", s.pool}, {"code", s.code}, {"reason", s.reason}});
    j["skips"] = std::move(sk);
    return j;
}

inline std::string format_6g(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

/// Flat per-series CSV: one row per (series, pool); coverage columns give
/// the fraction of the horizon covered.
inline std::string records_csv(const BenchReport& r) {
    std::ostringstream out;
    out << "series_id,pool,selected_model,mase";
    for (double l : r.config.levels) out << ",msis_" << level_key(l);
    for (double l : r.config.levels) out << ",coverage_" << level_key(l);
    out << ",cost_seconds\n";
    for (const auto& s : r.results) {
        out << s.record.series_id << ',' << s.record.pool_label << ',' << s.record.selected_model << ','
            << format_6g(s.record.mase);
        for (double l : r.config.levels) out << ',' << format_6g(s.record.msis.at(l));
        for (double l : r.config.levels) {
            const auto& c = s.record.covered.at(l);
            const double hit = static_cast<double>(std::count(c.begin(), c.end(), true));
            out << ',' << format_6g(hit / static_cast<double>(c.size()));
        }
        out << ',' << format_6g(s.record.cost_seconds) << '\n';
    }
    return out.str();
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorCode::Io, "cannot write '" + path + "'");
    f << text;
    if (!f) throw Error(ErrorCode::Io, "write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------
// Balanced-pool ranking

struct BoxStats {
    std::size_t count = 0;
    double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
};

inline BoxStats box_stats(std::vector<double> v) {
    BoxStats b;
    b.count = v.size();
    if (v.empty()) return b;
    std::sort(v.begin(), v.end());
    b.min = v.front();
    b.q1 = quantile_sorted(v, 0.25);
    b.median = quantile_sorted(v, 0.5);
    b.q3 = quantile_sorted(v, 0.75);
    b.max = v.back();
    return b;
}

struct PoolScore {
    std::uint32_t mask = 0;
    int size = 0;
    std::size_t series = 0;  // series with at least one fitted member
    double mase_mean = 0.0;
    double msis_mean = 0.0;
    double cost_mean_seconds = 0.0;
};

struct NamedPoolRank {
    std::string name;
    std::size_t index = 0;
    int size = 0;
    PoolScore score;
    std::size_t mase_rank = 0;  // 1 = most accurate
    std::size_t msis_rank = 0;
    std::size_t cost_rank = 0;  // 1 = cheapest
};

struct SizeDistribution {
    int size = 0;
    BoxStats mase, msis, cost;
};

struct PoolEnumerationReport {
    bool seasonal = false;
    double level = 0.95;  // interval level scored by msis_mean
    std::vector<std::string> models;
    std::vector<PoolScore> pools;  // enumeration order
    std::vector<SizeDistribution> by_size;
    std::vector<NamedPoolRank> named;
    std::size_t series = 0;
    std::size_t fit_count = 0;
    std::size_t expected_fit_count = 0;
    std::vector<SkipRecord> skips;
    std::string fingerprint;
};

namespace bench_detail {

struct CachedCandidate {
    std::size_t model = 0;  // index into BalancedPools::models()
    double criterion = 0.0;
    double mase = 0.0;
    double msis = 0.0;
    double fit_seconds = 0.0;
    double forecast_seconds = 0.0;
};

struct SeriesCache {
    std::vector<CachedCandidate> by_criterion;  // ascending criterion, canonical order on ties
    std::vector<double> fit_seconds;            // per model, zero when not attempted
    std::uint32_t fitted_mask = 0;
    bool usable = false;
};

}  // namespace bench_detail

/// Fits every applicable model once per series, then scores every balanced
/// pool by re-running only the criterion argmin over the cached fits.
inline PoolEnumerationReport run_pool_enumeration(const Dataset& dataset, const ExperimentConfig& config, bool seasonal,
                                                  std::ostream* progress = nullptr) {
    using bench_detail::CachedCandidate;
    using bench_detail::SeriesCache;
    if (config.workers < 1 || config.paths < 1) throw Error(ErrorCode::InvalidArgument, "invalid worker/path count");
    const BalancedPools pools(applicable_ets_specs(), seasonal);
    const auto& models = pools.models();
    PoolEnumerationReport rep;
    rep.seasonal = seasonal;
    rep.level = std::find(config.levels.begin(), config.levels.end(), 0.95) != config.levels.end()
                    ? 0.95
                    : config.levels.back();
    for (const auto& m : models) rep.models.push_back(descriptor(m));
    rep.fingerprint = dataset_fingerprint(dataset);

    const auto all = dataset.series();
    std::vector<SeriesCache> cache(all.size());
    std::vector<std::optional<SkipRecord>> skips(all.size());
    std::atomic<std::size_t> fits{0}, expected{0};
    bench_detail::Progress prog(progress);
    const std::vector<double> levels{rep.level};

    bench_detail::parallel_for(all.size(), config.workers, [&](std::size_t i) {
        const auto& s = all[i];
        auto& c = cache[i];
        c.fit_seconds.assign(models.size(), 0.0);
        try {
            if (seasonal && s.period() < 2)
                throw Error(ErrorCode::InvalidArgument, "seasonal enumeration needs a seasonal period");
            const auto split = split_fixed_origin(s);
            const int period = seasonal ? s.period() : 1;
            seasonal_naive_scale(split.train(), s.period());
            const auto candidates = ets_candidates(models, split.train(), period);
            expected += models.size();
            const std::uint64_t seed = series_seed(config.seed, s.id());
            EtsFitOptions opt;
            opt.aicc_form = config.aicc_form;
            for (std::size_t m = 0; m < models.size(); ++m) {
                if (std::find(candidates.begin(), candidates.end(), models[m]) == candidates.end()) continue;
                ++fits;
                const auto t0 = std::chrono::steady_clock::now();
                try {
                    const auto fit = ets_fit(split.train(), period, models[m], opt);
                    const auto t1 = std::chrono::steady_clock::now();
                    const double crit = fit.criteria.get(config.criterion);
                    if (!std::isfinite(crit)) continue;
                    const auto fc = ets_forecast(fit, split.horizon(), levels, config.paths,
                                                 splitmix64(seed ^ static_cast<std::uint64_t>(m)));
                    const auto t2 = std::chrono::steady_clock::now();
                    CachedCandidate cc;
                    cc.model = m;
                    cc.criterion = crit;
                    cc.mase = mase(split.train(), split.test(), fc.point, s.period());
                    const auto& iv = fc.intervals.at(rep.level);
                    cc.msis = msis(split.train(), split.test(), iv.lower, iv.upper, 1.0 - rep.level, s.period(),
                                   config.msis_form);
                    cc.fit_seconds = std::chrono::duration<double>(t1 - t0).count();
                    cc.forecast_seconds = std::chrono::duration<double>(t2 - t1).count();
                    c.fit_seconds[m] = cc.fit_seconds;
                    c.fitted_mask |= std::uint32_t{1} << m;
                    c.by_criterion.push_back(cc);
                } catch (const Error&) {
                    c.fit_seconds[m] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                }
            }
            std::stable_sort(c.by_criterion.begin(), c.by_criterion.end(),
                             [](const auto& a, const auto& b) { return a.criterion < b.criterion; });
            c.usable = !c.by_criterion.empty();
            if (!c.usable) throw Error(ErrorCode::AllModelsFailed, "no model could be fitted");
        } catch (const Error& e) {
            skips[i] = SkipRecord{s.id(), "enumeration", std::string(to_string(e.code())), e.what()};
        }
        prog.emit(Json{{"event", "series"}, {"id", s.id()}, {"status", skips[i] ? "skip" : "ok"}});
    });

    std::vector<std::size_t> order(all.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return all[a].id() < all[b].id(); });
    for (auto i : order)
        if (skips[i]) rep.skips.push_back(*skips[i]);
    rep.series = all.size() - rep.skips.size();
    rep.fit_count = fits;
    rep.expected_fit_count = expected;

    rep.pools.resize(pools.size());
    bench_detail::parallel_for(pools.size(), config.workers, [&](std::size_t p) {
        PoolScore sc;
        sc.mask = pools.mask(p);
        sc.size = std::popcount(sc.mask);
        double mase_sum = 0.0, msis_sum = 0.0, cost_sum = 0.0;
        for (auto i : order) {
            const auto& c = cache[i];
            if (!c.usable) continue;
            const CachedCandidate* pick = nullptr;
            for (const auto& cc : c.by_criterion)
                if (sc.mask & (std::uint32_t{1} << cc.model)) {
                    pick = &cc;
                    break;
                }
            if (!pick) continue;
            double cost = pick->forecast_seconds;
            for (std::size_t m = 0; m < models.size(); ++m)
                if (sc.mask & (std::uint32_t{1} << m)) cost += c.fit_seconds[m];
            ++sc.series;
            mase_sum += pick->mase;
            msis_sum += pick->msis;
            cost_sum += cost;
        }
        if (sc.series > 0) {
            const double n = static_cast<double>(sc.series);
            sc.mase_mean = mase_sum / n;
            sc.msis_mean = msis_sum / n;
            sc.cost_mean_seconds = cost_sum / n;
        }
        rep.pools[p] = sc;
    });

    std::map<int, std::vector<const PoolScore*>> sizes;
    for (const auto& sc : rep.pools) sizes[sc.size].push_back(&sc);
    for (const auto& [size, list] : sizes) {
        SizeDistribution d;
        d.size = size;
        std::vector<double> a, b, c;
        for (const auto* sc : list) {
            a.push_back(sc->mase_mean);
            b.push_back(sc->msis_mean);
            c.push_back(sc->cost_mean_seconds);
        }
        d.mase = box_stats(a);
        d.msis = box_stats(b);
        d.cost = box_stats(c);
        rep.by_size.push_back(d);
    }

    for (auto name : kEtsPoolNames) {
        const auto mask = pools.mask_of(ets_pool(name, seasonal));
        if (!mask) continue;
        for (std::size_t p = 0; p < pools.size(); ++p) {
            if (pools.mask(p) != *mask) continue;
            NamedPoolRank r;
            r.name = "ets:" + std::string(to_string(name));
            r.index = p;
            r.score = rep.pools[p];
            r.size = r.score.size;
            r.mase_rank = r.msis_rank = r.cost_rank = 1;
            for (const auto& sc : rep.pools) {
                r.mase_rank += sc.mase_mean < r.score.mase_mean;
                r.msis_rank += sc.msis_mean < r.score.msis_mean;
                r.cost_rank += sc.cost_mean_seconds < r.score.cost_mean_seconds;
            }
            rep.named.push_back(r);
            break;
        }
    }
    return rep;
}

inline Json to_json(const PoolEnumerationReport& r) {
    Json j;
    j["schema"] = "poolcast.pools/1";
    j["seasonal"] = r.seasonal;
    j["models"] = r.models;
    j["pool_count"] = r.pools.size();
    j["dataset"] = Json{{"fingerprint", r.fingerprint}, {"series", r.series}};
    j["level"] = r.level;
    j["fits"] = Json{{"count", r.fit_count}, {"expected", r.expected_fit_count}};
    auto box = [](const BoxStats& b) {
        return Json{{"count", b.count}, {"min", b.min}, {"q1", b.q1}, {"median", b.median}, {"q3", b.q3}, {"max", b.max}};
    };
    Json sizes = Json::array();
    for (const auto& d : r.by_size)
        sizes.push_back(Json{{"size", d.size}, {"mase", box(d.mase)}, {"msis", box(d.msis)}, {"cost_seconds", box(d.cost)}});
    j["by_size"] = sizes;
    Json named = Json::array();
    for (const auto& n : r.named)
        named.push_back(Json{{"name", n.name},
                             {"index", n.index},
                             {"size", n.size},
                             {"mase_mean", n.score.mase_mean},
                             {"msis_mean", n.score.msis_mean},
                             {"cost_mean_seconds", n.score.cost_mean_seconds},
                             {"mase_rank", n.mase_rank},
                             {"msis_rank", n.msis_rank},
                             {"cost_rank", n.cost_rank}});
    j["named_pools"] = named;
    Json sk = Json::array();
    for (const auto& s : r.skips) sk.push_back(Json{{"series_id", s.series_id}, {"code", s.code}, {"reason", s.reason}});
    j["skips"] = sk;
    return j;
}

/// One row per enumerated pool: index, size, members, and the scores when a
/// dataset was evaluated.
inline std::string pool_table_csv(const BalancedPools& pools, const PoolEnumerationReport* scores = nullptr) {
    std::ostringstream out;
    out << "index,size,models";
    if (scores) out << ",series,mase_mean,msis_mean,cost_mean_seconds";
    out << '\n';
    for (std::size_t p = 0; p < pools.size(); ++p) {
        const auto members = pools.at(p);
        out << p << ',' << members.size() << ',';
        for (std::size_t i = 0; i < members.size(); ++i) out << (i ? " " : "") << descriptor(members[i]);
        if (scores) {
            const auto& sc = scores->pools.at(p);
            out << ',' << sc.series << ',' << format_6g(sc.mase_mean) << ',' << format_6g(sc.msis_mean) << ','
                << format_6g(sc.cost_mean_seconds);
        }
        out << '\n';
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// Forecast value added

struct PoolSummary {
    std::string label;
    double mase = 0.0;
    double cost = 0.0;
};

struct FvaRow {
    PoolSummary pool;
    std::vector<double> fva;  // versus each earlier row
    std::vector<double> ccr;
};

/// Rows in the given order; row i is compared with every row before it.
inline std::vector<FvaRow> fva_table(const std::vector<PoolSummary>& ordered) {
    std::vector<FvaRow> rows;
    for (std::size_t i = 0; i < ordered.size(); ++i) {
        FvaRow r;
        r.pool = ordered[i];
        for (std::size_t j = 0; j < i; ++j) {
            r.fva.push_back(fva(ordered[j].mase, ordered[i].mase));
            r.ccr.push_back(ccr(ordered[j].cost, ordered[i].cost));
        }
        rows.push_back(std::move(r));
    }
    return rows;
}

/// Complexity used for the default ordering: number of ETS models or of
/// ARIMA order tuples in the pool.
inline std::uint64_t pool_complexity(const std::string& label) {
    const auto pool = parse_pool(label);
    if (pool.family == PoolFamily::Ets) return pool.ets_specs->size();
    return 1000 + arima_tuple_count(*pool.arima_max_order, true);
}

/// Collects pool summaries from saved reports over one dataset and builds the
/// value-added table. `order` lists labels; empty means by complexity.
inline std::vector<FvaRow> report_fva(const std::vector<Json>& reports, const std::vector<std::string>& order = {}) {
    if (reports.size() < 2) throw Error(ErrorCode::DatasetMismatch, "need at least two reports to compare");
    std::string fingerprint;
    std::map<std::string, PoolSummary> found;
    std::vector<std::string> seen;
    for (const auto& r : reports) {
        try {
            const auto fp = r.at("dataset").at("fingerprint").get<std::string>();
            if (fingerprint.empty()) fingerprint = fp;
            else if (fp != fingerprint) throw Error(ErrorCode::DatasetMismatch, "reports cover different datasets");
            for (const auto& p : r.at("pools")) {
                PoolSummary s{p.at("label").get<std::string>(), p.at("mase_mean").get<double>(),
                              p.at("cost_mean_seconds").get<double>()};
                if (found.emplace(s.label, s).second) seen.push_back(s.label);
            }
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::InvalidArgument, std::string("malformed report: ") + e.what());
        }
    }
    std::vector<std::string> labels = order;
    if (labels.empty()) {
        labels = seen;
        std::stable_sort(labels.begin(), labels.end(),
                         [](const auto& a, const auto& b) { return pool_complexity(a) < pool_complexity(b); });
    }
    std::vector<PoolSummary> ordered;
    for (const auto& l : labels) {
        auto it = found.find(l);
        if (it == found.end()) throw Error(ErrorCode::InvalidArgument, "pool '" + l + "' not found in the reports");
        ordered.push_back(it->second);
    }
    return fva_table(ordered);
}

inline std::string fva_csv(const std::vector<FvaRow>& rows) {
    std::ostringstream out;
    out << "step,pool,mase";
    for (std::size_t j = 0; j + 1 < rows.size(); ++j) out << ",fva_vs_" << j + 1;
    out << ",cost_seconds";
    for (std::size_t j = 0; j + 1 < rows.size(); ++j) out << ",ccr_vs_" << j + 1;
    out << '\n';
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        out << i + 1 << ',' << r.pool.label << ',' << format_6g(r.pool.mase);
        for (std::size_t j = 0; j + 1 < rows.size(); ++j) out << ',' << (j < r.fva.size() ? format_6g(r.fva[j]) : "");
        out << ',' << format_6g(r.pool.cost);
        for (std::size_t j = 0; j + 1 < rows.size(); ++j) out << ',' << (j < r.ccr.size() ? format_6g(r.ccr[j]) : "");
        out << '\n';
    }
    return out.str();
}

inline std::string fva_text(const std::vector<FvaRow>& rows) {
    std::ostringstream out;
    char buf[64];
    std::size_t width = 4;
    for (const auto& r : rows) width = std::max(width, r.pool.label.size() + 3);
    auto pad = [](std::string s, std::size_t w) {
        if (s.size() < w) s.append(w - s.size(), ' ');
        return s;
    };
    std::string header = pad("Pool", width) + pad("MASE", 9);
    for (std::size_t j = 0; j + 1 < rows.size(); ++j) header += pad("FVA vs " + std::to_string(j + 1), 12);
    header += pad("Cost (s)", 11);
    for (std::size_t j = 0; j + 1 < rows.size(); ++j) header += pad("CCR vs " + std::to_string(j + 1), 12);
    out << header << '\n' << std::string(header.size(), '-') << '\n';
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        std::string line = pad(std::to_string(i + 1) + ": " + r.pool.label, width);
        std::snprintf(buf, sizeof buf, "%.3f", r.pool.mase);
        line += pad(buf, 9);
        for (std::size_t j = 0; j + 1 < rows.size(); ++j) {
            if (j < r.fva.size()) std::snprintf(buf, sizeof buf, "%.1f%%", r.fva[j]);
            else buf[0] = '\0';
            line += pad(buf, 12);
        }
        std::snprintf(buf, sizeof buf, "%.3f", r.pool.cost);
        line += pad(buf, 11);
        for (std::size_t j = 0; j + 1 < rows.size(); ++j) {
            if (j < r.ccr.size()) std::snprintf(buf, sizeof buf, "%.0f%%", r.ccr[j]);
            else buf[0] = '\0';
            line += pad(buf, 12);
        }
        while (!line.empty() && line.back() == ' ') line.pop_back();
        out << line << '\n';
    }
    return out.str();
}

}  // namespace poolcast
