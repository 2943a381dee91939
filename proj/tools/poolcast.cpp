// poolcast: benchmark model pools, enumerate balanced pools, compare reports
// and forecast single series.

#include <poolcast/bench.hpp>

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using namespace poolcast;

constexpr int kConfigError = 2;
constexpr int kDatasetError = 3;

int exit_code_for(ErrorCode code) {
    switch (code) {
    case ErrorCode::Io:
    case ErrorCode::MalformedRow:
    case ErrorCode::NonFiniteValue:
    case ErrorCode::HorizonTooLarge:
    case ErrorCode::MissingHorizon:
    case ErrorCode::DuplicateId:
    case ErrorCode::DatasetMismatch:
    case ErrorCode::IdMismatch: return kDatasetError;
    case ErrorCode::InvalidArgument:
    case ErrorCode::InvalidOrder: return kConfigError;
    default: return 1;
    }
}

std::vector<double> parse_levels(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            throw Error(ErrorCode::InvalidArgument, "bad level '" + item + "'");
        }
        if (used != item.size()) throw Error(ErrorCode::InvalidArgument, "bad level '" + item + "'");
        out.push_back(v > 1.0 ? v / 100.0 : v);
    }
    return out;
}

std::vector<std::string> split_list(const std::vector<std::string>& items) {
    std::vector<std::string> out;
    for (const auto& s : items) {
        std::stringstream ss(s);
        std::string part;
        while (std::getline(ss, part, ','))
            if (!part.empty()) out.push_back(part);
    }
    return out;
}

Json read_json(const std::string& path) {
    try {
        return Json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Io, "'" + path + "' is not valid JSON: " + e.what());
    }
}

struct CommonOptions {
    std::string format = "wide-csv";
    std::string criterion = "aicc";
    std::string levels = "0.8,0.85,0.9,0.95,0.99";
    std::uint64_t seed = 42;
    int workers = 1;
    int paths = kDefaultSimulationPaths;
    std::string aicc_form = "standard";
    std::string msis_form = "mean";

    void add(CLI::App* app) {
        app->add_option("--format", format, "Dataset format: wide-csv or jsonl")->capture_default_str();
        app->add_option("--criterion", criterion, "Selection criterion: aic, bic or aicc")->capture_default_str();
        app->add_option("--levels", levels, "Comma-separated confidence levels")->capture_default_str();
        app->add_option("--seed", seed, "Global random seed")->capture_default_str();
        app->add_option("--workers", workers, "Worker threads")->capture_default_str();
        app->add_option("--paths", paths, "Simulation paths for multiplicative-trend intervals")->capture_default_str();
        app->add_option("--aicc-form", aicc_form, "AICc correction: standard or paper")->capture_default_str();
        app->add_option("--msis-form", msis_form, "MSIS over the horizon: mean or sum")->capture_default_str();
    }

    void apply(ExperimentConfig& cfg) const {
        cfg.format = parse_dataset_format(format);
        cfg.criterion = parse_criterion(criterion);
        cfg.levels = parse_levels(levels);
        cfg.seed = seed;
        cfg.workers = workers;
        cfg.paths = paths;
        cfg.aicc_form = parse_aicc_form(aicc_form);
        cfg.msis_form = parse_msis_form(msis_form);
    }
};

void print_summary(const BenchReport& r) {
    std::printf("%-20s %8s %6s %10s %12s %10s %8s\n", "pool", "records", "skips", "MASE", "MSIS(95%)", "cost(s)",
                "ratio");
    for (const auto& p : r.pools) {
        auto it = p.msis_mean.find(0.95);
        const double m95 = it != p.msis_mean.end() ? it->second : std::nan("");
        std::printf("%-20s %8zu %6zu %10.4f %12.4f %10.4f %8.3f\n", p.label.c_str(), p.records, p.skips, p.mase_mean,
                    m95, p.cost_mean_seconds, p.cost_ratio);
        if (!p.explosive.series.empty())
            std::printf("  explosive forecasts: %zu series (%zu with multiplicative trend)\n",
                        p.explosive.series.size(), p.explosive.multiplicative_trend);
    }
}

int run_bench(const std::string& input, const std::vector<std::string>& pools, const CommonOptions& common,
              const std::string& out, const std::string& records, bool no_forecasts, bool quiet) {
    ExperimentConfig cfg;
    cfg.input = input;
    cfg.pools = split_list(pools);
    common.apply(cfg);
    cfg.out = out;
    cfg.records = records;
    cfg.include_forecasts = !no_forecasts;
    cfg.validate();
    const auto dataset = load_dataset(cfg.input, cfg.format);
    const auto report = run_benchmark(dataset, cfg, quiet ? nullptr : &std::cerr);
    if (!cfg.out.empty()) write_text(cfg.out, to_json(report).dump(2) + "\n");
    if (!cfg.records.empty()) write_text(cfg.records, records_csv(report));
    print_summary(report);
    return 0;
}

int run_enumerate(bool seasonal, const std::string& input, const CommonOptions& common, const std::string& out,
                  const std::string& table, bool quiet) {
    const BalancedPools pools(applicable_ets_specs(), seasonal);
    if (input.empty()) {
        Json j;
        j["schema"] = "poolcast.pools/1";
        j["seasonal"] = seasonal;
        Json models = Json::array();
        for (const auto& m : pools.models()) models.push_back(descriptor(m));
        j["models"] = models;
        j["pool_count"] = pools.size();
        Json named = Json::object();
        for (auto name : kEtsPoolNames) {
            const auto mask = pools.mask_of(ets_pool(name, seasonal));
            for (std::size_t p = 0; mask && p < pools.size(); ++p)
                if (pools.mask(p) == *mask) named["ets:" + std::string(to_string(name))] = p;
        }
        j["named_pools"] = named;
        if (!out.empty()) write_text(out, j.dump(2) + "\n");
        if (!table.empty()) write_text(table, pool_table_csv(pools));
        std::printf("%zu balanced %s pools over %zu models\n", pools.size(), seasonal ? "seasonal" : "non-seasonal",
                    pools.models().size());
        return 0;
    }
    ExperimentConfig cfg;
    cfg.input = input;
    common.apply(cfg);
    const auto dataset = load_dataset(cfg.input, cfg.format);
    const auto rep = run_pool_enumeration(dataset, cfg, seasonal, quiet ? nullptr : &std::cerr);
    if (!out.empty()) write_text(out, to_json(rep).dump(2) + "\n");
    if (!table.empty()) write_text(table, pool_table_csv(pools, &rep));
    std::printf("%zu pools scored over %zu series (%zu fits)\n", rep.pools.size(), rep.series, rep.fit_count);
    for (const auto& n : rep.named)
        std::printf("%-18s size %2d  MASE %.4f (rank %zu)  MSIS %.4f (rank %zu)  cost %.4fs (rank %zu)\n",
                    n.name.c_str(), n.size, n.score.mase_mean, n.mase_rank, n.score.msis_mean, n.msis_rank,
                    n.score.cost_mean_seconds, n.cost_rank);
    return 0;
}

int run_report_fva(const std::vector<std::string>& paths, const std::vector<std::string>& order,
                   const std::string& csv) {
    std::vector<Json> reports;
    for (const auto& p : paths) reports.push_back(read_json(p));
    const auto rows = report_fva(reports, split_list(order));
    if (!csv.empty()) write_text(csv, fva_csv(rows));
    std::cout << fva_text(rows);
    return 0;
}

int run_forecast(const std::string& input, const std::string& values, const std::string& id, int period, int horizon,
                 const std::string& pool_label, const CommonOptions& common, const std::string& out) {
    ExperimentConfig cfg;
    common.apply(cfg);
    cfg.pools = {pool_label};
    cfg.validate();
    std::vector<double> train;
    int s = period;
    int h = horizon;
    std::string source = "values";
    if (!input.empty()) {
        const auto dataset = load_dataset(input, cfg.format);
        const TimeSeries* pick = nullptr;
        for (const auto& ts : dataset.series())
            if (id.empty() || ts.id() == id) {
                pick = &ts;
                break;
            }
        if (!pick) throw Error(ErrorCode::IdMismatch, id.empty() ? "dataset is empty" : "no series '" + id + "'");
        train.assign(pick->values().begin(), pick->values().end());
        s = period > 0 ? period : pick->period();
        h = horizon > 0 ? horizon : pick->horizon();
        source = pick->id();
    } else {
        std::stringstream ss(values);
        std::string item;
        while (std::getline(ss, item, ',')) {
            double v = 0.0;
            if (!detail::parse_double(detail::trim(item), v))
                throw Error(ErrorCode::MalformedRow, "bad value '" + item + "'");
            train.push_back(v);
        }
    }
    if (train.empty()) throw Error(ErrorCode::InvalidArgument, "no data: use --input or --values");
    if (s < 1) s = 1;
    if (h < 1) throw Error(ErrorCode::InvalidArgument, "--horizon is required with --values");
    const auto pool = parse_pool(pool_label);
    const auto seed = series_seed(cfg.seed, source);
    const auto sel = bench_detail::select_and_forecast(pool, train, s, h, cfg, seed);

    std::ostringstream csv;
    csv << "# model=" << sel.model << " method=" << to_string(sel.forecast.method) << '\n';
    csv << "step,point";
    for (double l : cfg.levels) csv << ",lower_" << level_key(l) << ",upper_" << level_key(l);
    csv << '\n';
    for (int i = 0; i < h; ++i) {
        csv << i + 1 << ',' << format_double(sel.forecast.point[i]);
        for (double l : cfg.levels) {
            const auto& iv = sel.forecast.intervals.at(l);
            csv << ',' << format_double(iv.lower[i]) << ',' << format_double(iv.upper[i]);
        }
        csv << '\n';
    }
    if (out.empty()) std::cout << csv.str();
    else write_text(out, csv.str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Forecast model-pool benchmarking"};
    app.require_subcommand(1);

    auto* bench = app.add_subcommand("bench", "Select, forecast and score every series for each pool");
    std::string input, out, records;
    std::vector<std::string> pools{"ets:reduced"};
    bool no_forecasts = false, quiet = false;
    CommonOptions bench_opts;
    bench->add_option("--input", input, "Dataset file")->required();
    bench->add_option("--pools", pools, "Pool labels, e.g. ets:reduced,arima:K3")->delimiter(',');
    bench_opts.add(bench);
    bench->add_option("--out", out, "Report JSON path");
    bench->add_option("--records", records, "Per-series CSV path");
    bench->add_flag("--no-forecasts", no_forecasts, "Leave forecasts out of the report");
    bench->add_flag("--quiet", quiet, "No progress lines on stderr");

    auto* pools_cmd = app.add_subcommand("pools", "Balanced pool enumeration");
    pools_cmd->require_subcommand(1);
    auto* enumerate = pools_cmd->add_subcommand("enumerate", "Enumerate (and optionally score) balanced ETS pools");
    bool seasonal = true;
    std::string enum_input, enum_out, enum_table;
    bool enum_quiet = false;
    CommonOptions enum_opts;
    enumerate->add_flag("--seasonal,!--non-seasonal", seasonal, "Seasonal (default) or non-seasonal model set");
    enumerate->add_option("--input", enum_input, "Dataset to score every pool on");
    enumerate->add_option("--out", enum_out, "Summary JSON path");
    enumerate->add_option("--table", enum_table, "Per-pool CSV path");
    enumerate->add_flag("--quiet", enum_quiet, "No progress lines on stderr");
    enum_opts.add(enumerate);

    auto* report = app.add_subcommand("report", "Compare saved reports");
    report->require_subcommand(1);
    auto* fva_cmd = report->add_subcommand("fva", "Forecast value added and cost reduction table");
    std::vector<std::string> report_paths, order;
    std::string fva_csv_path;
    fva_cmd->add_option("--reports", report_paths, "Report JSON files")->required();
    fva_cmd->add_option("--order", order, "Pool labels from simplest to most complex")->delimiter(',');
    fva_cmd->add_option("--csv", fva_csv_path, "Also write the table as CSV");

    auto* forecast = app.add_subcommand("forecast", "Forecast one series and print point and interval CSV");
    std::string fc_input, fc_values, fc_id, fc_pool = "ets:reduced", fc_out;
    int fc_period = 0, fc_horizon = 0;
    CommonOptions fc_opts;
    forecast->add_option("--input", fc_input, "Dataset file (first series unless --id)");
    forecast->add_option("--id", fc_id, "Series id within --input");
    forecast->add_option("--values", fc_values, "Comma-separated observations");
    forecast->add_option("--period", fc_period, "Seasonal period");
    forecast->add_option("--horizon", fc_horizon, "Forecast horizon");
    forecast->add_option("--pool", fc_pool, "Pool label")->capture_default_str();
    forecast->add_option("--out", fc_out, "CSV path (stdout when omitted)");
    fc_opts.add(forecast);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kConfigError;
    }

    try {
        if (bench->parsed()) return run_bench(input, pools, bench_opts, out, records, no_forecasts, quiet);
        if (enumerate->parsed()) return run_enumerate(seasonal, enum_input, enum_opts, enum_out, enum_table, enum_quiet);
        if (fva_cmd->parsed()) return run_report_fva(report_paths, order, fva_csv_path);
        if (forecast->parsed())
            return run_forecast(fc_input, fc_values, fc_id, fc_period, fc_horizon, fc_pool, fc_opts, fc_out);
    } catch (const Error& e) {
        std::cerr << "error: " << to_string(e.code()) << ": " << e.what() << '\n';
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
