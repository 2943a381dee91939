#include <poolcast/bench.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sys/wait.h>

using namespace poolcast;
namespace fs = std::filesystem;

namespace {

TimeSeries make_series(const std::string& id, int period, int n, int h, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> e(0, 1);
    std::vector<double> v;
    double level = 50 + 10 * e(rng);
    for (int t = 0; t < n; ++t) {
        level += 0.2 + 0.5 * e(rng);
        const double season = period > 1 ? 4 * std::sin(2 * std::numbers::pi * t / period) : 0.0;
        v.push_back(level + season + e(rng));
    }
    return TimeSeries(id, period, v, h);
}

Dataset small_dataset() {
    std::vector<TimeSeries> s;
    for (int i = 0; i < 3; ++i) s.push_back(make_series("q" + std::to_string(i), 4, 36, 8, 10 + i));
    for (int i = 0; i < 3; ++i) s.push_back(make_series("y" + std::to_string(i), 1, 26, 6, 20 + i));
    return Dataset(s);
}

fs::path temp_dir() {
    const auto dir = fs::temp_directory_path() / "poolcast_bench_test";
    fs::create_directories(dir);
    return dir;
}

int run(const std::string& cmd) {
    const int status = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Bench, SingletonReducedPool) {
    const Dataset d(std::vector<TimeSeries>{make_series("only", 1, 30, 6, 1)});
    ExperimentConfig cfg;
    cfg.pools = {"ets:reduced"};
    const auto rep = run_benchmark(d, cfg);
    ASSERT_EQ(rep.results.size(), 1u);
    const std::set<std::string> allowed{"ANN", "MNN", "AAdN", "MAdN"};
    EXPECT_TRUE(allowed.count(rep.results[0].record.selected_model)) << rep.results[0].record.selected_model;
    EXPECT_EQ(rep.results[0].candidates, 4);
    const auto j = to_json(rep);
    EXPECT_EQ(j["schema"], "poolcast.bench/1");
    EXPECT_EQ(j["records"].size(), 1u);
    EXPECT_EQ(j["records"][0]["forecast"]["point"].size(), 6u);
}

TEST(Bench, SupersetPoolNeverHasWorseCriterion) {
    const auto d = small_dataset();
    ExperimentConfig cfg;
    cfg.pools = {"ets:reduced", "ets:all"};
    cfg.levels = {0.95};
    const auto rep = run_benchmark(d, cfg);
    ASSERT_EQ(rep.results.size(), 2 * d.size());
    for (std::size_t i = 0; i < rep.results.size(); i += 2) {
        const auto& sub = rep.results[i];
        const auto& sup = rep.results[i + 1];
        ASSERT_EQ(sub.record.series_id, sup.record.series_id);
        EXPECT_EQ(sub.record.pool_label, "ets:reduced");
        EXPECT_LE(sup.criterion, sub.criterion + 1e-9) << sub.record.series_id;
    }
    EXPECT_EQ(rep.pools.size(), 2u);
    EXPECT_EQ(rep.pools[0].cost_ratio, 1.0);
    EXPECT_FALSE(rep.dm.empty());
    for (const auto& e : rep.dm) {
        EXPECT_TRUE(e.outcome == "ets:reduced better" || e.outcome == "ets:all better" || e.outcome == "no difference" ||
                    e.outcome == "insufficient data")
            << e.outcome;
    }
}

TEST(Bench, DeterministicAcrossWorkerCounts) {
    const auto d = small_dataset();
    ExperimentConfig cfg;
    cfg.pools = {"ets:all", "arima:K1"};
    cfg.levels = {0.8, 0.95};
    cfg.paths = 300;
    cfg.workers = 1;
    const auto a = strip_timing(to_json(run_benchmark(d, cfg)));
    cfg.workers = 3;
    const auto b = strip_timing(to_json(run_benchmark(d, cfg)));
    EXPECT_EQ(a.dump(), b.dump());
    EXPECT_EQ(a["records"].dump(), b["records"].dump());
    cfg.seed = 7;
    const auto c = strip_timing(to_json(run_benchmark(d, cfg)));
    EXPECT_EQ(c["config"]["seed"], 7);
}

TEST(Bench, SkipsAndRecordsCoverDataset) {
    const auto base = small_dataset();
    std::vector<TimeSeries> s(base.series().begin(), base.series().end());
    s.emplace_back("flat", 1, std::vector<double>(20, 3.0), 4);
    s.emplace_back("tiny", 4, std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, 2);
    const Dataset d(s);
    ExperimentConfig cfg;
    cfg.pools = {"ets:reduced", "arima:K2"};
    cfg.levels = {0.9};
    const auto rep = run_benchmark(d, cfg);
    EXPECT_EQ(rep.results.size() + rep.skips.size(), d.size() * cfg.pools.size());
    bool flat_skipped = false;
    for (const auto& k : rep.skips) {
        EXPECT_FALSE(k.reason.empty());
        flat_skipped |= k.series_id == "flat";
    }
    EXPECT_TRUE(flat_skipped);
    const auto csv = records_csv(rep);
    EXPECT_NE(csv.find("series_id"), std::string::npos);
}

TEST(Bench, InvalidConfig) {
    ExperimentConfig cfg;
    cfg.pools = {"ets:bogus"};
    EXPECT_THROW(cfg.validate(), Error);
    cfg.pools = {"arima:K9"};
    EXPECT_THROW(cfg.validate(), Error);
    cfg.pools = {"ets:all"};
    cfg.levels = {1.2};
    EXPECT_THROW(cfg.validate(), Error);
}

TEST(Enumeration, NonSeasonalPoolsAndTelemetry) {
    std::vector<TimeSeries> s;
    for (int i = 0; i < 3; ++i) s.push_back(make_series("n" + std::to_string(i), 1, 24, 6, 40 + i));
    const Dataset d(s);
    ExperimentConfig cfg;
    cfg.paths = 200;
    const auto rep = run_pool_enumeration(d, cfg, false);
    EXPECT_EQ(rep.pools.size(), 189u);
    EXPECT_EQ(rep.models.size(), 8u);
    EXPECT_EQ(rep.fit_count, 8u * d.size());
    EXPECT_EQ(rep.fit_count, rep.expected_fit_count);
    bool found_reduced = false;
    for (const auto& n : rep.named) {
        if (n.name == "ets:reduced") {
            found_reduced = true;
            EXPECT_EQ(n.size, 4);
        }
        EXPECT_GE(n.mase_rank, 1u);
        EXPECT_LE(n.mase_rank, 189u);
    }
    EXPECT_TRUE(found_reduced);
    std::size_t total = 0;
    for (const auto& b : rep.by_size) total += b.mase.count;
    EXPECT_EQ(total, 189u);
    const auto j = to_json(rep);
    EXPECT_EQ(j["pool_count"], 189);
    EXPECT_EQ(j["fits"]["count"], j["fits"]["expected"]);
}

TEST(Enumeration, SeasonalReducedPoolHasEightModels) {
    const BalancedPools pools(applicable_ets_specs(), true);
    EXPECT_EQ(pools.size(), 337365u);
    const auto mask = pools.mask_of(ets_pool(EtsPoolName::Reduced, true));
    ASSERT_TRUE(mask.has_value());
    EXPECT_EQ(std::popcount(*mask), 8);
}

namespace {

Json fake_report(const std::string& fingerprint, const std::vector<PoolSummary>& pools) {
    Json j;
    j["dataset"] = Json{{"fingerprint", fingerprint}};
    j["pools"] = Json::array();
    for (const auto& p : pools)
        j["pools"].push_back(Json{{"label", p.label}, {"mase_mean", p.mase}, {"cost_mean_seconds", p.cost}});
    return j;
}

}  // namespace

TEST(ReportFva, TableInputs) {
    const std::vector<Json> reports{fake_report("abc", {{"ets:reduced", 0.942, 0.450}}),
                                    fake_report("abc", {{"ets:no_mult_trend", 0.947, 0.973}, {"ets:all", 1.046, 1.375}})};
    const auto rows = report_fva(reports);
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(rows[0].pool.label, "ets:reduced");
    EXPECT_EQ(rows[1].pool.label, "ets:no_mult_trend");
    EXPECT_EQ(rows[2].pool.label, "ets:all");
    EXPECT_NEAR(rows[1].fva[0], -0.5, 0.5);
    EXPECT_NEAR(rows[2].fva[0], -11.0, 0.5);
    EXPECT_NEAR(rows[2].fva[1], -10.5, 0.5);
    EXPECT_NEAR(rows[1].ccr[0], -116.0, 0.5);
    EXPECT_NEAR(rows[2].ccr[0], -206.0, 0.5);
    EXPECT_NEAR(rows[2].ccr[1], -41.0, 0.5);
    EXPECT_NE(fva_text(rows).find("ets:no_mult_trend"), std::string::npos);
    EXPECT_NE(fva_csv(rows).find("ets:all"), std::string::npos);

    const std::vector<Json> equal{fake_report("x", {{"ets:reduced", 1.0, 1.0}}),
                                  fake_report("x", {{"ets:all", 1.0, 2.0}})};
    for (const auto& r : report_fva(equal))
        for (double v : r.fva) EXPECT_EQ(v, 0.0);
}

TEST(ReportFva, Mismatches) {
    const auto one = fake_report("a", {{"ets:reduced", 1.0, 1.0}, {"ets:all", 1.1, 2.0}});
    try {
        report_fva({one});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DatasetMismatch);
    }
    try {
        report_fva({one, fake_report("b", {{"ets:no_mult_trend", 1.0, 1.0}})});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DatasetMismatch);
    }
}

TEST(Cli, ExitCodes) {
    const std::string cli = POOLCAST_CLI;
    const auto dir = temp_dir();
    const auto data = (dir / "data.csv").string();
    save_dataset(small_dataset(), data, DatasetFormat::WideCsv);
    const auto out = (dir / "report.json").string();
    EXPECT_EQ(run(cli + " bench --quiet --input " + data + " --pools ets:reduced --levels 0.8,0.95 --out " + out), 0);
    std::ifstream f(out);
    const auto j = Json::parse(f);
    EXPECT_EQ(j["records"].size(), 6u);
    EXPECT_EQ(run(cli + " bench --input " + data + " --pools ets:nope"), 2);
    EXPECT_EQ(run(cli + " bench --input " + data + " --workers 0"), 2);
    EXPECT_EQ(run(cli + " bench --bogus-flag"), 2);
    EXPECT_EQ(run(cli + " bench --input " + (dir / "missing.csv").string()), 3);
    {
        std::ofstream bad(dir / "bad.csv");
        bad << "a,1,2,,1,2,oops\n";
    }
    EXPECT_EQ(run(cli + " bench --input " + (dir / "bad.csv").string()), 3);
    EXPECT_EQ(run(cli + " report fva --reports " + out), 3);
    EXPECT_EQ(run(cli + " forecast --values 1,2,3,4,5,6,7,8,9,10 --horizon 3 --pool ets:reduced"), 0);
    EXPECT_EQ(run(cli + " pools enumerate --non-seasonal --quiet"), 0);
}
