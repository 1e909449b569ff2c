#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "llmpred/errors.hpp"
#include "llmpred/pipeline.hpp"

using namespace llmpred;

namespace {

// Writes a CSV dataset with `channels` smooth feature columns of `rows`
// samples each and returns its path.
std::string write_dataset(const std::string& name, std::size_t rows, std::size_t channels) {
    const auto path = std::filesystem::temp_directory_path() / name;
    std::ofstream out(path);
    out << "t";
    for (std::size_t c = 0; c < channels; ++c) out << ",f" << c;
    out << "\n";
    char buf[32];
    for (std::size_t t = 0; t < rows; ++t) {
        out << t;
        for (std::size_t c = 0; c < channels; ++c) {
            // Distinct period and offset per channel; never identically zero.
            const double period = 40.0 + 10.0 * static_cast<double>(c);
            const double v = std::sin(2.0 * M_PI * static_cast<double>(t) / period) +
                             0.3 + 0.2 * static_cast<double>(c);
            std::snprintf(buf, sizeof(buf), "%.6f", v);
            out << "," << buf;
        }
        out << "\n";
    }
    return path.string();
}

std::string unique_dir(const std::string& name) {
    const auto path = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(path);
    return path.string();
}

// Small, fast run description shared by the end-to-end cases.
PipelineConfig small_config(const std::string& dataset) {
    PipelineConfig cfg;
    cfg.dataset_path = dataset;
    cfg.H = 16;
    cfg.seed = 1;
    cfg.refiner.hidden_widths = {16, 16};
    cfg.refiner.epochs = 8;
    cfg.refiner.learning_rate = 1e-3;
    cfg.refiner.input_dim = cfg.H;
    cfg.refiner.seed = cfg.seed;
    cfg.gen.seed = cfg.seed;
    return cfg;
}

void expect_config_error(const std::string& json_text, const std::string& field) {
    try {
        config_from_json(json_text);
        FAIL("expected config_error for field ", field, " in ", json_text);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::config_error);
        CHECK(std::string(e.what()).find(field) != std::string::npos);
    }
}

} // namespace

TEST_CASE("config_from_json: defaults") {
    const PipelineConfig cfg = config_from_json("{}");
    CHECK(cfg.dataset_path.empty());
    CHECK_FALSE(cfg.channels.has_value());
    CHECK(cfg.H == 48);
    CHECK(cfg.stride == 0);
    CHECK(cfg.alpha == 0.7);
    CHECK(cfg.grid == default_cutoff_grid());
    CHECK(cfg.sample_rate_hz == 100.0);
    CHECK(cfg.filter_order == 4);
    CHECK(cfg.zero_phase);
    CHECK(cfg.decimals == 2);
    CHECK(cfg.scheme.context_limit == 4096);
    CHECK(cfg.gen.temperature == 1.0);
    CHECK(cfg.gen.top_p == 0.9);
    CHECK(cfg.backend_selector == "mock:persistence");
    CHECK(cfg.seed == 0);
    // Derived invariants: the refiner always works on length-H vectors and
    // every seeded component shares the run seed.
    CHECK(cfg.refiner.input_dim == 48);
    CHECK(cfg.refiner.seed == cfg.seed);
    CHECK(cfg.gen.seed == cfg.seed);
}

TEST_CASE("config_from_json: rejects bad fields by name") {
    expect_config_error("{\"alpha\": 1.5}", "alpha");
    expect_config_error("{\"alpha\": \"high\"}", "alpha");
    expect_config_error("{\"h\": 0}", "h");
    expect_config_error("{\"stride\": -1}", "stride");
    expect_config_error("{\"decimals\": 3}", "decimals");
    expect_config_error("{\"top_p\": 0.0}", "top_p");
    expect_config_error("{\"grid\": []}", "grid");
    expect_config_error("{\"grid\": [60.0]}", "grid");
    expect_config_error("{\"sample_rate_hz\": 0}", "sample_rate_hz");
    expect_config_error("{\"token_scheme\": \"words\"}", "token_scheme");
    expect_config_error("{\"context_limit\": 0}", "context_limit");
    expect_config_error("{\"channels\": []}", "channels");
    expect_config_error("{\"refiner\": {\"epochs\": 0}}", "refiner.epochs");
    expect_config_error("{\"refiner\": {\"lr\": 1}}", "refiner.lr");
    expect_config_error("{\"refiner_train_fraction\": 1.0}", "refiner_train_fraction");
    expect_config_error("{\"typo_field\": 1}", "typo_field");

    try {
        config_from_json("not json");
        FAIL("expected config_error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::config_error);
    }
}

TEST_CASE("config_to_json: resolved form round-trips through the parser") {
    PipelineConfig cfg = config_from_json(
        "{\"dataset\": \"d.csv\", \"h\": 24, \"alpha\": 0.5, \"seed\": 9}");
    const PipelineConfig back = config_from_json(config_to_json(cfg));
    CHECK(config_hash(back) == config_hash(cfg));
    CHECK(back.H == 24);
    CHECK_FALSE(back.channels.has_value());

    cfg.channels = std::vector<int>{2, 0};
    const PipelineConfig with_channels = config_from_json(config_to_json(cfg));
    REQUIRE(with_channels.channels.has_value());
    CHECK(*with_channels.channels == std::vector<int>{2, 0});
}

TEST_CASE("config_hash: identifies the experiment, not its storage") {
    PipelineConfig a = config_from_json("{\"dataset\": \"d.csv\"}");
    PipelineConfig b = a;
    b.out_dir = "/tmp/somewhere/else";
    b.cache_path = "/tmp/other/cache.jsonl";
    CHECK(config_hash(a) == config_hash(b));

    PipelineConfig c = a;
    c.alpha = 0.65;
    CHECK(config_hash(a) != config_hash(c));
}

TEST_CASE("make_backend: selector parsing") {
    PipelineConfig cfg;
    cfg.backend_selector = "mock:persistence";
    CHECK(make_backend(cfg)->id() == "mock:persistence");
    cfg.backend_selector = "mock:noisy";
    CHECK(make_backend(cfg)->id() == "mock:noisy");

    for (const char* bad : {"mock:bogus", "carrier-pigeon:coop", ""}) {
        cfg.backend_selector = bad;
        try {
            make_backend(cfg);
            FAIL("expected config_error for ", bad);
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::config_error);
        }
    }

    // A cache path wraps the backend; the wrapper is transparent in id().
    cfg.backend_selector = "mock:persistence";
    cfg.cache_path = (std::filesystem::temp_directory_path() / "mb_cache.jsonl").string();
    std::filesystem::remove(cfg.cache_path);
    const std::shared_ptr<Backend> wrapped = make_backend(cfg);
    CHECK(wrapped->id() == "mock:persistence");
    CHECK(dynamic_cast<CachingBackend*>(wrapped.get()) != nullptr);
}

TEST_CASE("run_pipeline: persistence mock end to end") {
    const std::string dataset = write_dataset("pipe_basic.csv", 160, 2);
    const PipelineConfig cfg = small_config(dataset);

    const EvalReport report = run_pipeline(cfg);

    // 160 samples, 16+16 per window, stride 16 -> 9 windows; half (floor) to
    // the refiner, two channels scored per eval window.
    CHECK(report.windows_total == 9);
    CHECK(report.windows_refiner_train == 4);
    CHECK(report.windows_eval == 5);
    REQUIRE(report.entries.size() == 10);
    CHECK(report.window_cells_failed == 0);
    // Two prompts (low/high component) per window.
    CHECK(report.generate_calls == 18);
    CHECK(report.backend_id == "mock:persistence");
    CHECK(report.config_hash == config_hash(cfg));
    CHECK(report.schema_version == 1);
    CHECK(report.refiner_trained);
    CHECK(report.refiner_pairs == 8);

    std::set<int> seen_channels;
    for (const WindowChannelResult& e : report.entries) {
        CHECK_FALSE(e.failed);
        seen_channels.insert(e.channel);
        CHECK(e.valid_rows == cfg.H);
        CHECK(e.dropped_rows == 0);
        CHECK(e.scored_length == cfg.H);
        CHECK(std::isfinite(e.mse));
        CHECK(e.mse >= 0.0);
        CHECK(e.mae >= 0.0);
        CHECK(e.ks_high >= 0.0);
        CHECK(e.ks_high <= 1.0);
        CHECK(std::find(cfg.grid.begin(), cfg.grid.end(), e.f_cut) != cfg.grid.end());
    }
    CHECK(seen_channels == std::set<int>{0, 1});

    // The mock is local: latency is recorded but identically zero.
    CHECK(report.latency_total_ms == 0.0);
    CHECK(report.latency_max_ms == 0.0);

    // Aggregates are exactly what recomputation from the entries yields.
    const std::vector<AggregateRow> recomputed = compute_aggregates(report.entries);
    REQUIRE(report.aggregates.size() == recomputed.size());
    for (std::size_t i = 0; i < recomputed.size(); ++i) {
        CHECK(report.aggregates[i].scope == recomputed[i].scope);
        CHECK(report.aggregates[i].metric == recomputed[i].metric);
        CHECK(report.aggregates[i].mean == recomputed[i].mean);
        CHECK(report.aggregates[i].stddev == recomputed[i].stddev);
        CHECK(report.aggregates[i].count == recomputed[i].count);
    }
    CHECK(report.aggregates.back().scope == "overall");
}

TEST_CASE("run_pipeline: deterministic given config and seed") {
    const std::string dataset = write_dataset("pipe_det.csv", 128, 1);
    const PipelineConfig cfg = small_config(dataset);

    const EvalReport a = run_pipeline(cfg);
    const EvalReport b = run_pipeline(cfg);
    CHECK(render_report(a, ReportFormat::json) == render_report(b, ReportFormat::json));
    CHECK(render_report(a, ReportFormat::csv) == render_report(b, ReportFormat::csv));
}

TEST_CASE("run_pipeline: truncated generations score the valid prefix") {
    const std::string dataset = write_dataset("pipe_trunc.csv", 128, 1);
    PipelineConfig cfg = small_config(dataset);
    cfg.backend_selector = "mock:truncated";

    const EvalReport report = run_pipeline(cfg);
    REQUIRE(!report.entries.empty());
    for (const WindowChannelResult& e : report.entries) {
        REQUIRE_FALSE(e.failed);
        // The mock cuts the last value of the final row, so one row per
        // component stream fails to parse.
        CHECK(e.dropped_rows >= 1);
        CHECK(e.valid_rows == cfg.H - 1);
        CHECK(e.scored_length == cfg.H - 1);
        CHECK(std::find(e.flags.begin(), e.flags.end(), "short_output") != e.flags.end());
        CHECK(std::isfinite(e.mse));
    }
    // No full-length pairs ever reach the refiner.
    CHECK(report.refiner_pairs == 0);
    CHECK_FALSE(report.refiner_trained);
}

TEST_CASE("run_pipeline: warm cache replays without backend calls") {
    // Two channels with incommensurate periods: no two windows share a
    // prompt, so every cold-run call is a distinct cache miss.
    const std::string dataset = write_dataset("pipe_cache.csv", 128, 2);
    PipelineConfig cfg = small_config(dataset);
    cfg.cache_path = (std::filesystem::temp_directory_path() / "pipe_cache.jsonl").string();
    std::filesystem::remove(cfg.cache_path);

    const EvalReport cold = run_pipeline(cfg);
    CHECK(cold.cache_hits == 0);
    CHECK(cold.cache_misses == cold.generate_calls);
    CHECK(std::filesystem::exists(cfg.cache_path));

    const EvalReport warm = run_pipeline(cfg);
    CHECK(warm.cache_hits == warm.generate_calls);
    CHECK(warm.cache_misses == 0);

    // Same scores either way; only the cache counters differ.
    REQUIRE(warm.entries.size() == cold.entries.size());
    for (std::size_t i = 0; i < warm.entries.size(); ++i) {
        CHECK(warm.entries[i].mse == cold.entries[i].mse);
        CHECK(warm.entries[i].ks_high == cold.entries[i].ks_high);
    }
}

TEST_CASE("run_pipeline: token budget gate") {
    // Seven features at H=96 cannot fit the 4096-token context.
    const std::string dataset = write_dataset("pipe_budget.csv", 192, 7);
    PipelineConfig cfg = small_config(dataset);
    cfg.H = 96;
    cfg.refiner.input_dim = cfg.H;
    cfg.channels = std::vector<int>{0, 1, 2, 3, 4, 5, 6};

    try {
        run_pipeline(cfg);
        FAIL("expected budget_exceeded");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::budget_exceeded);
        CHECK(std::string(e.what()).find("override_budget") != std::string::npos);
    }

    // The override unlocks the run; prompts simply exceed the nominal limit.
    cfg.override_budget = true;
    const EvalReport report = run_pipeline(cfg);
    CHECK(report.windows_total == 1);
    CHECK(report.entries.size() == 7);
    for (const WindowChannelResult& e : report.entries) CHECK_FALSE(e.failed);
}

TEST_CASE("run_pipeline: multivariate default caps at six channels") {
    const std::string dataset = write_dataset("pipe_cap.csv", 96, 8);
    PipelineConfig cfg = small_config(dataset);
    cfg.H = 12;
    cfg.refiner.input_dim = cfg.H;

    const EvalReport report = run_pipeline(cfg);
    std::set<int> channels;
    for (const WindowChannelResult& e : report.entries) channels.insert(e.channel);
    CHECK(channels == std::set<int>{0, 1, 2, 3, 4, 5});

    // Explicit selection remaps ids to 0..k-1 in selection order.
    cfg.channels = std::vector<int>{1, 3};
    const EvalReport picked = run_pipeline(cfg);
    channels.clear();
    for (const WindowChannelResult& e : picked.entries) channels.insert(e.channel);
    CHECK(channels == std::set<int>{0, 1});
}

TEST_CASE("run_pipeline: missing dataset surfaces as missing_file") {
    PipelineConfig cfg = small_config("/nonexistent/nowhere.csv");
    try {
        run_pipeline(cfg);
        FAIL("expected missing_file");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::missing_file);
    }
}

TEST_CASE("render_report: formats") {
    EvalReport empty;
    empty.config_hash = "cafe";
    empty.backend_id = "mock:persistence";
    CHECK(render_report(empty, ReportFormat::csv) ==
          "mse,mae,ks_high,mse_low,mae_low,mse_original,mae_original,"
          "window,channel,offset,f_cut,valid_rows,dropped_rows,scored_length,failed,flags\n");
    CHECK(render_report(empty, ReportFormat::plotdata) == "x,series,value\n");

    const std::string dataset = write_dataset("pipe_render.csv", 128, 2);
    const EvalReport report = run_pipeline(small_config(dataset));

    // JSON carries every per-cell value verbatim.
    const nlohmann::json j = nlohmann::json::parse(render_report(report, ReportFormat::json));
    CHECK(j.at("schema_version") == 1);
    CHECK(j.at("run").at("backend_id") == "mock:persistence");
    REQUIRE(j.at("windows").size() == report.entries.size());
    for (std::size_t i = 0; i < report.entries.size(); ++i) {
        const nlohmann::json& w = j.at("windows").at(i);
        CHECK(w.at("channel").get<int>() == report.entries[i].channel);
        CHECK(w.at("mse").get<double>() == report.entries[i].mse);
        CHECK(w.at("valid_rows").get<std::size_t>() == report.entries[i].valid_rows);
    }
    REQUIRE(j.at("aggregates").size() == report.aggregates.size());
    CHECK(j.at("aggregates").back().at("scope") == "overall");

    // CSV: one data line per entry; plotdata: one line per entry per metric.
    const std::string csv = render_report(report, ReportFormat::csv);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == report.entries.size() + 1);
    const std::string plot = render_report(report, ReportFormat::plotdata);
    CHECK(std::count(plot.begin(), plot.end(), '\n') ==
          report.entries.size() * 7 + 1);
    CHECK(plot.find("mse/ch0,") != std::string::npos);

    try {
        report_format_from_name("yaml");
        FAIL("expected config_error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::config_error);
    }
}

TEST_CASE("write_report_files: emits all three artifacts") {
    const std::string dataset = write_dataset("pipe_files.csv", 128, 1);
    PipelineConfig cfg = small_config(dataset);
    cfg.out_dir = unique_dir("pipe_files_out");

    const EvalReport report = run_pipeline(cfg);
    const std::filesystem::path dir(cfg.out_dir);
    for (const char* name : {"report.json", "report.csv", "report_plotdata.csv"}) {
        CAPTURE(name);
        CHECK(std::filesystem::exists(dir / name));
    }
    // out_dir also hosts the default prompt cache.
    CHECK(std::filesystem::exists(dir / "cache.jsonl"));

    std::ifstream in(dir / "report.json");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(text == render_report(report, ReportFormat::json));
}

TEST_CASE("compute_aggregates: hand-checked means and failed-cell exclusion") {
    WindowChannelResult a;
    a.channel = 0;
    a.mse = 1.0;
    WindowChannelResult b;
    b.channel = 0;
    b.mse = 3.0;
    WindowChannelResult failed;
    failed.channel = 0;
    failed.failed = true;
    failed.mse = 1e9;

    const std::vector<AggregateRow> rows = compute_aggregates({a, b, failed});
    REQUIRE(!rows.empty());
    CHECK(rows.front().scope == "channel:0");
    CHECK(rows.front().metric == "mse");
    CHECK(rows.front().mean == 2.0);
    CHECK(rows.front().stddev == 1.0);
    CHECK(rows.front().count == 2);

    CHECK(compute_aggregates({}).empty());
}
