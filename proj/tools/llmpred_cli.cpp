// Command-line driver. Everything goes through the public C interface in
// llmpred.h; this translation unit never touches the C++ core directly.
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "llmpred.h"

namespace {

using nlohmann::json;

// Owns a char* returned by the library.
struct CString {
    char* p = nullptr;
    ~CString() { llmpred_string_free(p); }
    CString() = default;
    CString(const CString&) = delete;
    CString& operator=(const CString&) = delete;
};

struct DatasetHandle {
    llmpred_dataset* p = nullptr;
    ~DatasetHandle() { llmpred_dataset_free(p); }
};

// Exit code contract: 1 = configuration, 2 = file/dataset, 3 = runtime.
int exit_code_for(llmpred_status st) {
    switch (st) {
        case LLMPRED_E_CONFIG_ERROR: return 1;
        case LLMPRED_E_MISSING_FILE:
        case LLMPRED_E_PARSE_ERROR:
        case LLMPRED_E_EMPTY_DATASET:
        case LLMPRED_E_IO_ERROR: return 2;
        default: return 3;
    }
}

// Single-line, machine-greppable error: "error[<Code>]: <message>".
[[noreturn]] void fail(llmpred_status st) {
    std::fprintf(stderr, "error[%s]: %s\n", llmpred_status_name(st), llmpred_last_error());
    std::exit(exit_code_for(st));
}

[[noreturn]] void fail_config(const std::string& message) {
    std::fprintf(stderr, "error[ConfigError]: %s\n", message.c_str());
    std::exit(1);
}

[[noreturn]] void fail_missing_file(const std::string& path) {
    std::fprintf(stderr, "error[MissingFile]: cannot open %s\n", path.c_str());
    std::exit(2);
}

void check(llmpred_status st) {
    if (st != LLMPRED_OK) fail(st);
}

// "0.4..0.8" -> {0.4, 0.5, 0.6, 0.7, 0.8} (fixed 0.1 step).
std::vector<double> parse_alpha_sweep(const std::string& text) {
    const std::size_t pos = text.find("..");
    if (pos == std::string::npos) fail_config("--alpha-sweep expects <from>..<to>, e.g. 0.4..0.8");
    double from = 0.0, to = 0.0;
    try {
        from = std::stod(text.substr(0, pos));
        to = std::stod(text.substr(pos + 2));
    } catch (const std::exception&) {
        fail_config("--alpha-sweep bounds must be numbers, got \"" + text + "\"");
    }
    if (to < from) fail_config("--alpha-sweep upper bound below lower bound");
    const int steps = static_cast<int>(std::lround((to - from) / 0.1));
    std::vector<double> alphas;
    for (int i = 0; i <= steps; ++i) alphas.push_back(from + 0.1 * i);
    return alphas;
}

// "1..10" -> {1, ..., 10}; plain "4" -> {4}.
std::vector<std::size_t> parse_count_range(const std::string& text) {
    const std::size_t pos = text.find("..");
    try {
        if (pos == std::string::npos) {
            return {static_cast<std::size_t>(std::stoull(text))};
        }
        const std::size_t from = std::stoull(text.substr(0, pos));
        const std::size_t to = std::stoull(text.substr(pos + 2));
        if (from < 1 || to < from) throw std::invalid_argument("range");
        std::vector<std::size_t> out;
        for (std::size_t c = from; c <= to; ++c) out.push_back(c);
        return out;
    } catch (const std::exception&) {
        fail_config("--c expects <n> or <from>..<to> with from >= 1, got \"" + text + "\"");
    }
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail_missing_file(path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out || !(out << content)) {
        std::fprintf(stderr, "error[IoError]: cannot write %s\n", path.c_str());
        std::exit(2);
    }
}

// Shared pipeline flags (forecast/evaluate). Optionals that stay empty leave
// the config-file value (or library default) in place.
struct PipelineFlags {
    std::string config_path;
    std::string dataset;
    std::vector<int> channels;
    std::optional<double> alpha;
    std::optional<std::size_t> h;
    std::string backend;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    bool override_budget = false;
    bool print_config = false;
};

void add_pipeline_flags(CLI::App& cmd, PipelineFlags& f) {
    cmd.add_option("--config", f.config_path, "Config JSON file; flags override its values");
    cmd.add_option("--dataset", f.dataset, "Dataset CSV path");
    cmd.add_option("--channel", f.channels, "Feature column index (repeatable)");
    cmd.add_option("--alpha", f.alpha, "Cutoff-metric weight in [0,1]");
    cmd.add_option("--h", f.h, "Forecast horizon (history length matches)");
    cmd.add_option("--backend", f.backend, "mock:<mode> or openai-compatible:<url>");
    cmd.add_option("--seed", f.seed, "Run seed (mock generation, refiner init)");
    cmd.add_option("--out-dir", f.out_dir, "Directory for report/cache files");
    cmd.add_flag("--override-budget", f.override_budget, "Run even if the token budget fails");
    cmd.add_flag("--print-config", f.print_config, "Print the resolved config and exit");
}

// Builds the effective config JSON: file values first, then flag overrides.
std::string build_config_json(const PipelineFlags& f) {
    json cfg = json::object();
    if (!f.config_path.empty()) {
        const std::string text = read_text_file(f.config_path);
        cfg = json::parse(text, nullptr, false);
        if (cfg.is_discarded() || !cfg.is_object()) {
            fail_config("config file " + f.config_path + " is not a JSON object");
        }
    }
    if (!f.dataset.empty()) cfg["dataset"] = f.dataset;
    if (!f.channels.empty()) cfg["channels"] = f.channels;
    if (f.alpha) cfg["alpha"] = *f.alpha;
    if (f.h) cfg["h"] = *f.h;
    if (!f.backend.empty()) cfg["backend"] = f.backend;
    if (f.seed) cfg["seed"] = *f.seed;
    if (!f.out_dir.empty()) cfg["out_dir"] = f.out_dir;
    if (f.override_budget) cfg["override_budget"] = true;
    return cfg.dump();
}

int run_pipeline_command(const PipelineFlags& flags, bool print_aggregates) {
    const std::string config_json = build_config_json(flags);
    if (flags.print_config) {
        CString resolved;
        check(llmpred_config_resolve(config_json.c_str(), &resolved.p));
        std::printf("%s\n", resolved.p);
        return 0;
    }
    CString report_text;
    check(llmpred_run(config_json.c_str(), &report_text.p));

    const json report = json::parse(report_text.p);
    const json& run = report.at("run");
    if (print_aggregates) {
        std::printf("%-12s %-14s %14s %14s %7s\n", "scope", "metric", "mean", "stddev", "count");
        for (const json& row : report.at("aggregates")) {
            std::printf("%-12s %-14s %14.6g %14.6g %7zu\n",
                        row.at("scope").get<std::string>().c_str(),
                        row.at("metric").get<std::string>().c_str(),
                        row.at("mean").get<double>(), row.at("stddev").get<double>(),
                        row.at("count").get<std::size_t>());
        }
        const json& windows = run.at("windows");
        std::printf("windows: %zu total, %zu eval, %zu cells failed; cache hits %zu misses %zu\n",
                    windows.at("total").get<std::size_t>(), windows.at("eval").get<std::size_t>(),
                    windows.at("cells_failed").get<std::size_t>(),
                    run.at("cache").at("hits").get<std::size_t>(),
                    run.at("cache").at("misses").get<std::size_t>());
    } else {
        std::printf("%s", report_text.p);
    }
    return 0;
}

int cmd_decompose(const std::string& dataset, std::optional<int> channel, double alpha,
                  const std::string& alpha_sweep, const std::string& out_dir) {
    DatasetHandle ds;
    check(llmpred_dataset_load_csv(dataset.c_str(), nullptr, 0, &ds.p));

    std::vector<std::size_t> indices;
    if (channel) {
        indices.push_back(static_cast<std::size_t>(*channel));
    } else {
        for (std::size_t i = 0; i < llmpred_dataset_channel_count(ds.p); ++i) indices.push_back(i);
    }

    const std::vector<double> grid = {2.5, 5.0, 7.5, 10.0, 12.5, 15.0};
    auto split_channel = [&](std::size_t index, double a) {
        const double* values = nullptr;
        size_t length = 0;
        int channel_id = 0;
        check(llmpred_dataset_channel(ds.p, index, &values, &length, &channel_id));
        CString text;
        check(llmpred_select_cutoff(values, length, grid.data(), grid.size(), a, 100.0, 4,
                                    &text.p));
        json j = json::parse(text.p);
        j["channel"] = channel_id;
        return j;
    };

    json out = json::object();
    out["channels"] = json::array();
    for (std::size_t index : indices) out["channels"].push_back(split_channel(index, alpha));

    // Optional per-alpha trace table: one row per (alpha, channel, grid f).
    std::string sweep_csv;
    if (!alpha_sweep.empty()) {
        sweep_csv = "alpha,channel,f,m_mse,m_cos,m,skipped,selected\n";
        for (double a : parse_alpha_sweep(alpha_sweep)) {
            for (std::size_t index : indices) {
                const json j = split_channel(index, a);
                const double f_cut = j.at("f_cut").get<double>();
                for (const json& t : j.at("trace")) {
                    const double f = t.at("f").get<double>();
                    char line[256];
                    std::snprintf(line, sizeof(line), "%.3g,%d,%.17g,%.17g,%.17g,%s,%d,%d\n", a,
                                  j.at("channel").get<int>(), f, t.at("m_mse").get<double>(),
                                  t.at("m_cos").get<double>(),
                                  t.at("m").is_null() ? "" : t.at("m").dump().c_str(),
                                  t.at("skipped").get<bool>() ? 1 : 0, f == f_cut ? 1 : 0);
                    sweep_csv += line;
                }
            }
        }
        out["alpha_sweep_rows"] = sweep_csv;
    }

    if (!out_dir.empty()) {
        std::error_code ec;
        std::filesystem::create_directories(out_dir, ec);
        if (ec) {
            std::fprintf(stderr, "error[IoError]: cannot create %s\n", out_dir.c_str());
            return 2;
        }
        write_text_file(out_dir + "/decompose.json", out.dump(2) + "\n");
        if (!sweep_csv.empty()) write_text_file(out_dir + "/alpha_sweep.csv", sweep_csv);
    }
    std::printf("%s\n", out.dump(2).c_str());
    return 0;
}

int cmd_budget(std::size_t h, const std::string& c_range, const std::string& scheme, int limit,
               int decimals) {
    // Tidy x/series/value rows so the table plots directly.
    std::printf("x,series,value\n");
    for (std::size_t c : parse_count_range(c_range)) {
        CString text;
        check(llmpred_budget(h, c, scheme.c_str(), limit, decimals, &text.p));
        const json j = json::parse(text.p);
        std::printf("%zu,input_tokens,%lld\n", c, j.at("input_tokens").get<long long>());
        std::printf("%zu,output_tokens,%lld\n", c, j.at("output_tokens").get<long long>());
        std::printf("%zu,total,%lld\n", c, j.at("total").get<long long>());
        std::printf("%zu,feasible,%d\n", c, j.at("feasible").get<bool>() ? 1 : 0);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Zero-shot time-series forecasting via text-prompted language models"};
    app.require_subcommand(1);
    // --h is the horizon flag, so help stays long-form only.
    app.set_help_flag("--help", "Print help and exit");

    // decompose
    std::string dec_dataset, dec_sweep, dec_out_dir;
    std::optional<int> dec_channel;
    double dec_alpha = 0.7;
    CLI::App* dec = app.add_subcommand("decompose", "Split channels at the selected cutoff");
    dec->add_option("--dataset", dec_dataset, "Dataset CSV path")->required();
    dec->add_option("--channel", dec_channel, "Single feature column (default: all)");
    dec->add_option("--alpha", dec_alpha, "Cutoff-metric weight in [0,1]");
    dec->add_option("--alpha-sweep", dec_sweep, "Trace table over <from>..<to> (0.1 steps)");
    dec->add_option("--out-dir", dec_out_dir, "Write decompose.json / alpha_sweep.csv here");

    // budget
    std::size_t bud_h = 48;
    std::string bud_c = "1..10", bud_scheme = "per_char";
    int bud_limit = 4096, bud_decimals = 2;
    CLI::App* bud = app.add_subcommand("budget", "Token-budget feasibility table");
    bud->set_help_flag("--help", "Print help and exit");
    bud->add_option("--h", bud_h, "Forecast horizon");
    bud->add_option("--c", bud_c, "Feature count or range, e.g. 1..10");
    bud->add_option("--scheme", bud_scheme, "per_char or bpe_grouped");
    bud->add_option("--limit", bud_limit, "Context limit in tokens");
    bud->add_option("--decimals", bud_decimals, "Encoded decimal places (1 or 2)");

    // forecast / evaluate
    PipelineFlags fc_flags, ev_flags;
    CLI::App* fc = app.add_subcommand("forecast", "Run the pipeline; print the report JSON");
    fc->set_help_flag("--help", "Print help and exit");
    add_pipeline_flags(*fc, fc_flags);
    CLI::App* ev = app.add_subcommand("evaluate", "Run the pipeline; print the aggregate table");
    ev->set_help_flag("--help", "Print help and exit");
    add_pipeline_flags(*ev, ev_flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help
        std::fprintf(stderr, "error[ConfigError]: %s\n", e.what());
        return 1;
    }

    if (dec->parsed()) return cmd_decompose(dec_dataset, dec_channel, dec_alpha, dec_sweep, dec_out_dir);
    if (bud->parsed()) return cmd_budget(bud_h, bud_c, bud_scheme, bud_limit, bud_decimals);
    if (fc->parsed()) return run_pipeline_command(fc_flags, false);
    return run_pipeline_command(ev_flags, true);
}
