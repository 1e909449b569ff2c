#pragma once
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "llmpred/backend.hpp"
#include "llmpred/decompose.hpp"
#include "llmpred/refiner.hpp"
#include "llmpred/series.hpp"
#include "llmpred/tokens.hpp"

namespace llmpred {

// Fully-resolved run description. Defaults follow the library conventions:
// H=48 with stride=H, alpha=0.7, the 2.5..15 Hz grid, per_char counting with
// a 4096-token limit, temperature 1.0 / top_p 0.9, and at most the first six
// channels of a multivariate file.
struct PipelineConfig {
    std::string dataset_path;
    std::optional<std::vector<int>> channels; // absent: first min(6, C) features
    std::size_t H = 48;
    std::size_t stride = 0; // 0 means H (non-overlapping targets)
    double alpha = 0.7;
    std::vector<double> grid = default_cutoff_grid();
    double sample_rate_hz = 100.0;
    int filter_order = 4;
    bool zero_phase = true;
    int decimals = 2;
    TokenScheme scheme;
    GenParams gen;
    RefinerConfig refiner;               // input_dim is forced to H on resolve
    double refiner_train_fraction = 0.5; // leading share of windows used for pairs
    std::uint64_t seed = 0;
    std::string backend_selector = "mock:persistence"; // or openai-compatible:<url>
    std::string model;                                 // remote model name
    std::string api_key_env = "LLMPRED_API_KEY";
    bool override_budget = false;
    std::string out_dir;     // report/cache destination; empty: no files
    std::string cache_path;  // empty: <out_dir>/cache.jsonl when out_dir set
};

// Parses a config JSON object, applying defaults and validating every field
// (ConfigError names the offending field). Flags like H/alpha/seed live at
// the top level; see README for the schema.
PipelineConfig config_from_json(const std::string& json_text);

// Canonical resolved-config JSON (alphabetical keys) and its SHA-256.
std::string config_to_json(const PipelineConfig& cfg);
std::string config_hash(const PipelineConfig& cfg);

// Builds the backend stack described by backend_selector, wrapping it in a
// JSONL cache when a cache path applies.
std::shared_ptr<Backend> make_backend(const PipelineConfig& cfg);

// One scored (window, channel) cell of the evaluation. Metrics are computed
// in channel-normalized space (history max-abs scale); *_original carries
// the same metrics mapped back to input units.
struct WindowChannelResult {
    std::size_t window_index = 0;
    std::size_t offset = 0;
    int channel = 0;
    bool failed = false;
    std::string failure; // error code name + message when failed
    double f_cut = 0.0;
    std::size_t valid_rows = 0;   // min over the two component streams
    std::size_t dropped_rows = 0; // summed over the two component streams
    std::size_t scored_length = 0;
    double mse = 0.0;
    double mae = 0.0;
    double ks_high = 0.0;
    double mse_low = 0.0;
    double mae_low = 0.0;
    double mse_original = 0.0;
    double mae_original = 0.0;
    std::vector<std::string> flags;
};

struct AggregateRow {
    std::string scope;  // "overall" or "channel:<id>"
    std::string metric; // "mse", "mae", ...
    double mean = 0.0;
    double stddev = 0.0; // population convention
    std::size_t count = 0;
};

struct EvalReport {
    int schema_version = 1;
    std::string config_hash;
    std::string backend_id;
    std::uint64_t seed = 0;
    std::string dataset_path;
    std::size_t H = 0;
    double alpha = 0.0;
    std::size_t windows_total = 0;
    std::size_t windows_refiner_train = 0;
    std::size_t windows_eval = 0;
    std::size_t window_cells_failed = 0;
    std::size_t cache_hits = 0;
    std::size_t cache_misses = 0;
    std::size_t generate_calls = 0;
    double latency_total_ms = 0.0;
    double latency_mean_ms = 0.0;
    double latency_min_ms = 0.0;
    double latency_max_ms = 0.0;
    bool refiner_trained = false;
    std::size_t refiner_pairs = 0;
    double refiner_initial_val_loss = 0.0;
    double refiner_final_val_loss = 0.0;
    std::vector<WindowChannelResult> entries;
    std::vector<AggregateRow> aggregates;
};

// Recomputes mean/stddev rows from scored entries; run_pipeline stores
// exactly this, so consumers can verify aggregate consistency.
std::vector<AggregateRow> compute_aggregates(const std::vector<WindowChannelResult>& entries);

// Runs the full flow: window split, per-channel decomposition, prompting,
// generation, parsing, refinement, moment matching, recombination, metrics.
// Window-level failures are recorded and skipped, never fatal. The overload
// without a backend builds one from the config (including the cache layer).
EvalReport run_pipeline(const PipelineConfig& cfg);
EvalReport run_pipeline(const PipelineConfig& cfg, Backend& backend,
                        const CachingBackend* cache_stats = nullptr);

enum class ReportFormat { json, csv, plotdata };

ReportFormat report_format_from_name(const std::string& name); // throws ConfigError

// Renders the report: json (full structure), csv (one row per window/channel
// with metric columns), plotdata (tidy x,series,value rows).
std::string render_report(const EvalReport& report, ReportFormat format);

// Writes report.json, report.csv, and report_plotdata.csv into out_dir
// (created if missing). Throws IoError.
void write_report_files(const EvalReport& report, const std::string& out_dir);

} // namespace llmpred
