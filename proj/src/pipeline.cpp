#include "llmpred/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <string>

#include <json.hpp>

#include "digest.hpp"
#include "llmpred/codec.hpp"
#include "llmpred/csv.hpp"
#include "llmpred/errors.hpp"
#include "llmpred/metrics.hpp"
#include "llmpred/postprocess.hpp"

namespace llmpred {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

// --------------------------------------------------------------------------
// Config parsing

[[noreturn]] void config_fail(const std::string& field, const std::string& reason) {
    throw Error(ErrorCode::config_error, "config field \"" + field + "\": " + reason);
}

template <typename T>
T get_field(const json& j, const std::string& field, T fallback) {
    if (!j.contains(field)) return fallback;
    try {
        return j.at(field).get<T>();
    } catch (const json::exception&) {
        config_fail(field, "wrong type");
    }
}

const std::set<std::string>& known_top_level_keys() {
    static const std::set<std::string> keys = {
        "dataset",      "channels",     "h",
        "stride",       "alpha",        "grid",
        "sample_rate_hz", "filter_order", "zero_phase",
        "decimals",     "token_scheme", "context_limit",
        "temperature",  "top_p",        "do_sample",
        "refiner",      "refiner_train_fraction", "seed",
        "backend",      "model",        "api_key_env",
        "override_budget", "out_dir",   "cache_path",
    };
    return keys;
}

const std::set<std::string>& known_refiner_keys() {
    static const std::set<std::string> keys = {
        "hidden_widths", "batch_norm", "learning_rate", "batch_size",
        "epochs",        "train_split", "bn_momentum",  "bn_epsilon",
    };
    return keys;
}

} // namespace

PipelineConfig config_from_json(const std::string& json_text) {
    json j = json::parse(json_text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw Error(ErrorCode::config_error, "config is not a JSON object");
    }
    for (const auto& [key, value] : j.items()) {
        if (known_top_level_keys().count(key) == 0) {
            config_fail(key, "unknown field");
        }
    }

    PipelineConfig cfg;
    cfg.dataset_path = get_field<std::string>(j, "dataset", "");
    // null is the resolved-config spelling of "absent", so the printed config
    // round-trips through the parser.
    if (j.contains("channels") && !j.at("channels").is_null()) {
        cfg.channels = get_field<std::vector<int>>(j, "channels", {});
        if (cfg.channels->empty()) config_fail("channels", "must list at least one channel");
    }
    const long long h = get_field<long long>(j, "h", 48);
    if (h < 1) config_fail("h", "must be >= 1");
    cfg.H = static_cast<std::size_t>(h);
    const long long stride = get_field<long long>(j, "stride", 0);
    if (stride < 0) config_fail("stride", "must be >= 0 (0 means H)");
    cfg.stride = static_cast<std::size_t>(stride);
    cfg.alpha = get_field<double>(j, "alpha", 0.7);
    if (!(cfg.alpha >= 0.0 && cfg.alpha <= 1.0)) config_fail("alpha", "must lie in [0, 1]");
    cfg.grid = get_field<std::vector<double>>(j, "grid", default_cutoff_grid());
    if (cfg.grid.empty()) config_fail("grid", "must list at least one frequency");
    cfg.sample_rate_hz = get_field<double>(j, "sample_rate_hz", 100.0);
    if (!(cfg.sample_rate_hz > 0.0)) config_fail("sample_rate_hz", "must be positive");
    for (double f : cfg.grid) {
        if (!(f > 0.0) || !(f < cfg.sample_rate_hz / 2.0)) {
            config_fail("grid", "frequency " + std::to_string(f) +
                                    " outside (0, sample_rate/2)");
        }
    }
    cfg.filter_order = get_field<int>(j, "filter_order", 4);
    if (cfg.filter_order < 1) config_fail("filter_order", "must be >= 1");
    cfg.zero_phase = get_field<bool>(j, "zero_phase", true);
    cfg.decimals = get_field<int>(j, "decimals", 2);
    if (cfg.decimals != 1 && cfg.decimals != 2) config_fail("decimals", "must be 1 or 2");

    const std::string scheme = get_field<std::string>(j, "token_scheme", "per_char");
    try {
        cfg.scheme.kind = token_kind_from_name(scheme);
    } catch (const Error&) {
        config_fail("token_scheme", "expected per_char or bpe_grouped, got \"" + scheme + "\"");
    }
    cfg.scheme.context_limit = get_field<int>(j, "context_limit", 4096);
    if (cfg.scheme.context_limit < 1) config_fail("context_limit", "must be >= 1");

    cfg.gen.temperature = get_field<double>(j, "temperature", 1.0);
    if (!(cfg.gen.temperature >= 0.0)) config_fail("temperature", "must be >= 0");
    cfg.gen.top_p = get_field<double>(j, "top_p", 0.9);
    if (!(cfg.gen.top_p > 0.0 && cfg.gen.top_p <= 1.0)) config_fail("top_p", "must lie in (0, 1]");
    cfg.gen.do_sample = get_field<bool>(j, "do_sample", true);

    if (j.contains("refiner")) {
        const json& r = j.at("refiner");
        if (!r.is_object()) config_fail("refiner", "must be an object");
        for (const auto& [key, value] : r.items()) {
            if (known_refiner_keys().count(key) == 0) config_fail("refiner." + key, "unknown field");
        }
        cfg.refiner.hidden_widths = get_field<std::vector<std::size_t>>(
            r, "hidden_widths", cfg.refiner.hidden_widths);
        if (cfg.refiner.hidden_widths.empty()) {
            config_fail("refiner.hidden_widths", "must list at least one width");
        }
        cfg.refiner.batch_norm = get_field<bool>(r, "batch_norm", true);
        cfg.refiner.learning_rate = get_field<double>(r, "learning_rate", 1e-4);
        if (!(cfg.refiner.learning_rate > 0.0)) {
            config_fail("refiner.learning_rate", "must be positive");
        }
        const long long bs = get_field<long long>(r, "batch_size", 32);
        if (bs < 1) config_fail("refiner.batch_size", "must be >= 1");
        cfg.refiner.batch_size = static_cast<std::size_t>(bs);
        const long long epochs = get_field<long long>(r, "epochs", 32);
        if (epochs < 1) config_fail("refiner.epochs", "must be >= 1");
        cfg.refiner.epochs = static_cast<std::size_t>(epochs);
        cfg.refiner.train_split = get_field<double>(r, "train_split", 0.7);
        if (!(cfg.refiner.train_split > 0.0 && cfg.refiner.train_split < 1.0)) {
            config_fail("refiner.train_split", "must lie in (0, 1)");
        }
        cfg.refiner.bn_momentum = get_field<double>(r, "bn_momentum", 0.1);
        if (!(cfg.refiner.bn_momentum > 0.0 && cfg.refiner.bn_momentum < 1.0)) {
            config_fail("refiner.bn_momentum", "must lie in (0, 1)");
        }
        cfg.refiner.bn_epsilon = get_field<double>(r, "bn_epsilon", 1e-5);
        if (!(cfg.refiner.bn_epsilon > 0.0)) config_fail("refiner.bn_epsilon", "must be positive");
    }

    cfg.refiner_train_fraction = get_field<double>(j, "refiner_train_fraction", 0.5);
    if (!(cfg.refiner_train_fraction >= 0.0 && cfg.refiner_train_fraction < 1.0)) {
        config_fail("refiner_train_fraction", "must lie in [0, 1)");
    }
    cfg.seed = get_field<std::uint64_t>(j, "seed", 0);
    cfg.backend_selector = get_field<std::string>(j, "backend", "mock:persistence");
    cfg.model = get_field<std::string>(j, "model", "");
    cfg.api_key_env = get_field<std::string>(j, "api_key_env", "LLMPRED_API_KEY");
    cfg.override_budget = get_field<bool>(j, "override_budget", false);
    cfg.out_dir = get_field<std::string>(j, "out_dir", "");
    cfg.cache_path = get_field<std::string>(j, "cache_path", "");

    // Derived invariants.
    cfg.refiner.input_dim = cfg.H;
    cfg.refiner.seed = cfg.seed;
    cfg.gen.seed = cfg.seed;
    return cfg;
}

std::string config_to_json(const PipelineConfig& cfg) {
    json j = {
        {"dataset", cfg.dataset_path},
        {"h", cfg.H},
        {"stride", cfg.stride == 0 ? cfg.H : cfg.stride},
        {"alpha", cfg.alpha},
        {"grid", cfg.grid},
        {"sample_rate_hz", cfg.sample_rate_hz},
        {"filter_order", cfg.filter_order},
        {"zero_phase", cfg.zero_phase},
        {"decimals", cfg.decimals},
        {"token_scheme", token_kind_name(cfg.scheme.kind)},
        {"context_limit", cfg.scheme.context_limit},
        {"temperature", cfg.gen.temperature},
        {"top_p", cfg.gen.top_p},
        {"do_sample", cfg.gen.do_sample},
        {"refiner",
         {{"hidden_widths", cfg.refiner.hidden_widths},
          {"batch_norm", cfg.refiner.batch_norm},
          {"learning_rate", cfg.refiner.learning_rate},
          {"batch_size", cfg.refiner.batch_size},
          {"epochs", cfg.refiner.epochs},
          {"train_split", cfg.refiner.train_split},
          {"bn_momentum", cfg.refiner.bn_momentum},
          {"bn_epsilon", cfg.refiner.bn_epsilon}}},
        {"refiner_train_fraction", cfg.refiner_train_fraction},
        {"seed", cfg.seed},
        {"backend", cfg.backend_selector},
        {"model", cfg.model},
        {"api_key_env", cfg.api_key_env},
        {"override_budget", cfg.override_budget},
        {"out_dir", cfg.out_dir},
        {"cache_path", cfg.cache_path},
    };
    if (cfg.channels) {
        j["channels"] = *cfg.channels;
    } else {
        j["channels"] = nullptr;
    }
    return j.dump(2);
}

std::string config_hash(const PipelineConfig& cfg) {
    // Identify the experiment, not its storage: two runs that differ only in
    // where they write reports/cache share a hash (and thus compare equal).
    PipelineConfig semantic = cfg;
    semantic.out_dir.clear();
    semantic.cache_path.clear();
    return sha256_hex(config_to_json(semantic));
}

std::shared_ptr<Backend> make_backend(const PipelineConfig& cfg) {
    const std::string& sel = cfg.backend_selector;
    std::shared_ptr<Backend> inner;
    if (sel.rfind("mock:", 0) == 0) {
        inner = std::make_shared<MockBackend>(mock_mode_from_name(sel.substr(5)));
    } else if (sel.rfind("openai-compatible:", 0) == 0) {
        HttpBackendConfig http;
        http.base_url = sel.substr(std::string("openai-compatible:").size());
        http.model = cfg.model;
        http.api_key_env = cfg.api_key_env;
        inner = std::make_shared<HttpBackend>(std::move(http));
    } else {
        throw Error(ErrorCode::config_error,
                    "config field \"backend\": expected mock:<mode> or openai-compatible:<url>, "
                    "got \"" + sel + "\"");
    }

    std::string cache_path = cfg.cache_path;
    if (cache_path.empty() && !cfg.out_dir.empty()) {
        cache_path = (std::filesystem::path(cfg.out_dir) / "cache.jsonl").string();
    }
    if (cache_path.empty()) return inner;

    const std::filesystem::path parent = std::filesystem::path(cache_path).parent_path();
    if (!parent.empty()) {
        std::error_code ec;
        std::filesystem::create_directories(parent, ec);
        if (ec) {
            throw Error(ErrorCode::io_error,
                        "cannot create cache directory " + parent.string() + ": " + ec.message());
        }
    }
    return std::make_shared<CachingBackend>(std::move(inner), std::move(cache_path));
}

// --------------------------------------------------------------------------
// Pipeline internals

namespace {

// Everything extracted from one (window, channel) before scoring.
struct CellOutcome {
    int channel = 0;
    bool failed = false;
    std::string failure;
    std::vector<std::string> flags;
    double scale = 1.0;
    double f_cut = 0.0;
    std::vector<double> predicted_low;  // channel-normalized, length R_low
    std::vector<double> predicted_high; // channel-normalized, length R_high
    std::size_t dropped_low = 0;
    std::size_t dropped_high = 0;
    std::vector<double> truth_norm;  // length H
    std::vector<double> truth_low;   // length H
    std::vector<double> truth_high;  // length H
    std::vector<double> hist_high;   // length H, for moment matching
    std::vector<double> target_original; // length H
};

struct WindowOutcome {
    std::size_t window_index = 0;
    std::size_t offset = 0;
    std::vector<CellOutcome> cells;
};

std::string describe(const Error& e) {
    return std::string(e.code_name()) + ": " + e.what();
}

// Normalization that treats an all-zero component as scale 1 instead of an
// error: a zero low or high component is a legitimate decomposition result.
std::pair<std::vector<double>, double> component_normalize(const std::vector<double>& v) {
    double scale = 0.0;
    for (double x : v) scale = std::max(scale, std::fabs(x));
    if (scale == 0.0) return {v, 1.0};
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / scale;
    return {std::move(out), scale};
}

WindowOutcome process_window(const PipelineConfig& cfg, const Window& window,
                             std::size_t window_index, Backend& backend,
                             std::vector<double>& latencies, std::size_t& generate_calls) {
    WindowOutcome out;
    out.window_index = window_index;
    out.offset = window.offset;

    const std::size_t C = window.history.channel_count();
    const std::size_t H = cfg.H;

    FilterSpec base_spec;
    base_spec.sample_rate_hz = cfg.sample_rate_hz;
    base_spec.order = cfg.filter_order;
    base_spec.zero_phase = cfg.zero_phase;

    // Per-channel decomposition working state, kept only for channels whose
    // preparation succeeded.
    struct Prep {
        std::size_t cell = 0; // index into out.cells
        double low_scale = 1.0;
        double high_scale = 1.0;
        std::vector<double> low_body;  // [-1,1], prompt payload
        std::vector<double> high_body; // [-1,1]
    };
    std::vector<Prep> preps;

    for (std::size_t ch = 0; ch < C; ++ch) {
        CellOutcome cell;
        cell.channel = window.history.channels[ch].channel_id;
        cell.target_original = window.target.channels[ch].values;
        try {
            auto [hist_norm, norm_state] = max_normalize(window.history.channels[ch]);
            cell.scale = norm_state.scale;
            cell.truth_norm.resize(H);
            for (std::size_t t = 0; t < H; ++t) {
                cell.truth_norm[t] = window.target.channels[ch].values[t] / cell.scale;
            }

            Series hist_low, hist_high;
            try {
                FrequencySplit split = select_cutoff(hist_norm, cfg.grid, cfg.alpha, base_spec);
                cell.f_cut = split.f_cut;
                hist_low = std::move(split.low);
                hist_high = std::move(split.high);
            } catch (const Error& e) {
                if (e.code() != ErrorCode::all_candidates_degenerate) throw;
                // Constant-like window: treat the whole signal as trend.
                cell.flags.push_back("decomposition_degenerate");
                cell.f_cut = cfg.grid.front();
                hist_low = hist_norm;
                hist_high.channel_id = hist_norm.channel_id;
                hist_high.values.assign(H, 0.0);
            }
            cell.hist_high = hist_high.values;

            // Ground-truth components at the cutoff chosen from history.
            FilterSpec truth_spec = base_spec;
            truth_spec.cutoff_hz = cell.f_cut;
            Series truth_norm_series;
            truth_norm_series.channel_id = hist_norm.channel_id;
            truth_norm_series.values = cell.truth_norm;
            auto [truth_low, truth_high] = decompose_at(truth_norm_series, truth_spec);
            cell.truth_low = std::move(truth_low.values);
            cell.truth_high = std::move(truth_high.values);

            // The components can leave [-1, 1] (the filter may overshoot and
            // high = s - low can reach 2), so each is re-normalized for the
            // text codec and un-scaled after parsing.
            Prep prep;
            prep.cell = out.cells.size();
            auto [low_body, low_scale] = component_normalize(hist_low.values);
            auto [high_body, high_scale] = component_normalize(hist_high.values);
            prep.low_body = std::move(low_body);
            prep.low_scale = low_scale;
            prep.high_body = std::move(high_body);
            prep.high_scale = high_scale;
            preps.push_back(std::move(prep));
        } catch (const Error& e) {
            cell.failed = true;
            cell.failure = describe(e);
        }
        out.cells.push_back(std::move(cell));
    }

    if (preps.empty()) return out; // every channel failed preparation

    // Assemble the two component prompts over the surviving channels.
    const std::vector<ChannelOffset> offsets = make_offsets(preps.size(), cfg.decimals);
    auto build_set = [&](bool low) {
        ChannelSet set;
        for (std::size_t i = 0; i < preps.size(); ++i) {
            Series s;
            s.channel_id = static_cast<int>(i);
            s.values = low ? preps[i].low_body : preps[i].high_body;
            set.channels.push_back(std::move(s));
        }
        return set;
    };
    const PromptLayout layout =
        preps.size() == 1 ? PromptLayout::univariate : PromptLayout::multivariate;

    try {
        const PromptBundle low_prompt = build_prompt(build_set(true), offsets, layout);
        const PromptBundle high_prompt = build_prompt(build_set(false), offsets, layout);

        auto run_one = [&](const PromptBundle& prompt) {
            GenParams params = cfg.gen;
            params.max_tokens = static_cast<int>(count_tokens(prompt.body, cfg.scheme));
            Generation gen =
                generate_checked(backend, prompt, params, cfg.scheme, cfg.override_budget);
            latencies.push_back(gen.latency_ms);
            ++generate_calls;
            return parse_output(gen.text, prompt.expected_cols, offsets, cfg.H);
        };
        const ParseReport low_parsed = run_one(low_prompt);
        const ParseReport high_parsed = run_one(high_prompt);

        for (std::size_t i = 0; i < preps.size(); ++i) {
            CellOutcome& cell = out.cells[preps[i].cell];
            cell.dropped_low = low_parsed.dropped_rows;
            cell.dropped_high = high_parsed.dropped_rows;
            cell.predicted_low.reserve(low_parsed.valid_rows);
            for (const auto& row : low_parsed.values) {
                cell.predicted_low.push_back(row[i] * preps[i].low_scale);
            }
            cell.predicted_high.reserve(high_parsed.valid_rows);
            for (const auto& row : high_parsed.values) {
                cell.predicted_high.push_back(row[i] * preps[i].high_scale);
            }
        }
    } catch (const Error& e) {
        // Generation failed for the whole window; every surviving channel
        // inherits the failure.
        for (const Prep& prep : preps) {
            CellOutcome& cell = out.cells[prep.cell];
            cell.failed = true;
            cell.failure = describe(e);
        }
    }
    return out;
}

WindowChannelResult score_cell(const PipelineConfig& cfg, const WindowOutcome& window,
                               CellOutcome& cell, const RefinerModel* refiner) {
    WindowChannelResult res;
    res.window_index = window.window_index;
    res.offset = window.offset;
    res.channel = cell.channel;
    res.f_cut = cell.f_cut;
    res.flags = cell.flags;

    if (cell.failed) {
        res.failed = true;
        res.failure = cell.failure;
        return res;
    }

    const std::size_t R = std::min(cell.predicted_low.size(), cell.predicted_high.size());
    res.valid_rows = R;
    res.dropped_rows = cell.dropped_low + cell.dropped_high;
    res.scored_length = R;
    if (R == 0) {
        res.failed = true;
        res.failure = "ParseError: no valid output rows";
        return res;
    }
    if (R < cfg.H) res.flags.push_back("short_output");

    // Low component: refine when we have the full-length vector the model
    // expects; otherwise pass the parsed prefix through.
    std::vector<double> low = cell.predicted_low;
    if (refiner != nullptr && refiner->trained && low.size() == cfg.H) {
        low = refine_low(*refiner, low);
    } else {
        res.flags.push_back("low_unrefined");
    }
    low.resize(R);

    // High component: match moments against the history's high component.
    std::vector<double> high(cell.predicted_high.begin(), cell.predicted_high.begin() + R);
    try {
        high = gaussian_match(high, cell.hist_high);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::degenerate_prediction) throw;
        res.flags.push_back("high_match_passthrough");
    }

    const std::vector<double> recombined = recombine(low, high);

    auto prefix = [R](const std::vector<double>& v) {
        return std::vector<double>(v.begin(), v.begin() + R);
    };
    const std::vector<double> truth = prefix(cell.truth_norm);
    res.mse = mse(recombined, truth);
    res.mae = mae(recombined, truth);
    res.mse_low = mse(low, prefix(cell.truth_low));
    res.mae_low = mae(low, prefix(cell.truth_low));
    res.ks_high = ks_statistic(high, prefix(cell.truth_high));

    std::vector<double> recombined_original(R);
    for (std::size_t t = 0; t < R; ++t) recombined_original[t] = recombined[t] * cell.scale;
    res.mse_original = mse(recombined_original, prefix(cell.target_original));
    res.mae_original = mae(recombined_original, prefix(cell.target_original));
    return res;
}

const std::vector<std::string>& aggregate_metrics() {
    static const std::vector<std::string> metrics = {
        "mse", "mae", "ks_high", "mse_low", "mae_low", "mse_original", "mae_original"};
    return metrics;
}

double metric_value(const WindowChannelResult& r, const std::string& name) {
    if (name == "mse") return r.mse;
    if (name == "mae") return r.mae;
    if (name == "ks_high") return r.ks_high;
    if (name == "mse_low") return r.mse_low;
    if (name == "mae_low") return r.mae_low;
    if (name == "mse_original") return r.mse_original;
    return r.mae_original;
}

} // namespace

std::vector<AggregateRow> compute_aggregates(const std::vector<WindowChannelResult>& entries) {
    std::vector<int> channels;
    for (const WindowChannelResult& e : entries) {
        if (!e.failed && std::find(channels.begin(), channels.end(), e.channel) == channels.end()) {
            channels.push_back(e.channel);
        }
    }
    std::sort(channels.begin(), channels.end());

    std::vector<AggregateRow> rows;
    auto emit = [&](const std::string& scope, auto include) {
        for (const std::string& metric : aggregate_metrics()) {
            double sum = 0.0;
            std::size_t n = 0;
            for (const WindowChannelResult& e : entries) {
                if (e.failed || !include(e)) continue;
                sum += metric_value(e, metric);
                ++n;
            }
            if (n == 0) continue;
            const double mean = sum / static_cast<double>(n);
            double var = 0.0;
            for (const WindowChannelResult& e : entries) {
                if (e.failed || !include(e)) continue;
                const double d = metric_value(e, metric) - mean;
                var += d * d;
            }
            AggregateRow row;
            row.scope = scope;
            row.metric = metric;
            row.mean = mean;
            row.stddev = std::sqrt(var / static_cast<double>(n)); // population convention
            row.count = n;
            rows.push_back(std::move(row));
        }
    };
    for (int ch : channels) {
        emit("channel:" + std::to_string(ch),
             [ch](const WindowChannelResult& e) { return e.channel == ch; });
    }
    emit("overall", [](const WindowChannelResult&) { return true; });
    return rows;
}

EvalReport run_pipeline(const PipelineConfig& cfg) {
    std::shared_ptr<Backend> backend = make_backend(cfg);
    EvalReport report =
        run_pipeline(cfg, *backend, dynamic_cast<const CachingBackend*>(backend.get()));
    if (!cfg.out_dir.empty()) {
        write_report_files(report, cfg.out_dir);
    }
    return report;
}

EvalReport run_pipeline(const PipelineConfig& cfg, Backend& backend,
                        const CachingBackend* cache_stats) {
    if (cfg.dataset_path.empty()) {
        throw Error(ErrorCode::config_error, "config field \"dataset\": missing");
    }

    ChannelSet set = load_csv_dataset(cfg.dataset_path, cfg.channels);
    // Multivariate default: cap at the first six features to keep prompts
    // inside typical context windows.
    if (!cfg.channels && set.channel_count() > 6) {
        set.channels.resize(6);
    }

    const BudgetReport bud =
        budget(cfg.H, set.channel_count(), cfg.scheme, cfg.decimals);
    if (!bud.feasible && !cfg.override_budget) {
        throw Error(ErrorCode::budget_exceeded,
                    "worst-case prompt needs " + std::to_string(bud.total) + " tokens, limit " +
                        std::to_string(bud.limit) + "; at most " +
                        std::to_string(bud.max_feasible_features) +
                        " features fit (pass override_budget to proceed)");
    }

    const std::size_t stride = cfg.stride == 0 ? cfg.H : cfg.stride;
    const std::vector<Window> windows = split_windows(set, cfg.H, stride);

    EvalReport report;
    report.config_hash = config_hash(cfg);
    report.backend_id = backend.id();
    report.seed = cfg.seed;
    report.dataset_path = cfg.dataset_path;
    report.H = cfg.H;
    report.alpha = cfg.alpha;
    report.windows_total = windows.size();

    const std::size_t n_train = static_cast<std::size_t>(
        cfg.refiner_train_fraction * static_cast<double>(windows.size()));
    report.windows_refiner_train = n_train;
    report.windows_eval = windows.size() - n_train;

    std::vector<double> latencies;

    // Phase 1: run the leading windows through the model to harvest
    // (predicted_low, truth_low) pairs, then fit the shared refiner.
    RefinerModel refiner;
    std::vector<RefinerPair> pairs;
    for (std::size_t w = 0; w < n_train; ++w) {
        WindowOutcome outcome =
            process_window(cfg, windows[w], w, backend, latencies, report.generate_calls);
        for (CellOutcome& cell : outcome.cells) {
            if (cell.failed) continue;
            if (cell.predicted_low.size() == cfg.H) {
                pairs.emplace_back(cell.predicted_low, cell.truth_low);
            }
        }
    }
    report.refiner_pairs = pairs.size();
    RefinerConfig refiner_cfg = cfg.refiner;
    refiner_cfg.input_dim = cfg.H;
    refiner_cfg.seed = cfg.seed;
    if (pairs.size() >= 2) {
        try {
            auto [model, log] = train_refiner(pairs, refiner_cfg);
            refiner = std::move(model);
            report.refiner_trained = true;
            report.refiner_initial_val_loss = log.initial_val_loss;
            report.refiner_final_val_loss = log.final_val_loss;
        } catch (const Error&) {
            // Divergence or degenerate pairs: fall back to the identity.
            report.refiner_trained = false;
        }
    }

    // Phase 2: score the remaining windows.
    for (std::size_t w = n_train; w < windows.size(); ++w) {
        WindowOutcome outcome =
            process_window(cfg, windows[w], w, backend, latencies, report.generate_calls);
        for (CellOutcome& cell : outcome.cells) {
            WindowChannelResult res =
                score_cell(cfg, outcome, cell, report.refiner_trained ? &refiner : nullptr);
            if (res.failed) ++report.window_cells_failed;
            report.entries.push_back(std::move(res));
        }
    }

    report.aggregates = compute_aggregates(report.entries);

    if (!latencies.empty()) {
        double total = 0.0, lo = latencies.front(), hi = latencies.front();
        for (double v : latencies) {
            total += v;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        report.latency_total_ms = total;
        report.latency_mean_ms = total / static_cast<double>(latencies.size());
        report.latency_min_ms = lo;
        report.latency_max_ms = hi;
    }
    if (cache_stats != nullptr) {
        report.cache_hits = cache_stats->hits();
        report.cache_misses = cache_stats->misses();
    }
    return report;
}

// --------------------------------------------------------------------------
// Report rendering

namespace {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string join_flags(const std::vector<std::string>& flags) {
    std::string out;
    for (std::size_t i = 0; i < flags.size(); ++i) {
        if (i > 0) out += "|";
        out += flags[i];
    }
    return out;
}

ordered_json report_json(const EvalReport& report) {
    ordered_json j;
    j["schema_version"] = report.schema_version;
    j["run"] = {
        {"config_hash", report.config_hash},
        {"backend_id", report.backend_id},
        {"seed", report.seed},
        {"dataset", report.dataset_path},
        {"h", report.H},
        {"alpha", report.alpha},
        {"windows",
         {{"total", report.windows_total},
          {"refiner_train", report.windows_refiner_train},
          {"eval", report.windows_eval},
          {"cells_failed", report.window_cells_failed}}},
        {"cache", {{"hits", report.cache_hits}, {"misses", report.cache_misses}}},
        {"latency_ms",
         {{"calls", report.generate_calls},
          {"total", report.latency_total_ms},
          {"mean", report.latency_mean_ms},
          {"min", report.latency_min_ms},
          {"max", report.latency_max_ms}}},
        {"refiner",
         {{"trained", report.refiner_trained},
          {"pairs", report.refiner_pairs},
          {"initial_val_loss", report.refiner_initial_val_loss},
          {"final_val_loss", report.refiner_final_val_loss}}},
    };
    j["windows"] = ordered_json::array();
    for (const WindowChannelResult& e : report.entries) {
        ordered_json w;
        w["window"] = e.window_index;
        w["offset"] = e.offset;
        w["channel"] = e.channel;
        w["failed"] = e.failed;
        if (e.failed) {
            w["failure"] = e.failure;
        } else {
            w["f_cut"] = e.f_cut;
            w["valid_rows"] = e.valid_rows;
            w["dropped_rows"] = e.dropped_rows;
            w["scored_length"] = e.scored_length;
            w["mse"] = e.mse;
            w["mae"] = e.mae;
            w["ks_high"] = e.ks_high;
            w["mse_low"] = e.mse_low;
            w["mae_low"] = e.mae_low;
            w["mse_original"] = e.mse_original;
            w["mae_original"] = e.mae_original;
        }
        w["flags"] = e.flags;
        j["windows"].push_back(std::move(w));
    }
    j["aggregates"] = ordered_json::array();
    for (const AggregateRow& row : report.aggregates) {
        j["aggregates"].push_back({{"scope", row.scope},
                                   {"metric", row.metric},
                                   {"mean", row.mean},
                                   {"stddev", row.stddev},
                                   {"count", row.count}});
    }
    return j;
}

std::string report_csv(const EvalReport& report) {
    std::string out =
        "mse,mae,ks_high,mse_low,mae_low,mse_original,mae_original,"
        "window,channel,offset,f_cut,valid_rows,dropped_rows,scored_length,failed,flags\n";
    for (const WindowChannelResult& e : report.entries) {
        if (e.failed) {
            out += ",,,,,,,";
        } else {
            out += format_double(e.mse) + "," + format_double(e.mae) + "," +
                   format_double(e.ks_high) + "," + format_double(e.mse_low) + "," +
                   format_double(e.mae_low) + "," + format_double(e.mse_original) + "," +
                   format_double(e.mae_original) + ",";
        }
        out += std::to_string(e.window_index) + "," + std::to_string(e.channel) + "," +
               std::to_string(e.offset) + "," + format_double(e.f_cut) + "," +
               std::to_string(e.valid_rows) + "," + std::to_string(e.dropped_rows) + "," +
               std::to_string(e.scored_length) + "," + (e.failed ? "1" : "0") + "," +
               join_flags(e.flags) + "\n";
    }
    return out;
}

std::string report_plotdata(const EvalReport& report) {
    std::string out = "x,series,value\n";
    for (const WindowChannelResult& e : report.entries) {
        if (e.failed) continue;
        for (const std::string& metric : aggregate_metrics()) {
            out += std::to_string(e.window_index) + "," + metric + "/ch" +
                   std::to_string(e.channel) + "," + format_double(metric_value(e, metric)) +
                   "\n";
        }
    }
    return out;
}

} // namespace

ReportFormat report_format_from_name(const std::string& name) {
    if (name == "json") return ReportFormat::json;
    if (name == "csv") return ReportFormat::csv;
    if (name == "plotdata") return ReportFormat::plotdata;
    throw Error(ErrorCode::config_error,
                "unknown report format \"" + name + "\" (expected json, csv, or plotdata)");
}

std::string render_report(const EvalReport& report, ReportFormat format) {
    switch (format) {
        case ReportFormat::json: return report_json(report).dump(2) + "\n";
        case ReportFormat::csv: return report_csv(report);
        case ReportFormat::plotdata: return report_plotdata(report);
    }
    throw Error(ErrorCode::internal, "unreachable report format");
}

void write_report_files(const EvalReport& report, const std::string& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) {
        throw Error(ErrorCode::io_error, "cannot create out dir " + out_dir + ": " + ec.message());
    }
    const auto write = [&](const std::string& name, const std::string& content) {
        const std::filesystem::path path = std::filesystem::path(out_dir) / name;
        std::ofstream out(path, std::ios::binary);
        if (!out || !(out << content)) {
            throw Error(ErrorCode::io_error, "cannot write " + path.string());
        }
    };
    write("report.json", render_report(report, ReportFormat::json));
    write("report.csv", render_report(report, ReportFormat::csv));
    write("report_plotdata.csv", render_report(report, ReportFormat::plotdata));
}

} // namespace llmpred
