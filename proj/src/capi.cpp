#include "llmpred.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>
#include <vector>

#include <json.hpp>

#include "llmpred/csv.hpp"
#include "llmpred/decompose.hpp"
#include "llmpred/errors.hpp"
#include "llmpred/pipeline.hpp"
#include "llmpred/series.hpp"
#include "llmpred/tokens.hpp"

// Opaque handle bodies live in the global namespace to match the C typedefs.
struct llmpred_dataset {
    llmpred::ChannelSet set;
};

namespace {

thread_local std::string g_last_error;

llmpred_status to_status(llmpred::ErrorCode code) {
    return static_cast<llmpred_status>(static_cast<int>(code));
}

// Runs fn, capturing any exception into the thread-local message.
template <typename Fn>
llmpred_status guarded(Fn&& fn) {
    try {
        fn();
        return LLMPRED_OK;
    } catch (const llmpred::Error& e) {
        g_last_error = e.what();
        return to_status(e.code());
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
        return LLMPRED_E_INTERNAL;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return LLMPRED_E_INTERNAL;
    }
}

llmpred_status invalid_argument(const char* message) {
    g_last_error = message;
    return LLMPRED_E_CONFIG_ERROR;
}

// C-owned copy for char** outputs (released by llmpred_string_free).
char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (out == nullptr) throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

llmpred::Series make_series(const double* values, size_t n) {
    llmpred::Series s;
    s.values.assign(values, values + n);
    return s;
}

} // namespace

extern "C" {

const char* llmpred_version(void) { return "1.0.0"; }

const char* llmpred_status_name(llmpred_status status) {
    return llmpred::error_code_name(static_cast<llmpred::ErrorCode>(static_cast<int>(status)));
}

const char* llmpred_last_error(void) { return g_last_error.c_str(); }

void llmpred_string_free(char* s) { std::free(s); }

llmpred_status llmpred_dataset_load_csv(const char* path, const int* channels,
                                        size_t n_channels, llmpred_dataset** out) {
    if (path == nullptr || out == nullptr) return invalid_argument("path and out must be non-NULL");
    return guarded([&] {
        std::optional<std::vector<int>> selected;
        if (channels != nullptr && n_channels > 0) {
            selected.emplace(channels, channels + n_channels);
        }
        auto ds = std::make_unique<llmpred_dataset>();
        ds->set = llmpred::load_csv_dataset(path, selected);
        *out = ds.release();
    });
}

size_t llmpred_dataset_channel_count(const llmpred_dataset* ds) {
    return ds == nullptr ? 0 : ds->set.channel_count();
}

size_t llmpred_dataset_length(const llmpred_dataset* ds) {
    return ds == nullptr ? 0 : ds->set.length();
}

llmpred_status llmpred_dataset_channel(const llmpred_dataset* ds, size_t index,
                                       const double** values, size_t* length,
                                       int* channel_id) {
    if (ds == nullptr) return invalid_argument("ds must be non-NULL");
    if (index >= ds->set.channel_count()) {
        g_last_error = "channel index " + std::to_string(index) + " out of range (have " +
                       std::to_string(ds->set.channel_count()) + ")";
        return LLMPRED_E_OUT_OF_RANGE;
    }
    const llmpred::Series& s = ds->set.channels[index];
    if (values != nullptr) *values = s.values.data();
    if (length != nullptr) *length = s.values.size();
    if (channel_id != nullptr) *channel_id = s.channel_id;
    return LLMPRED_OK;
}

void llmpred_dataset_free(llmpred_dataset* ds) { delete ds; }

llmpred_status llmpred_decompose(const double* values, size_t n, double cutoff_hz,
                                 double sample_rate_hz, int order, int zero_phase,
                                 double* low, double* high) {
    if (values == nullptr || low == nullptr || high == nullptr) {
        return invalid_argument("values, low, and high must be non-NULL");
    }
    return guarded([&] {
        llmpred::FilterSpec spec;
        spec.cutoff_hz = cutoff_hz;
        spec.sample_rate_hz = sample_rate_hz;
        spec.order = order;
        spec.zero_phase = zero_phase != 0;
        auto [lo, hi] = llmpred::decompose_at(make_series(values, n), spec);
        std::memcpy(low, lo.values.data(), n * sizeof(double));
        std::memcpy(high, hi.values.data(), n * sizeof(double));
    });
}

llmpred_status llmpred_select_cutoff(const double* values, size_t n, const double* grid,
                                     size_t n_grid, double alpha, double sample_rate_hz,
                                     int order, char** json_out) {
    if (values == nullptr || grid == nullptr || json_out == nullptr) {
        return invalid_argument("values, grid, and json_out must be non-NULL");
    }
    return guarded([&] {
        llmpred::FilterSpec spec;
        spec.sample_rate_hz = sample_rate_hz;
        spec.order = order;
        const std::vector<double> grid_vec(grid, grid + n_grid);
        const llmpred::FrequencySplit split =
            llmpred::select_cutoff(make_series(values, n), grid_vec, alpha, spec);
        nlohmann::ordered_json j;
        j["f_cut"] = split.f_cut;
        j["alpha"] = split.alpha;
        j["trace"] = nlohmann::ordered_json::array();
        for (const llmpred::CutoffTraceEntry& t : split.trace) {
            j["trace"].push_back({{"f", t.f},
                                  {"m_mse", t.m_mse},
                                  {"m_cos", t.m_cos},
                                  {"m", t.m},
                                  {"skipped", t.skipped}});
        }
        j["low"] = split.low.values;
        j["high"] = split.high.values;
        *json_out = dup_string(j.dump(2));
    });
}

llmpred_status llmpred_count_tokens(const char* text, const char* scheme,
                                    long long* count_out) {
    if (text == nullptr || scheme == nullptr || count_out == nullptr) {
        return invalid_argument("text, scheme, and count_out must be non-NULL");
    }
    return guarded([&] {
        llmpred::TokenScheme ts;
        ts.kind = llmpred::token_kind_from_name(scheme);
        *count_out = static_cast<long long>(llmpred::count_tokens(text, ts));
    });
}

llmpred_status llmpred_budget(size_t h, size_t c, const char* scheme, int context_limit,
                              int decimals, char** json_out) {
    if (scheme == nullptr || json_out == nullptr) {
        return invalid_argument("scheme and json_out must be non-NULL");
    }
    return guarded([&] {
        llmpred::TokenScheme ts;
        ts.kind = llmpred::token_kind_from_name(scheme);
        ts.context_limit = context_limit;
        const llmpred::BudgetReport rep = llmpred::budget(h, c, ts, decimals);
        nlohmann::ordered_json j = {{"input_tokens", rep.input_tokens},
                                    {"output_tokens", rep.output_tokens},
                                    {"total", rep.total},
                                    {"limit", rep.limit},
                                    {"feasible", rep.feasible},
                                    {"max_feasible_features", rep.max_feasible_features}};
        *json_out = dup_string(j.dump(2));
    });
}

llmpred_status llmpred_config_resolve(const char* config_json, char** resolved_out) {
    if (config_json == nullptr || resolved_out == nullptr) {
        return invalid_argument("config_json and resolved_out must be non-NULL");
    }
    return guarded([&] {
        const llmpred::PipelineConfig cfg = llmpred::config_from_json(config_json);
        *resolved_out = dup_string(llmpred::config_to_json(cfg));
    });
}

llmpred_status llmpred_config_hash(const char* config_json, char** hash_out) {
    if (config_json == nullptr || hash_out == nullptr) {
        return invalid_argument("config_json and hash_out must be non-NULL");
    }
    return guarded([&] {
        const llmpred::PipelineConfig cfg = llmpred::config_from_json(config_json);
        *hash_out = dup_string(llmpred::config_hash(cfg));
    });
}

llmpred_status llmpred_run(const char* config_json, char** report_json_out) {
    if (config_json == nullptr || report_json_out == nullptr) {
        return invalid_argument("config_json and report_json_out must be non-NULL");
    }
    return guarded([&] {
        const llmpred::PipelineConfig cfg = llmpred::config_from_json(config_json);
        const llmpred::EvalReport report = llmpred::run_pipeline(cfg);
        *report_json_out = dup_string(llmpred::render_report(report, llmpred::ReportFormat::json));
    });
}

} // extern "C"
