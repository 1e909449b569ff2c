#ifndef LLMPRED_H
#define LLMPRED_H

/* Public C interface to the forecasting library.
 *
 * Conventions:
 *  - Every fallible call returns an llmpred_status; LLMPRED_OK is 0.
 *  - On failure, llmpred_last_error() returns a thread-local message that
 *    stays valid until the next failing call on the same thread.
 *  - char** outputs are heap strings owned by the caller; release them with
 *    llmpred_string_free(). Pointer outputs are written only on LLMPRED_OK.
 *  - llmpred_dataset is an opaque handle; release with llmpred_dataset_free().
 */

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum llmpred_status {
    LLMPRED_OK = 0,
    LLMPRED_E_MISSING_FILE,
    LLMPRED_E_PARSE_ERROR,
    LLMPRED_E_EMPTY_DATASET,
    LLMPRED_E_SERIES_TOO_SHORT,
    LLMPRED_E_DEGENERATE_SERIES,
    LLMPRED_E_INVALID_CUTOFF,
    LLMPRED_E_DEGENERATE_COSINE,
    LLMPRED_E_ALL_CANDIDATES_DEGENERATE,
    LLMPRED_E_OUT_OF_RANGE,
    LLMPRED_E_NOT_A_NUMBER,
    LLMPRED_E_BAND_VIOLATION,
    LLMPRED_E_OFFSET_MISMATCH,
    LLMPRED_E_TRANSPORT,
    LLMPRED_E_TIMEOUT,
    LLMPRED_E_BUDGET_EXCEEDED,
    LLMPRED_E_UNPARSEABLE_PROMPT,
    LLMPRED_E_INSUFFICIENT_DATA,
    LLMPRED_E_NON_FINITE_LOSS,
    LLMPRED_E_UNTRAINED_MODEL,
    LLMPRED_E_DIMENSION_MISMATCH,
    LLMPRED_E_DEGENERATE_PREDICTION,
    LLMPRED_E_EMPTY_SAMPLE,
    LLMPRED_E_IO_ERROR,
    LLMPRED_E_CONFIG_ERROR,
    LLMPRED_E_INTERNAL
} llmpred_status;

typedef struct llmpred_dataset llmpred_dataset;

/* Library semantic version, e.g. "1.0.0". Static storage; do not free. */
const char* llmpred_version(void);

/* PascalCase name of a status code ("MissingFile", ...). Static storage. */
const char* llmpred_status_name(llmpred_status status);

/* Message of the most recent failure on this thread ("" if none). */
const char* llmpred_last_error(void);

/* Releases a string returned through a char** output. NULL is a no-op. */
void llmpred_string_free(char* s);

/* ------------------------------------------------------------------ */
/* Datasets                                                           */

/* Loads a CSV (header row, first column timestamp). channels selects
 * feature columns by 0-based index (NULL/0 loads all). */
llmpred_status llmpred_dataset_load_csv(const char* path, const int* channels,
                                        size_t n_channels, llmpred_dataset** out);

size_t llmpred_dataset_channel_count(const llmpred_dataset* ds);
size_t llmpred_dataset_length(const llmpred_dataset* ds);

/* Borrows channel `index`: *values points into the dataset and stays valid
 * until llmpred_dataset_free. Any output pointer may be NULL to skip it. */
llmpred_status llmpred_dataset_channel(const llmpred_dataset* ds, size_t index,
                                       const double** values, size_t* length,
                                       int* channel_id);

void llmpred_dataset_free(llmpred_dataset* ds);

/* ------------------------------------------------------------------ */
/* Frequency decomposition                                            */

/* Splits values[0..n) into low + high at cutoff_hz. low and high are
 * caller-allocated arrays of length n. zero_phase: 0 = causal, else
 * forward-backward filtering. */
llmpred_status llmpred_decompose(const double* values, size_t n, double cutoff_hz,
                                 double sample_rate_hz, int order, int zero_phase,
                                 double* low, double* high);

/* Runs the weighted-metric cutoff search over grid[0..n_grid) and returns a
 * JSON object: {"f_cut", "alpha", "trace":[{"f","m_mse","m_cos","m","skipped"}...],
 * "low":[...], "high":[...]}. Skipped candidates carry m = null. */
llmpred_status llmpred_select_cutoff(const double* values, size_t n, const double* grid,
                                     size_t n_grid, double alpha, double sample_rate_hz,
                                     int order, char** json_out);

/* ------------------------------------------------------------------ */
/* Token accounting                                                   */

/* scheme is "per_char" or "bpe_grouped". */
llmpred_status llmpred_count_tokens(const char* text, const char* scheme,
                                    long long* count_out);

/* Worst-case context budget for an H-step, C-channel prompt. Returns JSON:
 * {"input_tokens","output_tokens","total","limit","feasible",
 *  "max_feasible_features"}. */
llmpred_status llmpred_budget(size_t h, size_t c, const char* scheme, int context_limit,
                              int decimals, char** json_out);

/* ------------------------------------------------------------------ */
/* Pipeline                                                           */

/* Parses a config JSON object, applies defaults, validates, and returns the
 * canonical resolved config JSON (alphabetically ordered keys). */
llmpred_status llmpred_config_resolve(const char* config_json, char** resolved_out);

/* SHA-256 hex digest of the canonical resolved config. */
llmpred_status llmpred_config_hash(const char* config_json, char** hash_out);

/* Runs the full pipeline described by config_json and returns the evaluation
 * report as JSON. When the config sets out_dir, report.json / report.csv /
 * report_plotdata.csv and the generation cache are written there too. */
llmpred_status llmpred_run(const char* config_json, char** report_json_out);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* LLMPRED_H */
