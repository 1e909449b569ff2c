#pragma once
#include <cstdint>
#include <memory>
#include <string>

#include "llmpred/codec.hpp"
#include "llmpred/tokens.hpp"

namespace llmpred {

// Sampling parameters forwarded to the generation backend. max_tokens is set
// per prompt (generation length mirrors the prompt body). seed drives the
// mock backend only; remote endpoints receive it only if they support it.
struct GenParams {
    double temperature = 1.0;
    double top_p = 0.9;
    int max_tokens = 0;
    std::uint64_t seed = 0;
    bool do_sample = true;
};

// One completed generation. prompt_tokens/completion_tokens are -1 when the
// backend does not report usage.
struct Generation {
    std::string text;
    double latency_ms = 0.0;
    long prompt_tokens = -1;
    long completion_tokens = -1;
    bool cache_hit = false;
};

class Backend {
public:
    virtual ~Backend() = default;
    virtual Generation generate(const PromptBundle& prompt, const GenParams& params) = 0;
    virtual std::string id() const = 0;
};

// Budget-checked entry point: counts the actual prompt under the scheme and
// refuses (BudgetExceeded) when prompt + mirrored output would overflow the
// context limit, unless the caller overrides.
Generation generate_checked(Backend& backend, const PromptBundle& prompt, const GenParams& params,
                            const TokenScheme& scheme, bool override_budget = false);

// ---------------------------------------------------------------------------
// Deterministic local mock

enum class MockMode { persistence, noisy, truncated, repeat_line };

const char* mock_mode_name(MockMode mode);
MockMode mock_mode_from_name(const std::string& name); // throws ConfigError

// Produces synthetic completions from the prompt body alone:
//  - persistence: the last input row repeated expected_rows times;
//  - repeat_line: the first input row repeated expected_rows times;
//  - noisy: persistence plus seeded uniform jitter, kept inside each
//    channel's band;
//  - truncated: persistence with the final value cut after its decimal
//    point and no trailing newline.
// Deterministic in (prompt, mode, seed). Throws UnparseablePrompt when the
// body holds no usable row.
std::string mock_generate(const PromptBundle& prompt, MockMode mode, std::uint64_t seed);

class MockBackend : public Backend {
public:
    explicit MockBackend(MockMode mode) : mode_(mode) {}

    Generation generate(const PromptBundle& prompt, const GenParams& params) override;
    std::string id() const override;

private:
    MockMode mode_;
};

// ---------------------------------------------------------------------------
// OpenAI-compatible remote endpoint

struct HttpBackendConfig {
    std::string base_url;   // e.g. "https://api.example.com/v1"
    std::string model;
    std::string api_key_env = "LLMPRED_API_KEY";
    double timeout_seconds = 120.0;
    int max_retries = 2;              // retried statuses: 429 and 5xx
    double backoff_base_seconds = 1.0; // exponential: base, 2*base, ...
    int max_in_flight = 4;
};

class HttpBackend : public Backend {
public:
    explicit HttpBackend(HttpBackendConfig config);
    ~HttpBackend() override;

    Generation generate(const PromptBundle& prompt, const GenParams& params) override;
    std::string id() const override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// ---------------------------------------------------------------------------
// JSONL response cache wrapper

// Memoizes generations on disk, one JSON object per line, keyed by the
// SHA-256 of (prompt bytes, params). Replaying a run with a warm cache makes
// zero calls to the wrapped backend.
class CachingBackend : public Backend {
public:
    CachingBackend(std::shared_ptr<Backend> inner, std::string cache_path);
    ~CachingBackend() override;

    Generation generate(const PromptBundle& prompt, const GenParams& params) override;
    std::string id() const override;

    std::size_t hits() const;
    std::size_t misses() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace llmpred
